//! The check → plan → (validate) → act cycle, and its classification.
//!
//! One step captures an observation at check time, lets the page evolve for
//! the sampled planning latency, optionally gates execution on the monitor
//! queues (pre-execution validation), then applies the action after the
//! residual window and decides whether a race fired: the state changed over
//! the window *and* the action's binding at use time differs from its
//! binding at check time.
//!
//! Wall-clock time is used for exactly one thing — measuring what the
//! validator itself costs — and is kept out of every serialized artifact so
//! runs stay byte-reproducible.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    self, ActionVerb, AgentError, AgentProfile, Binding, PlannedAction, PolicyRecipe, Task,
    ValidityRule,
};
use crate::monitor::{self, MonitorError, MonitorSession, ObserverConfig};
use crate::mutation::{
    self, EngineError, EventSink, Mutation, MutationSchedule, NullSink, RawEvent,
};
use crate::page::{PageState, ValueScalar};
use crate::rng::SplitMix64;
use crate::scenario::{evaluate_oracle_parts, ManipulationType, Scenario};

/// Node attribute holding a navigation effect: clicking the node sets the
/// current `page` value and a sticky `visited_<tag>` marker.
pub const NAV_ATTR: &str = "data-click-nav";
/// Node attribute holding `dst=expr` assignments applied on click, evaluated
/// against the values at click time (e.g. `purchased=true;paid=price`).
pub const EFFECT_ATTR: &str = "data-click-effect";
/// Node attribute naming the field that receives `accepted`/`rejected` when
/// a typed submission lands on this node.
pub const SUBMIT_RESULT_ATTR: &str = "data-submit-result";

/// Default residual window between validation and dispatch (virtual ms).
pub const DEFAULT_RESIDUAL_WINDOW_MS: u64 = 130;

/// Loop configuration for one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub validation_enabled: bool,
    /// Gap between the final monitor drain and action application, in
    /// virtual ms. Nothing guards this interval; it is the residual window.
    pub residual_window_ms: u64,
    /// Retry bound for expiring-state scenarios.
    pub max_iterations: u32,
    pub observer_config: ObserverConfig,
    /// Capture serialized page states at check and use time into the trace.
    /// Off by default; equivalence tests switch it on.
    pub capture_states: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            validation_enabled: false,
            residual_window_ms: DEFAULT_RESIDUAL_WINDOW_MS,
            max_iterations: 3,
            observer_config: ObserverConfig::default(),
            capture_states: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepOutcome {
    /// Action dispatched to the live page.
    Executed,
    /// Validation found queued changes; action aborted, user alerted.
    AbortedUserAlert,
    /// The policy declined to act on the check-time observation.
    NoActionPlanned,
}

/// Record of one cycle: timestamps, both bindings, drained record counts,
/// and the violation verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTrace {
    pub t_check: u64,
    pub t_validate: u64,
    pub t_act: u64,
    pub action: PlannedAction,
    pub check_binding: Option<Binding>,
    pub use_binding: Option<Binding>,
    pub drained_mutations: usize,
    pub drained_resizes: usize,
    pub outcome: StepOutcome,
    pub violation: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub state_at_check: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub state_at_use: Option<String>,
    /// Wall-clock cost of attach + ingest + drain for this cycle. Excluded
    /// from serialization so trace archives stay deterministic.
    #[serde(skip)]
    pub validator_wall_ns: u64,
}

/// Outcome of a whole scenario run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario_id: String,
    pub profile: String,
    pub validation: bool,
    pub seed: u64,
    pub traces: Vec<StepTrace>,
    pub final_state: PageState,
    pub oracle_pass: bool,
    /// A race fired and the task oracle failed because of it.
    pub triggered: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure_reason: Option<String>,
}

impl RunResult {
    pub fn validator_wall_ns(&self) -> Vec<u64> {
        self.traces.iter().map(|t| t.validator_wall_ns).collect()
    }
}

/// Scenario-scoped context a step needs to resolve bindings and judge state
/// changes.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub decision_fields: &'a BTreeSet<String>,
    pub validity: Option<&'a ValidityRule>,
}

impl<'a> StepContext<'a> {
    fn bind_ctx(&self) -> agent::BindContext<'a> {
        agent::BindContext {
            decision_fields: self.decision_fields,
            validity: self.validity,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("effect on node is malformed: {0}")]
    EffectParse(String),
    #[error("effect reads value field '{0}' which is not present")]
    EffectSourceMissing(String),
}

struct TimedSink<'a> {
    inner: &'a mut MonitorSession,
    ns: u64,
}

impl EventSink for TimedSink<'_> {
    fn on_event(&mut self, at_ms: u64, event: &RawEvent, page: &PageState) {
        let started = Instant::now();
        self.inner.ingest(at_ms, event, page);
        self.ns += started.elapsed().as_nanos() as u64;
    }
}

/// Decision-relevant state difference between the check-time and use-time
/// states: tree shape, interaction-relevant attributes, declared decision
/// values, or geometry/visibility of interactive nodes. Cosmetic churn never
/// counts.
pub fn state_differs(
    check: &PageState,
    use_time: &PageState,
    decision_fields: &BTreeSet<String>,
    filter: &ObserverConfig,
) -> bool {
    // Tree shape: node population or any parent/child edge.
    if check.nodes.len() != use_time.nodes.len() {
        return true;
    }
    for (id, a) in &check.nodes {
        let Some(b) = use_time.nodes.get(id) else {
            return true;
        };
        if a.children != b.children {
            return true;
        }
        // Interaction-relevant attributes, through the same filter the
        // validator uses.
        let relevant = |attrs: &BTreeMap<String, String>| -> BTreeMap<String, String> {
            attrs
                .iter()
                .filter(|(k, _)| filter.passes_filter(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect()
        };
        if relevant(&a.attrs) != relevant(&b.attrs) {
            return true;
        }
        // Geometry, stacking, painted visibility, and interactivity of
        // interactive nodes.
        if (a.interactive || b.interactive)
            && (a.bbox != b.bbox
                || a.z_index != b.z_index
                || a.interactive != b.interactive
                || check.is_effectively_visible(*id) != use_time.is_effectively_visible(*id))
        {
            return true;
        }
    }
    // Declared decision values.
    let restrict = |state: &PageState| -> BTreeMap<String, ValueScalar> {
        state
            .values
            .iter()
            .filter(|(k, _)| decision_fields.contains(*k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    };
    restrict(check) != restrict(use_time)
}

/// Runs one check→(validate)→act cycle, advancing `state` through `schedule`.
#[allow(clippy::too_many_arguments)]
pub fn run_step(
    state: &mut PageState,
    schedule: &MutationSchedule,
    profile: &AgentProfile,
    task: &Task,
    recipe: &PolicyRecipe,
    ctx: StepContext<'_>,
    config: &LoopConfig,
    rng: &mut SplitMix64,
) -> Result<StepTrace, RunError> {
    let t_check = state.clock;
    let obs = state.observe(profile.obs_mode);

    let mut validator_ns = 0u64;
    let mut session = if config.validation_enabled {
        let started = Instant::now();
        let session = monitor::attach(state, config.observer_config.clone());
        validator_ns += started.elapsed().as_nanos() as u64;
        Some(session)
    } else {
        None
    };

    let (action, latency) = agent::plan(&obs, task, profile, recipe, rng)?;
    let capture = |s: &PageState| serde_json::to_string(s).expect("page state serializes");
    let state_at_check = config.capture_states.then(|| capture(state));

    if action.is_no_action() {
        mutation::advance(state, schedule, t_check + latency, &mut NullSink)?;
        if let Some(s) = session.as_mut() {
            s.detach();
        }
        return Ok(StepTrace {
            t_check,
            t_validate: state.clock,
            t_act: state.clock,
            action,
            check_binding: None,
            use_binding: None,
            drained_mutations: 0,
            drained_resizes: 0,
            outcome: StepOutcome::NoActionPlanned,
            violation: false,
            state_at_check,
            state_at_use: None,
            validator_wall_ns: validator_ns,
        });
    }

    let check_state = state.clone();
    let check_binding = agent::bind(&action, &check_state, ctx.bind_ctx());

    // Planning: the page keeps moving; an attached monitor sees it move.
    match session.as_mut() {
        Some(s) => {
            let mut sink = TimedSink { inner: s, ns: 0 };
            mutation::advance(state, schedule, t_check + latency, &mut sink)?;
            validator_ns += sink.ns;
        }
        None => {
            mutation::advance(state, schedule, t_check + latency, &mut NullSink)?;
        }
    }
    let t_validate = state.clock;

    if let Some(s) = session.as_mut() {
        let started = Instant::now();
        let (drained_m, drained_r) = s.drain(t_validate)?;
        let stable = drained_m.is_empty() && drained_r.is_empty();
        s.detach();
        validator_ns += started.elapsed().as_nanos() as u64;
        if !stable {
            return Ok(StepTrace {
                t_check,
                t_validate,
                t_act: t_validate,
                action,
                check_binding: Some(check_binding),
                use_binding: None,
                drained_mutations: drained_m.len(),
                drained_resizes: drained_r.len(),
                outcome: StepOutcome::AbortedUserAlert,
                violation: false,
                state_at_check,
                state_at_use: None,
                validator_wall_ns: validator_ns,
            });
        }
    }

    // Residual window: monitors are detached, nothing is watching.
    mutation::advance(
        state,
        schedule,
        t_validate + config.residual_window_ms,
        &mut NullSink,
    )?;
    let t_act = state.clock;

    let use_binding = agent::bind(&action, state, ctx.bind_ctx());
    let state_at_use = config.capture_states.then(|| capture(state));
    let violation = state_differs(
        &check_state,
        state,
        ctx.decision_fields,
        &config.observer_config,
    ) && agent::bindings_differ(&check_binding, &use_binding);

    apply_action(state, &action, &use_binding)?;

    Ok(StepTrace {
        t_check,
        t_validate,
        t_act,
        action,
        check_binding: Some(check_binding),
        use_binding: Some(use_binding),
        drained_mutations: 0,
        drained_resizes: 0,
        outcome: StepOutcome::Executed,
        violation,
        state_at_check,
        state_at_use,
        validator_wall_ns: validator_ns,
    })
}

/// Runs a scenario to completion: iterates cycles up to the retry bound
/// (expiring-state pages reissue their code on schedule), then judges the
/// oracle and computes the trigger flag.
pub fn run_case(
    scenario: &Scenario,
    profile: &AgentProfile,
    config: &LoopConfig,
    seed: u64,
) -> Result<RunResult, RunError> {
    let mut state = scenario.template.clone();
    let mut rng = SplitMix64::new(seed);
    let ctx = StepContext {
        decision_fields: &scenario.decision_fields,
        validity: scenario.validity.as_ref(),
    };
    let mut traces = Vec::new();
    let mut failure_reason = None;

    for iteration in 0..config.max_iterations {
        let trace = run_step(
            &mut state,
            &scenario.schedule,
            profile,
            &scenario.task,
            &scenario.policy,
            ctx,
            config,
            &mut rng,
        )?;
        let outcome = trace.outcome;
        let submit_accepted = trace.use_binding.as_ref().map(|b| b.valid).unwrap_or(false);
        traces.push(trace);
        match outcome {
            StepOutcome::NoActionPlanned | StepOutcome::AbortedUserAlert => break,
            StepOutcome::Executed => {
                if scenario.ty != ManipulationType::III {
                    break;
                }
                if submit_accepted {
                    break;
                }
                if iteration + 1 == config.max_iterations {
                    failure_reason = Some("non-termination bound".to_string());
                }
            }
        }
    }

    let oracle_pass = if failure_reason.is_some() {
        false
    } else {
        evaluate_oracle_parts(&scenario.oracle, &state, &traces)
    };
    let triggered = !oracle_pass && traces.iter().any(|t| t.violation);

    Ok(RunResult {
        scenario_id: scenario.id.clone(),
        profile: profile.name.clone(),
        validation: config.validation_enabled,
        seed,
        traces,
        final_state: state,
        oracle_pass,
        triggered,
        failure_reason,
    })
}

/// One parsed click/submit effect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EffectOp {
    /// Navigate: `page = tag`, `visited_<tag> = true`.
    Nav(String),
    Assign {
        dst: String,
        expr: AssignExpr,
    },
    /// Write `accepted`/`rejected` depending on submission validity.
    SubmitResult(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssignExpr {
    Literal(ValueScalar),
    Copy(String),
    CopyOffset(String, i64),
}

fn is_field_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Parses the effect attributes of a node. Returns the effects in a fixed
/// order: assignments, navigation, submit result.
pub fn parse_node_effects(attrs: &BTreeMap<String, String>) -> Result<Vec<EffectOp>, String> {
    let mut effects = Vec::new();
    if let Some(spec) = attrs.get(EFFECT_ATTR) {
        for clause in spec.split(';').filter(|c| !c.trim().is_empty()) {
            let (dst, expr) = clause
                .split_once('=')
                .ok_or_else(|| format!("'{clause}' is not of the form dst=expr"))?;
            let dst = dst.trim();
            if !is_field_ident(dst) {
                return Err(format!("'{dst}' is not a valid field name"));
            }
            let expr = parse_assign_expr(expr.trim())?;
            effects.push(EffectOp::Assign {
                dst: dst.to_string(),
                expr,
            });
        }
    }
    if let Some(tag) = attrs.get(NAV_ATTR) {
        if tag.trim().is_empty() {
            return Err("navigation target is empty".to_string());
        }
        effects.push(EffectOp::Nav(tag.trim().to_string()));
    }
    if let Some(field) = attrs.get(SUBMIT_RESULT_ATTR) {
        if !is_field_ident(field.trim()) {
            return Err(format!("'{field}' is not a valid field name"));
        }
        effects.push(EffectOp::SubmitResult(field.trim().to_string()));
    }
    Ok(effects)
}

fn parse_assign_expr(expr: &str) -> Result<AssignExpr, String> {
    if expr == "true" {
        return Ok(AssignExpr::Literal(ValueScalar::Bool(true)));
    }
    if expr == "false" {
        return Ok(AssignExpr::Literal(ValueScalar::Bool(false)));
    }
    if let Ok(n) = expr.parse::<i64>() {
        return Ok(AssignExpr::Literal(ValueScalar::Int(n)));
    }
    if let Some((field, offset)) = expr.split_once('+') {
        let field = field.trim();
        let offset: i64 = offset
            .trim()
            .parse()
            .map_err(|_| format!("'{expr}' has a non-numeric offset"))?;
        if !is_field_ident(field) {
            return Err(format!("'{field}' is not a valid field name"));
        }
        return Ok(AssignExpr::CopyOffset(field.to_string(), offset));
    }
    if let Some((field, offset)) = expr.rsplit_once('-') {
        if let Ok(n) = offset.trim().parse::<i64>() {
            let field = field.trim();
            if is_field_ident(field) {
                return Ok(AssignExpr::CopyOffset(field.to_string(), -n));
            }
        }
    }
    if is_field_ident(expr) {
        return Ok(AssignExpr::Copy(expr.to_string()));
    }
    Err(format!("cannot parse expression '{expr}'"))
}

/// Fields a node's effects can create. Used by scenario validation.
pub fn effect_destinations(attrs: &BTreeMap<String, String>) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for effect in parse_node_effects(attrs)? {
        match effect {
            EffectOp::Assign { dst, .. } => out.push(dst),
            EffectOp::SubmitResult(field) => out.push(field),
            EffectOp::Nav(_) => out.push("page".to_string()),
        }
    }
    Ok(out)
}

/// Source fields a node's effects read. Used by scenario validation.
pub fn effect_sources(attrs: &BTreeMap<String, String>) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for effect in parse_node_effects(attrs)? {
        if let EffectOp::Assign { expr, .. } = effect {
            match expr {
                AssignExpr::Copy(f) | AssignExpr::CopyOffset(f, _) => out.push(f),
                AssignExpr::Literal(_) => {}
            }
        }
    }
    Ok(out)
}

/// Dispatches the action against the resolved node. A click that resolves to
/// nothing, or to a non-interactive or hidden element, fails without effect
/// rather than being redirected.
fn apply_action(
    state: &mut PageState,
    action: &PlannedAction,
    binding: &Binding,
) -> Result<(), RunError> {
    let Some(target) = binding.resolved else {
        return Ok(());
    };
    let Some(node) = state.node(target) else {
        return Ok(());
    };
    if !node.interactive || !state.is_flag_visible(target) {
        return Ok(());
    }
    let effects = parse_node_effects(&node.attrs).map_err(RunError::EffectParse)?;
    let is_submission = matches!(
        action.verb,
        ActionVerb::TypeText { .. } | ActionVerb::Submit
    );
    for effect in effects {
        match effect {
            EffectOp::Nav(tag) => {
                set_value(state, "page", ValueScalar::Text(tag.clone()));
                set_value(state, &format!("visited_{tag}"), ValueScalar::Bool(true));
            }
            EffectOp::Assign { dst, expr } => {
                let value = match expr {
                    AssignExpr::Literal(v) => v,
                    AssignExpr::Copy(src) => state
                        .values
                        .get(&src)
                        .cloned()
                        .ok_or(RunError::EffectSourceMissing(src))?,
                    AssignExpr::CopyOffset(src, offset) => {
                        let base = state
                            .values
                            .get(&src)
                            .and_then(ValueScalar::as_int)
                            .ok_or(RunError::EffectSourceMissing(src))?;
                        ValueScalar::Int(base + offset)
                    }
                };
                set_value(state, &dst, value);
            }
            EffectOp::SubmitResult(field) => {
                if is_submission {
                    let verdict = if binding.valid {
                        "accepted"
                    } else {
                        "rejected"
                    };
                    set_value(state, &field, ValueScalar::Text(verdict.to_string()));
                }
            }
        }
    }
    Ok(())
}

fn set_value(state: &mut PageState, field: &str, value: ValueScalar) {
    // Routed through the engine so display-bound text stays in sync.
    let _ = mutation::apply(
        state,
        &Mutation::SetValue {
            field: field.to_string(),
            value,
        },
    );
}
