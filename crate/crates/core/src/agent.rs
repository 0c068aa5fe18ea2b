//! Scripted agent policies: deterministic stand-ins for LLM-driven planners.
//!
//! A profile fixes the three variables race exposure actually depends on —
//! observation mode, action binding mode, and planning latency. The policies
//! themselves always choose the correct action for what they saw at check
//! time; any failure downstream is therefore caused by the page changing
//! underneath them, not by a bad plan.
//!
//! Screenshot-mode policies locate targets by rendered label and geometry
//! only; structured-mode policies use selectors. Neither ever peeks across
//! the modality boundary.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::page::{NodeId, Observation, ObservationMode, PageState, Selector, ValueScalar};
use crate::rng::SplitMix64;

/// The task handed to the agent: a goal tag plus named numeric constants
/// (thresholds, limits) the policy and oracle both reference.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub goal: String,
    #[serde(default)]
    pub params: BTreeMap<String, i64>,
}

/// How actions refer to their target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingMode {
    /// Semantic handle: selector resolved against the live tree.
    ElementSelector,
    /// Screen position: whatever is painted there at dispatch time.
    Coordinate,
}

/// Modeled delay between observation capture and validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanningLatency {
    Fixed { ms: u64 },
    Uniform { lo_ms: u64, hi_ms: u64 },
}

impl PlanningLatency {
    pub fn sample(&self, rng: &mut SplitMix64) -> u64 {
        match self {
            PlanningLatency::Fixed { ms } => *ms,
            PlanningLatency::Uniform { lo_ms, hi_ms } => rng.next_range(*lo_ms, *hi_ms),
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if let PlanningLatency::Uniform { lo_ms, hi_ms } = self {
            if lo_ms > hi_ms {
                return Err(AgentError::InvalidLatency {
                    lo_ms: *lo_ms,
                    hi_ms: *hi_ms,
                });
            }
        }
        Ok(())
    }
}

/// One agent configuration cell in the evaluation grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub name: String,
    pub obs_mode: ObservationMode,
    pub binding: BindingMode,
    pub latency: PlanningLatency,
}

impl AgentProfile {
    /// Screenshot observation with coordinate clicks — the human-like
    /// interaction profile.
    pub fn coordinate(latency: PlanningLatency) -> Self {
        Self {
            name: "coordinate".into(),
            obs_mode: ObservationMode::Screenshot,
            binding: BindingMode::Coordinate,
            latency,
        }
    }

    /// Structured observation with element-level actions.
    pub fn selector(latency: PlanningLatency) -> Self {
        Self {
            name: "selector".into(),
            obs_mode: ObservationMode::Structured,
            binding: BindingMode::ElementSelector,
            latency,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionVerb {
    Click,
    TypeText { text: String },
    Submit,
    NoAction,
}

/// The action's target in the form the binding mode dictates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionTarget {
    Selector(Selector),
    Point { x: i32, y: i32 },
}

/// A planned action, bound to nothing yet: it carries either a selector or a
/// point, plus a snapshot of the values the decision relied on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedAction {
    pub verb: ActionVerb,
    pub target: Option<ActionTarget>,
    /// Check time: clock of the observation this plan was made from.
    pub planned_at: u64,
    /// Values the decision was based on, captured from the check-time
    /// observation only.
    pub predicate_basis: BTreeMap<String, ValueScalar>,
}

impl PlannedAction {
    pub fn no_action(planned_at: u64, basis: BTreeMap<String, ValueScalar>) -> Self {
        Self {
            verb: ActionVerb::NoAction,
            target: None,
            planned_at,
            predicate_basis: basis,
        }
    }

    pub fn is_no_action(&self) -> bool {
        matches!(self.verb, ActionVerb::NoAction)
    }
}

/// What an action concretely refers to when interpreted in a given state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub resolved: Option<NodeId>,
    /// Decision-relevant values at resolution time.
    pub value_context: BTreeMap<String, ValueScalar>,
    /// Time-validity for expiring-state interactions; `true` elsewhere.
    pub valid: bool,
}

/// Time-validity rule for expiring-state scenarios: the payload the agent
/// typed must still be the live code, and the clock must not have passed the
/// deadline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityRule {
    pub code_field: String,
    pub deadline_field: String,
}

/// Scenario-scoped inputs to binding resolution.
#[derive(Debug, Clone, Copy)]
pub struct BindContext<'a> {
    pub decision_fields: &'a BTreeSet<String>,
    pub validity: Option<&'a ValidityRule>,
}

/// Where a policy finds its target: a selector for structured observations,
/// a rendered label for screenshots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetHint {
    pub selector: Selector,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl Comparator {
    pub fn holds(&self, lhs: i64, rhs: i64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Eq => lhs == rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdSource {
    Literal(i64),
    Param(String),
}

/// A check-time predicate over one observed value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub field: String,
    pub cmp: Comparator,
    pub threshold: ThresholdSource,
}

/// The per-scenario action recipe. Policies are data, not code: a scenario
/// declares what to click (or submit) and under which observed condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyRecipe {
    /// Click the target, optionally only when the gate holds at check time.
    Click {
        target: TargetHint,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gate: Option<Gate>,
    },
    /// Read a displayed code and submit it to the target before it expires.
    SubmitCode {
        target: TargetHint,
        code_field: String,
        deadline_field: String,
    },
}

impl PolicyRecipe {
    pub fn target(&self) -> &TargetHint {
        match self {
            PolicyRecipe::Click { target, .. } => target,
            PolicyRecipe::SubmitCode { target, .. } => target,
        }
    }

    pub fn validity_rule(&self) -> Option<ValidityRule> {
        match self {
            PolicyRecipe::Click { .. } => None,
            PolicyRecipe::SubmitCode {
                code_field,
                deadline_field,
                ..
            } => Some(ValidityRule {
                code_field: code_field.clone(),
                deadline_field: deadline_field.clone(),
            }),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AgentError {
    #[error("observation mode {observed:?} does not match profile mode {expected:?}")]
    ObservationModeMismatch {
        observed: ObservationMode,
        expected: ObservationMode,
    },
    #[error("coordinate binding needs painted geometry; {0:?} observations carry none")]
    CoordinateNeedsGeometry(ObservationMode),
    #[error("element-selector binding needs a structured view; {0:?} observations carry none")]
    SelectorNeedsStructure(ObservationMode),
    #[error("gate references unknown task parameter '{0}'")]
    UnknownParam(String),
    #[error("gate field '{0}' is missing or not numeric in the observation")]
    BadGateField(String),
    #[error("code field '{0}' is missing from the observation")]
    MissingCode(String),
    #[error("uniform latency bounds are inverted: [{lo_ms}, {hi_ms}]")]
    InvalidLatency { lo_ms: u64, hi_ms: u64 },
}

/// Plans the next action from a check-time observation.
///
/// Deterministic given (observation, task, recipe, rng state). Returns the
/// sampled planning latency alongside the action.
pub fn plan(
    obs: &Observation,
    task: &Task,
    profile: &AgentProfile,
    recipe: &PolicyRecipe,
    rng: &mut SplitMix64,
) -> Result<(PlannedAction, u64), AgentError> {
    if obs.mode != profile.obs_mode {
        return Err(AgentError::ObservationModeMismatch {
            observed: obs.mode,
            expected: profile.obs_mode,
        });
    }
    profile.latency.validate()?;
    let latency = profile.latency.sample(rng);

    let (verb, basis) = match recipe {
        PolicyRecipe::Click { gate, .. } => {
            let mut basis = BTreeMap::new();
            if let Some(gate) = gate {
                let observed = obs
                    .values
                    .get(&gate.field)
                    .and_then(ValueScalar::as_int)
                    .ok_or_else(|| AgentError::BadGateField(gate.field.clone()))?;
                basis.insert(gate.field.clone(), ValueScalar::Int(observed));
                let threshold = match &gate.threshold {
                    ThresholdSource::Literal(v) => *v,
                    ThresholdSource::Param(name) => *task
                        .params
                        .get(name)
                        .ok_or_else(|| AgentError::UnknownParam(name.clone()))?,
                };
                if !gate.cmp.holds(observed, threshold) {
                    // Check-time predicate already fails: correctly decline.
                    return Ok((PlannedAction::no_action(obs.captured_at, basis), latency));
                }
            }
            (ActionVerb::Click, basis)
        }
        PolicyRecipe::SubmitCode {
            code_field,
            deadline_field,
            ..
        } => {
            let code = obs
                .values
                .get(code_field)
                .ok_or_else(|| AgentError::MissingCode(code_field.clone()))?;
            let mut basis = BTreeMap::new();
            basis.insert(code_field.clone(), code.clone());
            if let Some(deadline) = obs.values.get(deadline_field).and_then(ValueScalar::as_int) {
                basis.insert(deadline_field.clone(), ValueScalar::Int(deadline));
                if obs.captured_at as i64 >= deadline {
                    // Already expired at check time; wait for a fresh code.
                    return Ok((PlannedAction::no_action(obs.captured_at, basis), latency));
                }
            }
            (
                ActionVerb::TypeText {
                    text: code.display(),
                },
                basis,
            )
        }
    };

    let target = locate_target(obs, profile, recipe.target())?;
    let Some(target) = target else {
        // Target not present in the check-time observation: nothing to do.
        return Ok((PlannedAction::no_action(obs.captured_at, basis), latency));
    };

    Ok((
        PlannedAction {
            verb,
            target: Some(target),
            planned_at: obs.captured_at,
            predicate_basis: basis,
        },
        latency,
    ))
}

fn locate_target(
    obs: &Observation,
    profile: &AgentProfile,
    hint: &TargetHint,
) -> Result<Option<ActionTarget>, AgentError> {
    match profile.binding {
        BindingMode::Coordinate => {
            let view = obs
                .screenshot
                .as_ref()
                .ok_or(AgentError::CoordinateNeedsGeometry(obs.mode))?;
            Ok(view.find_label(&hint.label).map(|item| {
                let (x, y) = item.bbox.center();
                ActionTarget::Point { x, y }
            }))
        }
        BindingMode::ElementSelector => {
            let view = obs
                .structured
                .as_ref()
                .ok_or(AgentError::SelectorNeedsStructure(obs.mode))?;
            Ok(view
                .resolve_selector(&hint.selector)
                .map(|_| ActionTarget::Selector(hint.selector.clone())))
        }
    }
}

/// Resolves what `action` refers to when interpreted in `state`.
pub fn bind(action: &PlannedAction, state: &PageState, ctx: BindContext<'_>) -> Binding {
    let resolved = match &action.target {
        Some(ActionTarget::Point { x, y }) => state.hit_test((*x, *y)).unwrap_or(None),
        Some(ActionTarget::Selector(selector)) => state.resolve_selector(selector).unwrap_or(None),
        None => None,
    };
    let value_context = state
        .values
        .iter()
        .filter(|(k, _)| ctx.decision_fields.contains(*k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let valid = match ctx.validity {
        None => true,
        Some(rule) => {
            let payload_matches = match (&action.verb, state.values.get(&rule.code_field)) {
                (ActionVerb::TypeText { text }, Some(live)) => *text == live.display(),
                _ => false,
            };
            let before_deadline = state
                .values
                .get(&rule.deadline_field)
                .and_then(ValueScalar::as_int)
                .map(|deadline| (state.clock as i64) < deadline)
                .unwrap_or(false);
            payload_matches && before_deadline
        }
    };
    Binding {
        resolved,
        value_context,
        valid,
    }
}

/// The binding-difference half of the race condition: target identity,
/// decision-relevant values, or time-validity changed between two bindings.
pub fn bindings_differ(a: &Binding, b: &Binding) -> bool {
    a.resolved != b.resolved || a.value_context != b.value_context || a.valid != b.valid
}
