//! Residual-window attack analysis.
//!
//! With pre-execution validation in place, the only exploitable interval is
//! the short gap `w` between the final monitor drain and the action call.
//! Under an idealized latency model R ~ U[a, b] (seconds), an update
//! scheduled at time `t` lands inside that gap with probability
//!
//! ```text
//! p(t) = max{0, min(b, t) - max(a, t - w)} / (b - a)
//! ```
//!
//! which peaks at `min(1, w / (b - a))` for any `t` in `[a + w, b]`; once
//! `w >= b - a` an attacker can cover the whole latency support and win with
//! certainty.
//!
//! The Monte Carlo runner samples the same model two ways: a closed-form
//! membership test, and full simulator runs on a one-button probe page with
//! validation enabled. Both paths consume identical per-trial draws, so they
//! agree trial for trial. The continuous model is bridged onto the
//! simulator's millisecond grid explicitly: every sampled time is rounded to
//! integer ms before either path sees it. Landing exactly on the validation
//! instant counts as caught (the final drain is synchronous); landing
//! exactly at dispatch counts as a hit.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentProfile, PlanningLatency, PolicyRecipe, TargetHint, Task};
use crate::mutation::{Mutation, MutationSchedule, ScheduleEntry, DISPLAYS_ATTR};
use crate::page::{NodeId, PageNode, PageState, Rect, Selector, ValueScalar};
use crate::rng::{derive_seed, SplitMix64};
use crate::runner::{self, LoopConfig, StepContext, StepOutcome};

/// Planning latency R ~ Uniform[a, b], in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub a_s: f64,
    pub b_s: f64,
}

impl LatencyModel {
    pub fn new(a_s: f64, b_s: f64) -> Result<Self, StressError> {
        if !a_s.is_finite() || !b_s.is_finite() || a_s < 0.0 || a_s >= b_s {
            return Err(StressError::InvalidModel { a_s, b_s });
        }
        Ok(Self { a_s, b_s })
    }

    pub fn span(&self) -> f64 {
        self.b_s - self.a_s
    }
}

/// When the adversary refreshes the page.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackStrategy {
    /// One representative time inside the estimated latency range.
    FixedRefresh { t_s: f64 },
    /// Refresh time sampled uniformly per trial, modelling estimate
    /// uncertainty.
    UniformRandomRefresh { lo_s: f64, hi_s: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum StressError {
    #[error("latency model needs 0 <= a < b, got a={a_s}, b={b_s}")]
    InvalidModel { a_s: f64, b_s: f64 },
    #[error("residual window must be a finite non-negative number, got {0}")]
    InvalidWindow(f64),
    #[error("attack strategy times must be finite and non-negative")]
    InvalidStrategy,
    #[error("at least one trial is required")]
    NoTrials,
}

/// Exact evaluation of the success probability of an update at time `t`.
pub fn analytic_p(t_s: f64, model: &LatencyModel, w_s: f64) -> f64 {
    let upper = model.b_s.min(t_s);
    let lower = model.a_s.max(t_s - w_s);
    ((upper - lower).max(0.0) / model.span()).clamp(0.0, 1.0)
}

/// Maximum of `analytic_p` over `t`, with the interval of times attaining
/// it: `[a + w, b]` while the window is smaller than the latency spread,
/// `[b, a + w]` once it covers it.
pub fn max_success(model: &LatencyModel, w_s: f64) -> (f64, (f64, f64)) {
    let p = (w_s / model.span()).min(1.0);
    let interval = if w_s < model.span() {
        (model.a_s + w_s, model.b_s)
    } else {
        (model.b_s, model.a_s + w_s)
    };
    (p, interval)
}

/// Samples `(t, p(t))` pairs over a grid for plotting.
pub fn success_curve(
    model: &LatencyModel,
    w_s: f64,
    from_s: f64,
    to_s: f64,
    step_s: f64,
) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut t = from_s;
    while t <= to_s + 1e-12 {
        out.push((t, analytic_p(t, model, w_s)));
        t += step_s;
    }
    out
}

/// How a Monte Carlo trial decides success.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McPath {
    /// Closed-form membership: refresh lands in `(R, R + w]`.
    Membership,
    /// Drive a full validate-act cycle on a probe page and read the
    /// violation flag.
    FullSim,
}

/// One trial's draws and verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub latency_ms: u64,
    pub refresh_ms: u64,
    pub success: bool,
}

fn secs_to_ms(s: f64, what: &str) -> Result<u64, StressError> {
    if !s.is_finite() || s < 0.0 {
        return Err(match what {
            "window" => StressError::InvalidWindow(s),
            _ => StressError::InvalidStrategy,
        });
    }
    Ok((s * 1000.0).round() as u64)
}

/// Runs seeded trials and returns each one's draws and verdict.
///
/// Per-trial seeds derive from `(seed, trial index)`, so outcomes do not
/// depend on execution order and the two paths consume identical draws.
pub fn monte_carlo_outcomes(
    strategy: &AttackStrategy,
    model: &LatencyModel,
    w_s: f64,
    trials: u64,
    seed: u64,
    path: McPath,
) -> Result<Vec<TrialOutcome>, StressError> {
    if trials == 0 {
        return Err(StressError::NoTrials);
    }
    LatencyModel::new(model.a_s, model.b_s)?;
    let w_ms = secs_to_ms(w_s, "window")?;
    let a_ms = secs_to_ms(model.a_s, "model")?;
    let b_ms = secs_to_ms(model.b_s, "model")?;
    let refresh_bounds = match strategy {
        AttackStrategy::FixedRefresh { t_s } => {
            let t = secs_to_ms(*t_s, "strategy")?;
            (t, t)
        }
        AttackStrategy::UniformRandomRefresh { lo_s, hi_s } => {
            let lo = secs_to_ms(*lo_s, "strategy")?;
            let hi = secs_to_ms(*hi_s, "strategy")?;
            if lo > hi {
                return Err(StressError::InvalidStrategy);
            }
            (lo, hi)
        }
    };

    let probe = (path == McPath::FullSim).then(probe_parts);

    let mut outcomes = Vec::with_capacity(trials as usize);
    for trial in 0..trials {
        let mut rng = SplitMix64::new(derive_seed(&[seed, trial]));
        let latency_ms = rng.next_range(a_ms, b_ms);
        let refresh_ms = rng.next_range(refresh_bounds.0, refresh_bounds.1);
        let success = match &probe {
            None => refresh_ms > latency_ms && refresh_ms <= latency_ms + w_ms,
            Some(parts) => run_probe_trial(parts, latency_ms, refresh_ms, w_ms),
        };
        outcomes.push(TrialOutcome {
            trial,
            latency_ms,
            refresh_ms,
            success,
        });
    }
    Ok(outcomes)
}

/// Counts successful trials.
pub fn monte_carlo(
    strategy: &AttackStrategy,
    model: &LatencyModel,
    w_s: f64,
    trials: u64,
    seed: u64,
    path: McPath,
) -> Result<u64, StressError> {
    Ok(
        monte_carlo_outcomes(strategy, model, w_s, trials, seed, path)?
            .iter()
            .filter(|o| o.success)
            .count() as u64,
    )
}

struct ProbeParts {
    template: PageState,
    task: Task,
    recipe: PolicyRecipe,
    decision_fields: BTreeSet<String>,
}

/// Minimal page for full-simulation trials: one button, one watched value.
fn probe_parts() -> ProbeParts {
    let viewport = Rect::new(0, 0, 400, 300).unwrap();
    let mut page = PageState::new(
        viewport,
        PageNode {
            id: NodeId(0),
            tag: "page".into(),
            attrs: BTreeMap::new(),
            text: String::new(),
            children: Vec::new(),
            bbox: viewport,
            z_index: 0,
            visible: true,
            interactive: false,
        },
    );
    let display = page.allocate_id();
    page.nodes.insert(
        display,
        PageNode {
            id: display,
            tag: "text".into(),
            attrs: [(DISPLAYS_ATTR.to_string(), "probe".to_string())]
                .into_iter()
                .collect(),
            text: "0".into(),
            children: Vec::new(),
            bbox: Rect::new(20, 20, 100, 30).unwrap(),
            z_index: 0,
            visible: true,
            interactive: false,
        },
    );
    let button = page.allocate_id();
    page.nodes.insert(
        button,
        PageNode {
            id: button,
            tag: "button".into(),
            attrs: [("id".to_string(), "probe-btn".to_string())]
                .into_iter()
                .collect(),
            text: "Go".into(),
            children: Vec::new(),
            bbox: Rect::new(20, 70, 100, 40).unwrap(),
            z_index: 0,
            visible: true,
            interactive: true,
        },
    );
    let root = page.root;
    page.node_mut(root)
        .unwrap()
        .children
        .extend([display, button]);
    page.values.insert("probe".into(), ValueScalar::Int(0));

    ProbeParts {
        template: page,
        task: Task {
            goal: "probe".into(),
            params: BTreeMap::new(),
        },
        recipe: PolicyRecipe::Click {
            target: TargetHint {
                selector: Selector::by_attr("id", "probe-btn"),
                label: "Go".into(),
            },
            gate: None,
        },
        decision_fields: ["probe".to_string()].into_iter().collect(),
    }
}

fn run_probe_trial(parts: &ProbeParts, latency_ms: u64, refresh_ms: u64, w_ms: u64) -> bool {
    let mut state = parts.template.clone();
    let schedule = MutationSchedule::from_entries(vec![ScheduleEntry {
        at_ms: refresh_ms,
        mutation: Mutation::SetValue {
            field: "probe".into(),
            value: ValueScalar::Int(1),
        },
    }])
    .expect("single entry is sorted");
    let profile = AgentProfile::selector(PlanningLatency::Fixed { ms: latency_ms });
    let config = LoopConfig {
        validation_enabled: true,
        residual_window_ms: w_ms,
        max_iterations: 1,
        ..LoopConfig::default()
    };
    let ctx = StepContext {
        decision_fields: &parts.decision_fields,
        validity: None,
    };
    let trace = runner::run_step(
        &mut state,
        &schedule,
        &profile,
        &parts.task,
        &parts.recipe,
        ctx,
        &config,
        &mut SplitMix64::new(0),
    )
    .expect("probe trial runs");
    trace.outcome == StepOutcome::Executed && trace.violation
}
