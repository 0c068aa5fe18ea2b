//! Property suite: randomized pages and schedules checked against
//! independent oracles and the documented invariants of each layer.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use toctou_sim::agent::{
    bind, bindings_differ, plan, ActionTarget, ActionVerb, AgentProfile, BindContext,
    PlannedAction, PlanningLatency, PolicyRecipe, TargetHint, Task,
};
use toctou_sim::monitor::{attach, MutationKind, ObserverConfig};
use toctou_sim::mutation::{advance, apply, Mutation, MutationSchedule, NullSink, ScheduleEntry};
use toctou_sim::page::{NodeId, PageNode, PageState, Rect, Selector};
use toctou_sim::rng::SplitMix64;
use toctou_sim::runner::{run_step, LoopConfig, StepContext, StepOutcome};
use toctou_sim::stress::{monte_carlo_outcomes, AttackStrategy, LatencyModel, McPath};

const ANCHOR_ID: NodeId = NodeId(2);

fn anchor_recipe() -> PolicyRecipe {
    PolicyRecipe::Click {
        target: TargetHint {
            selector: Selector::by_attr("id", "anchor"),
            label: "Anchor".into(),
        },
        gate: None,
    }
}

fn filtered_names() -> &'static [&'static str] {
    &["id", "class", "href", "src", "disabled", "hidden", "role"]
}

fn is_filtered(name: &str) -> bool {
    filtered_names().contains(&name) || name.starts_with("aria-")
}

/// Independent per-mutation record count: how many DOM records and resize
/// records a default-config monitor must emit for this schedule.
fn expected_record_counts(template: &PageState, schedule: &MutationSchedule) -> (usize, usize) {
    fn painted(state: &PageState, id: NodeId) -> bool {
        state.is_flag_visible(id)
            && state
                .node(id)
                .map(|n| n.bbox.intersects(&state.viewport))
                .unwrap_or(false)
    }
    let mut scratch = template.clone();
    let mut dom = 0usize;
    let mut resize = 0usize;
    for entry in schedule.entries() {
        let pre = scratch.clone();
        apply(&mut scratch, &entry.mutation).expect("generated schedule replays");
        match &entry.mutation {
            Mutation::SetAttribute { name, .. } => {
                if is_filtered(name) {
                    dom += 1;
                }
            }
            Mutation::SetText { .. } => dom += 1,
            Mutation::SetValue { field, .. } => {
                dom += pre
                    .nodes
                    .values()
                    .filter(|n| n.attrs.get("data-displays") == Some(field))
                    .count();
            }
            Mutation::SetVisibility { .. } => dom += 1,
            Mutation::InsertNode { .. } | Mutation::RemoveNode { .. } => dom += 1,
            Mutation::MoveResize {
                node,
                bbox,
                z_index,
            } => {
                let old = pre.node(*node).expect("target exists");
                if old.bbox != *bbox {
                    if painted(&pre, *node) || painted(&scratch, *node) {
                        resize += 1;
                    }
                } else if old.z_index != *z_index {
                    dom += 1;
                }
            }
        }
    }
    (dom, resize)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Stacking-aware hit testing agrees with the brute-force scan.
    #[test]
    fn hit_test_matches_brute_force(seed in any::<u64>()) {
        let page = common::random_page(seed);
        let mut rng = SplitMix64::new(seed ^ 0xBEEF);
        for _ in 0..60 {
            let x = (rng.next_u64() % 200) as i32;
            let y = (rng.next_u64() % 200) as i32;
            prop_assert_eq!(
                page.hit_test((x, y)).unwrap(),
                common::brute_force_hit_test(&page, (x, y)),
                "point ({}, {})", x, y
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Replaying the same schedule yields byte-identical states, and
    /// advancing over a partition equals advancing in one go.
    #[test]
    fn schedule_replay_is_deterministic_and_compositional(
        seed in any::<u64>(),
        split in 1u64..7000,
    ) {
        let template = common::random_page(seed);
        let schedule = common::random_schedule(&template, seed, 8, 50, 7000);

        let mut one = template.clone();
        advance(&mut one, &schedule, 7500, &mut NullSink).unwrap();
        let mut two = template.clone();
        advance(&mut two, &schedule, 7500, &mut NullSink).unwrap();
        prop_assert_eq!(
            serde_json::to_string(&one).unwrap(),
            serde_json::to_string(&two).unwrap()
        );

        let mut split_state = template.clone();
        advance(&mut split_state, &schedule, split, &mut NullSink).unwrap();
        advance(&mut split_state, &schedule, 7500, &mut NullSink).unwrap();
        prop_assert_eq!(
            serde_json::to_string(&split_state).unwrap(),
            serde_json::to_string(&one).unwrap()
        );
    }

    /// With the default config and zero delivery delay, every non-cosmetic
    /// schedule mutation surfaces in exactly one drained record.
    #[test]
    fn monitor_completeness(seed in any::<u64>()) {
        let template = common::random_page(seed);
        let schedule = common::random_schedule(&template, seed, 8, 50, 7000);
        let (expected_dom, expected_resize) = expected_record_counts(&template, &schedule);

        let mut state = template.clone();
        let mut session = attach(&state, ObserverConfig::default());
        advance(&mut state, &schedule, 7500, &mut session).unwrap();
        let (m, r) = session.drain(7500).unwrap();
        prop_assert_eq!(m.len(), expected_dom);
        prop_assert_eq!(r.len(), expected_resize);
    }

    /// No drained attribute record carries a name outside the filter.
    #[test]
    fn monitor_filter_soundness(seed in any::<u64>()) {
        let template = common::random_page(seed);
        let schedule = common::random_schedule(&template, seed, 10, 50, 7000);
        let mut state = template.clone();
        let mut session = attach(&state, ObserverConfig::default());
        advance(&mut state, &schedule, 7500, &mut session).unwrap();
        let (m, _) = session.drain(7500).unwrap();
        for record in m {
            if record.kind == MutationKind::Attribute {
                let name = record.attribute.as_deref().unwrap_or("");
                prop_assert!(is_filtered(name), "cosmetic record leaked: {}", name);
            }
        }
    }

    /// Selector bindings survive any schedule that neither removes the
    /// target nor touches its filtered attributes.
    #[test]
    fn element_binding_stability(seed in any::<u64>()) {
        let template = common::random_page(seed);
        let schedule = common::random_schedule(&template, seed, 8, 50, 7000);
        let touches_anchor = schedule.entries().iter().any(|e| match &e.mutation {
            Mutation::SetAttribute { node, name, .. } => {
                *node == ANCHOR_ID && is_filtered(name)
            }
            Mutation::RemoveNode { node } => *node == ANCHOR_ID,
            _ => false,
        });
        prop_assume!(!touches_anchor);

        let selector = Selector::by_attr("id", "anchor");
        let before = template.resolve_selector(&selector).unwrap();
        let mut state = template.clone();
        advance(&mut state, &schedule, 7500, &mut NullSink).unwrap();
        let after = state.resolve_selector(&selector).unwrap();
        prop_assert_eq!(before, Some(ANCHOR_ID));
        prop_assert_eq!(after, Some(ANCHOR_ID));
    }

    /// Dropping a visible interactive overlay over the target point always
    /// flips a coordinate binding.
    #[test]
    fn coordinate_binding_fragility(seed in any::<u64>()) {
        let mut page = common::random_page(seed);
        let fields = BTreeSet::new();
        let ctx = BindContext { decision_fields: &fields, validity: None };
        let action = PlannedAction {
            verb: ActionVerb::Click,
            target: Some(ActionTarget::Point { x: 80, y: 65 }),
            planned_at: 0,
            predicate_basis: Default::default(),
        };
        let before = bind(&action, &page, ctx);

        let overlay_id = page.allocate_id();
        let overlay = PageNode {
            id: overlay_id,
            tag: "overlay".into(),
            attrs: Default::default(),
            text: "late".into(),
            children: Vec::new(),
            bbox: Rect::new(40, 40, 120, 120).unwrap(),
            z_index: 100,
            visible: true,
            interactive: true,
        };
        let root = page.root;
        apply(&mut page, &Mutation::InsertNode {
            parent: root,
            index: 0,
            subtree_root: overlay_id,
            nodes: vec![overlay],
        }).unwrap();

        let after = bind(&action, &page, ctx);
        prop_assert_eq!(after.resolved, Some(overlay_id));
        prop_assert!(bindings_differ(&before, &after));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Any schedule that changes a hit-test answer anywhere on the grid
    /// leaves at least one record behind.
    #[test]
    fn monitor_geometry_coverage(seed in any::<u64>()) {
        let template = common::random_page(seed);
        let schedule = common::random_schedule(&template, seed, 6, 50, 7000);

        let mut state = template.clone();
        let mut session = attach(&state, ObserverConfig::default());
        advance(&mut state, &schedule, 7500, &mut session).unwrap();
        let (m, r) = session.drain(7500).unwrap();

        let mut grid_changed = false;
        'outer: for x in (0..200).step_by(8) {
            for y in (0..200).step_by(8) {
                if template.hit_test((x, y)).unwrap() != state.hit_test((x, y)).unwrap() {
                    grid_changed = true;
                    break 'outer;
                }
            }
        }
        if grid_changed {
            prop_assert!(
                !m.is_empty() || !r.is_empty(),
                "hit results changed but the monitor saw nothing"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// No schedule entry inside (t_check, t_act]: a violation is impossible.
    #[test]
    fn no_entry_in_window_means_no_violation(
        seed in any::<u64>(),
        latency in 500u64..5000,
    ) {
        let template = common::random_page(seed);
        let config = LoopConfig { validation_enabled: false, ..LoopConfig::default() };
        let t_act = latency + config.residual_window_ms;
        let raw = common::random_schedule(&template, seed, 6, 50, 4000);
        let entries: Vec<ScheduleEntry> = raw
            .entries()
            .iter()
            .map(|e| ScheduleEntry { at_ms: e.at_ms + t_act, mutation: e.mutation.clone() })
            .collect();
        let schedule = MutationSchedule::from_entries(entries).unwrap();

        let fields: BTreeSet<String> = ["v0".to_string()].into_iter().collect();
        let ctx = StepContext { decision_fields: &fields, validity: None };
        let profile = AgentProfile::selector(PlanningLatency::Fixed { ms: latency });
        let mut state = template.clone();
        let trace = run_step(
            &mut state,
            &schedule,
            &profile,
            &Task::default(),
            &anchor_recipe(),
            ctx,
            &config,
            &mut SplitMix64::new(seed),
        ).unwrap();
        prop_assert_eq!(trace.outcome, StepOutcome::Executed);
        prop_assert!(!trace.violation);
    }

    /// With validation on and zero delivery delay, a violation requires an
    /// entry inside the residual window (t_validate, t_act]. Schedules that
    /// avoid it either abort or execute cleanly.
    #[test]
    fn validation_confines_violations_to_residual_window(
        seed in any::<u64>(),
        latency in 500u64..5000,
    ) {
        let template = common::random_page(seed);
        let config = LoopConfig { validation_enabled: true, ..LoopConfig::default() };
        let w = config.residual_window_ms;
        let raw = common::random_schedule(&template, seed, 6, 50, latency + 4000);
        let entries: Vec<ScheduleEntry> = raw
            .entries()
            .iter()
            .map(|e| {
                let at_ms = if e.at_ms > latency { e.at_ms + w } else { e.at_ms };
                ScheduleEntry { at_ms, mutation: e.mutation.clone() }
            })
            .collect();
        let schedule = MutationSchedule::from_entries(entries).unwrap();

        let fields: BTreeSet<String> = ["v0".to_string()].into_iter().collect();
        let ctx = StepContext { decision_fields: &fields, validity: None };
        let profile = AgentProfile::selector(PlanningLatency::Fixed { ms: latency });
        let mut state = template.clone();
        let trace = run_step(
            &mut state,
            &schedule,
            &profile,
            &Task::default(),
            &anchor_recipe(),
            ctx,
            &config,
            &mut SplitMix64::new(seed),
        ).unwrap();
        if trace.outcome == StepOutcome::Executed {
            prop_assert!(!trace.violation, "violation without residual-window entry");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    /// Closed-form membership and full simulator trials agree on every
    /// tested configuration, trial for trial.
    #[test]
    fn monte_carlo_paths_agree(
        seed in any::<u64>(),
        a_tenths in 5u64..30,
        span_tenths in 2u64..20,
        w_hundredths in 1u64..80,
        fixed in proptest::bool::ANY,
    ) {
        let a = a_tenths as f64 / 10.0;
        let b = a + span_tenths as f64 / 10.0;
        let w = w_hundredths as f64 / 100.0;
        let model = LatencyModel::new(a, b).unwrap();
        let strategy = if fixed {
            AttackStrategy::FixedRefresh { t_s: (a + b) / 2.0 }
        } else {
            AttackStrategy::UniformRandomRefresh { lo_s: a, hi_s: b }
        };
        let membership =
            monte_carlo_outcomes(&strategy, &model, w, 150, seed, McPath::Membership).unwrap();
        let full =
            monte_carlo_outcomes(&strategy, &model, w, 150, seed, McPath::FullSim).unwrap();
        prop_assert_eq!(membership, full);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Policies are pure functions of (observation, task, seed).
    #[test]
    fn policy_determinism(seed in any::<u64>(), page_seed in any::<u64>()) {
        let page = common::random_page(page_seed);
        let profile = AgentProfile::coordinate(PlanningLatency::Uniform {
            lo_ms: 500,
            hi_ms: 4000,
        });
        let obs = page.observe(profile.obs_mode);
        let task = Task::default();
        let first = plan(&obs, &task, &profile, &anchor_recipe(), &mut SplitMix64::new(seed));
        let second = plan(&obs, &task, &profile, &anchor_recipe(), &mut SplitMix64::new(seed));
        prop_assert_eq!(first.unwrap(), second.unwrap());
    }
}
