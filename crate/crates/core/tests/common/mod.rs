//! Shared test support: independent brute-force oracles and deterministic
//! random page/schedule generators.
//!
//! The oracles here re-derive results from first principles (explicit
//! recursion, whole-map scans, no shared helpers) so they stay independent
//! of the implementation paths they are used to check.

// Not every test target uses every helper.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use toctou_sim::agent::{ActionTarget, ActionVerb, PlannedAction, ValidityRule};
use toctou_sim::mutation::{Mutation, MutationSchedule, ScheduleEntry, DISPLAYS_ATTR};
use toctou_sim::page::{NodeId, PageNode, PageState, Rect, ValueScalar};
use toctou_sim::rng::SplitMix64;
use toctou_sim::runner::StepTrace;

pub fn rect(x: i32, y: i32, w: i32, h: i32) -> Rect {
    Rect::new(x, y, w, h).unwrap()
}

// ---------------------------------------------------------------------------
// Brute-force hit testing
// ---------------------------------------------------------------------------

fn oracle_document_order(state: &PageState) -> Vec<NodeId> {
    fn walk(state: &PageState, id: NodeId, out: &mut Vec<NodeId>) {
        out.push(id);
        if let Some(node) = state.nodes.get(&id) {
            for child in &node.children {
                walk(state, *child, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(state, state.root, &mut out);
    out
}

fn oracle_parent(state: &PageState, id: NodeId) -> Option<NodeId> {
    for (pid, node) in &state.nodes {
        if node.children.contains(&id) {
            return Some(*pid);
        }
    }
    None
}

fn oracle_flag_visible(state: &PageState, id: NodeId) -> bool {
    let mut current = id;
    loop {
        let Some(node) = state.nodes.get(&current) else {
            return false;
        };
        if !node.visible {
            return false;
        }
        if current == state.root {
            return true;
        }
        match oracle_parent(state, current) {
            Some(p) => current = p,
            None => return false,
        }
    }
}

fn boxes_overlap(a: &Rect, b: &Rect) -> bool {
    a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h
}

fn oracle_painted(state: &PageState, id: NodeId) -> bool {
    oracle_flag_visible(state, id)
        && state
            .nodes
            .get(&id)
            .map(|n| boxes_overlap(&n.bbox, &state.viewport))
            .unwrap_or(false)
}

/// Scan every node, keep visible interactive ones containing the point,
/// maximize by (z_index, document position).
pub fn brute_force_hit_test(state: &PageState, point: (i32, i32)) -> Option<NodeId> {
    let order = oracle_document_order(state);
    let mut best: Option<(i32, usize, NodeId)> = None;
    for (position, id) in order.iter().enumerate() {
        let node = &state.nodes[id];
        let contains = point.0 >= node.bbox.x
            && point.1 >= node.bbox.y
            && point.0 < node.bbox.x + node.bbox.w
            && point.1 < node.bbox.y + node.bbox.h;
        if !node.interactive || !contains || !oracle_painted(state, *id) {
            continue;
        }
        let better = match best {
            None => true,
            Some((z, p, _)) => (node.z_index, position) > (z, p),
        };
        if better {
            best = Some((node.z_index, position, *id));
        }
    }
    best.map(|(_, _, id)| id)
}

fn oracle_resolve_selector(
    state: &PageState,
    tag: &Option<String>,
    attrs: &BTreeMap<String, String>,
) -> Option<NodeId> {
    for id in oracle_document_order(state) {
        let node = &state.nodes[&id];
        if let Some(t) = tag {
            if &node.tag != t {
                continue;
            }
        }
        if attrs.iter().all(|(k, v)| node.attrs.get(k) == Some(v)) {
            return Some(id);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Independent violation recomputation
// ---------------------------------------------------------------------------

const FILTERED: &[&str] = &["id", "class", "href", "src", "disabled", "hidden", "role"];

fn oracle_filtered(name: &str) -> bool {
    FILTERED.contains(&name) || name.starts_with("aria-")
}

fn oracle_state_differs(a: &PageState, b: &PageState, decision_fields: &BTreeSet<String>) -> bool {
    let ids_a: BTreeSet<NodeId> = a.nodes.keys().copied().collect();
    let ids_b: BTreeSet<NodeId> = b.nodes.keys().copied().collect();
    if ids_a != ids_b {
        return true;
    }
    for id in &ids_a {
        let na = &a.nodes[id];
        let nb = &b.nodes[id];
        if na.children != nb.children {
            return true;
        }
        let fa: BTreeMap<&String, &String> = na
            .attrs
            .iter()
            .filter(|(k, _)| oracle_filtered(k))
            .collect();
        let fb: BTreeMap<&String, &String> = nb
            .attrs
            .iter()
            .filter(|(k, _)| oracle_filtered(k))
            .collect();
        if fa != fb {
            return true;
        }
        if (na.interactive || nb.interactive)
            && (na.bbox != nb.bbox
                || na.z_index != nb.z_index
                || na.interactive != nb.interactive
                || oracle_painted(a, *id) != oracle_painted(b, *id))
        {
            return true;
        }
    }
    for field in decision_fields {
        if a.values.get(field) != b.values.get(field) {
            return true;
        }
    }
    false
}

struct OracleBinding {
    resolved: Option<NodeId>,
    context: BTreeMap<String, ValueScalar>,
    valid: bool,
}

fn oracle_bind(
    action: &PlannedAction,
    state: &PageState,
    decision_fields: &BTreeSet<String>,
    validity: Option<&ValidityRule>,
) -> OracleBinding {
    let resolved = match &action.target {
        Some(ActionTarget::Point { x, y }) => brute_force_hit_test(state, (*x, *y)),
        Some(ActionTarget::Selector(sel)) => oracle_resolve_selector(state, &sel.tag, &sel.attrs),
        None => None,
    };
    let context = state
        .values
        .iter()
        .filter(|(k, _)| decision_fields.contains(*k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let valid = match validity {
        None => true,
        Some(rule) => {
            let typed = match &action.verb {
                ActionVerb::TypeText { text } => Some(text.clone()),
                _ => None,
            };
            let live = state.values.get(&rule.code_field).map(|v| v.display());
            let deadline = state
                .values
                .get(&rule.deadline_field)
                .and_then(|v| v.as_int());
            match (typed, live, deadline) {
                (Some(t), Some(l), Some(d)) => t == l && (state.clock as i64) < d,
                _ => false,
            }
        }
    };
    OracleBinding {
        resolved,
        context,
        valid,
    }
}

/// Recomputes a step's violation flag from its serialized check/use states,
/// via the brute-force binding path.
pub fn recompute_violation(
    trace: &StepTrace,
    decision_fields: &BTreeSet<String>,
    validity: Option<&ValidityRule>,
) -> bool {
    let s_c: PageState =
        serde_json::from_str(trace.state_at_check.as_ref().expect("check state captured"))
            .expect("check state parses");
    let s_u: PageState =
        serde_json::from_str(trace.state_at_use.as_ref().expect("use state captured"))
            .expect("use state parses");
    let at_check = oracle_bind(&trace.action, &s_c, decision_fields, validity);
    let at_use = oracle_bind(&trace.action, &s_u, decision_fields, validity);
    let bindings_differ = at_check.resolved != at_use.resolved
        || at_check.context != at_use.context
        || at_check.valid != at_use.valid;
    oracle_state_differs(&s_c, &s_u, decision_fields) && bindings_differ
}

// ---------------------------------------------------------------------------
// Deterministic random pages and schedules
// ---------------------------------------------------------------------------

pub const GEN_VIEWPORT: Rect = Rect {
    x: 0,
    y: 0,
    w: 200,
    h: 200,
};

fn make_node(id: NodeId, tag: &str, bbox: Rect) -> PageNode {
    PageNode {
        id,
        tag: tag.to_string(),
        attrs: BTreeMap::new(),
        text: String::new(),
        children: Vec::new(),
        bbox,
        z_index: 0,
        visible: true,
        interactive: false,
    }
}

/// Builds a small random page inside a 200x200 viewport. Always contains an
/// interactive "Anchor" button directly under the root, plus a displayed
/// value field `v0`, so policies and value races have something to act on.
pub fn random_page(seed: u64) -> PageState {
    let mut rng = SplitMix64::new(seed);
    let mut page = PageState::new(GEN_VIEWPORT, make_node(NodeId(0), "page", GEN_VIEWPORT));
    let root = page.root;

    let anchor = page.allocate_id();
    let mut anchor_node = make_node(anchor, "button", rect(50, 50, 60, 30));
    anchor_node.text = "Anchor".into();
    anchor_node.interactive = true;
    anchor_node.z_index = 3;
    anchor_node.attrs.insert("id".into(), "anchor".into());
    page.nodes.insert(anchor, anchor_node);
    page.node_mut(root).unwrap().children.push(anchor);

    let display = page.allocate_id();
    let mut display_node = make_node(display, "text", rect(10, 160, 80, 20));
    display_node.attrs.insert(DISPLAYS_ATTR.into(), "v0".into());
    display_node.text = "5".into();
    page.nodes.insert(display, display_node);
    page.node_mut(root).unwrap().children.push(display);
    page.values.insert("v0".into(), ValueScalar::Int(5));

    let extra = 2 + (rng.next_u64() % 5) as usize;
    let mut all_ids = vec![root, anchor, display];
    for i in 0..extra {
        let id = page.allocate_id();
        let parent = all_ids[(rng.next_u64() as usize) % all_ids.len()];
        let x = (rng.next_u64() % 260) as i32 - 30;
        let y = (rng.next_u64() % 260) as i32 - 30;
        let w = (rng.next_u64() % 120) as i32;
        let h = (rng.next_u64() % 120) as i32;
        let tags = ["button", "link", "panel", "text"];
        let mut node = make_node(
            id,
            tags[(rng.next_u64() as usize) % tags.len()],
            rect(x, y, w, h),
        );
        node.z_index = (rng.next_u64() % 8) as i32 - 1;
        node.visible = rng.next_u64() % 10 < 8;
        node.interactive = rng.next_u64() % 10 < 6;
        node.text = format!("n{i}");
        node.attrs.insert("id".into(), format!("n{i}"));
        if rng.next_u64() % 10 < 5 {
            node.attrs.insert("class".into(), "card".into());
        }
        page.nodes.insert(id, node);
        page.node_mut(parent).unwrap().children.push(id);
        all_ids.push(id);
    }
    page
}

/// Builds a schedule of valid mutations against `template`, with strictly
/// increasing times in `(t_from, t_to]`. Each op is validated against a
/// scratch replay so the schedule never dangles.
pub fn random_schedule(
    template: &PageState,
    seed: u64,
    ops: usize,
    t_from: u64,
    t_to: u64,
) -> MutationSchedule {
    let mut rng = SplitMix64::new(seed ^ 0xACE1_D00D);
    let mut scratch = template.clone();
    let mut entries: Vec<ScheduleEntry> = Vec::new();
    let span = t_to.saturating_sub(t_from).max(1);
    let mut t = t_from;
    let mut inserted = 0u64;

    for _ in 0..ops {
        t += 1 + rng.next_u64() % (span / (ops as u64) + 1).max(1);
        if t > t_to {
            break;
        }
        let live: Vec<NodeId> = scratch.nodes.keys().copied().collect();
        let pick =
            |rng: &mut SplitMix64, ids: &[NodeId]| ids[(rng.next_u64() as usize) % ids.len()];
        let mutation = match rng.next_u64() % 7 {
            0 => {
                let names = [
                    "class",
                    "disabled",
                    "aria-label",
                    "style-color",
                    "data-theme",
                ];
                Mutation::SetAttribute {
                    node: pick(&mut rng, &live),
                    name: names[(rng.next_u64() as usize) % names.len()].to_string(),
                    value: format!("v{}", rng.next_u64() % 100),
                }
            }
            1 => Mutation::SetText {
                node: pick(&mut rng, &live),
                text: format!("t{}", rng.next_u64() % 100),
            },
            2 => {
                let node = pick(&mut rng, &live);
                let old = scratch.node(node).unwrap().bbox;
                let bbox = rect(
                    old.x + 1 + (rng.next_u64() % 60) as i32,
                    (rng.next_u64() % 240) as i32 - 20,
                    (rng.next_u64() % 100) as i32,
                    (rng.next_u64() % 100) as i32,
                );
                Mutation::MoveResize {
                    node,
                    bbox,
                    z_index: (rng.next_u64() % 9) as i32 - 1,
                }
            }
            3 => {
                let node = pick(&mut rng, &live);
                let current = scratch.node(node).unwrap().visible;
                Mutation::SetVisibility {
                    node,
                    visible: !current,
                }
            }
            4 => Mutation::SetValue {
                field: "v0".into(),
                value: ValueScalar::Int((rng.next_u64() % 1000) as i64),
            },
            5 => {
                inserted += 1;
                let id = scratch.allocate_id();
                let x = (rng.next_u64() % 200) as i32;
                let y = (rng.next_u64() % 200) as i32;
                let mut node = make_node(
                    id,
                    "widget",
                    rect(
                        x,
                        y,
                        20 + (rng.next_u64() % 80) as i32,
                        20 + (rng.next_u64() % 80) as i32,
                    ),
                );
                node.z_index = (rng.next_u64() % 12) as i32;
                node.interactive = rng.next_u64() % 10 < 7;
                node.text = format!("w{inserted}");
                node.attrs.insert("id".into(), format!("w{inserted}"));
                Mutation::InsertNode {
                    parent: pick(&mut rng, &live),
                    index: 0,
                    subtree_root: id,
                    nodes: vec![node],
                }
            }
            _ => {
                let root = scratch.root;
                let removable: Vec<NodeId> = live
                    .iter()
                    .copied()
                    .filter(|id| {
                        // Keep the anchor and the display so policies and
                        // value races stay well-defined.
                        *id != root && id.0 != 2 && id.0 != 3
                    })
                    .collect();
                if removable.is_empty() {
                    continue;
                }
                Mutation::RemoveNode {
                    node: pick(&mut rng, &removable),
                }
            }
        };
        if toctou_sim::mutation::apply(&mut scratch, &mutation).is_ok() {
            entries.push(ScheduleEntry { at_ms: t, mutation });
        }
    }
    MutationSchedule::from_entries(entries).expect("generated entries are sorted")
}
