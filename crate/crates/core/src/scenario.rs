//! The bundled race scenarios as data: initial page, timed mutation
//! schedule, task, oracle, and per-scenario policy recipe.
//!
//! # File format
//!
//! A scenario is a JSON document with exactly these top-level keys:
//!
//! ```text
//! { id, type, viewport, nodes[], values{}, schedule[], task{}, oracle{}, policies{} }
//! ```
//!
//! * `nodes` is a flat list; the first entry is the root and `children`
//!   reference other entries by name. Each node carries
//!   `{id, tag, attrs, text, box: [x,y,w,h], z, visible, interactive, children}`.
//!   The node's name is injected as its `id` attribute unless one is set.
//! * `schedule` entries are `{at_ms, op, args}` with ops `insert_node`,
//!   `remove_node`, `set_attribute`, `set_text`, `set_value`, `move_resize`,
//!   `set_visibility`, referencing nodes by name. Entries must be sorted by
//!   `at_ms`; equal times apply in list order.
//! * A node attribute `data-displays: <field>` binds its text to a value
//!   field; `data-click-nav`, `data-click-effect` and `data-submit-result`
//!   declare what interacting with the node does (see the runner module).
//! * `policies` holds the decision-relevant field list and the default
//!   action recipe: a gated `click` or a `submit_code`.
//!
//! Loading validates the whole document — dangling references, unsorted
//! schedules, unknown fields, malformed effects — and reports each problem
//! with the offending field path.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{PolicyRecipe, Task, ThresholdSource, ValidityRule};
use crate::mutation::{Mutation, MutationSchedule, ScheduleEntry, DISPLAYS_ATTR};
use crate::page::{NodeId, PageNode, PageState, Rect, ValueScalar};
use crate::runner::{self, RunResult, StepOutcome, StepTrace};

/// The three manipulation classes: UI changes, data changes, expiring state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ManipulationType {
    I,
    II,
    III,
}

impl std::fmt::Display for ManipulationType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ManipulationType::I => write!(f, "I"),
            ManipulationType::II => write!(f, "II"),
            ManipulationType::III => write!(f, "III"),
        }
    }
}

/// Pure pass/fail predicate over the final page state and the run's traces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleSpec {
    /// The run ended on the given page tag.
    ReachedTarget { tag: String },
    /// The run never navigated to the given page tag.
    AvoidedTarget { tag: String },
    /// If the field was ever committed, it satisfies the comparison.
    PredicateRespected {
        field: String,
        cmp: crate::agent::Comparator,
        threshold: i64,
    },
    /// Some executed submission was still valid at use time.
    ActedBeforeDeadline { deadline_field: String },
    /// Every sub-oracle holds.
    AllOf { of: Vec<OracleSpec> },
}

/// A fully validated, compiled scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub ty: ManipulationType,
    pub template: PageState,
    pub schedule: MutationSchedule,
    pub task: Task,
    pub oracle: OracleSpec,
    pub decision_fields: BTreeSet<String>,
    pub policy: PolicyRecipe,
    pub validity: Option<ValidityRule>,
    def: ScenarioDef,
}

impl Scenario {
    pub fn def(&self) -> &ScenarioDef {
        &self.def
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("unknown bundled scenario '{0}'")]
    UnknownBundled(String),
}

fn schema_err<T>(path: impl Into<String>, message: impl Into<String>) -> Result<T, LoadError> {
    Err(LoadError::Schema {
        path: path.into(),
        message: message.into(),
    })
}

// ---------------------------------------------------------------------------
// Raw document types
// ---------------------------------------------------------------------------

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDef {
    pub id: String,
    pub tag: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub text: String,
    #[serde(rename = "box")]
    pub bbox: Rect,
    #[serde(default)]
    pub z: i32,
    #[serde(default = "default_true")]
    pub visible: bool,
    #[serde(default)]
    pub interactive: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntryDef {
    pub at_ms: u64,
    pub op: String,
    pub args: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyTable {
    #[serde(default)]
    pub decision_fields: Vec<String>,
    pub default: PolicyRecipe,
}

/// The raw scenario document. Kept verbatim inside the compiled scenario so
/// saving reproduces exactly what was loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDef {
    pub id: String,
    #[serde(rename = "type")]
    pub ty: ManipulationType,
    pub viewport: Rect,
    pub nodes: Vec<NodeDef>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, ValueScalar>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<ScheduleEntryDef>,
    pub task: Task,
    pub oracle: OracleSpec,
    pub policies: PolicyTable,
}

// Per-op argument schemas.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InsertArgs {
    parent: String,
    index: usize,
    root: String,
    nodes: Vec<NodeDef>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeArg {
    node: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetAttributeArgs {
    node: String,
    name: String,
    value: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetTextArgs {
    node: String,
    text: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetValueArgs {
    field: String,
    value: ValueScalar,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MoveResizeArgs {
    node: String,
    #[serde(rename = "box")]
    bbox: Rect,
    #[serde(default)]
    z: i32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetVisibilityArgs {
    node: String,
    visible: bool,
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, LoadError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_scenario_str(&raw)
}

pub fn load_scenario_str(raw: &str) -> Result<Scenario, LoadError> {
    let def: ScenarioDef = serde_json::from_str(raw)?;
    compile(def)
}

/// Serializes a scenario back to its document form.
pub fn save_scenario(scenario: &Scenario) -> String {
    serde_json::to_string_pretty(&scenario.def).expect("scenario def serializes")
}

struct Names {
    ids: BTreeMap<String, NodeId>,
    next: u64,
}

impl Names {
    fn assign(&mut self, name: &str, path: &str) -> Result<NodeId, LoadError> {
        if self.ids.contains_key(name) {
            return schema_err(path, format!("duplicate node name '{name}'"));
        }
        let id = NodeId(self.next);
        self.next += 1;
        self.ids.insert(name.to_string(), id);
        Ok(id)
    }

    fn resolve(&self, name: &str, path: &str) -> Result<NodeId, LoadError> {
        self.ids
            .get(name)
            .copied()
            .ok_or_else(|| LoadError::Schema {
                path: path.to_string(),
                message: format!("unknown node '{name}'"),
            })
    }
}

fn build_node(def: &NodeDef, id: NodeId, path: &str) -> Result<PageNode, LoadError> {
    let mut attrs = def.attrs.clone();
    attrs.entry("id".to_string()).or_insert(def.id.clone());
    if let Err(message) = runner::parse_node_effects(&attrs) {
        return schema_err(format!("{path}.attrs"), message);
    }
    Ok(PageNode {
        id,
        tag: def.tag.clone(),
        attrs,
        text: def.text.clone(),
        children: Vec::new(),
        bbox: def.bbox,
        z_index: def.z,
        visible: def.visible,
        interactive: def.interactive,
    })
}

fn compile(def: ScenarioDef) -> Result<Scenario, LoadError> {
    if def.nodes.is_empty() {
        return schema_err("nodes", "a scenario needs at least a root node");
    }

    let mut names = Names {
        ids: BTreeMap::new(),
        next: 1,
    };
    let mut nodes: BTreeMap<NodeId, PageNode> = BTreeMap::new();
    for (i, node_def) in def.nodes.iter().enumerate() {
        let path = format!("nodes[{i}]");
        let id = names.assign(&node_def.id, &path)?;
        nodes.insert(id, build_node(node_def, id, &path)?);
    }

    // Wire children and check the tree: single parent, no cycles, everything
    // except the root referenced exactly once.
    let mut referenced: BTreeMap<String, usize> = BTreeMap::new();
    for (i, node_def) in def.nodes.iter().enumerate() {
        let path = format!("nodes[{i}].children");
        let id = names.ids[&node_def.id];
        for child_name in &node_def.children {
            let child_id = names.resolve(child_name, &path)?;
            if child_id == id {
                return schema_err(&path, format!("node '{child_name}' is its own child"));
            }
            *referenced.entry(child_name.clone()).or_default() += 1;
            nodes
                .get_mut(&id)
                .expect("node exists")
                .children
                .push(child_id);
        }
    }
    let root_name = &def.nodes[0].id;
    if referenced.contains_key(root_name) {
        return schema_err("nodes", format!("root '{root_name}' may not be a child"));
    }
    for node_def in def.nodes.iter().skip(1) {
        match referenced.get(&node_def.id).copied().unwrap_or(0) {
            0 => {
                return schema_err(
                    "nodes",
                    format!("node '{}' is not attached to the tree", node_def.id),
                )
            }
            1 => {}
            n => return schema_err("nodes", format!("node '{}' has {n} parents", node_def.id)),
        }
    }

    let root_id = names.ids[root_name];
    let next_after_initial = names.next;
    let mut template = PageState::from_parts(
        def.viewport,
        nodes,
        root_id,
        def.values.clone(),
        next_after_initial,
    )
    .map_err(|e| LoadError::Schema {
        path: "nodes".to_string(),
        message: e.to_string(),
    })?;

    // Known value fields grow as we walk the schedule and effects.
    let mut known_fields: BTreeSet<String> = def.values.keys().cloned().collect();

    // Sync display-bound text with the values it mirrors.
    let display_bound: Vec<(NodeId, String)> = template
        .nodes
        .iter()
        .filter_map(|(id, n)| n.attrs.get(DISPLAYS_ATTR).map(|f| (*id, f.clone())))
        .collect();
    for (id, field) in &display_bound {
        let Some(value) = template.values.get(field).cloned() else {
            return schema_err(
                "nodes",
                format!("display binding references unknown value field '{field}'"),
            );
        };
        template.node_mut(*id).expect("node exists").text = value.display();
    }

    // Compile the schedule, dry-running name liveness as we go.
    let mut live: BTreeSet<String> = names.ids.keys().cloned().collect();
    let mut entries = Vec::new();
    let mut inserted_defs: Vec<NodeDef> = Vec::new();
    let mut last_at = 0u64;
    for (i, entry) in def.schedule.iter().enumerate() {
        let path = format!("schedule[{i}]");
        if i > 0 && entry.at_ms < last_at {
            return schema_err(
                &path,
                format!(
                    "entries must be sorted by at_ms ({} < {last_at})",
                    entry.at_ms
                ),
            );
        }
        last_at = entry.at_ms;
        let args = entry.args.clone();
        let mutation = match entry.op.as_str() {
            "insert_node" => {
                let args: InsertArgs = parse_args(args, &path)?;
                let parent = require_live(&names, &live, &args.parent, &path)?;
                let mut subtree_nodes = Vec::new();
                let mut local: BTreeMap<String, NodeId> = BTreeMap::new();
                for (j, node_def) in args.nodes.iter().enumerate() {
                    let node_path = format!("{path}.args.nodes[{j}]");
                    let id = names.assign(&node_def.id, &node_path)?;
                    local.insert(node_def.id.clone(), id);
                    live.insert(node_def.id.clone());
                    subtree_nodes.push(build_node(node_def, id, &node_path)?);
                    inserted_defs.push(node_def.clone());
                }
                // Children of inserted nodes must stay inside the subtree.
                for (j, node_def) in args.nodes.iter().enumerate() {
                    let node_path = format!("{path}.args.nodes[{j}].children");
                    let id = local[&node_def.id];
                    for child_name in &node_def.children {
                        let child_id = *local.get(child_name).ok_or_else(|| LoadError::Schema {
                            path: node_path.clone(),
                            message: format!(
                                "child '{child_name}' is not part of the inserted subtree"
                            ),
                        })?;
                        subtree_nodes
                            .iter_mut()
                            .find(|n| n.id == id)
                            .expect("node in subtree")
                            .children
                            .push(child_id);
                    }
                }
                let subtree_root = *local.get(&args.root).ok_or_else(|| LoadError::Schema {
                    path: format!("{path}.args.root"),
                    message: format!("root '{}' is not among the inserted nodes", args.root),
                })?;
                Mutation::InsertNode {
                    parent,
                    index: args.index,
                    subtree_root,
                    nodes: subtree_nodes,
                }
            }
            "remove_node" => {
                let args: NodeArg = parse_args(args, &path)?;
                let id = require_live(&names, &live, &args.node, &path)?;
                // The subtree goes away with it.
                remove_subtree_names(&def, &inserted_defs, &args.node, &mut live);
                Mutation::RemoveNode { node: id }
            }
            "set_attribute" => {
                let args: SetAttributeArgs = parse_args(args, &path)?;
                let node = require_live(&names, &live, &args.node, &path)?;
                Mutation::SetAttribute {
                    node,
                    name: args.name,
                    value: args.value,
                }
            }
            "set_text" => {
                let args: SetTextArgs = parse_args(args, &path)?;
                let node = require_live(&names, &live, &args.node, &path)?;
                Mutation::SetText {
                    node,
                    text: args.text,
                }
            }
            "set_value" => {
                let args: SetValueArgs = parse_args(args, &path)?;
                if !known_fields.contains(&args.field) {
                    return schema_err(
                        format!("{path}.args.field"),
                        format!("value field '{}' is not declared in values", args.field),
                    );
                }
                let displays = display_bound
                    .iter()
                    .filter(|(_, f)| *f == args.field)
                    .count();
                if displays != 1 {
                    return schema_err(
                        format!("{path}.args.field"),
                        format!(
                            "scheduled field '{}' must have exactly one display node, found {displays}",
                            args.field
                        ),
                    );
                }
                Mutation::SetValue {
                    field: args.field,
                    value: args.value,
                }
            }
            "move_resize" => {
                let args: MoveResizeArgs = parse_args(args, &path)?;
                let node = require_live(&names, &live, &args.node, &path)?;
                Mutation::MoveResize {
                    node,
                    bbox: args.bbox,
                    z_index: args.z,
                }
            }
            "set_visibility" => {
                let args: SetVisibilityArgs = parse_args(args, &path)?;
                let node = require_live(&names, &live, &args.node, &path)?;
                Mutation::SetVisibility {
                    node,
                    visible: args.visible,
                }
            }
            other => {
                return schema_err(format!("{path}.op"), format!("unknown op '{other}'"));
            }
        };
        entries.push(ScheduleEntry {
            at_ms: entry.at_ms,
            mutation,
        });
    }
    template.reserve_ids_through(names.next - 1);
    let schedule = MutationSchedule::from_entries(entries).map_err(|e| LoadError::Schema {
        path: "schedule".to_string(),
        message: e.to_string(),
    })?;

    // Effects can mint new fields; collect them before checking references.
    let all_node_defs: Vec<&NodeDef> = def.nodes.iter().chain(inserted_defs.iter()).collect();
    let mut nav_tags: BTreeSet<String> = BTreeSet::new();
    for node_def in &all_node_defs {
        let mut attrs = node_def.attrs.clone();
        attrs.entry("id".to_string()).or_insert(node_def.id.clone());
        let dsts = runner::effect_destinations(&attrs).map_err(|m| LoadError::Schema {
            path: format!("nodes({})", node_def.id),
            message: m,
        })?;
        known_fields.extend(dsts);
        for src in runner::effect_sources(&attrs).map_err(|m| LoadError::Schema {
            path: format!("nodes({})", node_def.id),
            message: m,
        })? {
            if !def.values.contains_key(&src) {
                return schema_err(
                    format!("nodes({})", node_def.id),
                    format!("effect reads undeclared value field '{src}'"),
                );
            }
        }
        if let Some(tag) = attrs.get(runner::NAV_ATTR) {
            nav_tags.insert(tag.trim().to_string());
            known_fields.insert(format!("visited_{}", tag.trim()));
        }
    }

    validate_policy(&def, &all_node_defs, &known_fields)?;
    validate_oracle(&def.oracle, &nav_tags, &known_fields, "oracle")?;

    let decision_fields: BTreeSet<String> = def.policies.decision_fields.iter().cloned().collect();
    for field in &decision_fields {
        if !known_fields.contains(field) {
            return schema_err(
                "policies.decision_fields",
                format!("unknown value field '{field}'"),
            );
        }
    }

    let policy = def.policies.default.clone();
    let validity = policy.validity_rule();

    Ok(Scenario {
        id: def.id.clone(),
        ty: def.ty,
        template,
        schedule,
        task: def.task.clone(),
        oracle: def.oracle.clone(),
        decision_fields,
        policy,
        validity,
        def,
    })
}

fn parse_args<T: serde::de::DeserializeOwned>(
    args: serde_json::Value,
    path: &str,
) -> Result<T, LoadError> {
    serde_json::from_value(args).map_err(|e| LoadError::Schema {
        path: format!("{path}.args"),
        message: e.to_string(),
    })
}

fn require_live(
    names: &Names,
    live: &BTreeSet<String>,
    name: &str,
    path: &str,
) -> Result<NodeId, LoadError> {
    let id = names.resolve(name, path)?;
    if !live.contains(name) {
        return schema_err(
            path,
            format!("node '{name}' was removed earlier in the schedule"),
        );
    }
    Ok(id)
}

fn remove_subtree_names(
    def: &ScenarioDef,
    inserted: &[NodeDef],
    root: &str,
    live: &mut BTreeSet<String>,
) {
    let children_of = |name: &str| -> Vec<String> {
        def.nodes
            .iter()
            .chain(inserted.iter())
            .find(|n| n.id == name)
            .map(|n| n.children.clone())
            .unwrap_or_default()
    };
    let mut stack = vec![root.to_string()];
    while let Some(name) = stack.pop() {
        if live.remove(&name) {
            stack.extend(children_of(&name));
        }
    }
}

fn validate_policy(
    def: &ScenarioDef,
    all_nodes: &[&NodeDef],
    known_fields: &BTreeSet<String>,
) -> Result<(), LoadError> {
    let recipe = &def.policies.default;
    let hint = recipe.target();
    if hint.selector.is_empty() {
        return schema_err("policies.default.target.selector", "selector is empty");
    }
    let selector_matches = all_nodes.iter().any(|n| {
        let mut attrs = n.attrs.clone();
        attrs.entry("id".to_string()).or_insert(n.id.clone());
        let tag_ok = hint
            .selector
            .tag
            .as_ref()
            .map(|t| *t == n.tag)
            .unwrap_or(true);
        tag_ok
            && hint
                .selector
                .attrs
                .iter()
                .all(|(k, v)| attrs.get(k) == Some(v))
    });
    if !selector_matches {
        return schema_err(
            "policies.default.target.selector",
            format!("selector '{}' matches no node", hint.selector),
        );
    }
    let label_matches = all_nodes.iter().any(|n| {
        if n.text == hint.label {
            return true;
        }
        // Display-bound nodes render their value, not their literal text.
        n.attrs
            .get(DISPLAYS_ATTR)
            .and_then(|f| def.values.get(f))
            .map(|v| v.display() == hint.label)
            .unwrap_or(false)
    });
    if !label_matches {
        return schema_err(
            "policies.default.target.label",
            format!("no node renders the label '{}'", hint.label),
        );
    }

    match recipe {
        PolicyRecipe::Click { gate, .. } => {
            if let Some(gate) = gate {
                if !known_fields.contains(&gate.field) {
                    return schema_err(
                        "policies.default.gate.field",
                        format!("unknown value field '{}'", gate.field),
                    );
                }
                if let ThresholdSource::Param(param) = &gate.threshold {
                    if !def.task.params.contains_key(param) {
                        return schema_err(
                            "policies.default.gate.threshold",
                            format!("task params do not define '{param}'"),
                        );
                    }
                }
            }
        }
        PolicyRecipe::SubmitCode {
            code_field,
            deadline_field,
            ..
        } => {
            if !def.values.contains_key(code_field) {
                return schema_err(
                    "policies.default.code_field",
                    format!("unknown value field '{code_field}'"),
                );
            }
            match def.values.get(deadline_field) {
                Some(ValueScalar::Int(_)) => {}
                Some(_) => {
                    return schema_err(
                        "policies.default.deadline_field",
                        format!("'{deadline_field}' must be an integer deadline"),
                    )
                }
                None => {
                    return schema_err(
                        "policies.default.deadline_field",
                        format!("unknown value field '{deadline_field}'"),
                    )
                }
            }
        }
    }
    Ok(())
}

fn validate_oracle(
    oracle: &OracleSpec,
    nav_tags: &BTreeSet<String>,
    known_fields: &BTreeSet<String>,
    path: &str,
) -> Result<(), LoadError> {
    match oracle {
        OracleSpec::ReachedTarget { tag } | OracleSpec::AvoidedTarget { tag } => {
            if !nav_tags.contains(tag) {
                return schema_err(
                    format!("{path}.tag"),
                    format!("no node navigates to '{tag}'"),
                );
            }
        }
        OracleSpec::PredicateRespected { field, .. } => {
            if !known_fields.contains(field) {
                return schema_err(
                    format!("{path}.field"),
                    format!("'{field}' is never declared or produced"),
                );
            }
        }
        OracleSpec::ActedBeforeDeadline { deadline_field } => {
            if !known_fields.contains(deadline_field) {
                return schema_err(
                    format!("{path}.deadline_field"),
                    format!("'{deadline_field}' is never declared"),
                );
            }
        }
        OracleSpec::AllOf { of } => {
            if of.is_empty() {
                return schema_err(format!("{path}.of"), "empty composite oracle");
            }
            for (i, sub) in of.iter().enumerate() {
                validate_oracle(sub, nav_tags, known_fields, &format!("{path}.of[{i}]"))?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Oracle evaluation
// ---------------------------------------------------------------------------

/// Evaluates a scenario's oracle against a finished run. Pure.
pub fn evaluate_oracle(scenario: &Scenario, result: &RunResult) -> bool {
    evaluate_oracle_parts(&scenario.oracle, &result.final_state, &result.traces)
}

pub(crate) fn evaluate_oracle_parts(
    oracle: &OracleSpec,
    final_state: &PageState,
    traces: &[StepTrace],
) -> bool {
    match oracle {
        OracleSpec::ReachedTarget { tag } => {
            final_state.values.get("page") == Some(&ValueScalar::Text(tag.clone()))
        }
        OracleSpec::AvoidedTarget { tag } => {
            final_state.values.get(&format!("visited_{tag}")) != Some(&ValueScalar::Bool(true))
        }
        OracleSpec::PredicateRespected {
            field,
            cmp,
            threshold,
        } => match final_state.values.get(field) {
            None => true,
            Some(value) => value
                .as_int()
                .map(|n| cmp.holds(n, *threshold))
                .unwrap_or(false),
        },
        OracleSpec::ActedBeforeDeadline { .. } => traces.iter().any(|t| {
            t.outcome == StepOutcome::Executed
                && t.use_binding.as_ref().map(|b| b.valid).unwrap_or(false)
        }),
        OracleSpec::AllOf { of } => of
            .iter()
            .all(|sub| evaluate_oracle_parts(sub, final_state, traces)),
    }
}

// ---------------------------------------------------------------------------
// Bundled suite
// ---------------------------------------------------------------------------

const BUNDLED: &[(&str, &str)] = &[
    ("s1", include_str!("../scenarios/s1_overlay_popup.json")),
    (
        "s2",
        include_str!("../scenarios/s2_sliding_advertisement.json"),
    ),
    (
        "s3",
        include_str!("../scenarios/s3_incomplete_loading.json"),
    ),
    (
        "s4",
        include_str!("../scenarios/s4_dynamic_ticket_price.json"),
    ),
    (
        "s5",
        include_str!("../scenarios/s5_dynamic_stock_price.json"),
    ),
    ("s6", include_str!("../scenarios/s6_item_availability.json")),
    ("s7", include_str!("../scenarios/s7_online_bidding.json")),
    ("s8", include_str!("../scenarios/s8_otp_expiry.json")),
    ("s9", include_str!("../scenarios/s9_captcha_timeout.json")),
];

pub fn bundled_ids() -> Vec<&'static str> {
    BUNDLED.iter().map(|(id, _)| *id).collect()
}

pub fn bundled_source(id: &str) -> Option<&'static str> {
    BUNDLED
        .iter()
        .find(|(bid, _)| *bid == id)
        .map(|(_, src)| *src)
}

/// Loads one bundled scenario by id (`s1` .. `s9`, case-insensitive).
pub fn load_bundled(id: &str) -> Result<Scenario, LoadError> {
    let key = id.to_ascii_lowercase();
    let source = bundled_source(&key).ok_or_else(|| LoadError::UnknownBundled(id.to_string()))?;
    load_scenario_str(source)
}

/// Loads the whole bundled suite in id order.
pub fn load_all_bundled() -> Result<Vec<Scenario>, LoadError> {
    bundled_ids().into_iter().map(load_bundled).collect()
}
