//! Timed, deterministic page mutations — the site/adversary dynamics that
//! evolve the page while an agent is planning.
//!
//! Every mutation application yields raw change events; monitors consume
//! those events through the [`EventSink`] trait. The engine itself never
//! touches wall-clock time: schedules fire on the page's virtual clock only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::page::{NodeId, PageError, PageNode, PageState, Rect, ValueScalar};

/// Attribute on a node that binds its rendered text to a semantic value.
/// When the value changes, the node's text is rewritten in the same step so
/// structured and screenshot observations stay in agreement.
pub const DISPLAYS_ATTR: &str = "data-displays";

/// One page change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    /// Insert a pre-built subtree under `parent` at child position `index`.
    InsertNode {
        parent: NodeId,
        index: usize,
        subtree_root: NodeId,
        nodes: Vec<PageNode>,
    },
    RemoveNode {
        node: NodeId,
    },
    SetAttribute {
        node: NodeId,
        name: String,
        value: String,
    },
    SetText {
        node: NodeId,
        text: String,
    },
    SetValue {
        field: String,
        value: ValueScalar,
    },
    MoveResize {
        node: NodeId,
        bbox: Rect,
        z_index: i32,
    },
    SetVisibility {
        node: NodeId,
        visible: bool,
    },
}

/// Raw change notification emitted by [`apply`]. This is the unfiltered feed;
/// classification and filtering happen in the monitoring layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawEvent {
    ChildList {
        target: NodeId,
        added: Vec<NodeId>,
        removed: Vec<NodeId>,
    },
    Attribute {
        target: NodeId,
        name: String,
        old: Option<String>,
        new: Option<String>,
    },
    Text {
        target: NodeId,
        old: String,
        new: String,
    },
    Geometry {
        target: NodeId,
        old_box: Rect,
        new_box: Rect,
    },
}

/// A mutation pinned to a virtual time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub at_ms: u64,
    pub mutation: Mutation,
}

/// Time-sorted list of scheduled mutations. Entries at equal times apply in
/// list order. Replaying the same schedule over the same initial state yields
/// byte-identical serialized final states.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationSchedule {
    entries: Vec<ScheduleEntry>,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("schedule entry targets missing node: {0}")]
    DanglingNode(#[from] PageError),
    #[error("schedule entries are not sorted by time (entry {index} at {at_ms}ms)")]
    UnsortedSchedule { index: usize, at_ms: u64 },
    #[error("cannot advance backwards: clock is {clock}ms, requested {to}ms")]
    TimeReversal { clock: u64, to: u64 },
    #[error("the root node cannot be removed")]
    RemoveRoot,
}

impl MutationSchedule {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<ScheduleEntry>) -> Result<Self, EngineError> {
        for (index, pair) in entries.windows(2).enumerate() {
            if pair[1].at_ms < pair[0].at_ms {
                return Err(EngineError::UnsortedSchedule {
                    index: index + 1,
                    at_ms: pair[1].at_ms,
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    /// Number of entries with `from < at <= to`.
    pub fn entries_in_window(&self, from: u64, to: u64) -> usize {
        self.entries
            .iter()
            .filter(|e| e.at_ms > from && e.at_ms <= to)
            .count()
    }
}

/// Receives raw events as they are applied, together with the virtual time of
/// the change and the page state immediately after it.
pub trait EventSink {
    fn on_event(&mut self, at_ms: u64, event: &RawEvent, page: &PageState);
}

/// Sink that drops everything; used when no monitor is attached.
pub struct NullSink;

impl EventSink for NullSink {
    fn on_event(&mut self, _at_ms: u64, _event: &RawEvent, _page: &PageState) {}
}

/// Applies one mutation to the page and returns the raw events it produced.
/// The clock is untouched. Dangling targets abort with an error; they are
/// never skipped silently.
pub fn apply(state: &mut PageState, mutation: &Mutation) -> Result<Vec<RawEvent>, EngineError> {
    match mutation {
        Mutation::InsertNode {
            parent,
            index,
            subtree_root,
            nodes,
        } => {
            state.insert_subtree(*parent, *index, *subtree_root, nodes.clone())?;
            Ok(vec![RawEvent::ChildList {
                target: *parent,
                added: vec![*subtree_root],
                removed: vec![],
            }])
        }
        Mutation::RemoveNode { node } => {
            if *node == state.root {
                return Err(EngineError::RemoveRoot);
            }
            let parent = state
                .parent_of(*node)
                .ok_or(PageError::UnknownNode(*node))?;
            state.remove_subtree(*node)?;
            Ok(vec![RawEvent::ChildList {
                target: parent,
                added: vec![],
                removed: vec![*node],
            }])
        }
        Mutation::SetAttribute { node, name, value } => {
            let n = state.node_mut(*node).ok_or(PageError::UnknownNode(*node))?;
            let old = n.attrs.insert(name.clone(), value.clone());
            Ok(vec![RawEvent::Attribute {
                target: *node,
                name: name.clone(),
                old,
                new: Some(value.clone()),
            }])
        }
        Mutation::SetText { node, text } => {
            let n = state.node_mut(*node).ok_or(PageError::UnknownNode(*node))?;
            let old = std::mem::replace(&mut n.text, text.clone());
            Ok(vec![RawEvent::Text {
                target: *node,
                old,
                new: text.clone(),
            }])
        }
        Mutation::SetValue { field, value } => {
            // First-time writes (purchase markers etc.) are allowed; they
            // simply have no display binding yet.
            state.values.insert(field.clone(), value.clone());
            // Rewrite any bound display text so what the page shows matches
            // what it is.
            let bound: Vec<NodeId> = state
                .nodes
                .iter()
                .filter(|(_, n)| n.attrs.get(DISPLAYS_ATTR) == Some(field))
                .map(|(id, _)| *id)
                .collect();
            let mut events = Vec::new();
            for id in bound {
                let n = state.node_mut(id).expect("bound node exists");
                let old = std::mem::replace(&mut n.text, value.display());
                events.push(RawEvent::Text {
                    target: id,
                    old,
                    new: value.display(),
                });
            }
            Ok(events)
        }
        Mutation::MoveResize {
            node,
            bbox,
            z_index,
        } => {
            let n = state.node_mut(*node).ok_or(PageError::UnknownNode(*node))?;
            let old_box = n.bbox;
            let old_z = n.z_index;
            n.bbox = *bbox;
            n.z_index = *z_index;
            if old_box != *bbox {
                Ok(vec![RawEvent::Geometry {
                    target: *node,
                    old_box,
                    new_box: *bbox,
                }])
            } else if old_z != *z_index {
                // A pure restack leaves every box unchanged. Real pages do
                // this through a class flip, so it surfaces on the DOM
                // channel rather than the geometry channel.
                Ok(vec![RawEvent::Attribute {
                    target: *node,
                    name: "class".to_string(),
                    old: Some(format!("stack-{old_z}")),
                    new: Some(format!("stack-{z_index}")),
                }])
            } else {
                Ok(vec![])
            }
        }
        Mutation::SetVisibility { node, visible } => {
            let n = state.node_mut(*node).ok_or(PageError::UnknownNode(*node))?;
            let old = n.visible;
            n.visible = *visible;
            Ok(vec![RawEvent::Attribute {
                target: *node,
                name: "hidden".to_string(),
                old: Some((!old).to_string()),
                new: Some((!visible).to_string()),
            }])
        }
    }
}

/// Advances the page clock to `to`, applying every schedule entry with
/// `clock < at_ms <= to` in order and feeding each raw event to `sink`.
/// Returns the applied mutations.
pub fn advance(
    state: &mut PageState,
    schedule: &MutationSchedule,
    to: u64,
    sink: &mut dyn EventSink,
) -> Result<Vec<Mutation>, EngineError> {
    if to < state.clock {
        return Err(EngineError::TimeReversal {
            clock: state.clock,
            to,
        });
    }
    let from = state.clock;
    let mut applied = Vec::new();
    for entry in schedule.entries() {
        if entry.at_ms <= from {
            continue;
        }
        if entry.at_ms > to {
            break;
        }
        state.set_clock(entry.at_ms);
        let events = apply(state, &entry.mutation)?;
        for event in &events {
            sink.on_event(entry.at_ms, event, state);
        }
        applied.push(entry.mutation.clone());
    }
    state.set_clock(to);
    Ok(applied)
}
