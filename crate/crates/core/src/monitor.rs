//! Change monitoring between observation and action: the validation channel.
//!
//! A [`MonitorSession`] plays the role of a MutationObserver plus a
//! ResizeObserver attached to the page snapshot an agent planned from. It
//! classifies raw engine events into mutation records (child-list, attribute,
//! text) and resize records (bounding-box changes of watched elements),
//! drops cosmetic attribute churn via an attribute filter, and releases
//! records only after a configurable delivery delay — modelling the
//! asynchronous hop real observer callbacks take through the event loop.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mutation::{EventSink, RawEvent};
use crate::page::{NodeId, PageState, Rect};

/// What the monitor watches and when records become drainable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObserverConfig {
    /// Attribute names that count as interaction-relevant. An entry ending in
    /// `*` matches by prefix (`aria-*` covers every accessibility
    /// descriptor). Everything else is treated as cosmetic and dropped.
    pub attribute_filter: BTreeSet<String>,
    pub watch_child_list: bool,
    pub watch_text: bool,
    pub watch_geometry: bool,
    /// Records become visible to `drain` only after this many virtual ms.
    pub delivery_delay_ms: u64,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        let attribute_filter = [
            "id", "class", "href", "src", "disabled", "hidden", "role", "aria-*",
        ]
        .into_iter()
        .map(str::to_string)
        .collect();
        Self {
            attribute_filter,
            watch_child_list: true,
            watch_text: true,
            watch_geometry: true,
            delivery_delay_ms: 0,
        }
    }
}

impl ObserverConfig {
    pub fn passes_filter(&self, name: &str) -> bool {
        self.attribute_filter
            .iter()
            .any(|entry| match entry.strip_suffix('*') {
                Some(prefix) => name.starts_with(prefix),
                None => entry == name,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MutationKind {
    ChildList,
    Attribute,
    Text,
}

/// A classified DOM-channel record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationRecord {
    pub at_ms: u64,
    pub kind: MutationKind,
    pub target: NodeId,
    pub attribute: Option<String>,
    pub old: Option<String>,
    pub new: Option<String>,
}

/// A geometry-channel record. `old_box != new_box` always holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResizeRecord {
    pub at_ms: u64,
    pub target: NodeId,
    pub old_box: Rect,
    pub new_box: Rect,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MonitorError {
    #[error("session was already detached")]
    Detached,
}

/// Monitoring state for one plan/validate cycle.
///
/// The observed set holds the nodes currently registered for geometry
/// observation: exactly the effectively visible ones. Membership follows
/// visibility as the page evolves — nodes register as they become visible and
/// deregister once they leave the viewport.
#[derive(Debug, Clone)]
pub struct MonitorSession {
    config: ObserverConfig,
    attached: bool,
    /// Clock of the snapshot the session was attached to.
    snapshot_clock: u64,
    snapshot_root: NodeId,
    observed: BTreeSet<NodeId>,
    pending_mutations: Vec<(u64, MutationRecord)>,
    pending_resizes: Vec<(u64, ResizeRecord)>,
}

/// Attaches monitors over the page as it stands: empty queues, observed set
/// seeded with every effectively visible node.
pub fn attach(state: &PageState, config: ObserverConfig) -> MonitorSession {
    let observed = state
        .nodes
        .keys()
        .filter(|id| state.is_effectively_visible(**id))
        .copied()
        .collect();
    MonitorSession {
        config,
        attached: true,
        snapshot_clock: state.clock,
        snapshot_root: state.root,
        observed,
        pending_mutations: Vec::new(),
        pending_resizes: Vec::new(),
    }
}

impl MonitorSession {
    pub fn is_attached(&self) -> bool {
        self.attached
    }

    pub fn snapshot_clock(&self) -> u64 {
        self.snapshot_clock
    }

    pub fn snapshot_root(&self) -> NodeId {
        self.snapshot_root
    }

    pub fn observed_set(&self) -> &BTreeSet<NodeId> {
        &self.observed
    }

    /// Classifies one raw event. Events on a detached session are ignored.
    /// `page` is the state immediately after the change; it drives observed
    /// set maintenance.
    pub fn ingest(&mut self, at_ms: u64, event: &RawEvent, page: &PageState) {
        if !self.attached {
            return;
        }
        let deliver_at = at_ms + self.config.delivery_delay_ms;
        match event {
            RawEvent::ChildList {
                target,
                added,
                removed,
            } => {
                if self.config.watch_child_list {
                    let render = |ids: &[NodeId]| {
                        if ids.is_empty() {
                            None
                        } else {
                            Some(
                                ids.iter()
                                    .map(|id| id.to_string())
                                    .collect::<Vec<_>>()
                                    .join(","),
                            )
                        }
                    };
                    self.pending_mutations.push((
                        deliver_at,
                        MutationRecord {
                            at_ms,
                            kind: MutationKind::ChildList,
                            target: *target,
                            attribute: None,
                            old: render(removed),
                            new: render(added),
                        },
                    ));
                }
            }
            RawEvent::Attribute {
                target,
                name,
                old,
                new,
            } => {
                if self.config.passes_filter(name) {
                    self.pending_mutations.push((
                        deliver_at,
                        MutationRecord {
                            at_ms,
                            kind: MutationKind::Attribute,
                            target: *target,
                            attribute: Some(name.clone()),
                            old: old.clone(),
                            new: new.clone(),
                        },
                    ));
                }
                // else: cosmetic, dropped.
            }
            RawEvent::Text { target, old, new } => {
                if self.config.watch_text {
                    self.pending_mutations.push((
                        deliver_at,
                        MutationRecord {
                            at_ms,
                            kind: MutationKind::Text,
                            target: *target,
                            attribute: None,
                            old: Some(old.clone()),
                            new: Some(new.clone()),
                        },
                    ));
                }
            }
            RawEvent::Geometry {
                target,
                old_box,
                new_box,
            } => {
                // Report if the node was registered before the change or
                // became registered by it: an element sliding into view is
                // registered as it becomes visible and reports its new box.
                let was_observed = self.observed.contains(target);
                let now_observed = page.is_effectively_visible(*target);
                if self.config.watch_geometry
                    && (was_observed || now_observed)
                    && old_box != new_box
                {
                    self.pending_resizes.push((
                        deliver_at,
                        ResizeRecord {
                            at_ms,
                            target: *target,
                            old_box: *old_box,
                            new_box: *new_box,
                        },
                    ));
                }
            }
        }
        self.refresh_observed(page);
    }

    fn refresh_observed(&mut self, page: &PageState) {
        self.observed = page
            .nodes
            .keys()
            .filter(|id| page.is_effectively_visible(**id))
            .copied()
            .collect();
    }

    /// Returns and clears every record whose delivery time is `<= now`.
    /// Later records stay queued for a later drain.
    pub fn drain(
        &mut self,
        now: u64,
    ) -> Result<(Vec<MutationRecord>, Vec<ResizeRecord>), MonitorError> {
        if !self.attached {
            return Err(MonitorError::Detached);
        }
        let mut due_mutations = Vec::new();
        self.pending_mutations.retain(|(deliver_at, record)| {
            if *deliver_at <= now {
                due_mutations.push(record.clone());
                false
            } else {
                true
            }
        });
        let mut due_resizes = Vec::new();
        self.pending_resizes.retain(|(deliver_at, record)| {
            if *deliver_at <= now {
                due_resizes.push(record.clone());
                false
            } else {
                true
            }
        });
        Ok((due_mutations, due_resizes))
    }

    /// Stops ingestion. Idempotent; queued records are discarded.
    pub fn detach(&mut self) {
        self.attached = false;
        self.pending_mutations.clear();
        self.pending_resizes.clear();
        self.observed.clear();
    }
}

impl EventSink for MonitorSession {
    fn on_event(&mut self, at_ms: u64, event: &RawEvent, page: &PageState) {
        self.ingest(at_ms, event, page);
    }
}
