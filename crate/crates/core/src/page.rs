//! Simplified deterministic page model: a node tree with integer geometry,
//! stacking levels, visibility flags, and a virtual clock.
//!
//! The model keeps just enough of a rendered page to decide what a click
//! lands on (containment + stacking) and what an agent can read (tree,
//! attributes, text, and a semantic value map for decision-relevant numbers
//! like prices or stock counts). Two visibility notions are distinguished:
//!
//! * *flag-visible*: the node and all of its ancestors have `visible = true`
//!   (the `display: none` analog). Element-level clicks only require this,
//!   since automation drivers scroll targets into view.
//! * *effectively visible*: flag-visible and the node's box intersects the
//!   viewport. Hit-testing, screenshot observations, and geometry monitoring
//!   all use this notion — it is what is actually painted on screen.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stable identity of a node within one page. Never reused after removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Axis-aligned rectangle in viewport pixels. Serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[i64; 4]", into = "[i64; 4]")]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
}

impl Rect {
    pub fn new(x: i32, y: i32, w: i32, h: i32) -> Result<Self, PageError> {
        if w < 0 || h < 0 {
            return Err(PageError::NegativeExtent { w, h });
        }
        Ok(Self { x, y, w, h })
    }

    /// Half-open containment: `[x, x+w) x [y, y+h)`.
    pub fn contains(&self, px: i32, py: i32) -> bool {
        px >= self.x && py >= self.y && px < self.x + self.w && py < self.y + self.h
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.x + other.w
            && other.x < self.x + self.w
            && self.y < other.y + other.h
            && other.y < self.y + self.h
    }

    pub fn center(&self) -> (i32, i32) {
        (self.x + self.w / 2, self.y + self.h / 2)
    }
}

impl TryFrom<[i64; 4]> for Rect {
    type Error = String;

    fn try_from(v: [i64; 4]) -> Result<Self, String> {
        let as_i32 = |n: i64| -> Result<i32, String> {
            i32::try_from(n).map_err(|_| format!("coordinate {n} out of range"))
        };
        let r = Rect {
            x: as_i32(v[0])?,
            y: as_i32(v[1])?,
            w: as_i32(v[2])?,
            h: as_i32(v[3])?,
        };
        if r.w < 0 || r.h < 0 {
            return Err(format!("negative extent: w={} h={}", r.w, r.h));
        }
        Ok(r)
    }
}

impl From<Rect> for [i64; 4] {
    fn from(r: Rect) -> Self {
        [r.x as i64, r.y as i64, r.w as i64, r.h as i64]
    }
}

/// A decision-relevant displayed value (price, stock count, code, ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueScalar {
    Bool(bool),
    Int(i64),
    Text(String),
}

impl ValueScalar {
    /// Rendering used for display-bound text nodes.
    pub fn display(&self) -> String {
        match self {
            ValueScalar::Bool(b) => b.to_string(),
            ValueScalar::Int(n) => n.to_string(),
            ValueScalar::Text(s) => s.clone(),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            ValueScalar::Int(n) => Some(*n),
            _ => None,
        }
    }
}

/// One element of the page tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageNode {
    pub id: NodeId,
    /// Role label such as "button", "link", "overlay", "text".
    pub tag: String,
    #[serde(default)]
    pub attrs: BTreeMap<String, String>,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub children: Vec<NodeId>,
    pub bbox: Rect,
    #[serde(default)]
    pub z_index: i32,
    pub visible: bool,
    pub interactive: bool,
}

/// The live page: tree, geometry, semantic values, and a virtual clock.
///
/// The clock is in integer milliseconds and only ever moves forward; all page
/// dynamics are driven by explicit schedules so identical inputs replay to
/// byte-identical serialized states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageState {
    pub nodes: BTreeMap<NodeId, PageNode>,
    pub root: NodeId,
    pub viewport: Rect,
    /// Virtual time in milliseconds.
    pub clock: u64,
    pub values: BTreeMap<String, ValueScalar>,
    next_id: u64,
}

/// Errors from page queries and construction.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PageError {
    #[error("point ({x}, {y}) lies outside the viewport")]
    PointOutsideViewport { x: i32, y: i32 },
    #[error("selector matches nothing by construction (no tag and no attributes)")]
    MalformedSelector,
    #[error("rectangle has negative extent: w={w} h={h}")]
    NegativeExtent { w: i32, h: i32 },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} already exists")]
    DuplicateNode(NodeId),
}

impl PageState {
    /// Creates a page containing only `root`. The root's id is allocated here.
    pub fn new(viewport: Rect, mut root: PageNode) -> Self {
        let root_id = NodeId(1);
        root.id = root_id;
        root.children.clear();
        let mut nodes = BTreeMap::new();
        nodes.insert(root_id, root);
        Self {
            nodes,
            root: root_id,
            viewport,
            clock: 0,
            values: BTreeMap::new(),
            next_id: 2,
        }
    }

    /// Builds a page from pre-assembled parts. Used by the scenario loader,
    /// which allocates node ids itself.
    pub fn from_parts(
        viewport: Rect,
        nodes: BTreeMap<NodeId, PageNode>,
        root: NodeId,
        values: BTreeMap<String, ValueScalar>,
        next_id: u64,
    ) -> Result<Self, PageError> {
        if !nodes.contains_key(&root) {
            return Err(PageError::UnknownNode(root));
        }
        let state = Self {
            nodes,
            root,
            viewport,
            clock: 0,
            values,
            next_id,
        };
        for node in state.nodes.values() {
            for child in &node.children {
                if !state.nodes.contains_key(child) {
                    return Err(PageError::UnknownNode(*child));
                }
            }
        }
        Ok(state)
    }

    pub fn node(&self, id: NodeId) -> Option<&PageNode> {
        self.nodes.get(&id)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut PageNode> {
        self.nodes.get_mut(&id)
    }

    pub fn allocate_id(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Reserves all ids up to and including `max`, so externally assigned ids
    /// are never reallocated later in the run.
    pub fn reserve_ids_through(&mut self, max: u64) {
        if self.next_id <= max {
            self.next_id = max + 1;
        }
    }

    pub fn set_clock(&mut self, clock: u64) {
        debug_assert!(clock >= self.clock, "virtual clock may not move backwards");
        self.clock = clock;
    }

    /// Depth-first pre-order traversal from the root; this is document order
    /// and doubles as painting order for equal stacking levels.
    pub fn document_order(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if let Some(node) = self.nodes.get(&id) {
                out.push(id);
                for child in node.children.iter().rev() {
                    stack.push(*child);
                }
            }
        }
        out
    }

    pub fn parent_of(&self, id: NodeId) -> Option<NodeId> {
        self.nodes
            .iter()
            .find(|(_, n)| n.children.contains(&id))
            .map(|(pid, _)| *pid)
    }

    /// True when the node and all of its ancestors carry `visible = true`.
    pub fn is_flag_visible(&self, id: NodeId) -> bool {
        let mut current = id;
        loop {
            let Some(node) = self.nodes.get(&current) else {
                return false;
            };
            if !node.visible {
                return false;
            }
            if current == self.root {
                return true;
            }
            match self.parent_of(current) {
                Some(parent) => current = parent,
                // Detached from the document tree.
                None => return false,
            }
        }
    }

    /// Flag-visible and painted inside the viewport.
    pub fn is_effectively_visible(&self, id: NodeId) -> bool {
        self.is_flag_visible(id)
            && self
                .nodes
                .get(&id)
                .map(|n| n.bbox.intersects(&self.viewport))
                .unwrap_or(false)
    }

    /// Returns the visible, interactive node under `point` with the highest
    /// stacking level; ties are broken by later document position (painting
    /// order). `None` when no interactive node is painted there.
    pub fn hit_test(&self, point: (i32, i32)) -> Result<Option<NodeId>, PageError> {
        if !self.viewport.contains(point.0, point.1) {
            return Err(PageError::PointOutsideViewport {
                x: point.0,
                y: point.1,
            });
        }
        let mut best: Option<(i32, usize, NodeId)> = None;
        for (position, id) in self.document_order().iter().enumerate() {
            let node = &self.nodes[id];
            if !node.interactive
                || !node.bbox.contains(point.0, point.1)
                || !self.is_effectively_visible(*id)
            {
                continue;
            }
            let key = (node.z_index, position);
            if best.map(|(z, p, _)| key >= (z, p)).unwrap_or(true) {
                best = Some((node.z_index, position, *id));
            }
        }
        Ok(best.map(|(_, _, id)| id))
    }

    /// Resolves a selector to the first matching node in document order.
    pub fn resolve_selector(&self, selector: &Selector) -> Result<Option<NodeId>, PageError> {
        if selector.is_empty() {
            return Err(PageError::MalformedSelector);
        }
        Ok(self
            .document_order()
            .into_iter()
            .find(|id| selector.matches(&self.nodes[id])))
    }

    /// Captures an observation of the current state. Never mutates the page;
    /// the result records the clock as its capture time.
    pub fn observe(&self, mode: ObservationMode) -> Observation {
        let structured = match mode {
            ObservationMode::Structured | ObservationMode::Hybrid => Some(self.structured_view()),
            ObservationMode::Screenshot => None,
        };
        let screenshot = match mode {
            ObservationMode::Screenshot | ObservationMode::Hybrid => Some(self.screenshot_view()),
            ObservationMode::Structured => None,
        };
        Observation {
            mode,
            captured_at: self.clock,
            structured,
            screenshot,
            values: self.values.clone(),
        }
    }

    fn structured_view(&self) -> StructuredView {
        let mut nodes = BTreeMap::new();
        for id in self.document_order() {
            let n = &self.nodes[&id];
            nodes.insert(
                id,
                StructuredNode {
                    id,
                    tag: n.tag.clone(),
                    attrs: n.attrs.clone(),
                    text: n.text.clone(),
                    children: n.children.clone(),
                    visible: n.visible,
                    interactive: n.interactive,
                },
            );
        }
        StructuredView {
            root: self.root,
            nodes,
        }
    }

    fn screenshot_view(&self) -> ScreenshotView {
        let items = self
            .document_order()
            .into_iter()
            .filter(|id| self.is_effectively_visible(*id))
            .map(|id| {
                let n = &self.nodes[&id];
                ScreenshotItem {
                    label: n.text.clone(),
                    tag: n.tag.clone(),
                    bbox: n.bbox,
                    z_index: n.z_index,
                    interactive: n.interactive,
                }
            })
            .collect();
        ScreenshotView {
            viewport: self.viewport,
            items,
        }
    }

    /// Detaches `id` from its parent and drops the whole subtree.
    /// Returns the removed ids in document order.
    pub fn remove_subtree(&mut self, id: NodeId) -> Result<Vec<NodeId>, PageError> {
        if !self.nodes.contains_key(&id) {
            return Err(PageError::UnknownNode(id));
        }
        if let Some(parent) = self.parent_of(id) {
            let parent = self.nodes.get_mut(&parent).expect("parent exists");
            parent.children.retain(|c| *c != id);
        }
        let mut removed = Vec::new();
        let mut stack = vec![id];
        while let Some(current) = stack.pop() {
            if let Some(node) = self.nodes.remove(&current) {
                removed.push(current);
                stack.extend(node.children.iter().rev());
            }
        }
        Ok(removed)
    }

    /// Inserts a pre-built subtree under `parent` at `index` (clamped to the
    /// child count). All node ids must be fresh.
    pub fn insert_subtree(
        &mut self,
        parent: NodeId,
        index: usize,
        subtree_root: NodeId,
        nodes: Vec<PageNode>,
    ) -> Result<(), PageError> {
        if !self.nodes.contains_key(&parent) {
            return Err(PageError::UnknownNode(parent));
        }
        if !nodes.iter().any(|n| n.id == subtree_root) {
            return Err(PageError::UnknownNode(subtree_root));
        }
        let mut max_id = 0;
        for node in &nodes {
            if self.nodes.contains_key(&node.id) {
                return Err(PageError::DuplicateNode(node.id));
            }
            max_id = max_id.max(node.id.0);
        }
        for node in nodes {
            self.nodes.insert(node.id, node);
        }
        self.reserve_ids_through(max_id);
        let parent_node = self.nodes.get_mut(&parent).expect("parent exists");
        let at = index.min(parent_node.children.len());
        parent_node.children.insert(at, subtree_root);
        Ok(())
    }
}

/// Attribute-equality selector, optionally constrained by tag.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selector {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, String>,
}

impl Selector {
    pub fn by_attr(name: &str, value: &str) -> Self {
        let mut attrs = BTreeMap::new();
        attrs.insert(name.to_string(), value.to_string());
        Self { tag: None, attrs }
    }

    pub fn is_empty(&self) -> bool {
        self.tag.is_none() && self.attrs.is_empty()
    }

    pub fn matches(&self, node: &PageNode) -> bool {
        if let Some(tag) = &self.tag {
            if &node.tag != tag {
                return false;
            }
        }
        self.attrs.iter().all(|(k, v)| node.attrs.get(k) == Some(v))
    }
}

impl std::fmt::Display for Selector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(tag) = &self.tag {
            write!(f, "{tag}")?;
        }
        for (k, v) in &self.attrs {
            write!(f, "[{k}={v}]")?;
        }
        Ok(())
    }
}

/// What the agent perceives of the page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    Structured,
    Screenshot,
    Hybrid,
}

/// A captured observation. Structured exposes identities and attributes but
/// no geometry; screenshot exposes painted geometry and text but no node
/// identities; hybrid exposes both. All modes expose the semantic values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub mode: ObservationMode,
    /// Capture time: the page clock at observation.
    pub captured_at: u64,
    pub structured: Option<StructuredView>,
    pub screenshot: Option<ScreenshotView>,
    pub values: BTreeMap<String, ValueScalar>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredView {
    pub root: NodeId,
    pub nodes: BTreeMap<NodeId, StructuredNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredNode {
    pub id: NodeId,
    pub tag: String,
    pub attrs: BTreeMap<String, String>,
    pub text: String,
    pub children: Vec<NodeId>,
    pub visible: bool,
    pub interactive: bool,
}

impl StructuredView {
    /// First selector match in document order, mirroring live resolution.
    pub fn resolve_selector(&self, selector: &Selector) -> Option<NodeId> {
        let mut stack = vec![self.root];
        let mut order = Vec::new();
        while let Some(id) = stack.pop() {
            if let Some(node) = self.nodes.get(&id) {
                order.push(id);
                for child in node.children.iter().rev() {
                    stack.push(*child);
                }
            }
        }
        order.into_iter().find(|id| {
            let n = &self.nodes[id];
            if let Some(tag) = &selector.tag {
                if &n.tag != tag {
                    return false;
                }
            }
            selector
                .attrs
                .iter()
                .all(|(k, v)| n.attrs.get(k) == Some(v))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenshotView {
    pub viewport: Rect,
    /// Painted items in document order. No node identities.
    pub items: Vec<ScreenshotItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenshotItem {
    /// Rendered text of the node.
    pub label: String,
    /// Visual role hint (a screenshot does show what something looks like).
    pub tag: String,
    pub bbox: Rect,
    pub z_index: i32,
    pub interactive: bool,
}

impl ScreenshotView {
    /// Locates the first painted item with the given rendered label.
    pub fn find_label(&self, label: &str) -> Option<&ScreenshotItem> {
        self.items.iter().find(|item| item.label == label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x: i32, y: i32, w: i32, h: i32) -> Rect {
        Rect::new(x, y, w, h).unwrap()
    }

    fn basic_node(tag: &str, bbox: Rect, interactive: bool) -> PageNode {
        PageNode {
            id: NodeId(0),
            tag: tag.to_string(),
            attrs: BTreeMap::new(),
            text: String::new(),
            children: Vec::new(),
            bbox,
            z_index: 0,
            visible: true,
            interactive,
        }
    }

    /// Page with one button at (0,0,100,40) inside an 800x600 viewport.
    fn single_button_page() -> (PageState, NodeId) {
        let mut page = PageState::new(
            rect(0, 0, 800, 600),
            basic_node("page", rect(0, 0, 800, 600), false),
        );
        let button_id = page.allocate_id();
        let mut button = basic_node("button", rect(0, 0, 100, 40), true);
        button.id = button_id;
        button.attrs.insert("id".into(), "btn".into());
        page.nodes.insert(button_id, button);
        let root = page.root;
        page.node_mut(root).unwrap().children.push(button_id);
        (page, button_id)
    }

    #[test]
    fn hit_test_single_button() {
        let (page, button) = single_button_page();
        assert_eq!(page.hit_test((10, 10)).unwrap(), Some(button));
    }

    #[test]
    fn hit_test_overlay_wins_by_z_index() {
        let (mut page, button) = single_button_page();
        let overlay_id = page.allocate_id();
        let mut overlay = basic_node("overlay", rect(0, 0, 200, 200), true);
        overlay.id = overlay_id;
        overlay.z_index = 10;
        page.nodes.insert(overlay_id, overlay);
        let root = page.root;
        page.node_mut(root).unwrap().children.push(overlay_id);

        // Frozen from the brute-force rule: max (z_index, document position)
        // over visible interactive nodes containing the point.
        assert_eq!(page.hit_test((10, 10)).unwrap(), Some(overlay_id));
        assert_ne!(page.hit_test((10, 10)).unwrap(), Some(button));
    }

    #[test]
    fn hit_test_empty_region() {
        let (page, _) = single_button_page();
        assert_eq!(page.hit_test((500, 500)).unwrap(), None);
    }

    #[test]
    fn hit_test_outside_viewport_is_range_error() {
        let (page, _) = single_button_page();
        assert_eq!(
            page.hit_test((900, 10)),
            Err(PageError::PointOutsideViewport { x: 900, y: 10 })
        );
    }

    #[test]
    fn hit_test_tie_broken_by_document_order() {
        let (mut page, first) = single_button_page();
        // Same z, same area, later in document order: painted on top.
        let second_id = page.allocate_id();
        let mut second = basic_node("button", rect(0, 0, 100, 40), true);
        second.id = second_id;
        page.nodes.insert(second_id, second);
        let root = page.root;
        page.node_mut(root).unwrap().children.push(second_id);

        assert_eq!(page.hit_test((10, 10)).unwrap(), Some(second_id));
        assert_ne!(page.hit_test((10, 10)).unwrap(), Some(first));
    }

    #[test]
    fn invisible_and_ancestor_hidden_nodes_never_hit() {
        let (mut page, button) = single_button_page();
        page.node_mut(button).unwrap().visible = false;
        assert_eq!(page.hit_test((10, 10)).unwrap(), None);

        page.node_mut(button).unwrap().visible = true;
        let root = page.root;
        page.node_mut(root).unwrap().visible = false;
        assert_eq!(page.hit_test((10, 10)).unwrap(), None);
    }

    #[test]
    fn selector_first_match_in_document_order() {
        let (mut page, first) = single_button_page();
        page.node_mut(first)
            .unwrap()
            .attrs
            .insert("class".into(), "item".into());
        let second_id = page.allocate_id();
        let mut second = basic_node("div", rect(0, 100, 50, 50), false);
        second.id = second_id;
        second.attrs.insert("class".into(), "item".into());
        page.nodes.insert(second_id, second);
        let root = page.root;
        page.node_mut(root).unwrap().children.push(second_id);

        let sel = Selector::by_attr("class", "item");
        assert_eq!(page.resolve_selector(&sel).unwrap(), Some(first));
    }

    #[test]
    fn selector_no_match_and_malformed() {
        let page = PageState::new(
            rect(0, 0, 100, 100),
            basic_node("page", rect(0, 0, 100, 100), false),
        );
        let sel = Selector::by_attr("id", "missing");
        assert_eq!(page.resolve_selector(&sel).unwrap(), None);
        assert_eq!(
            page.resolve_selector(&Selector::default()),
            Err(PageError::MalformedSelector)
        );
    }

    #[test]
    fn observe_modes_expose_expected_fields() {
        let (mut page, button) = single_button_page();
        page.node_mut(button).unwrap().text = "Buy".into();
        page.values.insert("price".into(), ValueScalar::Int(500));

        let structured = page.observe(ObservationMode::Structured);
        assert!(structured.structured.is_some());
        assert!(structured.screenshot.is_none());
        assert_eq!(structured.values.get("price"), Some(&ValueScalar::Int(500)));

        let shot = page.observe(ObservationMode::Screenshot);
        assert!(shot.structured.is_none());
        let view = shot.screenshot.unwrap();
        let item = view.find_label("Buy").unwrap();
        assert_eq!(item.bbox, rect(0, 0, 100, 40));

        let hybrid = page.observe(ObservationMode::Hybrid);
        assert!(hybrid.structured.is_some() && hybrid.screenshot.is_some());
        assert_eq!(hybrid.captured_at, page.clock);
    }

    #[test]
    fn observe_is_pure_and_repeatable() {
        let (page, _) = single_button_page();
        let before = serde_json::to_string(&page).unwrap();
        let a = page.observe(ObservationMode::Hybrid);
        let b = page.observe(ObservationMode::Hybrid);
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&page).unwrap(), before);
    }

    #[test]
    fn screenshot_hides_offscreen_nodes() {
        let (mut page, button) = single_button_page();
        page.node_mut(button).unwrap().text = "Ad".into();
        page.node_mut(button).unwrap().bbox = rect(900, 0, 100, 40);
        let view = page
            .observe(ObservationMode::Screenshot)
            .screenshot
            .unwrap();
        assert!(view.find_label("Ad").is_none());
    }

    #[test]
    fn remove_subtree_excludes_descendants_from_queries() {
        let (mut page, button) = single_button_page();
        let child_id = page.allocate_id();
        let mut child = basic_node("span", rect(0, 0, 10, 10), true);
        child.id = child_id;
        child.attrs.insert("id".into(), "inner".into());
        page.nodes.insert(child_id, child);
        page.node_mut(button).unwrap().children.push(child_id);

        let removed = page.remove_subtree(button).unwrap();
        assert_eq!(removed, vec![button, child_id]);
        assert_eq!(page.hit_test((5, 5)).unwrap(), None);
        assert_eq!(
            page.resolve_selector(&Selector::by_attr("id", "inner"))
                .unwrap(),
            None
        );
    }

    #[test]
    fn rect_rejects_negative_extent() {
        assert!(Rect::new(0, 0, -1, 5).is_err());
        assert!(serde_json::from_str::<Rect>("[0,0,-1,5]").is_err());
    }
}
