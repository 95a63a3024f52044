//! Spelling trees for kernels with one two-letter element.
//!
//! The two letters of the pair element spell tokens in many orders:
//! "haha", "haah", "hahah". A spelling tree is a binary trie over
//! those spellings. The root is the pair's first letter; following a
//! left edge appends the first letter, a right edge the second. Each
//! node records how many tokens end their pair substring there
//! (`terminal_count`) and how many pass through (`flow`).
//!
//! [`layout`] assigns integer x coordinates with a two-pass tidy-tree
//! pass: a post-order sweep places each node against a per-depth
//! next-free slot and records subtree shifts as modifiers, then a
//! pre-order sweep applies the accumulated shifts. Single children
//! place beside their parent on their own side; the widely copied
//! formulation that always shifts left mirrors left-only chains and is
//! kept available as [`SingleChildPlacement::AlwaysLeftOfChild`] for
//! comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TokenCountTable;
use crate::kernel::{segment, Element, Kernel, Letter};

/// Branch direction: left appends the pair's first letter, right the
/// second.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }
}

/// Failures while building a spelling tree.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("kernel {kernel} must contain exactly one two-letter element")]
    UnsupportedKernel { kernel: String },
    #[error("spelling {spelling:?} is not a {l1}/{l2} pair substring")]
    InvalidSpelling {
        spelling: String,
        l1: char,
        l2: char,
    },
    #[error("token {token:?} does not match kernel {kernel}")]
    TokenMismatch { token: String, kernel: String },
}

/// The trim threshold: the fourth root of the stretched token total.
/// Spellings with `count >= tau` are kept.
pub fn default_trim_threshold(n_s: u64) -> f64 {
    (n_s as f64).sqrt().sqrt()
}

#[derive(Clone, Debug)]
struct TreeNode {
    depth: usize,
    terminal_count: u64,
    flow: u64,
    children: [Option<usize>; 2],
    side: Option<Side>,
}

/// Binary trie over the spellings of one kernel's pair element.
#[derive(Clone, Debug)]
pub struct SpellingTree {
    l1: Letter,
    l2: Letter,
    nodes: Vec<TreeNode>,
}

/// Read-only view of one tree node.
#[derive(Clone, Copy)]
pub struct NodeView<'t> {
    tree: &'t SpellingTree,
    id: usize,
}

impl<'t> NodeView<'t> {
    pub fn depth(&self) -> usize {
        self.tree.nodes[self.id].depth
    }

    pub fn terminal_count(&self) -> u64 {
        self.tree.nodes[self.id].terminal_count
    }

    pub fn flow(&self) -> u64 {
        self.tree.nodes[self.id].flow
    }

    /// Which edge leads here from the parent; `None` at the root.
    pub fn side(&self) -> Option<Side> {
        self.tree.nodes[self.id].side
    }

    pub fn child(&self, side: Side) -> Option<NodeView<'t>> {
        self.tree.nodes[self.id].children[side.index()].map(|id| NodeView {
            tree: self.tree,
            id,
        })
    }
}

impl SpellingTree {
    const ROOT: usize = 0;

    /// An empty tree whose root is `l1` and whose right edges append
    /// `l2`. Panics if the letters are equal.
    pub fn new(l1: Letter, l2: Letter) -> Self {
        assert!(l1 != l2, "pair letters must differ");
        SpellingTree {
            l1,
            l2,
            nodes: vec![TreeNode {
                depth: 0,
                terminal_count: 0,
                flow: 0,
                children: [None, None],
                side: None,
            }],
        }
    }

    /// The pair letters `(l1, l2)`.
    pub fn pair(&self) -> (Letter, Letter) {
        (self.l1, self.l2)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> NodeView<'_> {
        NodeView {
            tree: self,
            id: Self::ROOT,
        }
    }

    /// Inserts `count` tokens along `path` from the root, creating
    /// nodes as needed; the final node becomes terminal for them.
    pub fn insert_path(&mut self, path: &[Side], count: u64) {
        self.nodes[Self::ROOT].flow += count;
        let mut at = Self::ROOT;
        for &side in path {
            at = match self.nodes[at].children[side.index()] {
                Some(child) => child,
                None => {
                    let id = self.nodes.len();
                    let depth = self.nodes[at].depth + 1;
                    self.nodes.push(TreeNode {
                        depth,
                        terminal_count: 0,
                        flow: 0,
                        children: [None, None],
                        side: Some(side),
                    });
                    self.nodes[at].children[side.index()] = Some(id);
                    id
                }
            };
            self.nodes[at].flow += count;
        }
        self.nodes[at].terminal_count += count;
    }

    /// Inserts one spelling: it must start with `l1`, contain `l2`,
    /// and use only the pair letters.
    pub fn insert_spelling(&mut self, spelling: &str, count: u64) -> Result<(), TreeError> {
        let path = self.spelling_path(spelling)?;
        self.insert_path(&path, count);
        Ok(())
    }

    fn spelling_path(&self, spelling: &str) -> Result<Vec<Side>, TreeError> {
        let invalid = || TreeError::InvalidSpelling {
            spelling: spelling.to_string(),
            l1: self.l1.as_char(),
            l2: self.l2.as_char(),
        };
        let mut chars = spelling.chars();
        if chars.next() != Some(self.l1.as_char()) {
            return Err(invalid());
        }
        let mut path = Vec::new();
        for ch in chars {
            if ch == self.l1.as_char() {
                path.push(Side::Left);
            } else if ch == self.l2.as_char() {
                path.push(Side::Right);
            } else {
                return Err(invalid());
            }
        }
        if !path.contains(&Side::Right) {
            return Err(invalid());
        }
        Ok(path)
    }
}

/// Builds the spelling tree for a kernel with exactly one pair
/// element, keeping spellings whose count reaches `tau`.
pub fn build_tree(
    kernel: &Kernel,
    spellings: &BTreeMap<String, u64>,
    tau: f64,
) -> Result<SpellingTree, TreeError> {
    let mut pairs = kernel.elements().iter().filter_map(|e| match e {
        Element::Pair(l1, l2) => Some((*l1, *l2)),
        _ => None,
    });
    let (l1, l2) = match (pairs.next(), pairs.next()) {
        (Some(pair), None) => pair,
        _ => {
            return Err(TreeError::UnsupportedKernel {
                kernel: kernel.to_string(),
            })
        }
    };
    let mut tree = SpellingTree::new(l1, l2);
    for (spelling, &count) in spellings {
        if (count as f64) >= tau {
            tree.insert_spelling(spelling, count)?;
        }
    }
    Ok(tree)
}

/// Extracts each matching token's pair-element substring, keeping
/// tokens whose count reaches `tau` and aggregating counts by
/// spelling. The result feeds [`build_tree`] with the same `tau`,
/// where the per-spelling filter is then a no-op because aggregation
/// only grows counts.
pub fn pair_spellings(
    kernel: &Kernel,
    tokens: &TokenCountTable,
    tau: f64,
) -> Result<BTreeMap<String, u64>, TreeError> {
    let pair_index = match kernel.pair_indices().as_slice() {
        [index] => *index,
        _ => {
            return Err(TreeError::UnsupportedKernel {
                kernel: kernel.to_string(),
            })
        }
    };
    let mut spellings = BTreeMap::new();
    for (token, count) in tokens.iter() {
        if (count as f64) < tau {
            continue;
        }
        let seg = segment(token, kernel).map_err(|_| TreeError::TokenMismatch {
            token: token.to_string(),
            kernel: kernel.to_string(),
        })?;
        let span = seg.element_spans()[pair_index].clone();
        *spellings.entry(token[span].to_string()).or_insert(0) += count;
    }
    Ok(spellings)
}

/// How a node with a single child is placed during layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SingleChildPlacement {
    /// Left-only children put the parent one slot right of the child,
    /// right-only children one slot left, so chains lean with their
    /// side.
    BySide,
    /// The uncorrected rule: the parent always sits one slot left of
    /// its child, which mirrors left-only chains. Kept for
    /// regression comparison.
    AlwaysLeftOfChild,
}

/// One laid-out node; `y` is the depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutNode {
    pub x: i64,
    pub depth: usize,
    pub terminal_count: u64,
    pub flow: u64,
    pub side: Option<Side>,
}

/// A spelling tree with integer coordinates, nodes in pre-order
/// (node, left subtree, right subtree).
#[derive(Clone, Debug, PartialEq)]
pub struct LayoutTree {
    l1: Letter,
    l2: Letter,
    nodes: Vec<LayoutNode>,
    parents: Vec<Option<usize>>,
}

impl LayoutTree {
    pub fn pair(&self) -> (Letter, Letter) {
        (self.l1, self.l2)
    }

    pub fn nodes(&self) -> &[LayoutNode] {
        &self.nodes
    }

    /// Index of the parent of `nodes()[index]`; `None` at the root.
    pub fn parent(&self, index: usize) -> Option<usize> {
        self.parents.get(index).copied().flatten()
    }
}

/// Lays out the tree with the corrected single-child rule.
pub fn layout(tree: &SpellingTree) -> LayoutTree {
    layout_with(tree, SingleChildPlacement::BySide)
}

/// Lays out the tree with an explicit single-child rule.
pub fn layout_with(tree: &SpellingTree, placement: SingleChildPlacement) -> LayoutTree {
    let n = tree.nodes.len();
    let mut state = PlaceState {
        tree,
        placement,
        xs: vec![0; n],
        mods: vec![0; n],
        nexts: Vec::new(),
        depth_mods: Vec::new(),
    };
    state.place(SpellingTree::ROOT);
    let PlaceState { xs, mods, .. } = state;

    let mut nodes = Vec::with_capacity(n);
    let mut parents = Vec::with_capacity(n);
    let mut stack = vec![(SpellingTree::ROOT, 0i64, None)];
    while let Some((id, modsum, parent)) = stack.pop() {
        let node = &tree.nodes[id];
        let index = nodes.len();
        nodes.push(LayoutNode {
            x: xs[id] + modsum,
            depth: node.depth,
            terminal_count: node.terminal_count,
            flow: node.flow,
            side: node.side,
        });
        parents.push(parent);
        let child_modsum = modsum + mods[id];
        // Push right first so the left subtree pops first (pre-order).
        if let Some(right) = node.children[1] {
            stack.push((right, child_modsum, Some(index)));
        }
        if let Some(left) = node.children[0] {
            stack.push((left, child_modsum, Some(index)));
        }
    }
    LayoutTree {
        l1: tree.l1,
        l2: tree.l2,
        nodes,
        parents,
    }
}

struct PlaceState<'t> {
    tree: &'t SpellingTree,
    placement: SingleChildPlacement,
    xs: Vec<i64>,
    mods: Vec<i64>,
    /// Per depth: the next free slot.
    nexts: Vec<i64>,
    /// Per depth: the running modifier.
    depth_mods: Vec<i64>,
}

impl PlaceState<'_> {
    fn slot(v: &mut Vec<i64>, depth: usize) -> &mut i64 {
        if v.len() <= depth {
            v.resize(depth + 1, 0);
        }
        &mut v[depth]
    }

    /// Post-order placement against per-depth next slots.
    fn place(&mut self, id: usize) {
        let [left, right] = self.tree.nodes[id].children;
        if let Some(child) = left {
            self.place(child);
        }
        if let Some(child) = right {
            self.place(child);
        }
        let depth = self.tree.nodes[id].depth;
        let next = *Self::slot(&mut self.nexts, depth);
        let place = match (left, right) {
            (None, None) => next,
            (Some(l), None) => match self.placement {
                SingleChildPlacement::BySide => self.xs[l] + 1,
                SingleChildPlacement::AlwaysLeftOfChild => self.xs[l] - 1,
            },
            (None, Some(r)) => self.xs[r] - 1,
            (Some(l), Some(r)) => (self.xs[l] + self.xs[r]).div_euclid(2),
        };
        let depth_mod = Self::slot(&mut self.depth_mods, depth);
        *depth_mod = (*depth_mod).max(next - place);
        let x = if left.is_none() && right.is_none() {
            place
        } else {
            place + *depth_mod
        };
        self.xs[id] = x;
        self.mods[id] = *depth_mod;
        *Self::slot(&mut self.nexts, depth) = x + 2;
    }
}

/// Failures while reading a layout JSON document.
#[derive(Debug, Error)]
pub enum LayoutJsonError {
    #[error("layout JSON is not valid: {0}")]
    Json(#[from] serde_json::Error),
    #[error("layout JSON holds no nodes")]
    Empty,
    #[error("pair {pair:?} must be two distinct letters")]
    Pair { pair: String },
    #[error("node {index} breaks the pre-order depth/side structure")]
    Node { index: usize },
}

#[derive(Serialize, Deserialize)]
struct LayoutDoc {
    pair: String,
    nodes: Vec<LayoutNode>,
}

fn assemble(doc: LayoutDoc) -> Result<LayoutTree, LayoutJsonError> {
    let mut chars = doc.pair.chars();
    let (l1, l2) = match (
        chars.next().and_then(Letter::new),
        chars.next().and_then(Letter::new),
        chars.next(),
    ) {
        (Some(a), Some(b), None) if a != b => (a, b),
        _ => return Err(LayoutJsonError::Pair { pair: doc.pair }),
    };
    let parents = derive_parents(&doc.nodes)?;
    Ok(LayoutTree {
        l1,
        l2,
        nodes: doc.nodes,
        parents,
    })
}

impl Serialize for LayoutTree {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        LayoutDoc {
            pair: format!("{}{}", self.l1, self.l2),
            nodes: self.nodes.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LayoutTree {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = LayoutDoc::deserialize(deserializer)?;
        assemble(doc).map_err(serde::de::Error::custom)
    }
}

/// Serializes a laid-out tree: `{"pair": "l1l2", "nodes": [...]}`
/// with nodes in pre-order.
pub fn emit_json(layout: &LayoutTree) -> String {
    serde_json::to_string_pretty(layout).expect("layout document serializes")
}

/// Reads a document produced by [`emit_json`] back into an equal
/// [`LayoutTree`].
pub fn layout_from_json(json: &str) -> Result<LayoutTree, LayoutJsonError> {
    assemble(serde_json::from_str(json)?)
}

/// Recovers parent links from the pre-order node list, rejecting
/// structures [`emit_json`] cannot produce.
fn derive_parents(nodes: &[LayoutNode]) -> Result<Vec<Option<usize>>, LayoutJsonError> {
    if nodes.is_empty() {
        return Err(LayoutJsonError::Empty);
    }
    if nodes[0].depth != 0 || nodes[0].side.is_some() {
        return Err(LayoutJsonError::Node { index: 0 });
    }
    let mut parents = vec![None];
    let mut latest = vec![0usize];
    let mut taken = vec![[false; 2]; nodes.len()];
    for (index, node) in nodes.iter().enumerate().skip(1) {
        let side = node.side.ok_or(LayoutJsonError::Node { index })?;
        if node.depth == 0 || node.depth > latest.len() {
            return Err(LayoutJsonError::Node { index });
        }
        let parent = latest[node.depth - 1];
        let seen = &mut taken[parent];
        // Pre-order lists a left child before its right sibling.
        if seen[side.index()] || (side == Side::Left && seen[1]) {
            return Err(LayoutJsonError::Node { index });
        }
        seen[side.index()] = true;
        parents.push(Some(parent));
        latest.truncate(node.depth);
        latest.push(index);
    }
    Ok(parents)
}

/// Rendering parameters for [`emit_svg`].
#[derive(Clone, Debug)]
pub struct SvgStyle {
    /// Pixels per x unit.
    pub x_step: f64,
    /// Pixels per depth level.
    pub y_step: f64,
    pub margin: f64,
    /// Base edge width; edges scale by `1 + log10(flow)`.
    pub base_stroke: f64,
    pub node_radius: f64,
    /// Stroke for left (`l1`) edges.
    pub left_stroke: String,
    /// Stroke for right (`l2`) edges.
    pub right_stroke: String,
    pub node_fill: String,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            x_step: 14.0,
            y_step: 28.0,
            margin: 16.0,
            base_stroke: 1.5,
            node_radius: 3.0,
            left_stroke: "#b8b8b8".to_string(),
            right_stroke: "#3d3d3d".to_string(),
            node_fill: "#111111".to_string(),
        }
    }
}

/// Renders the laid-out tree as an SVG 1.1 document: one line per
/// edge (light for left edges, dark for right, width growing with the
/// log of the flow) and one circle per node.
pub fn emit_svg(layout: &LayoutTree, style: &SvgStyle) -> String {
    let max_x = layout.nodes.iter().map(|n| n.x).max().unwrap_or(0);
    let max_depth = layout.nodes.iter().map(|n| n.depth).max().unwrap_or(0);
    let width = style.margin * 2.0 + max_x as f64 * style.x_step;
    let height = style.margin * 2.0 + max_depth as f64 * style.y_step;
    let px = |x: i64| style.margin + x as f64 * style.x_step;
    let py = |depth: usize| style.margin + depth as f64 * style.y_step;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .expect("writes to a string succeed");
    for (index, node) in layout.nodes.iter().enumerate() {
        let stroke = match node.side {
            Some(Side::Left) => &style.left_stroke,
            Some(Side::Right) => &style.right_stroke,
            None => continue,
        };
        let parent = &layout.nodes[layout.parents[index].expect("non-root nodes have parents")];
        let stroke_width = style.base_stroke * (1.0 + (node.flow.max(1) as f64).log10());
        writeln!(
            svg,
            r#"  <line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}" stroke-width="{stroke_width}" stroke-linecap="round" />"#,
            px(parent.x),
            py(parent.depth),
            px(node.x),
            py(node.depth),
        )
        .expect("writes to a string succeed");
    }
    for node in &layout.nodes {
        writeln!(
            svg,
            r#"  <circle cx="{}" cy="{}" r="{}" fill="{}" />"#,
            px(node.x),
            py(node.depth),
            style.node_radius,
            style.node_fill,
        )
        .expect("writes to a string succeed");
    }
    svg.push_str("</svg>\n");
    svg
}
