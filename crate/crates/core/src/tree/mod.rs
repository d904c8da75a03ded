//! The query-data routing tree.

mod description;
mod json;

pub use description::{ColumnDesc, DescAccumulator, SemanticDescription};
pub(crate) use json::{desc_from_json, desc_to_json};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{Cut, CutRegistry, Dataset, Query, Schema};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub desc: SemanticDescription,
    pub cut: Option<Cut>,
    pub left: Option<NodeId>,
    pub right: Option<NodeId>,
    pub parent: Option<NodeId>,
    pub depth: usize,
    pub block_id: Option<usize>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.cut.is_none()
    }
}

/// Binary routing tree. Internal nodes carry cuts (left satisfies, right
/// violates); leaves carry dense block ids in left-to-right order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QdTree {
    schema: Schema,
    registry: CutRegistry,
    nodes: Vec<Node>,
    root: NodeId,
    frozen: bool,
    log: Vec<(NodeId, Cut)>,
}

/// Block membership of every row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockAssignment {
    /// Exactly one block per row.
    Single(Vec<usize>),
    /// One or more blocks per row (overlap layouts).
    Multi(Vec<Vec<usize>>),
}

impl BlockAssignment {
    pub fn num_rows(&self) -> usize {
        match self {
            BlockAssignment::Single(v) => v.len(),
            BlockAssignment::Multi(v) => v.len(),
        }
    }

    pub fn blocks_of(&self, row: usize) -> &[usize] {
        match self {
            BlockAssignment::Single(v) => std::slice::from_ref(&v[row]),
            BlockAssignment::Multi(v) => &v[row],
        }
    }

    pub fn max_block(&self) -> Option<usize> {
        (0..self.num_rows())
            .flat_map(|r| self.blocks_of(r).iter().copied())
            .max()
    }

    /// Row indices per block, ascending.
    pub fn rows_by_block(&self, nblocks: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); nblocks];
        for r in 0..self.num_rows() {
            for &b in self.blocks_of(r) {
                out[b].push(r);
            }
        }
        out
    }

    pub fn block_sizes(&self, nblocks: usize) -> Vec<usize> {
        let mut out = vec![0; nblocks];
        for r in 0..self.num_rows() {
            for &b in self.blocks_of(r) {
                out[b] += 1;
            }
        }
        out
    }
}

const ROUTE_CHUNK: usize = 4096;

impl QdTree {
    /// Singleton tree: one root leaf covering the whole space.
    pub fn new(schema: Schema, registry: CutRegistry) -> Self {
        let desc = SemanticDescription::full(&schema, registry.len());
        QdTree {
            schema,
            registry,
            nodes: vec![Node {
                id: 0,
                desc,
                cut: None,
                left: None,
                right: None,
                parent: None,
                depth: 0,
                block_id: Some(0),
            }],
            root: 0,
            frozen: false,
            log: Vec::new(),
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn registry(&self) -> &CutRegistry {
        &self.registry
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Split actions in the order they were applied.
    pub fn construction_log(&self) -> &[(NodeId, Cut)] {
        &self.log
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Leaf node ids in left-to-right order (index = block id).
    pub fn leaves(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            match (n.left, n.right) {
                (Some(l), Some(r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                _ => out.push(id),
            }
        }
        out
    }

    pub fn leaf_of_block(&self, block: usize) -> NodeId {
        self.leaves()[block]
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    fn renumber_blocks(&mut self) {
        for (b, id) in self.leaves().into_iter().enumerate() {
            self.nodes[id].block_id = Some(b);
        }
    }

    /// `T ⊕ (cut, node)` as a new tree.
    pub fn split(&self, node: NodeId, cut: Cut) -> Result<QdTree> {
        let mut t = self.clone();
        t.split_mut(node, cut)?;
        Ok(t)
    }

    /// In-place split; returns the (left, right) child ids.
    pub fn split_mut(&mut self, node: NodeId, cut: Cut) -> Result<(NodeId, NodeId)> {
        let n = self.nodes.get(node).ok_or(Error::UnknownNode(node))?;
        if !n.is_leaf() {
            return Err(Error::NotALeaf(node));
        }
        let (ld, rd) = n.desc.apply_cut(&cut, node)?;
        let depth = n.depth + 1;
        let (l, r) = (self.nodes.len(), self.nodes.len() + 1);
        for (id, desc) in [(l, ld), (r, rd)] {
            self.nodes.push(Node {
                id,
                desc,
                cut: None,
                left: None,
                right: None,
                parent: Some(node),
                depth,
                block_id: None,
            });
        }
        let n = &mut self.nodes[node];
        n.cut = Some(cut.clone());
        n.left = Some(l);
        n.right = Some(r);
        n.block_id = None;
        self.log.push((node, cut));
        self.frozen = false;
        self.renumber_blocks();
        Ok((l, r))
    }

    /// Leaf reached by `row`.
    #[inline]
    pub fn leaf_of_row(&self, row: &[u32]) -> NodeId {
        self.descend(self.root, row)
    }

    #[inline]
    pub fn descend(&self, from: NodeId, row: &[u32]) -> NodeId {
        let mut id = from;
        loop {
            let n = &self.nodes[id];
            match &n.cut {
                None => return id,
                Some(c) => id = if c.eval(row) { n.left.unwrap() } else { n.right.unwrap() },
            }
        }
    }

    pub fn route_rows(&self, data: &Dataset) -> BlockAssignment {
        self.route_rows_with(data, Execution::default())
    }

    /// Routes every row to its leaf block. Output is independent of `exec`.
    pub fn route_rows_with(&self, data: &Dataset, exec: Execution) -> BlockAssignment {
        let chunks = exec.map_chunks(data.len(), ROUTE_CHUNK, |range| {
            range
                .map(|i| self.nodes[self.leaf_of_row(data.row(i))].block_id.unwrap())
                .collect::<Vec<_>>()
        });
        BlockAssignment::Single(chunks.concat())
    }

    /// Replaces each leaf description by the tight description of its rows.
    /// Empty leaves become `[lo, lo)` with zero masks. Internal nodes are untouched.
    pub fn freeze(&self, assignment: &BlockAssignment, data: &Dataset) -> Result<QdTree> {
        self.freeze_with(assignment, data, Execution::default())
    }

    pub fn freeze_with(&self, assignment: &BlockAssignment, data: &Dataset, exec: Execution) -> Result<QdTree> {
        if assignment.num_rows() != data.len() {
            return Err(Error::AssignmentMismatch(format!(
                "{} assigned rows for {} dataset rows",
                assignment.num_rows(),
                data.len()
            )));
        }
        let leaves = self.leaves();
        if let Some(m) = assignment.max_block() {
            if m >= leaves.len() {
                return Err(Error::AssignmentMismatch(format!(
                    "block {m} does not exist ({} leaves)",
                    leaves.len()
                )));
            }
        }
        let by_block = assignment.rows_by_block(leaves.len());
        let descs = exec.map_range(leaves.len(), |b| {
            SemanticDescription::of_rows(&self.schema, &self.registry, by_block[b].iter().map(|&r| data.row(r)))
        });
        let mut t = self.clone();
        for (b, d) in descs.into_iter().enumerate() {
            let leaf = &mut t.nodes[leaves[b]];
            leaf.desc = d.unwrap_or_else(|| leaf.desc.emptied());
        }
        t.frozen = true;
        Ok(t)
    }

    /// Routes then freezes on `data`.
    pub fn route_and_freeze(&self, data: &Dataset) -> (QdTree, BlockAssignment) {
        let a = self.route_rows(data);
        let t = self.freeze(&a, data).expect("assignment produced by route_rows");
        (t, a)
    }

    pub fn intersects(&self, node: NodeId, q: &Query) -> bool {
        self.nodes[node].desc.intersects(q, &self.registry)
    }

    /// Sorted block ids whose leaf description intersects `q`; a linear scan
    /// over leaf metadata.
    pub fn route_query(&self, q: &Query) -> Vec<usize> {
        self.leaves()
            .into_iter()
            .enumerate()
            .filter(|(_, id)| self.intersects(*id, q))
            .map(|(b, _)| b)
            .collect()
    }

    /// Leaf descriptions in block order.
    pub fn block_descriptions(&self) -> Vec<&SemanticDescription> {
        self.leaves().into_iter().map(|id| &self.nodes[id].desc).collect()
    }

    /// Root-to-leaf path as (cut, went_left) pairs.
    pub fn path(&self, leaf: NodeId) -> Vec<(&Cut, bool)> {
        let mut out = Vec::new();
        let mut id = leaf;
        while let Some(p) = self.nodes[id].parent {
            let pn = &self.nodes[p];
            out.push((pn.cut.as_ref().unwrap(), pn.left == Some(id)));
            id = p;
        }
        out.reverse();
        out
    }

    /// Replays the construction log keeping only actions accepted by `keep`
    /// (evaluated on the original node). Descendants of dropped actions vanish.
    pub fn rebuild_filtered(&self, keep: impl Fn(&Node) -> bool) -> QdTree {
        let mut t = QdTree::new(self.schema.clone(), self.registry.clone());
        let mut map: HashMap<NodeId, NodeId> = HashMap::from([(self.root, t.root)]);
        for (node, cut) in &self.log {
            let Some(&new_id) = map.get(node) else { continue };
            let orig = &self.nodes[*node];
            if !keep(orig) {
                continue;
            }
            let (l, r) = t.split_mut(new_id, cut.clone()).expect("replaying a valid log");
            map.insert(orig.left.unwrap(), l);
            map.insert(orig.right.unwrap(), r);
        }
        t
    }

    /// Tree with the first `n` logged actions only.
    pub fn prefix(&self, n: usize) -> QdTree {
        let mut t = QdTree::new(self.schema.clone(), self.registry.clone());
        let mut map: HashMap<NodeId, NodeId> = HashMap::from([(self.root, t.root)]);
        for (node, cut) in self.log.iter().take(n) {
            let (l, r) = t.split_mut(map[node], cut.clone()).expect("replaying a valid log");
            let orig = &self.nodes[*node];
            map.insert(orig.left.unwrap(), l);
            map.insert(orig.right.unwrap(), r);
        }
        t
    }

    /// `T^{-1}`: the tree without its deepest level of leaves.
    pub fn without_last_level(&self) -> QdTree {
        let d = self.depth();
        if d == 0 {
            return self.rebuild_filtered(|_| true);
        }
        self.rebuild_filtered(|n| n.depth + 1 < d)
    }

    /// Turns `node` into a leaf, dropping its subtree.
    pub fn collapse(&self, node: NodeId) -> QdTree {
        let mut dropped = vec![false; self.nodes.len()];
        let mut stack = vec![node];
        while let Some(id) = stack.pop() {
            dropped[id] = true;
            if let (Some(l), Some(r)) = (self.nodes[id].left, self.nodes[id].right) {
                stack.push(l);
                stack.push(r);
            }
        }
        self.rebuild_filtered(|n| !dropped[n.id])
    }

    pub(crate) fn from_parts(
        schema: Schema,
        registry: CutRegistry,
        nodes: Vec<Node>,
        root: NodeId,
        frozen: bool,
        log: Vec<(NodeId, Cut)>,
    ) -> Self {
        QdTree {
            schema,
            registry,
            nodes,
            root,
            frozen,
            log,
        }
    }

    /// Checks structural invariants; used by deserialization and tests.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Error::parse("tree", m);
        if self.root >= self.nodes.len() {
            return Err(bad(format!("root {} missing", self.root)));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if id >= self.nodes.len() {
                return Err(bad(format!("child {id} missing")));
            }
            if std::mem::replace(&mut seen[id], true) {
                return Err(bad(format!("node {id} reachable twice")));
            }
            let n = &self.nodes[id];
            if n.id != id {
                return Err(bad(format!("node at position {id} has id {}", n.id)));
            }
            if n.desc.columns.len() != self.schema.len() || n.desc.adv.len() != self.registry.len() {
                return Err(bad(format!("node {id} description has wrong shape")));
            }
            match (&n.cut, n.left, n.right, n.block_id) {
                (Some(_), Some(l), Some(r), None) => {
                    stack.push(l);
                    stack.push(r);
                }
                (None, None, None, Some(_)) => {}
                _ => return Err(bad(format!("node {id} is neither a proper leaf nor internal"))),
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(bad("unreachable nodes".into()));
        }
        for (b, id) in self.leaves().into_iter().enumerate() {
            if self.nodes[id].block_id != Some(b) {
                return Err(bad(format!("leaf {id} should have block id {b}")));
            }
        }
        Ok(())
    }
}
