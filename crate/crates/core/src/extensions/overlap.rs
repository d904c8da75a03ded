//! Overlapping layouts: undersized leaves are replicated into a neighbouring
//! large leaf whose description is widened to cover both.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::greedy::{greedy_build, greedy_extend, GreedyConfig, Objective};
use crate::model::{Cut, Dataset, Query, Schema, Workload};
use crate::skipcost::SkipReport;
use crate::tree::{desc_from_json, desc_to_json, BlockAssignment, NodeId, QdTree, SemanticDescription};
use crate::woodblock::{train, RlConfig};

/// Tree builder used for the first, unrelaxed phase.
#[derive(Debug, Clone)]
pub enum Builder {
    Greedy,
    Rl(RlConfig),
}

/// Rows of `source` stored in a block, with their min-max description.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub source: usize,
    pub desc: SemanticDescription,
}

/// One block to scan; rows belonging to any block in `ignore` are skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanBlock {
    pub block: usize,
    pub ignore: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapLayout {
    /// Frozen on the build data (own rows only).
    pub tree: QdTree,
    pub min_block_size: usize,
    pub num_rows: usize,
    /// Small block -> receiving block.
    pub replica_map: BTreeMap<usize, usize>,
    /// Complete description per block; receivers are widened.
    pub complete: Vec<SemanticDescription>,
    /// Whether `complete[b]` is exact (no advanced cut on the path's satisfied side).
    pub exact: Vec<bool>,
    /// Own part first, then received parts in source order.
    pub parts: Vec<Vec<Part>>,
    /// Stored rows per block, replicas included.
    pub block_sizes: Vec<u64>,
}

/// Builds with the standard size rule, then keeps splitting leaves greedily
/// with one child allowed below `b`, then replicates every non-empty leaf
/// under `b` rows into a neighbouring leaf with at least `b` rows.
///
/// A small leaf without such a neighbour has its parent collapsed, and the
/// replication pass is retried.
pub fn build_overlap(data: &Dataset, w: &Workload, cuts: &[Cut], b: usize, builder: &Builder) -> Result<OverlapLayout> {
    let base = match builder {
        Builder::Greedy => greedy_build(data, w, &GreedyConfig::new(b, cuts.to_vec()))?,
        Builder::Rl(cfg) => train(data, w, cuts, cfg)?.best_tree,
    };
    let mut relaxed = GreedyConfig::new(b, cuts.to_vec());
    relaxed.relaxed = true;
    let mut tree = greedy_extend(base, data, w, &relaxed, &Objective::Plain)?;
    loop {
        match assemble(&tree, data, b) {
            Ok(layout) => return Ok(layout),
            Err(Error::NoNeighbor(leaf)) => {
                let parent = tree.node(leaf).parent.expect("a root leaf is never small");
                tree = tree.collapse(parent);
            }
            Err(e) => return Err(e),
        }
    }
}

fn path_is_exact(tree: &QdTree, leaf: NodeId) -> bool {
    tree.path(leaf).iter().all(|(cut, left)| !(cut.is_advanced() && *left))
}

fn assemble(tree: &QdTree, data: &Dataset, b: usize) -> Result<OverlapLayout> {
    let leaves = tree.leaves();
    let nblocks = leaves.len();
    let single = tree.route_rows(data);
    let rows = single.rows_by_block(nblocks);
    let sizes: Vec<usize> = rows.iter().map(Vec::len).collect();
    let mut complete: Vec<SemanticDescription> = leaves.iter().map(|&l| tree.node(l).desc.clone()).collect();
    let exact: Vec<bool> = leaves.iter().map(|&l| path_is_exact(tree, l)).collect();
    let mut replica_map = BTreeMap::new();
    if nblocks > 1 {
        for s in (0..nblocks).filter(|&s| sizes[s] > 0 && sizes[s] < b) {
            let own = tree.node(leaves[s]).desc.clone();
            let receiver = (0..nblocks)
                .filter(|&j| sizes[j] >= b && exact[j] && exact[s])
                .find_map(|j| complete[j].exact_union(&own).map(|u| (j, u)));
            let Some((j, union)) = receiver else {
                return Err(Error::NoNeighbor(leaves[s]));
            };
            complete[j] = union;
            replica_map.insert(s, j);
        }
    }
    let frozen = tree.freeze(&single, data)?;
    let part_desc = |blk: usize| frozen.node(leaves[blk]).desc.clone();
    let mut parts: Vec<Vec<Part>> = (0..nblocks)
        .map(|blk| {
            vec![Part {
                source: blk,
                desc: part_desc(blk),
            }]
        })
        .collect();
    let mut block_sizes: Vec<u64> = sizes.iter().map(|&n| n as u64).collect();
    for (&s, &j) in &replica_map {
        parts[j].push(Part {
            source: s,
            desc: part_desc(s),
        });
        block_sizes[j] += sizes[s] as u64;
    }
    Ok(OverlapLayout {
        tree: frozen,
        min_block_size: b,
        num_rows: data.len(),
        replica_map,
        complete,
        exact,
        parts,
        block_sizes,
    })
}

/// Over-approximation of the rows `q` can select, as one description.
pub fn query_hull(q: &Query, schema: &Schema, n_adv: usize) -> SemanticDescription {
    let full = SemanticDescription::full(schema, n_adv);
    match q {
        Query::Pred(p) => full.restrict(&Cut::Unary(p.clone()), true),
        Query::Adv { negated: false, .. } => full,
        Query::Adv { index, negated: true } => {
            let mut d = full;
            d.adv.set(*index, false);
            d
        }
        Query::And(cs) => cs
            .iter()
            .map(|c| query_hull(c, schema, n_adv))
            .reduce(|a, b| a.intersect(&b))
            .unwrap_or(full),
        Query::Or(cs) => cs
            .iter()
            .map(|c| query_hull(c, schema, n_adv))
            .reduce(|a, b| a.bounding_union(&b))
            .unwrap_or(full),
    }
}

impl OverlapLayout {
    pub fn num_blocks(&self) -> usize {
        self.complete.len()
    }

    /// Rows stored beyond one copy of the data.
    pub fn extra_storage_rows(&self) -> u64 {
        self.block_sizes.iter().sum::<u64>() - self.num_rows as u64
    }

    /// Blocks holding `row`, ascending.
    pub fn blocks_of_row(&self, row: &[u32]) -> Vec<usize> {
        let home = self.tree.node(self.tree.leaf_of_row(row)).block_id.unwrap();
        let mut out = vec![home];
        if let Some(&r) = self.replica_map.get(&home) {
            out.push(r);
            out.sort_unstable();
        }
        out
    }

    pub fn block_contains(&self, block: usize, row: &[u32]) -> bool {
        self.blocks_of_row(row).contains(&block)
    }

    pub fn route_data(&self, data: &Dataset) -> BlockAssignment {
        BlockAssignment::Multi(data.rows().map(|r| self.blocks_of_row(r)).collect())
    }

    /// Blocks to scan for `q`, ascending, each with the lower selected blocks
    /// whose rows it must ignore.
    ///
    /// Candidates are blocks with a stored part intersecting `q`. A single
    /// candidate whose complete description covers the query's bounding
    /// region answers alone. Otherwise a receiver is dropped when its own
    /// rows cannot match and every matching part it received is also scanned
    /// in its source block.
    pub fn route_query(&self, q: &Query) -> Vec<ScanBlock> {
        let reg = self.tree.registry();
        let hits = |p: &Part| p.desc.intersects(q, reg);
        let cands: Vec<usize> = (0..self.num_blocks())
            .filter(|&blk| self.parts[blk].iter().any(hits))
            .collect();
        if cands.is_empty() {
            return Vec::new();
        }
        let hull = query_hull(q, self.tree.schema(), reg.len());
        if let Some(&c) = cands
            .iter()
            .find(|&&c| self.exact[c] && hull.is_within(&self.complete[c]))
        {
            return vec![ScanBlock {
                block: c,
                ignore: vec![],
            }];
        }
        let redundant = |blk: usize| {
            let parts = &self.parts[blk];
            !hits(&parts[0]) && parts[1..].iter().filter(|p| hits(p)).all(|p| cands.contains(&p.source))
        };
        let selected: Vec<usize> = cands.iter().copied().filter(|&blk| !redundant(blk)).collect();
        selected
            .iter()
            .enumerate()
            .map(|(i, &blk)| ScanBlock {
                block: blk,
                ignore: selected[..i].to_vec(),
            })
            .collect()
    }

    /// Qualifying rows of `q` (indices into `data`), reading the routed
    /// blocks and dropping rows owned by a lower selected block.
    pub fn scan(&self, data: &Dataset, assignment: &BlockAssignment, q: &Query) -> Vec<usize> {
        let by_block = assignment.rows_by_block(self.num_blocks());
        let reg = self.tree.registry();
        let mut out = Vec::new();
        for sb in self.route_query(q) {
            for &r in &by_block[sb.block] {
                let row = data.row(r);
                if sb.ignore.iter().any(|&j| self.block_contains(j, row)) {
                    continue;
                }
                if q.eval(row, reg) {
                    out.push(r);
                }
            }
        }
        out
    }

    pub fn evaluate(&self, w: &Workload) -> SkipReport {
        let scans: Vec<Vec<usize>> = w
            .queries
            .iter()
            .map(|q| self.route_query(q).into_iter().map(|s| s.block).collect())
            .collect();
        SkipReport::from_scans(&self.block_sizes, &scans, self.num_rows)
    }

    pub fn to_json_value(&self) -> Value {
        let schema = self.tree.schema();
        json!({
            "tree": self.tree.to_json_value(),
            "min_block_size": self.min_block_size,
            "num_rows": self.num_rows,
            "replica_map": self.replica_map.iter().map(|(s, r)| json!([s, r])).collect::<Vec<_>>(),
            "complete": self.complete.iter().map(|d| desc_to_json(d, schema)).collect::<Vec<_>>(),
            "exact": self.exact,
            "parts": self.parts.iter().map(|ps| ps.iter().map(|p| json!({
                "source": p.source,
                "desc": desc_to_json(&p.desc, schema),
            })).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "block_sizes": self.block_sizes,
        })
    }

    pub fn from_json_value(v: &Value) -> Result<Self> {
        let tree = QdTree::from_json_value(v.get("tree").ok_or_else(|| Error::parse("$", "missing \"tree\""))?)?;
        let schema = tree.schema().clone();
        let nadv = tree.registry().len();
        let nblocks = tree.num_leaves();
        let uint = |x: &Value, loc: &str| {
            x.as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| Error::parse(loc, "expected a non-negative integer"))
        };
        let arr = |key: &str| {
            v.get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| Error::parse("$", format!("missing array \"{key}\"")))
        };
        let block = |x: &Value, loc: &str| {
            let b = uint(x, loc)?;
            if b >= nblocks {
                return Err(Error::parse(loc, format!("block {b} out of range")));
            }
            Ok(b)
        };
        let mut replica_map = BTreeMap::new();
        for (i, pair) in arr("replica_map")?.iter().enumerate() {
            let loc = format!("$.replica_map[{i}]");
            let p = pair
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| Error::parse(&loc, "expected [small, receiver]"))?;
            replica_map.insert(block(&p[0], &loc)?, block(&p[1], &loc)?);
        }
        let complete = arr("complete")?
            .iter()
            .enumerate()
            .map(|(i, d)| desc_from_json(d, &schema, nadv, &format!("$.complete[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let exact = arr("exact")?
            .iter()
            .enumerate()
            .map(|(i, e)| {
                e.as_bool()
                    .ok_or_else(|| Error::parse(format!("$.exact[{i}]"), "expected a boolean"))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut parts = Vec::new();
        for (i, ps) in arr("parts")?.iter().enumerate() {
            let loc = format!("$.parts[{i}]");
            let ps = ps.as_array().ok_or_else(|| Error::parse(&loc, "expected an array"))?;
            let mut out = Vec::new();
            for (k, p) in ps.iter().enumerate() {
                let ploc = format!("{loc}[{k}]");
                out.push(Part {
                    source: block(p.get("source").unwrap_or(&Value::Null), &format!("{ploc}.source"))?,
                    desc: desc_from_json(
                        p.get("desc").unwrap_or(&Value::Null),
                        &schema,
                        nadv,
                        &format!("{ploc}.desc"),
                    )?,
                });
            }
            parts.push(out);
        }
        let block_sizes = arr("block_sizes")?
            .iter()
            .enumerate()
            .map(|(i, n)| uint(n, &format!("$.block_sizes[{i}]")).map(|n| n as u64))
            .collect::<Result<Vec<_>>>()?;
        if [complete.len(), exact.len(), parts.len(), block_sizes.len()]
            .iter()
            .any(|&n| n != nblocks)
            || parts.iter().any(Vec::is_empty)
        {
            return Err(Error::parse("$", "per-block arrays must match the tree's leaves"));
        }
        Ok(OverlapLayout {
            tree,
            min_block_size: uint(v.get("min_block_size").unwrap_or(&Value::Null), "$.min_block_size")?,
            num_rows: uint(v.get("num_rows").unwrap_or(&Value::Null), "$.num_rows")?,
            replica_map,
            complete,
            exact,
            parts,
            block_sizes,
        })
    }
}
