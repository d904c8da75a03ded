//! Skipped-tuple accounting: `C(P_i) = |P_i| * #{q : block i can be skipped for q}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Workload};
use crate::tree::{BlockAssignment, DescAccumulator, NodeId, QdTree, SemanticDescription};

/// A block can be skipped for `q` iff its description does not intersect `q`.
pub fn can_skip(desc: &SemanticDescription, q: &crate::model::Query, w: &Workload) -> bool {
    !desc.intersects(q, &w.registry)
}

/// Per-query skip flags of a block of rows described by `desc` (`None` = no rows).
pub fn skip_flags(desc: Option<&SemanticDescription>, w: &Workload) -> Vec<bool> {
    match desc {
        None => vec![true; w.len()],
        Some(d) => w.queries.iter().map(|q| !d.intersects(q, &w.registry)).collect(),
    }
}

/// `C` of one block of `rows` rows with description `desc`.
pub fn block_capacity(desc: Option<&SemanticDescription>, rows: usize, w: &Workload) -> u64 {
    if rows == 0 {
        return 0;
    }
    let skipped = skip_flags(desc, w).into_iter().filter(|&s| s).count();
    (rows * skipped) as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipReport {
    pub num_rows: usize,
    pub num_queries: usize,
    /// Rows physically stored across all blocks (exceeds `num_rows` with replicas).
    pub stored_rows: u64,
    pub block_sizes: Vec<u64>,
    pub per_block_skipped: Vec<u64>,
    pub per_query_scanned: Vec<u64>,
    pub per_query_access_fraction: Vec<f64>,
    pub total_skipped: u64,
    /// `Σ_q scanned_q / (|W| · |V|)`.
    pub access_fraction: f64,
}

impl SkipReport {
    /// Builds a report from block sizes and the block list each query scans.
    pub fn from_scans(block_sizes: &[u64], scans: &[Vec<usize>], num_rows: usize) -> SkipReport {
        let mut scanned_by = vec![0u64; block_sizes.len()];
        let per_query_scanned: Vec<u64> = scans
            .iter()
            .map(|bs| {
                bs.iter()
                    .map(|&b| {
                        scanned_by[b] += 1;
                        block_sizes[b]
                    })
                    .sum()
            })
            .collect();
        let m = scans.len() as u64;
        let per_block_skipped: Vec<u64> = block_sizes
            .iter()
            .zip(&scanned_by)
            .map(|(&size, &s)| size * (m - s))
            .collect();
        Self::assemble(block_sizes.to_vec(), per_block_skipped, per_query_scanned, num_rows)
    }

    pub(crate) fn assemble(
        block_sizes: Vec<u64>,
        per_block_skipped: Vec<u64>,
        per_query_scanned: Vec<u64>,
        num_rows: usize,
    ) -> SkipReport {
        let m = per_query_scanned.len();
        let denom = num_rows.max(1) as f64;
        let per_query_access_fraction = per_query_scanned.iter().map(|&s| s as f64 / denom).collect();
        let total_scanned: u64 = per_query_scanned.iter().sum();
        let access_fraction = if m == 0 || num_rows == 0 {
            0.0
        } else {
            total_scanned as f64 / (m as f64 * num_rows as f64)
        };
        SkipReport {
            num_rows,
            num_queries: m,
            stored_rows: block_sizes.iter().sum(),
            total_skipped: per_block_skipped.iter().sum(),
            block_sizes,
            per_block_skipped,
            per_query_scanned,
            per_query_access_fraction,
            access_fraction,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    /// `query,scanned,access_fraction` rows.
    pub fn write_query_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::Io {
            path: "<per-query csv>".into(),
            source: e,
        };
        writeln!(out, "query,scanned,access_fraction").map_err(io)?;
        for (q, (s, f)) in self
            .per_query_scanned
            .iter()
            .zip(&self.per_query_access_fraction)
            .enumerate()
        {
            writeln!(out, "{q},{s},{f}").map_err(io)?;
        }
        Ok(())
    }
}

/// Evaluates a frozen tree against a workload.
pub fn evaluate_partitioning(tree: &QdTree, assignment: &BlockAssignment, data: &Dataset, w: &Workload) -> SkipReport {
    let nblocks = tree.num_leaves();
    let sizes: Vec<u64> = assignment.block_sizes(nblocks).into_iter().map(|s| s as u64).collect();
    let scans: Vec<Vec<usize>> = w.queries.iter().map(|q| tree.route_query(q)).collect();
    SkipReport::from_scans(&sizes, &scans, data.len())
}

/// Evaluates blocks given directly by description and size (e.g. baselines).
pub fn evaluate_blocks(descs: &[SemanticDescription], sizes: &[u64], num_rows: usize, w: &Workload) -> SkipReport {
    let scans: Vec<Vec<usize>> = w
        .queries
        .iter()
        .map(|q| {
            descs
                .iter()
                .enumerate()
                .filter(|(_, d)| d.intersects(q, &w.registry))
                .map(|(b, _)| b)
                .collect()
        })
        .collect();
    SkipReport::from_scans(sizes, &scans, num_rows)
}

/// `S(n)`: skipped rows under `node` across the workload, with each leaf
/// described by the tight description of the `rows` routed to it.
/// `rows` are the row indices of `data` that reached `node`.
pub fn skipped_under_node(tree: &QdTree, node: NodeId, data: &Dataset, rows: &[usize], w: &Workload) -> u64 {
    let n = tree.node(node);
    match (n.left, n.right, &n.cut) {
        (Some(l), Some(r), Some(cut)) => {
            let (lr, rr): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| cut.eval(data.row(i)));
            skipped_under_node(tree, l, data, &lr, w) + skipped_under_node(tree, r, data, &rr, w)
        }
        _ => {
            let d = SemanticDescription::of_rows(tree.schema(), &w.registry, rows.iter().map(|&i| data.row(i)));
            block_capacity(d.as_ref(), rows.len(), w)
        }
    }
}

/// `C(T)` on `data`: leaves described by their rows' tight descriptions.
pub fn tree_capacity(tree: &QdTree, data: &Dataset, w: &Workload) -> u64 {
    per_query_skipped(tree, data, w).iter().sum()
}

/// Skipped rows per query for `tree` on `data` (tight leaf descriptions).
pub fn per_query_skipped(tree: &QdTree, data: &Dataset, w: &Workload) -> Vec<u64> {
    let leaves = tree.leaves();
    let mut accs: Vec<DescAccumulator> = leaves
        .iter()
        .map(|_| DescAccumulator::new(tree.schema(), w.registry.len()))
        .collect();
    for row in data.rows() {
        let b = tree.node(tree.leaf_of_row(row)).block_id.unwrap();
        accs[b].add(row, &w.registry);
    }
    let mut out = vec![0u64; w.len()];
    for acc in &accs {
        if acc.count() == 0 {
            continue;
        }
        let d = acc.finish();
        for (q, s) in skip_flags(d.as_ref(), w).into_iter().enumerate() {
            if s {
                out[q] += acc.count() as u64;
            }
        }
    }
    out
}
