//! Two full copies of the data, each organized by its own tree; every query
//! reads whichever copy skips more for it.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::greedy::{greedy_build_with, GreedyConfig, Objective};
use crate::model::{Cut, Dataset, Query, Workload};
use crate::skipcost::{per_query_skipped, SkipReport};
use crate::tree::{BlockAssignment, QdTree};

#[derive(Debug, Clone)]
pub struct TwoTreeConfig {
    pub min_block_size: usize,
    pub cuts: Vec<Cut>,
    /// Size of the worst-served query set the second tree is tuned for.
    pub k: usize,
    /// Alternating rebuild rounds after the first pair.
    pub max_iters: usize,
    /// Store only second-tree blocks that some worst-served query touches.
    pub prune: bool,
    pub execution: Execution,
}

impl TwoTreeConfig {
    pub fn new(min_block_size: usize, cuts: Vec<Cut>, k: usize) -> Self {
        TwoTreeConfig {
            min_block_size,
            cuts,
            k,
            max_iters: 3,
            prune: false,
            execution: Execution::default(),
        }
    }

    fn greedy(&self) -> GreedyConfig {
        let mut g = GreedyConfig::new(self.min_block_size, self.cuts.clone());
        g.execution = self.execution;
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeChoice {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoTreeLayout {
    /// Both trees are frozen on the build data.
    pub t1: QdTree,
    pub t2: QdTree,
    /// Indices of the worst-served queries under the first tree, ascending.
    pub worst_queries: Vec<usize>,
    /// Whether each second-tree block is stored.
    pub t2_kept: Vec<bool>,
    pub t1_sizes: Vec<u64>,
    pub t2_sizes: Vec<u64>,
    pub num_rows: usize,
    /// `Σ_q max(skipped under T1, skipped under T2)` after each accepted round.
    pub joint_history: Vec<u64>,
}

fn joint(s1: &[u64], s2: &[u64]) -> u64 {
    s1.iter().zip(s2).map(|(a, b)| *a.max(b)).sum()
}

/// Builds the first tree on the whole workload, picks the `k` queries it
/// serves worst, and builds the second tree to maximize the joint skip count
/// of those queries. Then alternates rebuilding each tree against the other
/// while the joint count strictly grows, up to `max_iters` rounds.
pub fn build_two_tree(data: &Dataset, w: &Workload, cfg: &TwoTreeConfig) -> Result<TwoTreeLayout> {
    if cfg.k == 0 || cfg.k >= w.len() {
        return Err(Error::Config(format!(
            "k must be in 1..{} for a workload of {} queries",
            w.len(),
            w.len()
        )));
    }
    let g = cfg.greedy();
    let mut t1 = greedy_build_with(data, w, &g, &Objective::Plain)?;
    let s1 = per_query_skipped(&t1, data, w);
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by_key(|&q| (s1[q], q));
    let mut worst = order[..cfg.k].to_vec();
    worst.sort_unstable();
    let mut active = vec![false; w.len()];
    for &q in &worst {
        active[q] = true;
    }
    let second = |base: &[u64]| {
        greedy_build_with(
            data,
            w,
            &g,
            &Objective::Joint {
                base: base.to_vec(),
                active: active.clone(),
            },
        )
    };
    let mut t2 = second(&s1)?;
    let mut s2 = per_query_skipped(&t2, data, w);
    let mut history = vec![joint(&s1, &s2)];
    for _ in 0..cfg.max_iters {
        let n1 = greedy_build_with(
            data,
            w,
            &g,
            &Objective::Joint {
                base: s2.clone(),
                active: vec![true; w.len()],
            },
        )?;
        let ns1 = per_query_skipped(&n1, data, w);
        let n2 = second(&ns1)?;
        let ns2 = per_query_skipped(&n2, data, w);
        let j = joint(&ns1, &ns2);
        if j <= *history.last().unwrap() {
            break;
        }
        (t1, t2, s2) = (n1, n2, ns2);
        history.push(j);
    }
    let (t1, a1) = t1.route_and_freeze(data);
    let (t2, a2) = t2.route_and_freeze(data);
    let t1_sizes = a1.block_sizes(t1.num_leaves()).into_iter().map(|n| n as u64).collect();
    let t2_sizes: Vec<u64> = a2.block_sizes(t2.num_leaves()).into_iter().map(|n| n as u64).collect();
    let t2_kept = if cfg.prune {
        let mut hit = vec![false; t2_sizes.len()];
        for &q in &worst {
            for b in t2.route_query(&w.queries[q]) {
                hit[b] = true;
            }
        }
        hit
    } else {
        vec![true; t2_sizes.len()]
    };
    Ok(TwoTreeLayout {
        t1,
        t2,
        worst_queries: worst,
        t2_kept,
        t1_sizes,
        t2_sizes,
        num_rows: data.len(),
        joint_history: history,
    })
}

impl TwoTreeLayout {
    /// Block ids are global: first-tree blocks, then second-tree blocks.
    pub fn num_blocks(&self) -> usize {
        self.t1_sizes.len() + self.t2_sizes.len()
    }

    pub fn block_sizes(&self) -> Vec<u64> {
        let kept = self
            .t2_sizes
            .iter()
            .zip(&self.t2_kept)
            .map(|(&n, &k)| if k { n } else { 0 });
        self.t1_sizes.iter().copied().chain(kept).collect()
    }

    pub fn extra_storage_rows(&self) -> u64 {
        self.block_sizes().iter().sum::<u64>() - self.num_rows as u64
    }

    fn scanned(sizes: &[u64], blocks: &[usize]) -> u64 {
        blocks.iter().map(|&b| sizes[b]).sum()
    }

    /// The copy that reads fewer rows for `q`; the first on ties or when a
    /// needed second-tree block was pruned.
    pub fn choose(&self, q: &Query) -> (TreeChoice, Vec<usize>) {
        let b1 = self.t1.route_query(q);
        let b2 = self.t2.route_query(q);
        let usable = b2.iter().all(|&b| self.t2_kept[b]);
        if usable && Self::scanned(&self.t2_sizes, &b2) < Self::scanned(&self.t1_sizes, &b1) {
            (TreeChoice::Second, b2)
        } else {
            (TreeChoice::First, b1)
        }
    }

    /// Global block ids to scan for `q`.
    pub fn route_query(&self, q: &Query) -> Vec<usize> {
        match self.choose(q) {
            (TreeChoice::First, bs) => bs,
            (TreeChoice::Second, bs) => bs.into_iter().map(|b| b + self.t1_sizes.len()).collect(),
        }
    }

    pub fn route_data(&self, data: &Dataset) -> BlockAssignment {
        let off = self.t1_sizes.len();
        BlockAssignment::Multi(
            data.rows()
                .map(|r| {
                    let a = self.t1.node(self.t1.leaf_of_row(r)).block_id.unwrap();
                    let b = self.t2.node(self.t2.leaf_of_row(r)).block_id.unwrap();
                    if self.t2_kept[b] {
                        vec![a, b + off]
                    } else {
                        vec![a]
                    }
                })
                .collect(),
        )
    }

    pub fn evaluate(&self, w: &Workload) -> SkipReport {
        let scans: Vec<Vec<usize>> = w.queries.iter().map(|q| self.route_query(q)).collect();
        SkipReport::from_scans(&self.block_sizes(), &scans, self.num_rows)
    }

    pub fn to_json_value(&self) -> Value {
        json!({
            "t1": self.t1.to_json_value(),
            "t2": self.t2.to_json_value(),
            "worst_queries": self.worst_queries,
            "t2_kept": self.t2_kept,
            "t1_sizes": self.t1_sizes,
            "t2_sizes": self.t2_sizes,
            "num_rows": self.num_rows,
            "joint_history": self.joint_history,
        })
    }

    pub fn from_json_value(v: &Value) -> Result<Self> {
        let field = |k: &str| v.get(k).ok_or_else(|| Error::parse("$", format!("missing \"{k}\"")));
        let uints = |k: &str| -> Result<Vec<u64>> {
            field(k)?
                .as_array()
                .ok_or_else(|| Error::parse(format!("$.{k}"), "expected an array"))?
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    x.as_u64()
                        .ok_or_else(|| Error::parse(format!("$.{k}[{i}]"), "expected a non-negative integer"))
                })
                .collect()
        };
        let t1 = QdTree::from_json_value(field("t1")?)?;
        let t2 = QdTree::from_json_value(field("t2")?)?;
        let t2_kept = field("t2_kept")?
            .as_array()
            .ok_or_else(|| Error::parse("$.t2_kept", "expected an array"))?
            .iter()
            .enumerate()
            .map(|(i, x)| {
                x.as_bool()
                    .ok_or_else(|| Error::parse(format!("$.t2_kept[{i}]"), "expected a boolean"))
            })
            .collect::<Result<Vec<_>>>()?;
        let layout = TwoTreeLayout {
            worst_queries: uints("worst_queries")?.into_iter().map(|q| q as usize).collect(),
            t2_kept,
            t1_sizes: uints("t1_sizes")?,
            t2_sizes: uints("t2_sizes")?,
            num_rows: field("num_rows")?
                .as_u64()
                .ok_or_else(|| Error::parse("$.num_rows", "expected a non-negative integer"))?
                as usize,
            joint_history: uints("joint_history")?,
            t1,
            t2,
        };
        if layout.t1_sizes.len() != layout.t1.num_leaves()
            || layout.t2_sizes.len() != layout.t2.num_leaves()
            || layout.t2_kept.len() != layout.t2_sizes.len()
        {
            return Err(Error::parse("$", "per-block arrays must match the trees' leaves"));
        }
        Ok(layout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{candidate_cuts, CmpOp, Column, Schema, UnaryPredicate};

    /// Queries on `a` want cuts on column 0, queries on `b` on column 1; a
    /// block size of a quarter of the data allows only one level of each.
    fn clusters() -> (Dataset, Workload) {
        let s = Schema::new(vec![Column::numeric("a", 100), Column::numeric("b", 100)]).unwrap();
        let rows = (0..10_000u32).map(|i| vec![i % 100, (i / 100) % 100]).collect();
        let d = Dataset::new(s.clone(), rows).unwrap();
        let p = |c, op, v| Query::Pred(UnaryPredicate::cmp(&s, c, op, v).unwrap());
        let qs = vec![
            p(0, CmpOp::Lt, 25),
            p(0, CmpOp::Ge, 75),
            p(1, CmpOp::Lt, 25),
            p(1, CmpOp::Ge, 75),
        ];
        let w = Workload::simple(&s, qs).unwrap();
        (d, w)
    }

    #[test]
    fn second_tree_helps_the_other_cluster() {
        let (d, w) = clusters();
        let cuts = candidate_cuts(&w, false);
        let cfg = TwoTreeConfig::new(2500, cuts, 2);
        let l = build_two_tree(&d, &w, &cfg).unwrap();
        let single = crate::skipcost::evaluate_partitioning(&l.t1, &l.t1.route_rows(&d), &d, &w);
        let r = l.evaluate(&w);
        assert!(r.access_fraction < single.access_fraction);
        assert_eq!(r.per_query_scanned, vec![2500; 4]);
        for (a, b) in r.per_query_scanned.iter().zip(&single.per_query_scanned) {
            assert!(a <= b);
        }
        assert!(l.joint_history.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(l.extra_storage_rows(), 10_000);
    }

    #[test]
    fn pruned_copy_stores_less_and_still_dominates() {
        let (d, w) = clusters();
        let mut cfg = TwoTreeConfig::new(2500, candidate_cuts(&w, false), 2);
        cfg.prune = true;
        let l = build_two_tree(&d, &w, &cfg).unwrap();
        assert!(l.extra_storage_rows() < 10_000);
        let single = crate::skipcost::evaluate_partitioning(&l.t1, &l.t1.route_rows(&d), &d, &w);
        let r = l.evaluate(&w);
        for (a, b) in r.per_query_scanned.iter().zip(&single.per_query_scanned) {
            assert!(a <= b);
        }
        let a = l.route_data(&d);
        for q in &w.queries {
            let blocks = l.route_query(q);
            for (i, row) in d.rows().enumerate() {
                if q.eval(row, &w.registry) {
                    assert!(a.blocks_of(i).iter().any(|b| blocks.contains(b)));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_k() {
        let (d, w) = clusters();
        let cuts = candidate_cuts(&w, false);
        assert!(build_two_tree(&d, &w, &TwoTreeConfig::new(2500, cuts.clone(), 0)).is_err());
        assert!(build_two_tree(&d, &w, &TwoTreeConfig::new(2500, cuts, 4)).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let (d, w) = clusters();
        let l = build_two_tree(&d, &w, &TwoTreeConfig::new(2500, candidate_cuts(&w, false), 1)).unwrap();
        let back = TwoTreeLayout::from_json_value(&l.to_json_value()).unwrap();
        assert_eq!(back, l);
    }
}
