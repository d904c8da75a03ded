//! Greedy top-down construction, the online approximation bound, and the
//! pairwise sufficient condition for tree submodularity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{ColumnKind, Cut, Dataset, Query, Workload};
use crate::skipcost::{skip_flags, tree_capacity};
use crate::tree::{DescAccumulator, NodeId, QdTree, SemanticDescription};

#[derive(Debug, Clone)]
pub struct GreedyConfig {
    pub min_block_size: usize,
    pub cuts: Vec<Cut>,
    /// Allow one child below `min_block_size` (overlap builds).
    pub relaxed: bool,
    pub execution: Execution,
}

impl GreedyConfig {
    pub fn new(min_block_size: usize, cuts: Vec<Cut>) -> Self {
        GreedyConfig {
            min_block_size,
            cuts,
            relaxed: false,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_block_size == 0 {
            return Err(Error::Config("min block size must be at least 1".into()));
        }
        if self.cuts.is_empty() {
            return Err(Error::Config("candidate cut set is empty".into()));
        }
        Ok(())
    }

    fn node_may_split(&self, size: usize) -> bool {
        if self.relaxed {
            size > self.min_block_size
        } else {
            size >= 2 * self.min_block_size
        }
    }

    fn children_ok(&self, l: usize, r: usize) -> bool {
        let b = self.min_block_size;
        if self.relaxed {
            l >= 1 && r >= 1 && l.max(r) >= b
        } else {
            l >= b && r >= b
        }
    }
}

/// What a build maximizes, as a function of per-query skipped-row totals.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `C(T) = Σ_q skipped_q`.
    Plain,
    /// `Σ_q max(base_q, skipped_q)`, counting this tree only for `active` queries.
    Joint { base: Vec<u64>, active: Vec<bool> },
}

impl Objective {
    pub fn value(&self, skipped: &[u64]) -> u64 {
        match self {
            Objective::Plain => skipped.iter().sum(),
            Objective::Joint { base, active } => skipped
                .iter()
                .zip(base)
                .zip(active)
                .map(|((&s, &b), &a)| if a { s.max(b) } else { b })
                .sum(),
        }
    }
}

struct Open {
    node: NodeId,
    rows: Vec<usize>,
    contrib: Vec<u64>,
}

fn contribution(desc: Option<&SemanticDescription>, n: usize, w: &Workload) -> Vec<u64> {
    skip_flags(desc, w)
        .into_iter()
        .map(|s| if s && n > 0 { n as u64 } else { 0 })
        .collect()
}

fn describe(data: &Dataset, rows: &[usize], w: &Workload) -> Option<SemanticDescription> {
    SemanticDescription::of_rows(data.schema(), &w.registry, rows.iter().map(|&i| data.row(i)))
}

pub fn greedy_build(data: &Dataset, w: &Workload, cfg: &GreedyConfig) -> Result<QdTree> {
    greedy_build_with(data, w, cfg, &Objective::Plain)
}

/// Level-by-level, left-to-right greedy splitting. A node is split with the
/// cut maximizing the objective (lowest cut index on ties) only if that
/// strictly improves it.
pub fn greedy_build_with(data: &Dataset, w: &Workload, cfg: &GreedyConfig, objective: &Objective) -> Result<QdTree> {
    let tree = QdTree::new(data.schema().clone(), w.registry.clone());
    greedy_extend(tree, data, w, cfg, objective)
}

/// Continues greedy splitting from the leaves of `tree`, processed as the
/// first level in block order.
pub fn greedy_extend(
    mut tree: QdTree,
    data: &Dataset,
    w: &Workload,
    cfg: &GreedyConfig,
    objective: &Objective,
) -> Result<QdTree> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let leaves = tree.leaves();
    let mut rows_by_leaf = vec![Vec::new(); leaves.len()];
    for (i, row) in data.rows().enumerate() {
        rows_by_leaf[tree.node(tree.leaf_of_row(row)).block_id.unwrap()].push(i);
    }
    let mut skipped = vec![0u64; w.len()];
    let mut level: Vec<Open> = leaves
        .into_iter()
        .zip(rows_by_leaf)
        .map(|(node, rows)| {
            let contrib = contribution(describe(data, &rows, w).as_ref(), rows.len(), w);
            for (s, c) in skipped.iter_mut().zip(&contrib) {
                *s += c;
            }
            Open { node, rows, contrib }
        })
        .collect();
    while !level.is_empty() {
        let mut next = Vec::new();
        for open in level {
            if !cfg.node_may_split(open.rows.len()) {
                continue;
            }
            let current = objective.value(&skipped);
            let Some((cut_idx, lc, rc)) = best_cut(data, w, cfg, objective, &skipped, &open) else {
                continue;
            };
            let mut trial = skipped.clone();
            apply_delta(&mut trial, &open.contrib, &lc, &rc);
            if objective.value(&trial) <= current {
                continue;
            }
            skipped = trial;
            let cut = &cfg.cuts[cut_idx];
            let (l, r) = tree.split_mut(open.node, cut.clone())?;
            let (lrows, rrows): (Vec<usize>, Vec<usize>) = open.rows.iter().partition(|&&i| cut.eval(data.row(i)));
            next.push(Open {
                node: l,
                rows: lrows,
                contrib: lc,
            });
            next.push(Open {
                node: r,
                rows: rrows,
                contrib: rc,
            });
        }
        level = next;
    }
    Ok(tree)
}

fn apply_delta(skipped: &mut [u64], old: &[u64], l: &[u64], r: &[u64]) {
    for q in 0..skipped.len() {
        skipped[q] = skipped[q] - old[q] + l[q] + r[q];
    }
}

type Candidate = (usize, Vec<u64>, Vec<u64>);

fn best_cut(
    data: &Dataset,
    w: &Workload,
    cfg: &GreedyConfig,
    objective: &Objective,
    skipped: &[u64],
    open: &Open,
) -> Option<Candidate> {
    let schema = data.schema();
    let nadv = w.registry.len();
    let evaluated = cfg.execution.map_range(cfg.cuts.len(), |i| {
        let cut = &cfg.cuts[i];
        let mut la = DescAccumulator::new(schema, nadv);
        let mut ra = DescAccumulator::new(schema, nadv);
        for &r in &open.rows {
            let row = data.row(r);
            if cut.eval(row) {
                la.add(row, &w.registry);
            } else {
                ra.add(row, &w.registry);
            }
        }
        if !cfg.children_ok(la.count(), ra.count()) {
            return None;
        }
        let lc = contribution(la.finish().as_ref(), la.count(), w);
        let rc = contribution(ra.finish().as_ref(), ra.count(), w);
        let mut trial = skipped.to_vec();
        apply_delta(&mut trial, &open.contrib, &lc, &rc);
        Some((objective.value(&trial), i, lc, rc))
    });
    let mut best: Option<(u64, usize, Vec<u64>, Vec<u64>)> = None;
    for cand in evaluated.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| cand.0 > b.0) {
            best = Some(cand);
        }
    }
    best.map(|(_, i, l, r)| (i, l, r))
}

/// Terms of the online bound `C(T) ≥ OPT − (2|V|/b)(C(T) − C(T^{-1}))`,
/// where `T^{-1}` is `T` without its deepest level of leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub c_t: u64,
    pub c_t_minus_1: u64,
    pub opt: Option<u64>,
    pub num_rows: usize,
    pub min_block_size: usize,
    /// `C(T) + (2|V|/b)(C(T) − C(T^{-1}))`: the largest OPT consistent with the bound.
    pub online_bound: f64,
    pub holds: bool,
}

/// Computes the bound terms on `data`; with `opt` given, fails with
/// `BoundViolation` if `C(T) > OPT` or the online bound does not hold.
pub fn check_online_bound(
    tree: &QdTree,
    data: &Dataset,
    w: &Workload,
    b: usize,
    opt: Option<u64>,
) -> Result<BoundReport> {
    let c_t = tree_capacity(tree, data, w);
    let c_t_minus_1 = tree_capacity(&tree.without_last_level(), data, w);
    let v = data.len() as u128;
    let gap = c_t.saturating_sub(c_t_minus_1) as u128;
    let online_bound = c_t as f64 + 2.0 * data.len() as f64 / b as f64 * gap as f64;
    // exact form: b * (opt - C(T)) <= 2|V| * gap
    let holds = opt.is_none_or(|o| c_t <= o && (b as u128) * (o - c_t) as u128 <= 2 * v * gap);
    let report = BoundReport {
        c_t,
        c_t_minus_1,
        opt,
        num_rows: data.len(),
        min_block_size: b,
        online_bound,
        holds,
    };
    if !holds {
        return Err(Error::BoundViolation {
            c_t,
            opt: opt.unwrap_or(0),
            bound: online_bound,
        });
    }
    Ok(report)
}

fn skipped_set(region: &SemanticDescription, w: &Workload) -> Vec<bool> {
    w.queries.iter().map(|q| !region.intersects(q, &w.registry)).collect()
}

/// Checks `Q(p1 ∧ p2) ⊆ Q(p1) ∪ Q(p2)` over every pair of cut literals
/// (each cut and its negation) from distinct cuts, where `Q(p)` is the set of
/// queries disjoint from the subspace satisfying `p`.
pub fn check_submodularity_condition(cuts: &[Cut], w: &Workload, schema: &crate::model::Schema) -> Result<bool> {
    for (i, q) in w.queries.iter().enumerate() {
        if !q.is_conjunctive() {
            return Err(Error::UnsupportedQueryShape(format!("query {i} is not conjunctive")));
        }
    }
    let full = SemanticDescription::full(schema, w.registry.len());
    let literals: Vec<(usize, SemanticDescription)> = cuts
        .iter()
        .enumerate()
        .flat_map(|(i, c)| [(i, full.restrict(c, true)), (i, full.restrict(c, false))])
        .collect();
    let sets: Vec<Vec<bool>> = literals.iter().map(|(_, d)| skipped_set(d, w)).collect();
    for (a, (ia, da)) in literals.iter().enumerate() {
        for (b, (ib, _)) in literals.iter().enumerate().skip(a + 1) {
            if ia == ib {
                continue;
            }
            let (ci, pos) = (ib, b % 2 == 0);
            let both = da.restrict(&cuts[*ci], pos);
            // an empty conjunction never holds rows, so it never forms a node
            if both.is_empty() {
                continue;
            }
            let joint = skipped_set(&both, w);
            if joint.iter().enumerate().any(|(q, &s)| s && !sets[a][q] && !sets[b][q]) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// True if every cut is a unary predicate on a numeric column.
pub fn is_range_only(cuts: &[Cut], schema: &crate::model::Schema) -> bool {
    cuts.iter().all(|c| match c {
        Cut::Unary(p) => schema.column(p.column()).kind == ColumnKind::Numeric,
        Cut::Advanced(_) => false,
    })
}

/// True if every query is a conjunction of range predicates.
pub fn is_conjunctive_range(w: &Workload) -> bool {
    w.queries.iter().all(|q| {
        let mut ok = q.is_conjunctive();
        q.for_each_leaf(&mut |l| {
            if !matches!(l, Query::Pred(p) if p.is_range()) {
                ok = false;
            }
        });
        ok
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CmpOp, Column, Schema, UnaryPredicate};

    fn schema() -> Schema {
        Schema::new(vec![Column::numeric("x", 100), Column::numeric("y", 100)]).unwrap()
    }

    fn pred(s: &Schema, c: usize, op: CmpOp, v: u32) -> UnaryPredicate {
        UnaryPredicate::cmp(s, c, op, v).unwrap()
    }

    #[test]
    fn tiny_dataset_stays_whole() {
        let s = schema();
        let d = Dataset::new(s.clone(), (0..5).map(|i| vec![i, i]).collect()).unwrap();
        let w = Workload::simple(&s, vec![Query::Pred(pred(&s, 0, CmpOp::Lt, 2))]).unwrap();
        let cfg = GreedyConfig::new(3, vec![Cut::Unary(pred(&s, 0, CmpOp::Lt, 2))]);
        let t = greedy_build(&d, &w, &cfg).unwrap();
        assert_eq!(t.num_leaves(), 1);
    }

    #[test]
    fn empty_dataset_rejected() {
        let s = schema();
        let d = Dataset::new(s.clone(), vec![]).unwrap();
        let w = Workload::simple(&s, vec![Query::Pred(pred(&s, 0, CmpOp::Lt, 2))]).unwrap();
        let cfg = GreedyConfig::new(1, vec![Cut::Unary(pred(&s, 0, CmpOp::Lt, 2))]);
        assert!(matches!(greedy_build(&d, &w, &cfg), Err(Error::EmptyDataset)));
    }

    #[test]
    fn picks_separating_cut_and_respects_b() {
        let s = schema();
        let d = Dataset::new(s.clone(), (0..40).map(|i| vec![i * 2, (i * 37) % 100]).collect()).unwrap();
        let w = Workload::simple(&s, vec![Query::Pred(pred(&s, 0, CmpOp::Lt, 20))]).unwrap();
        let cuts = vec![
            Cut::Unary(pred(&s, 1, CmpOp::Lt, 50)),
            Cut::Unary(pred(&s, 0, CmpOp::Lt, 20)),
        ];
        let t = greedy_build(&d, &w, &GreedyConfig::new(5, cuts)).unwrap();
        assert_eq!(t.node(t.root()).cut.as_ref().unwrap().to_string(), "#0 < 20");
        let (_, a) = t.route_and_freeze(&d);
        assert!(a.block_sizes(t.num_leaves()).iter().all(|&n| n >= 5));
    }

    #[test]
    fn joint_objective_ignores_inactive_queries() {
        let o = Objective::Joint {
            base: vec![5, 5],
            active: vec![true, false],
        };
        assert_eq!(o.value(&[7, 100]), 12);
        assert_eq!(Objective::Plain.value(&[7, 100]), 107);
    }

    #[test]
    fn bound_trivial_cases() {
        let s = schema();
        let d = Dataset::new(s.clone(), (0..4).map(|i| vec![i, i]).collect()).unwrap();
        let w = Workload::simple(&s, vec![Query::Pred(pred(&s, 0, CmpOp::Lt, 2))]).unwrap();
        let t = QdTree::new(s.clone(), Default::default());
        let r = check_online_bound(&t, &d, &w, 1, Some(0)).unwrap();
        assert_eq!((r.c_t, r.c_t_minus_1, r.online_bound), (0, 0, 0.0));
        assert!(check_online_bound(&t, &d, &w, 1, Some(4)).is_err());
    }

    #[test]
    fn conjunctive_ranges_satisfy_condition() {
        let s = schema();
        let w = Workload::simple(
            &s,
            vec![
                Query::and(vec![
                    Query::Pred(pred(&s, 0, CmpOp::Lt, 30)),
                    Query::Pred(pred(&s, 1, CmpOp::Ge, 60)),
                ]),
                Query::Pred(pred(&s, 0, CmpOp::Ge, 70)),
            ],
        )
        .unwrap();
        let cuts = crate::model::candidate_cuts(&w, false);
        assert!(check_submodularity_condition(&cuts, &w, &s).unwrap());
        assert!(check_submodularity_condition(&cuts[..1], &w, &s).unwrap());
        let or = Workload::simple(
            &s,
            vec![Query::or(vec![
                Query::Pred(pred(&s, 0, CmpOp::Lt, 30)),
                Query::Pred(pred(&s, 0, CmpOp::Ge, 60)),
            ])],
        )
        .unwrap();
        assert!(matches!(
            check_submodularity_condition(&cuts, &or, &s),
            Err(Error::UnsupportedQueryShape(_))
        ));
    }
}
