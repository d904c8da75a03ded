#![allow(dead_code)]

use qdtree::{AdvancedCut, CmpOp, Column, Cut, CutRegistry, Dataset, QdTree, Query, Schema, UnaryPredicate, Workload};
use rand::Rng;

pub const NUM_DOMAIN: u32 = 30;
pub const CAT_DOMAIN: u32 = 6;

/// Two numeric columns, one categorical column and the advanced cut pair
/// `x < y` / `x >= y`.
pub fn mixed_schema() -> (Schema, CutRegistry) {
    let s = Schema::new(vec![
        Column::numeric("x", NUM_DOMAIN),
        Column::numeric("y", NUM_DOMAIN),
        Column::categorical("c", CAT_DOMAIN),
    ])
    .unwrap();
    let reg = CutRegistry::new(vec![
        AdvancedCut::new(&s, 0, 0, CmpOp::Lt, 1).unwrap(),
        AdvancedCut::new(&s, 1, 0, CmpOp::Ge, 1).unwrap(),
    ]);
    (s, reg)
}

pub fn random_rows(rng: &mut impl Rng, s: &Schema, n: usize) -> Dataset {
    let rows = (0..n)
        .map(|_| s.columns().iter().map(|c| rng.gen_range(0..c.domain_size)).collect())
        .collect();
    Dataset::new(s.clone(), rows).unwrap()
}

pub fn random_leaf(rng: &mut impl Rng, s: &Schema) -> Query {
    match rng.gen_range(0..6) {
        0 | 1 => {
            let ops = [CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];
            let op = ops[rng.gen_range(0..4)];
            let col = rng.gen_range(0..2);
            Query::Pred(UnaryPredicate::cmp(s, col, op, rng.gen_range(0..NUM_DOMAIN)).unwrap())
        }
        2 => {
            let k = rng.gen_range(1..4);
            let vals = (0..k).map(|_| rng.gen_range(0..CAT_DOMAIN)).collect();
            Query::Pred(UnaryPredicate::is_in(s, 2, vals).unwrap())
        }
        3 => Query::adv(rng.gen_range(0..2)),
        4 => Query::not_adv(rng.gen_range(0..2)),
        _ => Query::Pred(UnaryPredicate::cmp(s, 0, CmpOp::Lt, rng.gen_range(1..NUM_DOMAIN)).unwrap()),
    }
}

pub fn random_query(rng: &mut impl Rng, s: &Schema, depth: usize) -> Query {
    if depth == 0 || rng.gen_bool(0.4) {
        return random_leaf(rng, s);
    }
    let kids = (0..rng.gen_range(2..4))
        .map(|_| random_query(rng, s, depth - 1))
        .collect();
    if rng.gen_bool(0.5) {
        Query::and(kids)
    } else {
        Query::or(kids)
    }
}

pub fn random_workload(rng: &mut impl Rng, s: &Schema, reg: &CutRegistry, n: usize) -> Workload {
    let qs = (0..n).map(|_| random_query(rng, s, 2)).collect();
    Workload::new(s, reg.clone(), qs).unwrap()
}

/// Random splits of random leaves; cuts that would empty a child are skipped.
pub fn random_tree(rng: &mut impl Rng, s: &Schema, reg: &CutRegistry, cuts: &[Cut], splits: usize) -> QdTree {
    let mut t = QdTree::new(s.clone(), reg.clone());
    for _ in 0..splits {
        let leaves = t.leaves();
        let leaf = leaves[rng.gen_range(0..leaves.len())];
        let cut = cuts[rng.gen_range(0..cuts.len())].clone();
        let _ = t.split_mut(leaf, cut);
    }
    t
}

/// Indices of rows satisfying `q`, by brute force.
pub fn matching(data: &Dataset, w: &Workload, q: &Query) -> Vec<usize> {
    (0..data.len()).filter(|&i| q.eval(data.row(i), &w.registry)).collect()
}

/// Conjunction of one or two range predicates over any numeric columns.
pub fn random_box(rng: &mut impl Rng, s: &Schema) -> Query {
    let preds = (0..rng.gen_range(1..3))
        .map(|_| {
            let col = rng.gen_range(0..s.len());
            let dom = s.column(col).domain_size;
            let op = if rng.gen_bool(0.5) { CmpOp::Lt } else { CmpOp::Ge };
            Query::Pred(UnaryPredicate::cmp(s, col, op, rng.gen_range(0..dom)).unwrap())
        })
        .collect();
    Query::and(preds)
}
