//! Exhaustive search for the best qd-tree over a small cut set.
//!
//! Trees are deduplicated by the row partition they induce: the state is a
//! row subset (reachable as an intersection of cut literals) plus a leaf budget.

use std::collections::HashMap;

use crate::bits::BitMask;
use crate::error::{Error, Result};
use crate::model::{Cut, Dataset, Workload};
use crate::skipcost::block_capacity;
use crate::tree::{NodeId, QdTree, SemanticDescription};

/// Largest cut set accepted.
pub const MAX_CUTS: usize = 12;
/// Memo states explored before giving up.
pub const MAX_STATES: usize = 2_000_000;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub c_opt: u64,
    pub tree: QdTree,
    pub states: usize,
}

#[derive(Clone, Copy)]
struct Choice {
    value: u64,
    /// (cut, leaves given to the left child)
    split: Option<(usize, usize)>,
}

struct Search<'a> {
    data: &'a Dataset,
    w: &'a Workload,
    b: usize,
    sat: Vec<BitMask>,
    memo: HashMap<(BitMask, usize), Choice>,
}

impl Search<'_> {
    fn leaf_value(&self, rows: &BitMask) -> u64 {
        let n = rows.count_ones();
        let d = SemanticDescription::of_rows(
            self.data.schema(),
            &self.w.registry,
            rows.iter_ones().map(|i| self.data.row(i)),
        );
        block_capacity(d.as_ref(), n, self.w)
    }

    fn best(&mut self, rows: &BitMask, budget: usize) -> Result<Choice> {
        let key = (rows.clone(), budget);
        if let Some(c) = self.memo.get(&key) {
            return Ok(*c);
        }
        if self.memo.len() >= MAX_STATES {
            return Err(Error::TooLarge(format!("more than {MAX_STATES} search states")));
        }
        let mut best = Choice {
            value: self.leaf_value(rows),
            split: None,
        };
        let n = rows.count_ones();
        if budget >= 2 && n >= 2 * self.b {
            for c in 0..self.sat.len() {
                let l = rows.and(&self.sat[c]);
                let r = rows.and_not(&self.sat[c]);
                let (nl, nr) = (l.count_ones(), r.count_ones());
                if nl < self.b || nr < self.b {
                    continue;
                }
                for kl in 1..budget {
                    let lv = self.best(&l, kl)?.value;
                    let rv = self.best(&r, budget - kl)?.value;
                    if lv + rv > best.value {
                        best = Choice {
                            value: lv + rv,
                            split: Some((c, kl)),
                        };
                    }
                }
            }
        }
        self.memo.insert(key, best);
        Ok(best)
    }

    fn build(&mut self, tree: &mut QdTree, node: NodeId, rows: &BitMask, budget: usize, cuts: &[Cut]) -> Result<()> {
        let choice = self.best(rows, budget)?;
        if let Some((c, kl)) = choice.split {
            let (l, r) = tree.split_mut(node, cuts[c].clone())?;
            let (lr, rr) = (rows.and(&self.sat[c]), rows.and_not(&self.sat[c]));
            self.build(tree, l, &lr, kl, cuts)?;
            self.build(tree, r, &rr, budget - kl, cuts)?;
        }
        Ok(())
    }
}

/// Maximum `C` over all qd-trees with leaves of at least `b` rows and at most
/// `max_leaves` leaves (default: as many as `b` allows), with one witness tree.
pub fn oracle_opt(
    data: &Dataset,
    w: &Workload,
    cuts: &[Cut],
    b: usize,
    max_leaves: Option<usize>,
) -> Result<OracleResult> {
    if b == 0 {
        return Err(Error::Config("min block size must be at least 1".into()));
    }
    if cuts.len() > MAX_CUTS {
        return Err(Error::TooLarge(format!("{} cuts (limit {MAX_CUTS})", cuts.len())));
    }
    let n = data.len();
    let budget = max_leaves.unwrap_or((n / b).max(1)).max(1);
    let sat = cuts
        .iter()
        .map(|c| BitMask::from_indices(n, (0..n).filter(|&i| c.eval(data.row(i)))))
        .collect();
    let mut search = Search {
        data,
        w,
        b,
        sat,
        memo: HashMap::new(),
    };
    let all = BitMask::ones(n);
    let c_opt = search.best(&all, budget)?.value;
    let mut tree = QdTree::new(data.schema().clone(), w.registry.clone());
    let root = tree.root();
    search.build(&mut tree, root, &all, budget, cuts)?;
    Ok(OracleResult {
        c_opt,
        tree,
        states: search.memo.len(),
    })
}
