//! Semantic descriptions: per-column ranges and categorical masks plus
//! advanced-cut presence bits.

use crate::bits::BitMask;
use crate::error::{Error, Result};
use crate::model::{ColumnKind, Cut, CutRegistry, Query, Schema};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ColumnDesc {
    /// Half-open `[lo, hi)`; empty when `lo >= hi`.
    Range { lo: u32, hi: u32 },
    /// Bit `k` set means value `k` may be present.
    Mask(BitMask),
}

impl ColumnDesc {
    pub fn is_empty(&self) -> bool {
        match self {
            ColumnDesc::Range { lo, hi } => lo >= hi,
            ColumnDesc::Mask(m) => m.none(),
        }
    }

    fn contains_value(&self, v: u32) -> bool {
        match self {
            ColumnDesc::Range { lo, hi } => *lo <= v && v < *hi,
            ColumnDesc::Mask(m) => m.get(v as usize),
        }
    }

    fn is_within(&self, other: &ColumnDesc) -> bool {
        match (self, other) {
            (ColumnDesc::Range { lo, hi }, ColumnDesc::Range { lo: olo, hi: ohi }) => {
                lo >= hi || (olo <= lo && hi <= ohi)
            }
            (ColumnDesc::Mask(a), ColumnDesc::Mask(b)) => a.is_subset(b),
            _ => false,
        }
    }
}

/// Description of a node's subspace. A row matches when every column value
/// lies in its range/mask and the row satisfies no advanced cut whose bit is 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SemanticDescription {
    pub columns: Vec<ColumnDesc>,
    pub adv: BitMask,
}

impl SemanticDescription {
    /// The whole data space.
    pub fn full(schema: &Schema, n_adv: usize) -> Self {
        let columns = schema
            .columns()
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Numeric => ColumnDesc::Range {
                    lo: 0,
                    hi: c.domain_size,
                },
                ColumnKind::Categorical => ColumnDesc::Mask(BitMask::ones(c.domain_size as usize)),
            })
            .collect();
        SemanticDescription {
            columns,
            adv: BitMask::ones(n_adv),
        }
    }

    /// Empty description keeping each range's lower end: `[lo, lo)`, masks zero.
    pub fn emptied(&self) -> Self {
        SemanticDescription {
            columns: self
                .columns
                .iter()
                .map(|c| match c {
                    ColumnDesc::Range { lo, .. } => ColumnDesc::Range { lo: *lo, hi: *lo },
                    ColumnDesc::Mask(m) => ColumnDesc::Mask(BitMask::zeros(m.len())),
                })
                .collect(),
            adv: BitMask::zeros(self.adv.len()),
        }
    }

    /// True if no row can match (some range or mask is empty).
    pub fn is_empty(&self) -> bool {
        self.columns.iter().any(ColumnDesc::is_empty)
    }

    pub fn range(&self, col: usize) -> Option<(u32, u32)> {
        match self.columns[col] {
            ColumnDesc::Range { lo, hi } => Some((lo, hi)),
            ColumnDesc::Mask(_) => None,
        }
    }

    pub fn mask(&self, col: usize) -> Option<&BitMask> {
        match &self.columns[col] {
            ColumnDesc::Mask(m) => Some(m),
            ColumnDesc::Range { .. } => None,
        }
    }

    /// Left/right child descriptions for `cut`. `node` is only used for errors.
    pub fn apply_cut(&self, cut: &Cut, node: usize) -> Result<(Self, Self)> {
        let degenerate = || Error::DegenerateCut {
            node,
            cut: cut.to_string(),
        };
        let mut left = self.clone();
        let mut right = self.clone();
        match cut {
            Cut::Unary(p) => {
                let c = p.column();
                match (&self.columns[c], p.bound(), p.values()) {
                    (ColumnDesc::Range { lo, hi }, Some(b), _) => {
                        let (lo, hi) = (*lo, *hi);
                        let (l, r) = match b.hi {
                            // [0, h): left keeps the prefix, right the suffix
                            Some(h) => ((lo, hi.min(h)), (lo.max(h), hi)),
                            // [l, inf): left keeps the suffix, right the prefix
                            None => ((lo.max(b.lo), hi), (lo, hi.min(b.lo))),
                        };
                        if l.0 >= l.1 || r.0 >= r.1 {
                            return Err(degenerate());
                        }
                        left.columns[c] = ColumnDesc::Range { lo: l.0, hi: l.1 };
                        right.columns[c] = ColumnDesc::Range { lo: r.0, hi: r.1 };
                    }
                    (ColumnDesc::Mask(m), None, Some(values)) => {
                        let ind = BitMask::from_indices(m.len(), values.iter().map(|&v| v as usize));
                        let lm = m.and(&ind);
                        let rm = m.and_not(&ind);
                        if lm.none() || rm.none() {
                            return Err(degenerate());
                        }
                        left.columns[c] = ColumnDesc::Mask(lm);
                        right.columns[c] = ColumnDesc::Mask(rm);
                    }
                    _ => return Err(degenerate()),
                }
            }
            Cut::Advanced(a) => {
                if !self.adv.get(a.index) {
                    return Err(degenerate());
                }
                right.adv.set(a.index, false);
            }
        }
        Ok((left, right))
    }

    /// Conservative test of whether rows matching this description may satisfy `q`.
    pub fn intersects(&self, q: &Query, registry: &CutRegistry) -> bool {
        !self.is_empty() && self.intersects_inner(q, registry)
    }

    fn intersects_inner(&self, q: &Query, registry: &CutRegistry) -> bool {
        match q {
            Query::Pred(p) => match (&self.columns[p.column()], p.bound(), p.values()) {
                (ColumnDesc::Range { lo, hi }, Some(b), _) => (*lo).max(b.lo) < (*hi).min(b.hi.unwrap_or(u32::MAX)),
                (ColumnDesc::Mask(m), _, Some(values)) => values.iter().any(|&v| m.get(v as usize)),
                _ => true,
            },
            Query::Adv { index, negated: false } => self.adv.get(*index),
            Query::Adv { index, negated: true } => match registry.negation_of(*index) {
                Some(j) => self.adv.get(j),
                None => true,
            },
            Query::And(cs) => cs.iter().all(|c| self.intersects_inner(c, registry)),
            Query::Or(cs) => cs.iter().any(|c| self.intersects_inner(c, registry)),
        }
    }

    pub fn contains_row(&self, row: &[u32], registry: &CutRegistry) -> bool {
        self.columns.iter().zip(row).all(|(c, &v)| c.contains_value(v))
            && registry.cuts().iter().all(|ac| self.adv.get(ac.index) || !ac.eval(row))
    }

    /// `self ⊆ other`: ranges nested, masks and adv bits dominated.
    pub fn is_within(&self, other: &SemanticDescription) -> bool {
        self.columns.iter().zip(&other.columns).all(|(a, b)| a.is_within(b)) && self.adv.is_subset(&other.adv)
    }

    /// Subspace satisfying `cut` (`positive`) or its negation; may be empty.
    /// Advanced cuts only narrow the negative side.
    pub fn restrict(&self, cut: &Cut, positive: bool) -> Self {
        let mut out = self.clone();
        match cut {
            Cut::Unary(p) => match (&mut out.columns[p.column()], p.bound(), p.values()) {
                (ColumnDesc::Range { lo, hi }, Some(b), _) => {
                    let (blo, bhi) = (b.lo, b.hi.unwrap_or(u32::MAX));
                    if positive {
                        *lo = (*lo).max(blo);
                        *hi = (*hi).min(bhi);
                    } else if b.hi.is_some() {
                        *lo = (*lo).max(bhi);
                    } else {
                        *hi = (*hi).min(blo);
                    }
                }
                (ColumnDesc::Mask(m), _, Some(values)) => {
                    let ind = BitMask::from_indices(m.len(), values.iter().map(|&v| v as usize));
                    *m = if positive { m.and(&ind) } else { m.and_not(&ind) };
                }
                _ => {}
            },
            Cut::Advanced(a) => {
                if !positive {
                    out.adv.set(a.index, false);
                }
            }
        }
        out
    }

    pub fn intersect(&self, other: &SemanticDescription) -> Self {
        let columns = self
            .columns
            .iter()
            .zip(&other.columns)
            .map(|(a, b)| match (a, b) {
                (ColumnDesc::Range { lo, hi }, ColumnDesc::Range { lo: l2, hi: h2 }) => ColumnDesc::Range {
                    lo: (*lo).max(*l2),
                    hi: (*hi).min(*h2),
                },
                (ColumnDesc::Mask(x), ColumnDesc::Mask(y)) => ColumnDesc::Mask(x.and(y)),
                _ => unreachable!("descriptions over the same schema"),
            })
            .collect();
        SemanticDescription {
            columns,
            adv: self.adv.and(&other.adv),
        }
    }

    /// Smallest description containing both.
    pub fn bounding_union(&self, other: &SemanticDescription) -> Self {
        if self.is_empty() {
            return other.clone();
        }
        if other.is_empty() {
            return self.clone();
        }
        let columns = self
            .columns
            .iter()
            .zip(&other.columns)
            .map(|(a, b)| match (a, b) {
                (ColumnDesc::Range { lo, hi }, ColumnDesc::Range { lo: l2, hi: h2 }) => ColumnDesc::Range {
                    lo: (*lo).min(*l2),
                    hi: (*hi).max(*h2),
                },
                (ColumnDesc::Mask(x), ColumnDesc::Mask(y)) => ColumnDesc::Mask(x.or(y)),
                _ => unreachable!("descriptions over the same schema"),
            })
            .collect();
        SemanticDescription {
            columns,
            adv: self.adv.or(&other.adv),
        }
    }

    /// The union when it is itself a description: both agree everywhere
    /// except one column, where the ranges are adjacent or the masks disjoint.
    pub fn exact_union(&self, other: &SemanticDescription) -> Option<Self> {
        if self.adv != other.adv {
            return None;
        }
        let differing: Vec<usize> = (0..self.columns.len())
            .filter(|&i| self.columns[i] != other.columns[i])
            .collect();
        match differing[..] {
            [] => Some(self.clone()),
            [c] => {
                let col = match (&self.columns[c], &other.columns[c]) {
                    (ColumnDesc::Range { lo, hi }, ColumnDesc::Range { lo: l2, hi: h2 }) if hi == l2 || h2 == lo => {
                        ColumnDesc::Range {
                            lo: (*lo).min(*l2),
                            hi: (*hi).max(*h2),
                        }
                    }
                    (ColumnDesc::Mask(x), ColumnDesc::Mask(y)) if !x.intersects(y) => ColumnDesc::Mask(x.or(y)),
                    _ => return None,
                };
                let mut out = self.clone();
                out.columns[c] = col;
                Some(out)
            }
            _ => None,
        }
    }

    /// Tight description of `rows`: min-max ranges, observed values and
    /// observed advanced-cut satisfaction. `None` when `rows` is empty.
    pub fn of_rows<'a>(
        schema: &Schema,
        registry: &CutRegistry,
        rows: impl IntoIterator<Item = &'a [u32]>,
    ) -> Option<Self> {
        let mut acc = DescAccumulator::new(schema, registry.len());
        for r in rows {
            acc.add(r, registry);
        }
        acc.finish()
    }
}

/// Incremental builder for tight row descriptions; mergeable across chunks.
#[derive(Debug, Clone)]
pub struct DescAccumulator {
    count: usize,
    mins: Vec<u32>,
    maxs: Vec<u32>,
    masks: Vec<Option<BitMask>>,
    adv: BitMask,
}

impl DescAccumulator {
    pub fn new(schema: &Schema, n_adv: usize) -> Self {
        DescAccumulator {
            count: 0,
            mins: vec![u32::MAX; schema.len()],
            maxs: vec![0; schema.len()],
            masks: schema
                .columns()
                .iter()
                .map(|c| match c.kind {
                    ColumnKind::Categorical => Some(BitMask::zeros(c.domain_size as usize)),
                    ColumnKind::Numeric => None,
                })
                .collect(),
            adv: BitMask::zeros(n_adv),
        }
    }

    #[inline]
    pub fn add(&mut self, row: &[u32], registry: &CutRegistry) {
        self.count += 1;
        for (i, &v) in row.iter().enumerate() {
            match &mut self.masks[i] {
                Some(m) => m.set(v as usize, true),
                None => {
                    self.mins[i] = self.mins[i].min(v);
                    self.maxs[i] = self.maxs[i].max(v);
                }
            }
        }
        for ac in registry.cuts() {
            if !self.adv.get(ac.index) && ac.eval(row) {
                self.adv.set(ac.index, true);
            }
        }
    }

    pub fn merge(&mut self, other: &DescAccumulator) {
        self.count += other.count;
        for i in 0..self.mins.len() {
            self.mins[i] = self.mins[i].min(other.mins[i]);
            self.maxs[i] = self.maxs[i].max(other.maxs[i]);
            if let (Some(a), Some(b)) = (&mut self.masks[i], &other.masks[i]) {
                *a = a.or(b);
            }
        }
        self.adv = self.adv.or(&other.adv);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> Option<SemanticDescription> {
        if self.count == 0 {
            return None;
        }
        let columns = self
            .masks
            .iter()
            .enumerate()
            .map(|(i, m)| match m {
                Some(m) => ColumnDesc::Mask(m.clone()),
                None => ColumnDesc::Range {
                    lo: self.mins[i],
                    hi: self.maxs[i] + 1,
                },
            })
            .collect();
        Some(SemanticDescription {
            columns,
            adv: self.adv.clone(),
        })
    }
}
