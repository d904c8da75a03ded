//! Fixed-width binary encoding of node descriptions.

use crate::model::{ColumnKind, Schema};
use crate::tree::{ColumnDesc, SemanticDescription};

/// Bits needed to encode values in `0..=domain` (upper bounds may equal the domain size).
pub fn bound_bits(domain: u32) -> usize {
    (u32::BITS - domain.leading_zeros()) as usize
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Featurizer {
    widths: Vec<usize>,
    n_adv: usize,
    width: usize,
}

impl Featurizer {
    pub fn new(schema: &Schema, n_adv: usize) -> Self {
        let widths: Vec<usize> = schema
            .columns()
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Numeric => 2 * bound_bits(c.domain_size),
                ColumnKind::Categorical => c.domain_size as usize,
            })
            .collect();
        let width = widths.iter().sum::<usize>() + n_adv;
        Featurizer { widths, n_adv, width }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn encode(&self, desc: &SemanticDescription) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width);
        for (c, w) in desc.columns.iter().zip(&self.widths) {
            match c {
                ColumnDesc::Range { lo, hi } => {
                    let bits = w / 2;
                    for v in [*lo, *hi] {
                        out.extend((0..bits).rev().map(|i| ((v >> i) & 1) as f64));
                    }
                }
                ColumnDesc::Mask(m) => out.extend((0..m.len()).map(|i| m.get(i) as u8 as f64)),
            }
        }
        out.extend((0..self.n_adv).map(|i| desc.adv.get(i) as u8 as f64));
        debug_assert_eq!(out.len(), self.width);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Column;

    #[test]
    fn bit_widths() {
        assert_eq!(bound_bits(1), 1);
        assert_eq!(bound_bits(100), 7);
        assert_eq!(bound_bits(128), 8);
        assert_eq!(bound_bits(10_000), 14);
    }

    #[test]
    fn encodes_bounds_and_masks() {
        let s = Schema::new(vec![Column::numeric("a", 4), Column::categorical("c", 3)]).unwrap();
        let f = Featurizer::new(&s, 1);
        assert_eq!(f.width(), 3 + 3 + 3 + 1);
        let mut d = SemanticDescription::full(&s, 1);
        d.columns[0] = ColumnDesc::Range { lo: 1, hi: 4 };
        assert_eq!(f.encode(&d), vec![0., 0., 1., 1., 0., 0., 1., 1., 1., 1.]);
    }
}
