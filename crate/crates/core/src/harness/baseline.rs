//! Workload-oblivious partitioners used as comparison points.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::rng::substream;
use crate::error::{Error, Result};
use crate::model::{CutRegistry, Dataset, Workload};
use crate::skipcost::{evaluate_blocks, SkipReport};
use crate::tree::{BlockAssignment, SemanticDescription};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineSpec {
    /// Shuffle, then cut into fixed-size blocks.
    Random { block_size: usize, seed: u64 },
    /// Sort by `column`, then cut into fixed-size blocks.
    Range { block_size: usize, column: usize },
}

#[derive(Debug, Clone)]
pub struct BaselineLayout {
    pub assignment: BlockAssignment,
    /// Min-max descriptions per block.
    pub descriptions: Vec<SemanticDescription>,
    pub sizes: Vec<u64>,
}

impl BaselineLayout {
    pub fn evaluate(&self, w: &Workload) -> SkipReport {
        evaluate_blocks(&self.descriptions, &self.sizes, self.assignment.num_rows(), w)
    }
}

pub fn baseline_partition(spec: &BaselineSpec, data: &Dataset, registry: &CutRegistry) -> Result<BaselineLayout> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    let block_size = match *spec {
        BaselineSpec::Random { block_size, seed } => {
            order.shuffle(&mut substream(seed, "shuffle"));
            block_size
        }
        BaselineSpec::Range { block_size, column } => {
            if column >= data.schema().len() {
                return Err(Error::Config(format!("range column {column} out of bounds")));
            }
            order.sort_by_key(|&i| data.row(i)[column]);
            block_size
        }
    };
    if block_size == 0 {
        return Err(Error::Config("block size must be at least 1".into()));
    }
    let mut blocks = vec![0; data.len()];
    let mut descriptions = Vec::new();
    let mut sizes = Vec::new();
    for (b, chunk) in order.chunks(block_size).enumerate() {
        for &r in chunk {
            blocks[r] = b;
        }
        let d = SemanticDescription::of_rows(data.schema(), registry, chunk.iter().map(|&r| data.row(r)));
        descriptions.push(d.expect("chunks are non-empty"));
        sizes.push(chunk.len() as u64);
    }
    Ok(BaselineLayout {
        assignment: BlockAssignment::Single(blocks),
        descriptions,
        sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CmpOp, Column, Query, Schema, UnaryPredicate};

    #[test]
    fn range_on_query_column_matches_selectivity() {
        let s = Schema::new(vec![Column::numeric("t", 100)]).unwrap();
        let d = Dataset::new(s.clone(), (0..100).rev().map(|i| vec![i]).collect()).unwrap();
        let w = Workload::simple(
            &s,
            vec![Query::Pred(UnaryPredicate::cmp(&s, 0, CmpOp::Lt, 20).unwrap())],
        )
        .unwrap();
        let l = baseline_partition(
            &BaselineSpec::Range {
                block_size: 10,
                column: 0,
            },
            &d,
            &w.registry,
        )
        .unwrap();
        assert_eq!(l.evaluate(&w).access_fraction, 0.2);
        let one = baseline_partition(
            &BaselineSpec::Random {
                block_size: 500,
                seed: 1,
            },
            &d,
            &w.registry,
        )
        .unwrap();
        assert_eq!(one.sizes, vec![100]);
        assert_eq!(one.evaluate(&w).access_fraction, 1.0);
    }
}
