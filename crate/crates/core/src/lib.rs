//! Workload-aware data layouts built from query-data routing trees.
//!
//! A [`QdTree`] partitions a table into blocks so that each query in a
//! workload can skip as many rows as possible. Trees can be built greedily
//! ([`greedy`]) or with a policy-gradient agent ([`woodblock`]), and extended
//! with replication or a second tree ([`extensions`]).

pub mod bits;
pub mod error;
pub mod exec;
pub mod extensions;
pub mod greedy;
pub mod harness;
pub mod model;
pub mod skipcost;
pub mod tree;
pub mod woodblock;

pub use bits::BitMask;
pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{
    candidate_cuts, extract_cuts, AdvancedCut, CmpOp, Column, ColumnKind, Cut, CutRegistry, Dataset, Literal, Query,
    Schema, UnaryPredicate, Workload,
};
pub use skipcost::{evaluate_partitioning, SkipReport};
pub use tree::{BlockAssignment, NodeId, QdTree, SemanticDescription};
