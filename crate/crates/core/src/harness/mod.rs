//! Generators, baselines, the exhaustive oracle and serialized layouts.

pub mod baseline;
pub mod generate;
pub mod layout;
pub mod oracle;
pub mod rng;

pub use baseline::{baseline_partition, BaselineLayout, BaselineSpec};
pub use generate::{generate, GeneratorSpec};
pub use layout::Layout;
pub use oracle::{oracle_opt, OracleResult};
