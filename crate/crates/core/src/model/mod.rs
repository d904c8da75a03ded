//! Relational model: schema, dataset, predicates, queries and workloads.

mod io;
mod predicate;
mod query;
mod schema;

pub use io::{read_csv, write_csv, write_csv_with_blocks};
pub use predicate::{AdvancedCut, Bound, CmpOp, Cut, CutRegistry, Literal, UnaryPredicate};
pub use query::{
    candidate_cuts, cut_from_json, cut_to_json, cuts_from_json, cuts_to_json, extract_cuts, Query, Workload,
};
pub use schema::{Column, ColumnKind, Dataset, Schema};

pub(crate) use query::parse_advanced_cut;

/// Evaluates a single unary predicate against a row.
pub fn evaluate_predicate(p: &UnaryPredicate, row: &[u32]) -> bool {
    p.eval(row)
}

/// Evaluates a query against a row.
pub fn evaluate_query(q: &Query, row: &[u32], registry: &CutRegistry) -> bool {
    q.eval(row, registry)
}
