//! Layout variants beyond a single disjoint tree.

pub mod overlap;
pub mod two_tree;

pub use overlap::{build_overlap, query_hull, Builder, OverlapLayout, Part, ScanBlock};
pub use two_tree::{build_two_tree, TreeChoice, TwoTreeConfig, TwoTreeLayout};
