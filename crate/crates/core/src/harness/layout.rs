//! A built layout of any kind, as stored on disk and evaluated by the CLI.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::extensions::{OverlapLayout, TwoTreeLayout};
use crate::model::{Dataset, Query, Workload};
use crate::skipcost::SkipReport;
use crate::tree::{BlockAssignment, QdTree};

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Tree(QdTree),
    Overlap(OverlapLayout),
    TwoTree(TwoTreeLayout),
}

impl Layout {
    pub fn kind(&self) -> &'static str {
        match self {
            Layout::Tree(_) => "tree",
            Layout::Overlap(_) => "overlap",
            Layout::TwoTree(_) => "two_tree",
        }
    }

    pub fn num_blocks(&self) -> usize {
        match self {
            Layout::Tree(t) => t.num_leaves(),
            Layout::Overlap(o) => o.num_blocks(),
            Layout::TwoTree(t) => t.num_blocks(),
        }
    }

    pub fn route_data(&self, data: &Dataset) -> BlockAssignment {
        match self {
            Layout::Tree(t) => t.route_rows(data),
            Layout::Overlap(o) => o.route_data(data),
            Layout::TwoTree(t) => t.route_data(data),
        }
    }

    /// Blocks to scan for `q`, ascending.
    pub fn route_query(&self, q: &Query) -> Vec<usize> {
        match self {
            Layout::Tree(t) => t.route_query(q),
            Layout::Overlap(o) => o.route_query(q).into_iter().map(|s| s.block).collect(),
            Layout::TwoTree(t) => t.route_query(q),
        }
    }

    /// Block sizes come from routing `data`; block descriptions stay as built.
    pub fn evaluate(&self, data: &Dataset, w: &Workload) -> SkipReport {
        let a = self.route_data(data);
        let sizes: Vec<u64> = a.block_sizes(self.num_blocks()).into_iter().map(|n| n as u64).collect();
        let scans: Vec<Vec<usize>> = w.queries.iter().map(|q| self.route_query(q)).collect();
        SkipReport::from_scans(&sizes, &scans, data.len())
    }

    /// Stored rows beyond one copy of `data`.
    pub fn extra_storage_rows(&self, data: &Dataset) -> u64 {
        let a = self.route_data(data);
        let stored: usize = (0..data.len()).map(|i| a.blocks_of(i).len()).sum();
        (stored - data.len()) as u64
    }

    pub fn to_json_value(&self) -> Value {
        let (kind, mut v) = match self {
            Layout::Tree(t) => ("tree", json!({ "tree": t.to_json_value() })),
            Layout::Overlap(o) => ("overlap", o.to_json_value()),
            Layout::TwoTree(t) => ("two_tree", t.to_json_value()),
        };
        v["kind"] = json!(kind);
        v
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).unwrap()
    }

    /// Also accepts a bare tree document.
    pub fn from_json_value(v: &Value) -> Result<Layout> {
        match v.get("kind").map(|k| k.as_str()) {
            None => Ok(Layout::Tree(QdTree::from_json_value(v)?)),
            Some(Some("tree")) => Ok(Layout::Tree(QdTree::from_json_value(
                v.get("tree").ok_or_else(|| Error::parse("$", "missing \"tree\""))?,
            )?)),
            Some(Some("overlap")) => Ok(Layout::Overlap(OverlapLayout::from_json_value(v)?)),
            Some(Some("two_tree")) => Ok(Layout::TwoTree(TwoTreeLayout::from_json_value(v)?)),
            Some(other) => Err(Error::parse("$.kind", format!("unknown layout kind {other:?}"))),
        }
    }

    pub fn from_json(s: &str) -> Result<Layout> {
        Self::from_json_value(&serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extensions::{build_overlap, Builder};
    use crate::harness::{generate, GeneratorSpec};
    use crate::model::candidate_cuts;

    #[test]
    fn overlap_roundtrip_and_storage() {
        let (d, w) = generate(&GeneratorSpec::Propeller { n: 30, seed: 1 }).unwrap();
        let o = build_overlap(&d, &w, &candidate_cuts(&w, false), 30, &Builder::Greedy).unwrap();
        let l = Layout::Overlap(o.clone());
        let back = Layout::from_json(&l.to_json()).unwrap();
        assert_eq!(back, l);
        assert_eq!(l.extra_storage_rows(&d), 1);
        assert_eq!(l.evaluate(&d, &w), o.evaluate(&w));
    }

    #[test]
    fn bare_tree_document_is_a_tree_layout() {
        let (d, _) = generate(&GeneratorSpec::Propeller { n: 5, seed: 1 }).unwrap();
        let t = QdTree::new(d.schema().clone(), Default::default());
        let l = Layout::from_json(&t.to_json()).unwrap();
        assert_eq!(l, Layout::Tree(t));
        assert!(Layout::from_json(r#"{"kind":"forest"}"#).is_err());
    }
}
