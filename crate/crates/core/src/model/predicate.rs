use std::fmt;

use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "in")]
    In,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::In => "in",
        }
    }

    pub fn parse(s: &str) -> Option<CmpOp> {
        Some(match s {
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            "=" | "==" => CmpOp::Eq,
            "in" | "IN" => CmpOp::In,
            _ => return None,
        })
    }

    pub fn is_range(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge)
    }

    #[inline]
    pub fn compare(self, a: u32, b: u32) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq | CmpOp::In => a == b,
        }
    }

    /// `b op' a` equivalent to `a op b`.
    fn mirrored(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }

    fn negated(self) -> Option<CmpOp> {
        match self {
            CmpOp::Lt => Some(CmpOp::Ge),
            CmpOp::Le => Some(CmpOp::Gt),
            CmpOp::Gt => Some(CmpOp::Le),
            CmpOp::Ge => Some(CmpOp::Lt),
            CmpOp::Eq | CmpOp::In => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Literal {
    Value(u32),
    /// Sorted, deduplicated, non-empty.
    Set(Vec<u32>),
}

/// `(column op literal)`. Range operators apply to numeric columns, `=`/`IN`
/// to categorical ones.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UnaryPredicate {
    column: usize,
    op: CmpOp,
    literal: Literal,
}

/// Half-open satisfying interval of a range predicate, independent of the
/// column's domain: `hi == None` means unbounded above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bound {
    pub lo: u32,
    pub hi: Option<u32>,
}

impl UnaryPredicate {
    pub fn new(schema: &Schema, column: usize, op: CmpOp, literal: Literal) -> Result<Self> {
        let col = schema
            .columns()
            .get(column)
            .ok_or_else(|| Error::InvalidPredicate(format!("unknown column index {column}")))?;
        let (op, literal) = match (op, literal) {
            (CmpOp::In, Literal::Set(mut s)) | (CmpOp::Eq, Literal::Set(mut s)) => {
                s.sort_unstable();
                s.dedup();
                match s.len() {
                    0 => return Err(Error::InvalidPredicate("empty IN list".into())),
                    1 => (CmpOp::Eq, Literal::Value(s[0])),
                    _ => (CmpOp::In, Literal::Set(s)),
                }
            }
            (CmpOp::In, Literal::Value(v)) => (CmpOp::Eq, Literal::Value(v)),
            (op, Literal::Value(v)) => (op, Literal::Value(v)),
            (op, Literal::Set(_)) => {
                return Err(Error::InvalidPredicate(format!(
                    "operator {} takes a single literal",
                    op.symbol()
                )))
            }
        };
        match (op.is_range(), col.kind) {
            (true, ColumnKind::Categorical) => {
                return Err(Error::InvalidPredicate(format!(
                    "range operator {} on categorical column {:?}",
                    op.symbol(),
                    col.name
                )))
            }
            (false, ColumnKind::Numeric) => {
                return Err(Error::InvalidPredicate(format!(
                    "equality operator {} on numeric column {:?}",
                    op.symbol(),
                    col.name
                )))
            }
            _ => {}
        }
        let max = match &literal {
            Literal::Value(v) => *v,
            Literal::Set(s) => *s.last().unwrap(),
        };
        if max >= col.domain_size {
            return Err(Error::InvalidPredicate(format!(
                "literal {max} outside domain [0, {}) of {:?}",
                col.domain_size, col.name
            )));
        }
        Ok(UnaryPredicate { column, op, literal })
    }

    pub fn cmp(schema: &Schema, column: usize, op: CmpOp, value: u32) -> Result<Self> {
        Self::new(schema, column, op, Literal::Value(value))
    }

    pub fn is_in(schema: &Schema, column: usize, values: Vec<u32>) -> Result<Self> {
        Self::new(schema, column, CmpOp::In, Literal::Set(values))
    }

    pub fn column(&self) -> usize {
        self.column
    }

    pub fn op(&self) -> CmpOp {
        self.op
    }

    pub fn literal(&self) -> &Literal {
        &self.literal
    }

    pub fn is_range(&self) -> bool {
        self.op.is_range()
    }

    /// Satisfying interval of a range predicate. `<= l` is `< l+1`, `> l` is `>= l+1`.
    pub fn bound(&self) -> Option<Bound> {
        let Literal::Value(l) = self.literal else {
            return None;
        };
        match self.op {
            CmpOp::Lt => Some(Bound { lo: 0, hi: Some(l) }),
            CmpOp::Le => Some(Bound { lo: 0, hi: Some(l + 1) }),
            CmpOp::Gt => Some(Bound { lo: l + 1, hi: None }),
            CmpOp::Ge => Some(Bound { lo: l, hi: None }),
            _ => None,
        }
    }

    /// Satisfying interval clipped to `[0, domain)`.
    pub fn interval(&self, domain: u32) -> Option<(u32, u32)> {
        self.bound().map(|b| {
            let hi = b.hi.unwrap_or(domain).min(domain);
            (b.lo.min(hi), hi)
        })
    }

    /// Value set of an `=`/`IN` predicate.
    pub fn values(&self) -> Option<&[u32]> {
        match (&self.op, &self.literal) {
            (CmpOp::Eq, Literal::Value(v)) => Some(std::slice::from_ref(v)),
            (CmpOp::In, Literal::Set(s)) => Some(s),
            _ => None,
        }
    }

    #[inline]
    pub fn eval(&self, row: &[u32]) -> bool {
        let x = row[self.column];
        match &self.literal {
            Literal::Value(v) => self.op.compare(x, *v),
            Literal::Set(s) => s.binary_search(&x).is_ok(),
        }
    }

    /// Key identifying the satisfying set: `a <= 9` and `a < 10` share a key.
    pub(crate) fn canonical_key(&self) -> (usize, Option<Bound>, Option<Vec<u32>>) {
        (self.column, self.bound(), self.values().map(|v| v.to_vec()))
    }

    pub fn display<'a>(&'a self, schema: &'a Schema) -> impl fmt::Display + 'a {
        DisplayPred { p: self, schema }
    }
}

struct DisplayPred<'a> {
    p: &'a UnaryPredicate,
    schema: &'a Schema,
}

impl fmt::Display for DisplayPred<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = &self.schema.column(self.p.column).name;
        match &self.p.literal {
            Literal::Value(v) => write!(f, "{name} {} {v}", self.p.op.symbol()),
            Literal::Set(s) => {
                let items: Vec<String> = s.iter().map(|v| v.to_string()).collect();
                write!(f, "{name} IN ({})", items.join(","))
            }
        }
    }
}

impl fmt::Display for UnaryPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.literal {
            Literal::Value(v) => write!(f, "#{} {} {v}", self.column, self.op.symbol()),
            Literal::Set(s) => write!(f, "#{} IN {s:?}", self.column),
        }
    }
}

/// Binary attribute-vs-attribute cut `(left op right)`, tracked per node as
/// one presence bit at position `index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AdvancedCut {
    pub index: usize,
    pub left: usize,
    pub op: CmpOp,
    pub right: usize,
}

impl AdvancedCut {
    pub fn new(schema: &Schema, index: usize, left: usize, op: CmpOp, right: usize) -> Result<Self> {
        if op == CmpOp::In {
            return Err(Error::InvalidPredicate("IN is not allowed in advanced cuts".into()));
        }
        if left == right {
            return Err(Error::InvalidPredicate(
                "advanced cut compares a column with itself".into(),
            ));
        }
        for c in [left, right] {
            if c >= schema.len() {
                return Err(Error::InvalidPredicate(format!("unknown column index {c}")));
            }
        }
        if schema.column(left).kind != schema.column(right).kind {
            return Err(Error::InvalidPredicate(
                "advanced cut compares a numeric with a categorical column".into(),
            ));
        }
        Ok(AdvancedCut { index, left, op, right })
    }

    #[inline]
    pub fn eval(&self, row: &[u32]) -> bool {
        self.op.compare(row[self.left], row[self.right])
    }

    fn same_predicate(&self, left: usize, op: CmpOp, right: usize) -> bool {
        (self.left == left && self.right == right && self.op == op)
            || (self.left == right && self.right == left && self.op == op.mirrored())
    }

    pub fn is_negation_of(&self, other: &AdvancedCut) -> bool {
        other
            .op
            .negated()
            .is_some_and(|neg| self.same_predicate(other.left, neg, other.right))
    }
}

impl fmt::Display for AdvancedCut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "AC{}(#{} {} #{})",
            self.index,
            self.left,
            self.op.symbol(),
            self.right
        )
    }
}

/// The registered advanced cuts of a workload; `|AC| = len()`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CutRegistry {
    cuts: Vec<AdvancedCut>,
    negations: Vec<Option<usize>>,
}

impl CutRegistry {
    pub fn new(mut cuts: Vec<AdvancedCut>) -> Self {
        for (i, c) in cuts.iter_mut().enumerate() {
            c.index = i;
        }
        let negations = cuts
            .iter()
            .map(|c| cuts.iter().position(|o| o.is_negation_of(c)))
            .collect();
        CutRegistry { cuts, negations }
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&AdvancedCut> {
        self.cuts.get(i)
    }

    pub fn cuts(&self) -> &[AdvancedCut] {
        &self.cuts
    }

    /// Index of the registered cut equivalent to `NOT AC_i`, if any.
    pub fn negation_of(&self, i: usize) -> Option<usize> {
        self.negations.get(i).copied().flatten()
    }
}

/// A cut attached to an internal qd-tree node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cut {
    Unary(UnaryPredicate),
    Advanced(AdvancedCut),
}

impl Cut {
    #[inline]
    pub fn eval(&self, row: &[u32]) -> bool {
        match self {
            Cut::Unary(p) => p.eval(row),
            Cut::Advanced(a) => a.eval(row),
        }
    }

    pub fn is_advanced(&self) -> bool {
        matches!(self, Cut::Advanced(_))
    }
}

impl fmt::Display for Cut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cut::Unary(p) => p.fmt(f),
            Cut::Advanced(a) => a.fmt(f),
        }
    }
}
