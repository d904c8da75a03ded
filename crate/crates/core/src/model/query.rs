use std::collections::HashSet;

use serde_json::{json, Map, Value};

use super::predicate::{AdvancedCut, CmpOp, Cut, CutRegistry, Literal, UnaryPredicate};
use super::schema::Schema;
use crate::error::{Error, Result};

/// Boolean filter tree. Negation is only available on advanced-cut references.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Query {
    Pred(UnaryPredicate),
    Adv { index: usize, negated: bool },
    And(Vec<Query>),
    Or(Vec<Query>),
}

impl Query {
    pub fn and(children: Vec<Query>) -> Query {
        Query::And(children)
    }

    pub fn or(children: Vec<Query>) -> Query {
        Query::Or(children)
    }

    pub fn adv(index: usize) -> Query {
        Query::Adv { index, negated: false }
    }

    pub fn not_adv(index: usize) -> Query {
        Query::Adv { index, negated: true }
    }

    pub fn validate(&self, schema: &Schema, registry: &CutRegistry) -> Result<()> {
        match self {
            Query::Pred(p) => {
                if p.column() >= schema.len() {
                    return Err(Error::InvalidQuery(format!("unknown column {}", p.column())));
                }
                Ok(())
            }
            Query::Adv { index, .. } => {
                if *index >= registry.len() {
                    return Err(Error::InvalidQuery(format!(
                        "advanced cut {index} not registered (|AC| = {})",
                        registry.len()
                    )));
                }
                Ok(())
            }
            Query::And(cs) | Query::Or(cs) => {
                if cs.len() < 2 {
                    return Err(Error::InvalidQuery("AND/OR needs at least two children".into()));
                }
                cs.iter().try_for_each(|c| c.validate(schema, registry))
            }
        }
    }

    /// Row-level evaluation: AND = all children, OR = any child.
    pub fn eval(&self, row: &[u32], registry: &CutRegistry) -> bool {
        match self {
            Query::Pred(p) => p.eval(row),
            Query::Adv { index, negated } => registry.cuts()[*index].eval(row) != *negated,
            Query::And(cs) => cs.iter().all(|c| c.eval(row, registry)),
            Query::Or(cs) => cs.iter().any(|c| c.eval(row, registry)),
        }
    }

    /// True if the tree contains no OR node.
    pub fn is_conjunctive(&self) -> bool {
        match self {
            Query::Pred(_) | Query::Adv { .. } => true,
            Query::And(cs) => cs.iter().all(Query::is_conjunctive),
            Query::Or(_) => false,
        }
    }

    /// Pre-order walk over leaves.
    pub fn for_each_leaf<'a>(&'a self, f: &mut impl FnMut(&'a Query)) {
        match self {
            Query::And(cs) | Query::Or(cs) => cs.iter().for_each(|c| c.for_each_leaf(f)),
            leaf => f(leaf),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Query::Pred(p) => {
                let lit = match p.literal() {
                    Literal::Value(v) => json!(v),
                    Literal::Set(s) => json!(s),
                };
                json!({"pred": {"col": p.column(), "op": p.op().symbol(), "lit": lit}})
            }
            Query::Adv { index, negated } => json!({"adv": index, "neg": negated}),
            Query::And(cs) => {
                json!({"op": "and", "children": cs.iter().map(Query::to_json).collect::<Vec<_>>()})
            }
            Query::Or(cs) => {
                json!({"op": "or", "children": cs.iter().map(Query::to_json).collect::<Vec<_>>()})
            }
        }
    }

    pub fn from_json(v: &Value, schema: &Schema, registry: &CutRegistry) -> Result<Query> {
        let q = parse_query(v, schema, "$")?;
        q.validate(schema, registry)?;
        Ok(q)
    }
}

pub(crate) fn parse_column(v: &Value, schema: &Schema, loc: &str) -> Result<usize> {
    match v {
        Value::Number(n) => n
            .as_u64()
            .map(|n| n as usize)
            .filter(|&n| n < schema.len())
            .ok_or_else(|| Error::parse(loc, format!("column index {n} out of range"))),
        Value::String(s) => schema
            .index_of(s)
            .ok_or_else(|| Error::parse(loc, format!("unknown column {s:?}"))),
        _ => Err(Error::parse(loc, "column must be an index or a name")),
    }
}

fn parse_u32(v: &Value, loc: &str) -> Result<u32> {
    v.as_u64()
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| Error::parse(loc, "expected a non-negative integer"))
}

fn parse_op(v: &Value, loc: &str) -> Result<CmpOp> {
    v.as_str()
        .and_then(CmpOp::parse)
        .ok_or_else(|| Error::parse(loc, format!("unknown operator {v}")))
}

pub(crate) fn parse_predicate(v: &Value, schema: &Schema, loc: &str) -> Result<UnaryPredicate> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::parse(loc, "predicate must be an object"))?;
    let field = |k: &str| {
        obj.get(k)
            .ok_or_else(|| Error::parse(loc, format!("predicate missing {k:?}")))
    };
    let col = parse_column(field("col")?, schema, &format!("{loc}.col"))?;
    let op = parse_op(field("op")?, &format!("{loc}.op"))?;
    let lit = field("lit")?;
    let literal = match lit {
        Value::Array(items) => Literal::Set(
            items
                .iter()
                .enumerate()
                .map(|(i, x)| parse_u32(x, &format!("{loc}.lit[{i}]")))
                .collect::<Result<_>>()?,
        ),
        other => Literal::Value(parse_u32(other, &format!("{loc}.lit"))?),
    };
    UnaryPredicate::new(schema, col, op, literal).map_err(|e| Error::parse(loc, e))
}

fn parse_query(v: &Value, schema: &Schema, loc: &str) -> Result<Query> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::parse(loc, "query node must be an object"))?;
    if let Some(p) = obj.get("pred") {
        return Ok(Query::Pred(parse_predicate(p, schema, &format!("{loc}.pred"))?));
    }
    if let Some(a) = obj.get("adv") {
        let index = a
            .as_u64()
            .ok_or_else(|| Error::parse(format!("{loc}.adv"), "expected an index"))? as usize;
        let negated = match obj.get("neg") {
            None => false,
            Some(Value::Bool(b)) => *b,
            Some(_) => return Err(Error::parse(format!("{loc}.neg"), "expected a boolean")),
        };
        return Ok(Query::Adv { index, negated });
    }
    if obj.contains_key("not") {
        return Err(Error::parse(
            loc,
            "general NOT is not supported; negate advanced cuts with \"neg\"",
        ));
    }
    let op = obj
        .get("op")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::parse(loc, "expected \"pred\", \"adv\" or \"op\""))?;
    let children = obj
        .get("children")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse(loc, "missing \"children\" array"))?;
    let children = children
        .iter()
        .enumerate()
        .map(|(i, c)| parse_query(c, schema, &format!("{loc}.children[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    if children.len() < 2 {
        return Err(Error::parse(loc, "AND/OR needs at least two children"));
    }
    match op.to_ascii_lowercase().as_str() {
        "and" => Ok(Query::And(children)),
        "or" => Ok(Query::Or(children)),
        "not" => Err(Error::parse(loc, "general NOT is not supported")),
        other => Err(Error::parse(loc, format!("unknown boolean operator {other:?}"))),
    }
}

/// The target query workload `W` with its advanced-cut registry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workload {
    pub registry: CutRegistry,
    pub queries: Vec<Query>,
}

impl Workload {
    pub fn new(schema: &Schema, registry: CutRegistry, queries: Vec<Query>) -> Result<Self> {
        if queries.is_empty() {
            return Err(Error::EmptyWorkload);
        }
        for q in &queries {
            q.validate(schema, &registry)?;
        }
        Ok(Workload { registry, queries })
    }

    pub fn simple(schema: &Schema, queries: Vec<Query>) -> Result<Self> {
        Self::new(schema, CutRegistry::default(), queries)
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Subset of queries by index, sharing the registry.
    pub fn subset(&self, idx: &[usize]) -> Workload {
        Workload {
            registry: self.registry.clone(),
            queries: idx.iter().map(|&i| self.queries[i].clone()).collect(),
        }
    }

    /// Plain JSON array of query trees when there are no advanced cuts,
    /// otherwise `{"advanced_cuts": [...], "queries": [...]}`.
    pub fn to_json(&self) -> String {
        let queries: Vec<Value> = self.queries.iter().map(Query::to_json).collect();
        let v = if self.registry.is_empty() {
            Value::Array(queries)
        } else {
            let cuts: Vec<Value> = self
                .registry
                .cuts()
                .iter()
                .map(|c| json!({"left": c.left, "op": c.op.symbol(), "right": c.right}))
                .collect();
            let mut m = Map::new();
            m.insert("advanced_cuts".into(), Value::Array(cuts));
            m.insert("queries".into(), Value::Array(queries));
            Value::Object(m)
        };
        serde_json::to_string_pretty(&v).expect("workload serializes")
    }

    pub fn from_json(s: &str, schema: &Schema) -> Result<Self> {
        let v: Value = serde_json::from_str(s)?;
        let (cuts, queries) = match &v {
            Value::Array(qs) => (Vec::new(), qs.as_slice()),
            Value::Object(o) => {
                let qs = o
                    .get("queries")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::parse("$", "missing \"queries\" array"))?;
                let cuts = match o.get("advanced_cuts") {
                    None => Vec::new(),
                    Some(Value::Array(cs)) => cs
                        .iter()
                        .enumerate()
                        .map(|(i, c)| parse_advanced_cut(c, schema, i, &format!("$.advanced_cuts[{i}]")))
                        .collect::<Result<Vec<_>>>()?,
                    Some(_) => return Err(Error::parse("$.advanced_cuts", "expected an array")),
                };
                (cuts, qs.as_slice())
            }
            _ => return Err(Error::parse("$", "workload must be an array or an object")),
        };
        let registry = CutRegistry::new(cuts);
        let queries = queries
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let loc = format!("$[{i}]");
                let parsed = parse_query(q, schema, &loc)?;
                parsed.validate(schema, &registry).map_err(|e| Error::parse(&loc, e))?;
                Ok(parsed)
            })
            .collect::<Result<Vec<_>>>()?;
        Workload::new(schema, registry, queries)
    }
}

pub(crate) fn parse_advanced_cut(v: &Value, schema: &Schema, index: usize, loc: &str) -> Result<AdvancedCut> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::parse(loc, "advanced cut must be an object"))?;
    let get = |k: &str| obj.get(k).ok_or_else(|| Error::parse(loc, format!("missing {k:?}")));
    let left = parse_column(get("left")?, schema, &format!("{loc}.left"))?;
    let right = parse_column(get("right")?, schema, &format!("{loc}.right"))?;
    let op = parse_op(get("op")?, &format!("{loc}.op"))?;
    AdvancedCut::new(schema, index, left, op, right).map_err(|e| Error::parse(loc, e))
}

/// Candidate cuts of a workload: every distinct unary predicate leaf, and every
/// referenced advanced cut (negated references register the un-negated cut),
/// both in order of first appearance.
pub fn extract_cuts(w: &Workload) -> (Vec<UnaryPredicate>, Vec<AdvancedCut>) {
    let mut unary = Vec::new();
    let mut seen_unary = HashSet::new();
    let mut adv = Vec::new();
    let mut seen_adv = HashSet::new();
    for q in &w.queries {
        q.for_each_leaf(&mut |leaf| match leaf {
            Query::Pred(p) => {
                if seen_unary.insert(p.canonical_key()) {
                    unary.push(p.clone());
                }
            }
            Query::Adv { index, .. } => {
                if seen_adv.insert(*index) {
                    adv.push(w.registry.cuts()[*index]);
                }
            }
            _ => unreachable!("leaf walk yields leaves only"),
        });
    }
    (unary, adv)
}

/// Unary cuts followed by (optionally) advanced cuts, as a flat action list.
pub fn candidate_cuts(w: &Workload, include_advanced: bool) -> Vec<Cut> {
    let (unary, adv) = extract_cuts(w);
    let mut cuts: Vec<Cut> = unary.into_iter().map(Cut::Unary).collect();
    if include_advanced {
        cuts.extend(adv.into_iter().map(Cut::Advanced));
    }
    cuts
}

pub fn cut_to_json(cut: &Cut) -> Value {
    match cut {
        Cut::Unary(p) => Query::Pred(p.clone()).to_json(),
        Cut::Advanced(a) => json!({"adv": a.index}),
    }
}

pub fn cut_from_json(v: &Value, schema: &Schema, registry: &CutRegistry, loc: &str) -> Result<Cut> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::parse(loc, "cut must be an object"))?;
    if let Some(p) = obj.get("pred") {
        return Ok(Cut::Unary(parse_predicate(p, schema, &format!("{loc}.pred"))?));
    }
    if let Some(a) = obj.get("adv") {
        let i = a.as_u64().ok_or_else(|| Error::parse(loc, "expected an index"))? as usize;
        let c = registry
            .get(i)
            .ok_or_else(|| Error::parse(loc, format!("advanced cut {i} not registered")))?;
        return Ok(Cut::Advanced(*c));
    }
    Err(Error::parse(loc, "cut must have \"pred\" or \"adv\""))
}

pub fn cuts_to_json(cuts: &[Cut]) -> String {
    serde_json::to_string_pretty(&cuts.iter().map(cut_to_json).collect::<Vec<_>>()).unwrap()
}

pub fn cuts_from_json(s: &str, schema: &Schema, registry: &CutRegistry) -> Result<Vec<Cut>> {
    let v: Value = serde_json::from_str(s)?;
    let arr = v
        .as_array()
        .ok_or_else(|| Error::parse("$", "cuts file must be an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, c)| cut_from_json(c, schema, registry, &format!("$[{i}]")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Column;

    fn abc() -> Schema {
        Schema::new(vec![
            Column::numeric("a", 100),
            Column::numeric("b", 100),
            Column::categorical("c", 5),
            Column::numeric("d", 100),
        ])
        .unwrap()
    }

    fn lt(s: &Schema, c: usize, v: u32) -> Query {
        Query::Pred(UnaryPredicate::cmp(s, c, CmpOp::Lt, v).unwrap())
    }

    fn gt(s: &Schema, c: usize, v: u32) -> Query {
        Query::Pred(UnaryPredicate::cmp(s, c, CmpOp::Gt, v).unwrap())
    }

    #[test]
    fn evaluate_examples() {
        let s = abc();
        let reg = CutRegistry::new(vec![
            AdvancedCut::new(&s, 0, 0, CmpOp::Eq, 1).unwrap(),
            AdvancedCut::new(&s, 1, 1, CmpOp::Lt, 3).unwrap(),
        ]);
        let eq3 = Query::Pred(UnaryPredicate::cmp(&s, 2, CmpOp::Eq, 3).unwrap());
        assert!(Query::and(vec![lt(&s, 0, 10), eq3]).eval(&[7, 0, 3, 0], &reg));
        let q1 = Query::or(vec![lt(&s, 0, 10), gt(&s, 0, 90)]);
        assert!(!q1.eval(&[50, 0, 0, 0], &reg));
        assert!(Query::adv(1).eval(&[0, 5, 0, 9], &reg));
        assert!(!Query::not_adv(1).eval(&[0, 5, 0, 9], &reg));
    }

    #[test]
    fn extract_cuts_from_sql_style_filter() {
        let s = abc();
        let c_in = Query::Pred(UnaryPredicate::is_in(&s, 2, vec![0, 4]).unwrap());
        let q = Query::and(vec![Query::or(vec![lt(&s, 0, 10), gt(&s, 1, 90)]), c_in.clone()]);
        let w = Workload::simple(&s, vec![q, lt(&s, 0, 10)]).unwrap();
        let (unary, adv) = extract_cuts(&w);
        let shown: Vec<String> = unary.iter().map(|p| p.display(&s).to_string()).collect();
        assert_eq!(shown, ["a < 10", "b > 90", "c IN (0,4)"]);
        assert!(adv.is_empty());
    }

    #[test]
    fn negated_reference_registers_plain_cut() {
        let s = abc();
        let reg = CutRegistry::new(vec![
            AdvancedCut::new(&s, 0, 0, CmpOp::Lt, 1).unwrap(),
            AdvancedCut::new(&s, 1, 1, CmpOp::Lt, 3).unwrap(),
        ]);
        let w = Workload::new(&s, reg, vec![Query::not_adv(1), Query::adv(1)]).unwrap();
        let (_, adv) = extract_cuts(&w);
        assert_eq!(adv.len(), 1);
        assert_eq!(adv[0].index, 1);
        assert_eq!(adv[0].op, CmpOp::Lt);
    }

    #[test]
    fn json_roundtrip_and_errors() {
        let s = abc();
        let text = r#"{"advanced_cuts":[{"left":"a","op":"<","right":"d"}],
            "queries":[{"op":"and","children":[{"pred":{"col":"a","op":"<=","lit":9}},{"adv":0,"neg":true}]},
                       {"pred":{"col":2,"op":"in","lit":[1,3]}}]}"#;
        let w = Workload::from_json(text, &s).unwrap();
        assert_eq!(w.registry.len(), 1);
        let back = Workload::from_json(&w.to_json(), &s).unwrap();
        assert_eq!(back, w);

        let err = Workload::from_json(
            r#"[{"op":"and","children":[{"pred":{"col":"zz","op":"<","lit":1}},{"adv":0}]}]"#,
            &s,
        )
        .unwrap_err();
        assert!(err.to_string().contains("$[0].children[0].pred.col"), "{err}");
        assert!(Workload::from_json(r#"[{"not":{"pred":{"col":0,"op":"<","lit":1}}}]"#, &s).is_err());
        assert!(Workload::from_json(r#"[{"adv":0}]"#, &s).is_err());
        assert!(matches!(Workload::from_json("[", &s), Err(Error::Parse { .. })));
        assert!(matches!(Workload::from_json("[]", &s), Err(Error::EmptyWorkload)));
    }
}
