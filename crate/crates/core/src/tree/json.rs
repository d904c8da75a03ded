//! Lossless JSON form of a tree, self-contained (schema and advanced-cut
//! registry included).

use serde_json::{json, Map, Value};

use super::{ColumnDesc, Node, QdTree, SemanticDescription};
use crate::bits::BitMask;
use crate::error::{Error, Result};
use crate::model::{cut_from_json, cut_to_json, parse_advanced_cut, ColumnKind, CutRegistry, Schema};

pub(crate) fn desc_to_json(desc: &SemanticDescription, schema: &Schema) -> Value {
    let mut range = Vec::with_capacity(desc.columns.len());
    let mut masks = Map::new();
    for (c, col) in desc.columns.iter().zip(schema.columns()) {
        match c {
            ColumnDesc::Range { lo, hi } => range.push(json!([lo, hi])),
            ColumnDesc::Mask(m) => {
                range.push(Value::Null);
                masks.insert(col.name.clone(), Value::String(m.to_hex()));
            }
        }
    }
    json!({"range": range, "masks": masks, "adv": desc.adv.to_hex()})
}

pub(crate) fn desc_from_json(v: &Value, schema: &Schema, n_adv: usize, loc: &str) -> Result<SemanticDescription> {
    let range = v
        .get("range")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse(loc, "missing \"range\""))?;
    if range.len() != schema.len() {
        return Err(Error::parse(loc, "range length does not match schema"));
    }
    let masks = v
        .get("masks")
        .and_then(Value::as_object)
        .ok_or_else(|| Error::parse(loc, "missing \"masks\""))?;
    let mut columns = Vec::with_capacity(schema.len());
    for (i, col) in schema.columns().iter().enumerate() {
        let cloc = format!("{loc}.range[{i}]");
        match col.kind {
            ColumnKind::Numeric => {
                let pair = range[i]
                    .as_array()
                    .filter(|p| p.len() == 2)
                    .ok_or_else(|| Error::parse(&cloc, "expected [lo, hi]"))?;
                let get = |x: &Value| {
                    x.as_u64()
                        .and_then(|n| u32::try_from(n).ok())
                        .ok_or_else(|| Error::parse(&cloc, "bound must be a non-negative integer"))
                };
                columns.push(ColumnDesc::Range {
                    lo: get(&pair[0])?,
                    hi: get(&pair[1])?,
                });
            }
            ColumnKind::Categorical => {
                let hex = masks
                    .get(&col.name)
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::parse(format!("{loc}.masks"), format!("missing mask for {:?}", col.name)))?;
                columns.push(ColumnDesc::Mask(
                    BitMask::from_hex(col.domain_size as usize, hex)
                        .map_err(|e| Error::parse(format!("{loc}.masks.{}", col.name), e))?,
                ));
            }
        }
    }
    let adv_hex = v
        .get("adv")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::parse(loc, "missing \"adv\""))?;
    let adv = BitMask::from_hex(n_adv, adv_hex).map_err(|e| Error::parse(format!("{loc}.adv"), e))?;
    Ok(SemanticDescription { columns, adv })
}

pub(crate) fn registry_to_json(reg: &CutRegistry) -> Value {
    Value::Array(
        reg.cuts()
            .iter()
            .map(|c| json!({"left": c.left, "op": c.op.symbol(), "right": c.right}))
            .collect(),
    )
}

pub(crate) fn registry_from_json(v: Option<&Value>, schema: &Schema) -> Result<CutRegistry> {
    let cuts = match v {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(cs)) => cs
            .iter()
            .enumerate()
            .map(|(i, c)| parse_advanced_cut(c, schema, i, &format!("$.advanced_cuts[{i}]")))
            .collect::<Result<_>>()?,
        Some(_) => return Err(Error::parse("$.advanced_cuts", "expected an array")),
    };
    Ok(CutRegistry::new(cuts))
}

fn opt_id(v: Option<&Value>, loc: &str) -> Result<Option<usize>> {
    match v {
        None | Some(Value::Null) => Ok(None),
        Some(x) => x
            .as_u64()
            .map(|n| Some(n as usize))
            .ok_or_else(|| Error::parse(loc, "expected an id or null")),
    }
}

impl QdTree {
    pub fn to_json_value(&self) -> Value {
        let nodes: Vec<Value> = self
            .nodes
            .iter()
            .map(|n| {
                json!({
                    "id": n.id,
                    "cut": n.cut.as_ref().map(cut_to_json),
                    "left": n.left,
                    "right": n.right,
                    "block_id": n.block_id,
                    "desc": desc_to_json(&n.desc, &self.schema),
                })
            })
            .collect();
        let log: Vec<Value> = self.log.iter().map(|(id, c)| json!([id, cut_to_json(c)])).collect();
        json!({
            "schema": serde_json::to_value(&self.schema).unwrap(),
            "advanced_cuts": registry_to_json(&self.registry),
            "frozen": self.frozen,
            "root": self.root,
            "nodes": nodes,
            "log": log,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).unwrap()
    }

    pub fn from_json(s: &str) -> Result<QdTree> {
        let v: Value = serde_json::from_str(s)?;
        Self::from_json_value(&v)
    }

    pub fn from_json_value(v: &Value) -> Result<QdTree> {
        let schema: Schema = serde_json::from_value(
            v.get("schema")
                .cloned()
                .ok_or_else(|| Error::parse("$", "missing \"schema\""))?,
        )
        .map_err(|e| Error::parse("$.schema", e))?;
        let registry = registry_from_json(v.get("advanced_cuts"), &schema)?;
        let frozen = v
            .get("frozen")
            .and_then(Value::as_bool)
            .ok_or_else(|| Error::parse("$.frozen", "expected a boolean"))?;
        let root = v
            .get("root")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::parse("$.root", "expected a node id"))? as usize;
        let raw_nodes = v
            .get("nodes")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::parse("$.nodes", "expected an array"))?;
        let mut nodes = Vec::with_capacity(raw_nodes.len());
        for (i, n) in raw_nodes.iter().enumerate() {
            let loc = format!("$.nodes[{i}]");
            let id = n
                .get("id")
                .and_then(Value::as_u64)
                .ok_or_else(|| Error::parse(&loc, "missing \"id\""))? as usize;
            let cut = match n.get("cut") {
                None | Some(Value::Null) => None,
                Some(c) => Some(cut_from_json(c, &schema, &registry, &format!("{loc}.cut"))?),
            };
            let desc = desc_from_json(
                n.get("desc").ok_or_else(|| Error::parse(&loc, "missing \"desc\""))?,
                &schema,
                registry.len(),
                &format!("{loc}.desc"),
            )?;
            nodes.push(Node {
                id,
                desc,
                cut,
                left: opt_id(n.get("left"), &format!("{loc}.left"))?,
                right: opt_id(n.get("right"), &format!("{loc}.right"))?,
                parent: None,
                depth: 0,
                block_id: opt_id(n.get("block_id"), &format!("{loc}.block_id"))?,
            });
        }
        let raw_log = v
            .get("log")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::parse("$.log", "expected an array"))?;
        let mut log = Vec::with_capacity(raw_log.len());
        for (i, e) in raw_log.iter().enumerate() {
            let loc = format!("$.log[{i}]");
            let pair = e
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| Error::parse(&loc, "expected [node_id, cut]"))?;
            let id = pair[0]
                .as_u64()
                .ok_or_else(|| Error::parse(&loc, "expected a node id"))? as usize;
            log.push((id, cut_from_json(&pair[1], &schema, &registry, &loc)?));
        }
        let mut t = QdTree::from_parts(schema, registry, nodes, root, frozen, log);
        t.validate()?;
        // parent links and depths are derived
        let mut stack = vec![(t.root, None, 0usize)];
        while let Some((id, parent, depth)) = stack.pop() {
            t.nodes[id].parent = parent;
            t.nodes[id].depth = depth;
            if let (Some(l), Some(r)) = (t.nodes[id].left, t.nodes[id].right) {
                stack.push((l, Some(id), depth + 1));
                stack.push((r, Some(id), depth + 1));
            }
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AdvancedCut, CmpOp, Column, Cut, Dataset, UnaryPredicate};

    #[test]
    fn singleton_tree_has_one_node_without_cut() {
        let s = Schema::new(vec![Column::numeric("x", 10)]).unwrap();
        let t = QdTree::new(s, CutRegistry::default());
        let v = t.to_json_value();
        assert_eq!(v["nodes"].as_array().unwrap().len(), 1);
        assert!(v["nodes"][0]["cut"].is_null());
        assert_eq!(QdTree::from_json(&t.to_json()).unwrap(), t);
    }

    #[test]
    fn roundtrip_frozen_tree_with_masks_and_adv() {
        let s = Schema::new(vec![
            Column::numeric("x", 10),
            Column::numeric("y", 10),
            Column::categorical("k", 12),
        ])
        .unwrap();
        let reg = CutRegistry::new(vec![AdvancedCut::new(&s, 0, 0, CmpOp::Lt, 1).unwrap()]);
        let t = QdTree::new(s.clone(), reg.clone())
            .split(0, Cut::Advanced(reg.cuts()[0]))
            .unwrap()
            .split(1, Cut::Unary(UnaryPredicate::is_in(&s, 2, vec![1, 9]).unwrap()))
            .unwrap();
        let data = Dataset::new(s, vec![vec![1, 2, 9], vec![5, 2, 3], vec![0, 4, 11]]).unwrap();
        let (f, _) = t.route_and_freeze(&data);
        let back = QdTree::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn malformed_input_reports_location() {
        let s = Schema::new(vec![Column::numeric("x", 10)]).unwrap();
        let text = QdTree::new(s, CutRegistry::default()).to_json();
        let truncated = &text[..text.len() / 2];
        assert!(matches!(QdTree::from_json(truncated), Err(Error::Parse { .. })));
        let broken = text.replace("\"range\"", "\"rnage\"");
        let err = QdTree::from_json(&broken).unwrap_err();
        assert!(err.to_string().contains("$.nodes[0].desc"), "{err}");
    }
}
