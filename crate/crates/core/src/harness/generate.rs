//! Synthetic datasets and workloads.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng::substream;
use crate::error::{Error, Result};
use crate::model::{CmpOp, Column, Dataset, Query, Schema, UnaryPredicate, Workload};

/// Points per microbenchmark column: cpu value `v` stands for `v / 100`,
/// disk value `v` for `v / 10000`.
pub const MICRO_DOMAIN: u32 = 10_000;

/// Propeller cell width; the space is a 3x3 grid of such cells.
pub const PROPELLER_UNIT: u32 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// cpu and disk uniform; Q1 = cpu < 10 OR cpu > 90, Q2 = disk < 0.01.
    DisjunctiveMicrobench { rows: usize, seed: u64 },
    /// Four `n`-point arms in the corner cells plus one centre point;
    /// each query covers one arm and the centre.
    Propeller { n: usize, seed: u64 },
    /// Uniform numeric columns with random conjunctive range queries.
    Uniform {
        rows: usize,
        columns: usize,
        domain: u32,
        queries: usize,
        seed: u64,
    },
    /// Rows scattered around random centres; queries are boxes around centres.
    Clustered {
        rows: usize,
        columns: usize,
        domain: u32,
        clusters: usize,
        queries: usize,
        seed: u64,
    },
}

pub fn generate(spec: &GeneratorSpec) -> Result<(Dataset, Workload)> {
    match *spec {
        GeneratorSpec::DisjunctiveMicrobench { rows, seed } => microbench(rows, seed),
        GeneratorSpec::Propeller { n, seed } => propeller(n, seed),
        GeneratorSpec::Uniform {
            rows,
            columns,
            domain,
            queries,
            seed,
        } => uniform(rows, columns, domain, queries, seed),
        GeneratorSpec::Clustered {
            rows,
            columns,
            domain,
            clusters,
            queries,
            seed,
        } => clustered(rows, columns, domain, clusters, queries, seed),
    }
}

fn pred(s: &Schema, c: usize, op: CmpOp, v: u32) -> Query {
    Query::Pred(UnaryPredicate::cmp(s, c, op, v).expect("generator literal within domain"))
}

fn microbench(rows: usize, seed: u64) -> Result<(Dataset, Workload)> {
    let s = Schema::new(vec![
        Column::numeric("cpu", MICRO_DOMAIN),
        Column::numeric("disk", MICRO_DOMAIN),
    ])?;
    let mut rng = substream(seed, "generator");
    let values: Vec<u32> = (0..rows * 2).map(|_| rng.gen_range(0..MICRO_DOMAIN)).collect();
    let data = Dataset::from_flat(s.clone(), values)?;
    let q1 = Query::or(vec![pred(&s, 0, CmpOp::Lt, 1000), pred(&s, 0, CmpOp::Gt, 9000)]);
    let q2 = pred(&s, 1, CmpOp::Lt, 100);
    Ok((data, Workload::simple(&s, vec![q1, q2])?))
}

fn propeller(n: usize, seed: u64) -> Result<(Dataset, Workload)> {
    let u = PROPELLER_UNIT;
    let s = Schema::new(vec![Column::numeric("x", 3 * u), Column::numeric("y", 3 * u)])?;
    let mut rng = substream(seed, "generator");
    let arms = [(0, 0), (2 * u, 0), (2 * u, 2 * u), (0, 2 * u)];
    let mut values = Vec::with_capacity((4 * n + 1) * 2);
    for (x0, y0) in arms {
        for _ in 0..n {
            values.push(x0 + rng.gen_range(0..u));
            values.push(y0 + rng.gen_range(0..u));
        }
    }
    values.extend([u + u / 2, u + u / 2]);
    let data = Dataset::from_flat(s.clone(), values)?;
    let (lo, hi) = (u, 2 * u);
    let queries = vec![
        Query::and(vec![pred(&s, 0, CmpOp::Lt, hi), pred(&s, 1, CmpOp::Lt, hi)]),
        Query::and(vec![pred(&s, 0, CmpOp::Ge, lo), pred(&s, 1, CmpOp::Lt, hi)]),
        Query::and(vec![pred(&s, 0, CmpOp::Ge, lo), pred(&s, 1, CmpOp::Ge, lo)]),
        Query::and(vec![pred(&s, 0, CmpOp::Lt, hi), pred(&s, 1, CmpOp::Ge, lo)]),
    ];
    Ok((data, Workload::simple(&s, queries)?))
}

fn check_shape(columns: usize, domain: u32, queries: usize) -> Result<()> {
    if columns == 0 || domain < 2 || queries == 0 {
        return Err(Error::Config(
            "need at least one column, a domain of 2 and one query".into(),
        ));
    }
    Ok(())
}

fn numeric_schema(columns: usize, domain: u32) -> Result<Schema> {
    Schema::new((0..columns).map(|i| Column::numeric(format!("c{i}"), domain)).collect())
}

/// Conjunction of 1..=2 ranges `[lo, hi)` on distinct columns.
fn random_box(s: &Schema, rng: &mut impl Rng, center: Option<&[u32]>, width: u32) -> Query {
    let ncols = s.len();
    let domain = s.column(0).domain_size;
    let k = rng.gen_range(1..=ncols.min(2));
    let mut cols: Vec<usize> = (0..ncols).collect();
    for i in 0..k {
        let j = rng.gen_range(i..ncols);
        cols.swap(i, j);
    }
    let mut parts = Vec::new();
    for &c in &cols[..k] {
        let (lo, hi) = match center {
            Some(ctr) => (ctr[c].saturating_sub(width / 2), (ctr[c] + width / 2 + 1).min(domain)),
            None => {
                let a = rng.gen_range(0..domain);
                let b = rng.gen_range(0..domain);
                (a.min(b), a.max(b) + 1)
            }
        };
        if lo > 0 {
            parts.push(pred(s, c, CmpOp::Ge, lo));
        }
        if hi < domain {
            parts.push(pred(s, c, CmpOp::Lt, hi));
        }
    }
    match parts.len() {
        0 => pred(s, cols[0], CmpOp::Lt, domain - 1),
        1 => parts.pop().unwrap(),
        _ => Query::and(parts),
    }
}

fn uniform(rows: usize, columns: usize, domain: u32, queries: usize, seed: u64) -> Result<(Dataset, Workload)> {
    check_shape(columns, domain, queries)?;
    let s = numeric_schema(columns, domain)?;
    let mut rng = substream(seed, "generator");
    let values: Vec<u32> = (0..rows * columns).map(|_| rng.gen_range(0..domain)).collect();
    let data = Dataset::from_flat(s.clone(), values)?;
    let qs = (0..queries).map(|_| random_box(&s, &mut rng, None, 0)).collect();
    Ok((data, Workload::simple(&s, qs)?))
}

fn clustered(
    rows: usize,
    columns: usize,
    domain: u32,
    clusters: usize,
    queries: usize,
    seed: u64,
) -> Result<(Dataset, Workload)> {
    check_shape(columns, domain, queries)?;
    if clusters == 0 {
        return Err(Error::Config("need at least one cluster".into()));
    }
    let s = numeric_schema(columns, domain)?;
    let mut rng = substream(seed, "generator");
    let centers: Vec<Vec<u32>> = (0..clusters)
        .map(|_| (0..columns).map(|_| rng.gen_range(0..domain)).collect())
        .collect();
    let spread = (domain / 20).max(1);
    let mut values = Vec::with_capacity(rows * columns);
    for _ in 0..rows {
        let c = &centers[rng.gen_range(0..clusters)];
        for &v in c {
            let lo = v.saturating_sub(spread);
            let hi = (v + spread).min(domain - 1);
            values.push(rng.gen_range(lo..=hi));
        }
    }
    let data = Dataset::from_flat(s.clone(), values)?;
    let qs = (0..queries)
        .map(|_| {
            let c = centers[rng.gen_range(0..clusters)].clone();
            random_box(&s, &mut rng, Some(&c), 3 * spread)
        })
        .collect();
    Ok((data, Workload::simple(&s, qs)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn selected(d: &Dataset, w: &Workload, q: usize) -> usize {
        d.rows().filter(|r| w.queries[q].eval(r, &w.registry)).count()
    }

    #[test]
    fn microbench_selectivities() {
        let (d, w) = generate(&GeneratorSpec::DisjunctiveMicrobench { rows: 100_000, seed: 7 }).unwrap();
        let f1 = selected(&d, &w, 0) as f64 / d.len() as f64;
        let f2 = selected(&d, &w, 1) as f64 / d.len() as f64;
        assert!((f1 - 0.2).abs() < 0.01, "{f1}");
        assert!((f2 - 0.01).abs() < 0.002, "{f2}");
    }

    #[test]
    fn propeller_queries_select_n_plus_one() {
        let (d, w) = generate(&GeneratorSpec::Propeller { n: 1000, seed: 1 }).unwrap();
        assert_eq!(d.len(), 4001);
        for q in 0..4 {
            assert_eq!(selected(&d, &w, q), 1001);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = GeneratorSpec::Clustered {
            rows: 500,
            columns: 3,
            domain: 1000,
            clusters: 4,
            queries: 6,
            seed: 3,
        };
        let (a, wa) = generate(&spec).unwrap();
        let (b, wb) = generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(wa.to_json(), wb.to_json());
        let u = GeneratorSpec::Uniform {
            rows: 100,
            columns: 2,
            domain: 50,
            queries: 5,
            seed: 9,
        };
        assert_eq!(generate(&u).unwrap().0, generate(&u).unwrap().0);
    }
}
