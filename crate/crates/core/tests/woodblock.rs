use std::time::Duration;

use qdtree::harness::{generate, GeneratorSpec};
use qdtree::woodblock::{train, train_with, Network, RlConfig};
use qdtree::{candidate_cuts, Dataset, Workload};

fn instance() -> (Dataset, Workload) {
    generate(&GeneratorSpec::DisjunctiveMicrobench { rows: 20_000, seed: 1 }).unwrap()
}

#[test]
fn one_episode_budget_returns_that_episode() {
    let (d, w) = instance();
    let mut cfg = RlConfig::new(50);
    cfg.sample_ratio = 0.05;
    cfg.episodes = 1;
    let r = train(&d, &w, &candidate_cuts(&w, false), &cfg).unwrap();
    assert_eq!(r.episodes_run, 1);
    assert_eq!(r.curve.len(), 1);
    assert_eq!(r.curve[0].best_access_fraction, r.curve[0].episode_access_fraction);
    let total = (w.len() * r.sample_rows) as f64;
    assert_eq!(r.curve[0].best_access_fraction, 1.0 - r.best_capacity as f64 / total);
}

#[test]
fn curve_tracks_the_running_best() {
    let (d, w) = instance();
    let mut cfg = RlConfig::new(50);
    cfg.sample_ratio = 0.05;
    cfg.episodes = 40;
    let mut seen = Vec::new();
    let r = train_with(&d, &w, &candidate_cuts(&w, false), &cfg, |p| seen.push(p.clone())).unwrap();
    assert_eq!(seen, r.curve);
    let mut best = f64::INFINITY;
    for (i, p) in r.curve.iter().enumerate() {
        assert_eq!(p.episode, i);
        best = best.min(p.episode_access_fraction);
        assert_eq!(p.best_access_fraction, best);
    }
    let back = Network::from_json(&r.policy.to_json()).unwrap();
    assert_eq!(back, r.policy);
}

#[test]
fn timeout_stops_early_but_keeps_a_tree() {
    let (d, w) = instance();
    let mut cfg = RlConfig::new(50);
    cfg.sample_ratio = 0.5;
    cfg.episodes = 1_000_000;
    cfg.timeout = Some(Duration::from_millis(200));
    let r = train(&d, &w, &candidate_cuts(&w, false), &cfg).unwrap();
    assert!(r.episodes_run >= 1 && r.episodes_run < 1_000_000);
}

#[test]
fn bad_configs_are_rejected() {
    let (d, w) = instance();
    let cuts = candidate_cuts(&w, false);
    let mut cfg = RlConfig::new(50);
    cfg.sample_ratio = 0.0;
    assert!(train(&d, &w, &cuts, &cfg).is_err());
    let mut cfg = RlConfig::new(50);
    cfg.episodes = 0;
    assert!(train(&d, &w, &cuts, &cfg).is_err());
    assert!(train(&d, &w, &[], &RlConfig::new(50)).is_err());
}
