use qdtree::greedy::{check_submodularity_condition, greedy_build, GreedyConfig};
use qdtree::harness::{baseline_partition, generate, oracle_opt, BaselineSpec, GeneratorSpec};
use qdtree::skipcost::can_skip;
use qdtree::{candidate_cuts, evaluate_partitioning, Dataset, Error, QdTree, Workload};

fn instance(rows: usize) -> (Dataset, Workload) {
    generate(&GeneratorSpec::DisjunctiveMicrobench { rows, seed: 7 }).unwrap()
}

/// Disk block first, then the two cpu cuts on the remainder.
fn four_block_layout(d: &Dataset, w: &Workload) -> QdTree {
    let cuts = candidate_cuts(w, false);
    let mut t = QdTree::new(d.schema().clone(), w.registry.clone());
    let (_, r) = t.split_mut(t.root(), cuts[2].clone()).unwrap();
    let (_, rr) = t.split_mut(r, cuts[1].clone()).unwrap();
    t.split_mut(rr, cuts[0].clone()).unwrap();
    t
}

#[test]
fn cuts_are_the_three_literals() {
    let (d, w) = instance(1000);
    let shown: Vec<String> = candidate_cuts(&w, false)
        .iter()
        .map(|c| match c {
            qdtree::Cut::Unary(p) => p.display(d.schema()).to_string(),
            qdtree::Cut::Advanced(_) => unreachable!(),
        })
        .collect();
    assert_eq!(shown, vec!["cpu < 1000", "cpu > 9000", "disk < 100"]);
}

#[test]
fn greedy_takes_the_disk_cut_only() {
    let (d, w) = instance(100_000);
    let cuts = candidate_cuts(&w, false);
    let t = greedy_build(&d, &w, &GreedyConfig::new(100, cuts.clone())).unwrap();
    assert_eq!(t.num_leaves(), 2);
    assert_eq!(t.construction_log()[0].1, cuts[2]);
    let (f, a) = t.route_and_freeze(&d);
    let af = evaluate_partitioning(&f, &a, &d, &w).access_fraction;
    assert!((af - 0.505).abs() < 0.01, "{af}");
}

#[test]
fn four_block_layout_scans_about_eleven_percent() {
    let (d, w) = instance(100_000);
    let (f, a) = four_block_layout(&d, &w).route_and_freeze(&d);
    let r = evaluate_partitioning(&f, &a, &d, &w);
    // Q1 reads the two outer cpu blocks, Q2 only the disk block
    assert!((r.access_fraction - 0.109).abs() < 0.005, "{}", r.access_fraction);
    assert_eq!(f.route_query(&w.queries[1]), vec![0]);
    let middle = f.node(f.leaf_of_block(3)).desc.clone();
    assert!(can_skip(&middle, &w.queries[0], &w));
    assert!(can_skip(&middle, &w.queries[1], &w));
}

#[test]
fn disjunction_is_outside_the_condition() {
    let (d, w) = instance(1000);
    let e = check_submodularity_condition(&candidate_cuts(&w, false), &w, d.schema()).unwrap_err();
    assert!(matches!(e, Error::UnsupportedQueryShape(_)));
}

#[test]
fn oracle_finds_the_four_block_layout() {
    let (d, w) = instance(10_000);
    let cuts = candidate_cuts(&w, false);
    let o = oracle_opt(&d, &w, &cuts, 10, Some(4)).unwrap();
    let (f, a) = o.tree.route_and_freeze(&d);
    let got = evaluate_partitioning(&f, &a, &d, &w);
    let (f4, a4) = four_block_layout(&d, &w).route_and_freeze(&d);
    let want = evaluate_partitioning(&f4, &a4, &d, &w);
    assert_eq!(o.tree.num_leaves(), 4);
    assert_eq!(got.total_skipped, want.total_skipped);
    assert_eq!(o.c_opt, want.total_skipped);
}

#[test]
fn random_partitioner_reads_nearly_everything() {
    let (d, w) = instance(100_000);
    let l = baseline_partition(
        &BaselineSpec::Random {
            block_size: 1000,
            seed: 1,
        },
        &d,
        &w.registry,
    )
    .unwrap();
    let af = l.evaluate(&w).access_fraction;
    assert!(af > 0.99, "{af}");
    let one = baseline_partition(
        &BaselineSpec::Random {
            block_size: 200_000,
            seed: 1,
        },
        &d,
        &w.registry,
    )
    .unwrap();
    assert_eq!(one.sizes.len(), 1);
    assert_eq!(one.evaluate(&w).access_fraction, 1.0);
}
