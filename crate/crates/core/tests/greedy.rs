use qdtree::candidate_cuts;
use qdtree::greedy::{check_online_bound, check_submodularity_condition, greedy_build, GreedyConfig};
use qdtree::harness::{generate, oracle_opt, GeneratorSpec};
use qdtree::skipcost::tree_capacity;

#[test]
fn small_instance_meets_the_online_bound() {
    // 48 rows, b = 6, four range cuts, three conjunctive range queries
    let mut checked = 0;
    for seed in 0..200 {
        let (d, w) = generate(&GeneratorSpec::Uniform {
            rows: 48,
            columns: 2,
            domain: 30,
            queries: 3,
            seed,
        })
        .unwrap();
        let cuts = candidate_cuts(&w, false);
        if cuts.len() < 4 {
            continue;
        }
        let cuts = cuts[..4].to_vec();
        if !check_submodularity_condition(&cuts, &w, d.schema()).unwrap() {
            continue;
        }
        let t = greedy_build(&d, &w, &GreedyConfig::new(6, cuts.clone())).unwrap();
        let o = oracle_opt(&d, &w, &cuts, 6, None).unwrap();
        let r = check_online_bound(&t, &d, &w, 6, Some(o.c_opt)).unwrap();
        assert!(r.holds);
        assert_eq!(r.c_t, tree_capacity(&t, &d, &w));
        checked += 1;
    }
    assert!(checked >= 10, "{checked}");
}

#[test]
fn fewer_than_two_blocks_of_rows_stays_whole() {
    let (d, w) = generate(&GeneratorSpec::Uniform {
        rows: 11,
        columns: 2,
        domain: 30,
        queries: 3,
        seed: 1,
    })
    .unwrap();
    let t = greedy_build(&d, &w, &GreedyConfig::new(6, candidate_cuts(&w, false))).unwrap();
    assert_eq!(t.num_leaves(), 1);
    let r = check_online_bound(&t, &d, &w, 6, Some(0)).unwrap();
    assert!(r.holds && r.c_t == 0);
}
