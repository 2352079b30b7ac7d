use proptest::prelude::*;
use wfrecon::bounds::{to_f64, v_full};
use wfrecon::execution::{brute_force_optimum, mean_similarity, SimWorld, WorldGen};
use wfrecon::search::{run_search, run_search_unpruned, Search, SearchConfig, SearchTree};
use wfrecon::similarity::Metric;

fn world(b: usize, len: usize, forbidden: usize, max_cost: u64, seed: u64) -> SimWorld {
    WorldGen {
        primitives: b,
        target_len: len,
        forbidden,
        tasks: 3,
        max_cost,
        seed,
        ..WorldGen::default()
    }
    .build()
    .unwrap()
}

fn check_step_invariants(s: &Search<'_, SimWorld, Metric>, cap: Option<usize>) -> Result<(), TestCaseError> {
    let tree = s.tree();
    prop_assert!(tree.check_consistency().is_ok(), "{:?}", tree.check_consistency());
    for (_, n) in tree.nodes() {
        if let Some(m) = cap {
            prop_assert!(n.children.len() <= m);
        }
        let mut actions: Vec<_> = n.children.iter().map(|&c| tree.node(c).action).collect();
        actions.sort();
        actions.dedup();
        prop_assert_eq!(actions.len(), n.children.len());
    }
    let recs = s.records();
    for w in recs.windows(2) {
        prop_assert!(w[1].best_similarity >= w[0].best_similarity);
        prop_assert!(w[1].cumulative_tokens >= w[0].cumulative_tokens);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tree_stays_consistent(
        b in 2usize..7,
        len in 1usize..5,
        forbidden in 0usize..6,
        wseed in 0u64..1000,
        l_max in 1usize..6,
        m in 1usize..6,
        beta in 0.0f64..0.95,
        minibatch in 1usize..3,
        terminator in any::<bool>(),
        suffix in any::<bool>(),
        pruned in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let w = world(b, len, forbidden, 4, wseed);
        let metric = Metric::sfe_default();
        let cfg = SearchConfig {
            l_max,
            max_children: m,
            beta,
            budget: 60,
            minibatch,
            seed,
            terminator,
            terminal_on_suffix_failure: suffix,
            ..SearchConfig::default()
        };
        let mut s = Search::new(w.space(), cfg, &w, &metric, w.tasks(), pruned).unwrap();
        while !s.is_done() {
            s.step().unwrap();
            check_step_invariants(&s, pruned.then_some(m))?;
        }
        let out = s.finish();
        let root_visits = out.tree.node(SearchTree::ROOT).visits as usize;
        prop_assert_eq!(root_visits + out.summary.skipped_iterations, out.records.len());
        prop_assert!(out.records.len() == 60 || out.exhausted);
        prop_assert!((0.0..=1.0).contains(&out.summary.red_fraction));
        if !pruned {
            prop_assert_eq!(out.summary.red_fraction, 0.0);
        }
    }
}

#[test]
fn unpruned_never_exceeds_full_volume() {
    let metric = Metric::sfe_default();
    for (b, l) in [(2usize, 2usize), (3, 2), (2, 3), (3, 3)] {
        let w = world(b, l, 0, 1, 3);
        let cfg = SearchConfig {
            l_max: l,
            budget: 200,
            ..SearchConfig::default()
        };
        let out = run_search_unpruned(w.space(), &cfg, &w, &metric, w.tasks()).unwrap();
        let full = to_f64(&v_full(b as u64, l as u32).unwrap()) as usize;
        assert!(out.tree.len() <= full);
        assert_eq!(out.tree.len(), full, "small trees are enumerated completely");
        assert!(out.exhausted);
    }
}

#[test]
fn pruned_creates_no_more_nodes_than_unpruned() {
    let metric = Metric::sfe_default();
    let w = world(6, 4, 3, 3, 21);
    let mut diffs = Vec::new();
    for seed in 0..9 {
        let cfg = SearchConfig {
            l_max: 4,
            budget: 50,
            seed,
            ..SearchConfig::default()
        };
        let p = run_search(w.space(), &cfg, &w, &metric, w.tasks()).unwrap();
        let u = run_search_unpruned(w.space(), &cfg, &w, &metric, w.tasks()).unwrap();
        diffs.push(p.tree.len() as i64 - u.tree.len() as i64);
    }
    diffs.sort();
    assert!(diffs[diffs.len() / 2] <= 0, "{diffs:?}");
}

#[test]
fn matches_brute_force_when_width_is_uncapped() {
    let metric = Metric::sfe_default();
    let mut good = 0;
    let mut total = 0;
    for wseed in 0..4u64 {
        let b = 3 + (wseed as usize % 2);
        let l = 2 + (wseed as usize / 2);
        let w = world(b, l, 0, 1, 500 + wseed);
        let (_, opt) = brute_force_optimum(&w, &metric, l).unwrap();
        for seed in 0..10 {
            let cfg = SearchConfig {
                l_max: l,
                max_children: b,
                budget: 10 * b.pow(l as u32),
                seed,
                ..SearchConfig::default()
            };
            let out = run_search(w.space(), &cfg, &w, &metric, w.tasks()).unwrap();
            let steps = w.space().resolve(out.best.as_ref().unwrap()).unwrap();
            let got = mean_similarity(&w, &metric, w.space(), &steps, w.tasks()).unwrap();
            total += 1;
            if got >= opt - 0.05 {
                good += 1;
            }
        }
    }
    assert!(good * 10 >= total * 9, "{good}/{total}");
}

#[test]
fn pruned_beats_unpruned_on_tiny_budget_in_median() {
    let metric = Metric::sfe_default();
    let space_world = world(3, 2, 0, 1, 77);
    let mut p_best = Vec::new();
    let mut u_best = Vec::new();
    for seed in 0..10 {
        let p_cfg = SearchConfig {
            l_max: 2,
            budget: 300,
            seed,
            ..SearchConfig::default()
        };
        let u_cfg = SearchConfig {
            budget: 12,
            ..p_cfg.clone()
        };
        let p = run_search(space_world.space(), &p_cfg, &space_world, &metric, space_world.tasks()).unwrap();
        let u = run_search_unpruned(space_world.space(), &u_cfg, &space_world, &metric, space_world.tasks()).unwrap();
        p_best.push(p.best_score);
        u_best.push(u.best_score);
    }
    p_best.sort_by(f64::total_cmp);
    u_best.sort_by(f64::total_cmp);
    assert!(u_best[5] <= p_best[5]);
}
