use proptest::prelude::*;
use robust_collab::conflict::{
    build_consistency_graph, greedy_consistent_group, group_is_consistent,
    max_consistent_group_exhaustive, reduction_datasets, ConsistencyGraph, EdgeBasis,
};
use robust_collab::learner::{
    candidate, candidate_budget, final_budget, loop_guard, min_subset_size, test_budget,
};
use robust_collab::oracle::{
    adversary_budget, DistributionFamily, PretenderKind, RandomInstanceConfig,
};
use robust_collab::{
    error_rate, make_random_instance, run_robust_collaborative, Distribution, Hypothesis,
    HypothesisClass, Instance, LabeledExample, LearnerConstants, OracleSet, Point, RunParams,
    SampleLedger,
};

fn ceil_count(x: f64) -> u64 {
    ((x - 1e-9).ceil() as u64).max(1)
}

/// Counts queries independently of the instance's own ledger.
struct Counting<'a> {
    inner: &'a mut Instance,
    counts: Vec<u64>,
}

impl OracleSet for Counting<'_> {
    fn class(&self) -> &HypothesisClass {
        self.inner.class()
    }
    fn n(&self) -> usize {
        self.inner.n()
    }
    fn eta(&self) -> f64 {
        self.inner.eta()
    }
    fn query(&mut self, oracle: usize) -> LabeledExample {
        self.counts[oracle] += 1;
        self.inner.query(oracle)
    }
    fn ledger(&self) -> &SampleLedger {
        self.inner.ledger()
    }
}

fn class_strategy() -> impl Strategy<Value = HypothesisClass> {
    prop_oneof![
        (1usize..=6).prop_map(|d| HypothesisClass::powerset(d).unwrap()),
        (1usize..=12).prop_map(|m| HypothesisClass::threshold(m).unwrap()),
    ]
}

fn sample_strategy(domain: usize) -> impl Strategy<Value = Vec<LabeledExample>> {
    prop::collection::vec(
        (0..domain, any::<bool>()).prop_map(|(x, l)| LabeledExample::new(x, l)),
        0..12,
    )
}

fn random_config(
    class: HypothesisClass,
    n: usize,
    eta: f64,
    pretender: PretenderKind,
) -> RandomInstanceConfig {
    RandomInstanceConfig {
        class,
        n,
        eta,
        adversaries: None,
        family: DistributionFamily::RandomWeights,
        pretender,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn consistent_is_sound_and_complete(
        (class, sample) in class_strategy().prop_flat_map(|c| {
            let domain = c.domain_size();
            (Just(c), sample_strategy(domain))
        })
    ) {
        let got = class.consistent(&sample).unwrap();
        let brute = class.members().find(|f| f.agrees_with(&sample).unwrap());
        match got {
            Some(f) => {
                prop_assert!(class.contains(&f));
                prop_assert!(f.agrees_with(&sample).unwrap());
            }
            None => prop_assert!(brute.is_none()),
        }
    }

    #[test]
    fn powerset_shatters_its_points(d in 1usize..=12, bits in any::<u64>()) {
        let class = HypothesisClass::powerset(d).unwrap();
        prop_assert_eq!(class.size(), 1u128 << d);
        let labels: Vec<bool> = (0..d).map(|x| bits >> x & 1 == 1).collect();
        let sample: Vec<LabeledExample> =
            labels.iter().enumerate().map(|(x, &l)| LabeledExample::new(x, l)).collect();
        let f = class.consistent(&sample).unwrap().unwrap();
        let mut want = labels.clone();
        want.push(false);
        prop_assert_eq!(f.labels(), want);
        let bottom = class.bottom().unwrap();
        prop_assert!(class.consistent(&[LabeledExample::new(bottom.0, true)]).unwrap().is_none());
    }

    #[test]
    fn error_rate_is_disagreement_mass_and_a_metric(
        m in 1usize..=10,
        weights in prop::collection::vec(0.01f64..1.0, 11),
        t in prop::array::uniform3(0usize..=10),
    ) {
        let dist = Distribution::from_weights(&weights[..m]).unwrap();
        let [a, b, c] = t.map(|t| Hypothesis::threshold(t.min(m), m));
        let ab = error_rate(&a, &b, &dist).unwrap();
        let direct: f64 = (0..m)
            .filter(|&x| a.evaluate(Point(x)).unwrap() != b.evaluate(Point(x)).unwrap())
            .map(|x| dist.mass(Point(x)))
            .sum();
        prop_assert!((ab - direct).abs() < 1e-12);
        prop_assert!((ab - error_rate(&b, &a, &dist).unwrap()).abs() < 1e-12);
        let via = error_rate(&a, &c, &dist).unwrap() + error_rate(&c, &b, &dist).unwrap();
        prop_assert!(ab <= via + 1e-12);
        prop_assert_eq!(error_rate(&a, &a, &dist).unwrap(), 0.0);
    }

    #[test]
    fn run_ledger_matches_independent_count(
        class in class_strategy(),
        n in 1usize..=12,
        eta in prop_oneof![Just(0.0), Just(0.1), Just(0.25)],
        seed in any::<u64>(),
    ) {
        let mut inst = make_random_instance(&random_config(class, n, eta, PretenderKind::Random), seed).unwrap();
        let mut counting = Counting { inner: &mut inst, counts: vec![0; n] };
        let params = RunParams { eps: 0.2, delta: 0.1, eta };
        let run = run_robust_collaborative(&mut counting, &params, &LearnerConstants::calibrated()).unwrap();
        prop_assert_eq!(&run.ledger.per_oracle, &counting.counts);
        prop_assert_eq!(run.ledger.total, counting.counts.iter().sum::<u64>());
        prop_assert_eq!(&inst.ledger().per_oracle, &run.ledger.per_oracle);
    }

    #[test]
    fn active_set_shrinks_and_guard_holds(
        class in class_strategy(),
        n in 1usize..=15,
        eta in prop_oneof![Just(0.0), Just(0.1), Just(0.2)],
        pretender in prop_oneof![Just(PretenderKind::Random), Just(PretenderKind::Close)],
        seed in any::<u64>(),
    ) {
        let constants = LearnerConstants::calibrated();
        let mut inst = make_random_instance(&random_config(class, n, eta, pretender), seed).unwrap();
        let params = RunParams { eps: 0.2, delta: 0.1, eta };
        let run = run_robust_collaborative(&mut inst, &params, &constants).unwrap();

        let mut active: Vec<usize> = (0..n).collect();
        for (k, round) in run.trace.iter().enumerate() {
            prop_assert_eq!(round.round, k + 1);
            prop_assert_eq!(&round.active, &active);
            prop_assert!(!active.is_empty() && loop_guard(eta, n, active.len()));
            prop_assert!(round.retained.len() < active.len());
            prop_assert!(round.retained.iter().all(|i| active.contains(i)));
            for &i in &active {
                let served = !round.retained.contains(&i);
                prop_assert_eq!(run.assigned_round[i] == Some(k + 1), served);
                if served {
                    prop_assert_eq!(&run.outputs[i], &round.candidate);
                }
            }
            let g = active.len();
            let (_, cand) = candidate_budget(g, inst.class().vc_dimension(), 0.2, round.delta_r, constants.c_cand);
            let test = test_budget(g, 0.2, round.delta_r, constants.c_test);
            prop_assert_eq!(round.candidate_per_user, cand);
            prop_assert_eq!(round.test_per_user, test);
            prop_assert_eq!(round.samples, g as u64 * (cand + test));
            active = round.retained.clone();
        }
        prop_assert_eq!(&run.final_phase_users, &active);
        if !active.is_empty() {
            prop_assert!(!loop_guard(eta, n, active.len()) || run.rounds_used == constants.max_rounds);
            prop_assert_eq!(
                run.final_per_user,
                final_budget(inst.class().vc_dimension(), n, 0.2, 0.1, constants.c_final)
            );
        }
        prop_assert_eq!(run.rounds_used, run.trace.len());
    }

    #[test]
    fn candidate_replay_confirms_search_order(
        class in class_strategy(),
        g in 1usize..=12,
        adversaries in 0usize..=1,
        seed in any::<u64>(),
    ) {
        let adversaries = adversaries.min(g / 10);
        let config = RandomInstanceConfig {
            adversaries: Some(adversaries),
            ..random_config(class, g, adversaries as f64 / g as f64, PretenderKind::Close)
        };
        let mut inst = make_random_instance(&config, seed).unwrap();
        let group: Vec<usize> = (0..g).collect();
        let c = candidate(&mut inst, &group, 0.3, 0.1, &LearnerConstants::calibrated()).unwrap();
        let class = inst.class().clone();
        prop_assert!(c.chosen.len() >= min_subset_size(g));
        prop_assert!(group_is_consistent(&c.datasets, &class, &c.chosen).unwrap());
        prop_assert_eq!(
            class.consistent_union(c.chosen.iter().map(|&j| c.datasets[j].as_slice())).unwrap(),
            Some(c.hypothesis.clone())
        );
        let best = max_consistent_group_exhaustive(&c.datasets, &class, min_subset_size(g), 25).unwrap();
        prop_assert_eq!(best, Some(c.chosen.clone()));
        if adversaries == 0 {
            prop_assert_eq!(&c.chosen, &group);
            prop_assert_eq!(c.subsets_checked, 1);
        }
        prop_assert_eq!(c.datasets.iter().map(|s| s.len() as u64).sum::<u64>(), inst.ledger().total);
    }

    #[test]
    fn pairwise_and_oracle_bases_agree_on_powerset(
        d in 1usize..=8,
        datasets in prop::collection::vec(
            (any::<u8>(), prop::collection::vec(0usize..8, 0..5)), 1..8),
    ) {
        // Each dataset is labeled by its own labeling of the non-⊥ points, so
        // it is consistent on its own.
        let class = HypothesisClass::powerset(d).unwrap();
        let datasets: Vec<Vec<LabeledExample>> = datasets
            .into_iter()
            .map(|(bits, xs)| {
                xs.into_iter().map(|x| LabeledExample::new(x % d, bits >> (x % d) & 1 == 1)).collect()
            })
            .collect();
        let pairwise = build_consistency_graph(&datasets, &class, EdgeBasis::PairwiseLabels).unwrap();
        let checked = build_consistency_graph(&datasets, &class, EdgeBasis::OracleChecked).unwrap();
        prop_assert_eq!(pairwise.edges(), checked.edges());
    }

    #[test]
    fn greedy_is_a_clique_no_larger_than_exhaustive(
        n in 10usize..=20,
        seed in any::<u64>(),
        p in 0.2f64..0.8,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let planted = (9 * n).div_ceil(10);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if b < planted || rng.gen_bool(p) {
                    edges.push((a, b));
                }
            }
        }
        let graph = ConsistencyGraph::from_edges(n, EdgeBasis::PairwiseLabels, &edges).unwrap();
        let greedy = greedy_consistent_group(&graph);
        prop_assert!(graph.is_clique(&greedy));
        let (class, datasets) = reduction_datasets(&graph).unwrap();
        prop_assert!(group_is_consistent(&datasets, &class, &greedy).unwrap());
        let best = max_consistent_group_exhaustive(&datasets, &class, planted, 25).unwrap().unwrap();
        prop_assert!(graph.is_clique(&best));
        prop_assert!(best.len() >= planted && best.len() >= greedy.len());
        let text = graph.to_edge_list();
        prop_assert_eq!(ConsistencyGraph::parse_edge_list(n, EdgeBasis::PairwiseLabels, &text).unwrap(), graph);
    }

    #[test]
    fn budgets_follow_their_formulas(
        g in 1usize..=30,
        d in 1usize..=20,
        n in 1usize..=50,
        eps in 0.01f64..=1.0,
        delta in 0.001f64..=1.0,
        c in 0.1f64..=5.0,
    ) {
        let (gf, df, nf) = (g as f64, d as f64, n as f64);
        let m = ceil_count(c * ((df * (1.0 / eps).ln() + gf * 2f64.ln() + (1.0 / delta).ln()) / eps + gf * (gf / delta).ln()));
        prop_assert_eq!(candidate_budget(g, d, eps, delta, c), (m, ceil_count(4.0 * m as f64 / gf)));
        prop_assert_eq!(test_budget(g, eps, delta, c), ceil_count(c * (gf / delta).ln() / eps));
        prop_assert_eq!(
            final_budget(d, n, eps, delta, c),
            ceil_count(c * (df * (1.0 / eps).ln() + (nf / delta).ln()) / eps)
        );
        prop_assert_eq!(min_subset_size(g), (9 * g).div_ceil(10));
        let eta = (g % 11) as f64 / 10.0;
        prop_assert_eq!(loop_guard(eta, n, g), 10 * adversary_budget(eta, n) <= g);
    }
}

#[test]
fn truthful_users_are_all_served_without_adversaries() {
    for seed in 0..30 {
        let mut inst = make_random_instance(
            &random_config(
                HypothesisClass::threshold(10).unwrap(),
                8,
                0.0,
                PretenderKind::Random,
            ),
            seed,
        )
        .unwrap();
        let run = run_robust_collaborative(
            &mut inst,
            &RunParams {
                eps: 0.1,
                delta: 0.1,
                eta: 0.0,
            },
            &LearnerConstants::calibrated(),
        )
        .unwrap();
        assert!(run.final_phase_users.is_empty());
        assert_eq!(run.trace[0].chosen_subset, (0..8).collect::<Vec<_>>());
    }
}
