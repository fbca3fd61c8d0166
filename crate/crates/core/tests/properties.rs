use proptest::prelude::*;

use fsa_search::distributions::{
    add_noise, dynamic_alpha, entropy, inject_max_entropy, mix_uniform, mle_categorical, smooth_update, Categorical,
    SIMPLEX_TOL,
};
use fsa_search::domains::{GridBenchmark, GridBenchmarkConfig, NuclearDomain, TinyOracleDomain};
use fsa_search::fsa::{DeterministicFsa, FsaPolicy, ObservationGrid};
use fsa_search::sim::{evaluate, rollout, Domain};
use fsa_search::skfsa::{bundle_weights, FifoKernelQueue, KernelTransition, ObservationBundle};

fn categorical(max_len: usize) -> impl Strategy<Value = Categorical> {
    prop::collection::vec(0.0f64..1.0, 1..=max_len).prop_map(|w| {
        if w.iter().sum::<f64>() > 0.0 {
            Categorical::from_weights(&w).unwrap()
        } else {
            Categorical::uniform(w.len())
        }
    })
}

fn pair(max_len: usize) -> impl Strategy<Value = (Categorical, Categorical)> {
    (1..=max_len).prop_flat_map(|n| {
        let one = || prop::collection::vec(0.01f64..1.0, n).prop_map(|w| Categorical::from_weights(&w).unwrap());
        (one(), one())
    })
}

fn assert_simplex(p: &Categorical) -> Result<(), TestCaseError> {
    prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL);
    prop_assert!(p.probs().iter().all(|&x| x >= 0.0));
    Ok(())
}

proptest! {
    #[test]
    fn smoothing_stays_on_simplex((p, q) in pair(10), alpha in 0.0f64..=1.0) {
        assert_simplex(&smooth_update(&p, &q, alpha).unwrap())?;
    }

    #[test]
    fn mle_is_a_distribution(counts in prop::collection::vec(0u64..20, 1..10)) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let p = mle_categorical(&counts).unwrap();
        assert_simplex(&p)?;
        let total = counts.iter().sum::<u64>() as f64;
        for (x, c) in p.probs().iter().zip(&counts) {
            prop_assert!((x - *c as f64 / total).abs() < 1e-12);
        }
    }

    #[test]
    fn injection_raises_entropy_and_stays_on_simplex(p in categorical(10), alpha in 0.0f64..=1.0, rate in 0.0f64..1.0) {
        let q = mix_uniform(&p, rate);
        assert_simplex(&q)?;
        prop_assert!(entropy(&q) >= entropy(&p) - 1e-9);
        let r = inject_max_entropy(&p, &p, alpha, rate).unwrap();
        for (a, b) in r.probs().iter().zip(q.probs()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_stays_on_simplex(p in categorical(10), omega in 0.0f64..0.5) {
        assert_simplex(&add_noise(&p, omega))?;
    }

    #[test]
    fn dynamic_rate_is_a_rate(k in 0u64..10_000, alpha0 in 0.01f64..=1.0, beta in 0.1f64..100.0) {
        let a = dynamic_alpha(k, alpha0, beta).unwrap();
        prop_assert!(a > 0.0 && a <= 1.0);
    }

    #[test]
    fn bundle_weights_sum_to_one(n in 1usize..=50, alpha in 1e-6f64..=1.0) {
        let w = bundle_weights(n, alpha);
        prop_assert_eq!(w.len(), n);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // every bundle after the oldest is worth 1 - alpha times its successor
        for b in 1..n.saturating_sub(1) {
            prop_assert!((w[b] - (1.0 - alpha) * w[b + 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn queue_keeps_the_newest(cap in 1usize..12, extra in 0usize..12) {
        let mut q = FifoKernelQueue::new(cap).unwrap();
        let pushes = cap + extra;
        for it in 0..pushes as u64 {
            q.push(ObservationBundle { iteration: it, samples: Vec::new() });
        }
        let kept: Vec<u64> = q.bundles().map(|b| b.iteration).collect();
        prop_assert_eq!(kept, ((pushes - cap) as u64..pushes as u64).collect::<Vec<_>>());
    }

    #[test]
    fn softmax_ignores_common_shifts(
        weights in prop::collection::vec(-4.0f64..4.0, 9),
        shift in prop::collection::vec(-10.0f64..10.0, 3),
        o in -3.0f64..3.0,
    ) {
        let basis = vec![vec![-1.0], vec![1.0]];
        let f = KernelTransition::new(3, 0.9, basis.clone(), weights.clone(), 0.0).unwrap();
        let shifted: Vec<f64> = weights.chunks(3).flat_map(|r| r.iter().zip(&shift).map(|(a, c)| a + c)).collect();
        let g = KernelTransition::new(3, 0.9, basis, shifted, 0.0).unwrap();
        for (a, b) in f.predict(&[o]).probs().iter().zip(g.predict(&[o]).probs()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn kernel_injection_floors_probabilities(weights in prop::collection::vec(-6.0f64..6.0, 6), rate in 0.0f64..0.9) {
        let f = KernelTransition::new(2, 1.0, vec![vec![0.0], vec![1.0]], weights, 0.0).unwrap();
        let g = f.inject(rate).unwrap();
        prop_assert!(g.approx_entropy() >= f.approx_entropy() - 1e-12);
        for o in [-1.0, 0.5, 2.0] {
            prop_assert!(g.predict(&[o]).probs().iter().all(|&p| p >= rate / 2.0 - 1e-12));
        }
    }
}

fn random_fsa(n_mas: usize, bounds: Vec<(f64, f64)>, actions: &[usize], transitions: &[usize]) -> DeterministicFsa {
    let grid = ObservationGrid::new(bounds, 2).unwrap();
    let n_nodes = actions.len();
    let rows = n_nodes * grid.n_bins();
    let actions = actions.iter().map(|a| a % n_mas).collect();
    let transitions = (0..rows)
        .map(|i| transitions[i % transitions.len()] % n_nodes)
        .collect();
    DeterministicFsa::new(n_mas, grid, actions, transitions).unwrap()
}

fn joint<D: Domain>(d: &D, actions: &[usize], transitions: &[usize]) -> Vec<FsaPolicy> {
    (0..d.num_robots())
        .map(|r| random_fsa(d.num_macro_actions(r), d.obs_bounds().to_vec(), actions, transitions).to_stochastic())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rollouts_are_reproducible_and_discounted(
        seed in any::<u64>(),
        actions in prop::collection::vec(0usize..8, 1..4),
        transitions in prop::collection::vec(0usize..8, 1..8),
    ) {
        let nuclear = NuclearDomain::default();
        let grid = GridBenchmark::new(GridBenchmarkConfig::default()).unwrap();
        let tiny = TinyOracleDomain::continuous(0.1).unwrap();
        let checks: [(&dyn Fn(u64) -> (f64, f64, bool), &str); 3] = [
            (&|s| outcome(&nuclear, &joint(&nuclear, &actions, &transitions), 30, s), "nuclear"),
            (&|s| outcome(&grid, &joint(&grid, &actions, &transitions), 25, s), "grid"),
            (&|s| outcome(&tiny, &joint(&tiny, &actions, &transitions), 6, s), "tiny"),
        ];
        for (run, name) in checks {
            let (a_ret, a_raw, a_eq) = run(seed);
            prop_assert!(a_eq, "{} rollout not reproducible", name);
            prop_assert!(a_ret <= a_raw + 1e-12, "{}: discounted {} exceeds raw {}", name, a_ret, a_raw);
        }
    }

    #[test]
    fn evaluation_is_reproducible(seed in any::<u64>()) {
        let d = TinyOracleDomain::continuous(0.2).unwrap();
        let p = joint(&d, &[0, 1], &[1, 0, 0, 1]);
        let a = evaluate(&d, &p, 40, 6, seed).unwrap();
        let b = evaluate(&d, &p, 40, 6, seed).unwrap();
        prop_assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        prop_assert!(a.stderr >= 0.0);
    }
}

fn outcome<D: Domain>(d: &D, p: &[FsaPolicy], horizon: u64, seed: u64) -> (f64, f64, bool) {
    let a = rollout(d, p, horizon, seed).unwrap();
    let b = rollout(d, p, horizon, seed).unwrap();
    let raw: f64 = a.rewards.iter().map(|(_, r)| r).sum();
    (a.discounted_return, raw, a == b)
}
