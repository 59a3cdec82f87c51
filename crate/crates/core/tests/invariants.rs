use moran_weights::exact::{build_transition_matrix, partitions};
use moran_weights::model::{generate_pedigree, sample_event, ModelConfig, ModelRng, SamplingVariant};
use moran_weights::stats::chi_square_uniform;
use moran_weights::weights::init_weights;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::SeedableRng;

fn config(n: usize, m: usize, variant: SamplingVariant, seed: u64) -> ModelConfig {
    ModelConfig {
        population_size: n,
        parent_count: m,
        variant,
        seed,
    }
}

fn variant() -> impl Strategy<Value = SamplingVariant> {
    prop_oneof![Just(SamplingVariant::DistinctTuple), Just(SamplingVariant::IndependentTuple)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distinct_events_have_distinct_members(n in 3usize..40, m in 2usize..5, seed: u64) {
        prop_assume!(n > m);
        let cfg = config(n, m, SamplingVariant::DistinctTuple, seed);
        let mut rng = ModelRng::seed_from_u64(seed);
        for t in 0..50 {
            let e = sample_event(&cfg, t, &mut rng).unwrap();
            let mut all = e.parents.clone();
            all.push(e.child);
            prop_assert!(all.iter().all(|&i| i < n));
            all.sort_unstable();
            all.dedup();
            prop_assert_eq!(all.len(), m + 1);
        }
    }

    #[test]
    fn spread_bounds_only_tighten(n in 2usize..30, m in 2usize..4, v in variant(), seed: u64, steps in 0u64..600) {
        prop_assume!(n > m);
        let cfg = config(n, m, v, seed);
        let mut rng = ModelRng::seed_from_u64(seed);
        let ped = generate_pedigree(&cfg, steps, &mut rng).unwrap();
        let tracked: Vec<usize> = (0..n.min(3)).collect();
        let mut w = init_weights(n, &tracked).unwrap();
        let mut prev = w.bounds();
        for e in &ped.events {
            w.apply_event(e).unwrap();
            let next = w.bounds();
            for (a, b) in prev.iter().zip(&next) {
                prop_assert!(a.is_refined_by(b), "{:?} -> {:?}", a, b);
            }
            prev = next;
        }
    }

    #[test]
    fn rows_stay_stochastic(n in 2usize..25, m in 2usize..4, v in variant(), seed: u64, steps in 0u64..400) {
        prop_assume!(n > m);
        let cfg = config(n, m, v, seed);
        let mut rng = ModelRng::seed_from_u64(seed);
        let ped = generate_pedigree(&cfg, steps, &mut rng).unwrap();
        let all: Vec<usize> = (0..n).collect();
        let mut w = init_weights(n, &all).unwrap();
        for e in &ped.events {
            w.apply_event(e).unwrap();
        }
        for i in 0..n {
            let row: f64 = all.iter().map(|&j| w.column(j).unwrap()[i]).sum();
            prop_assert!((row - 1.0).abs() <= 1e-12, "row {} sums to {}", i, row);
        }
        let total: f64 = w.marginal_weights().iter().sum();
        prop_assert!((total - n as f64).abs() <= 1e-9);
    }

    #[test]
    fn extinction_is_absorbing(n in 3usize..12, seed: u64) {
        let cfg = ModelConfig::biparental(n, seed);
        let mut rng = ModelRng::seed_from_u64(seed);
        let ped = generate_pedigree(&cfg, 4000, &mut rng).unwrap();
        let mut w = init_weights(n, &[0]).unwrap();
        let mut extinct_at = None;
        for (t, e) in ped.events.iter().enumerate() {
            w.apply_event(e).unwrap();
            let ext = w.is_extinct(0).unwrap();
            if let Some(at) = extinct_at {
                prop_assert!(ext, "revived after extinction at {}", at);
            } else if ext {
                extinct_at = Some(t);
            }
        }
    }

    #[test]
    fn lumped_rows_sum_to_one(n in 4u64..40, m in 2u32..4, k in 1u32..5) {
        prop_assume!(n > u64::from(k) && n > u64::from(m));
        let chain = build_transition_matrix(n, m, k).unwrap();
        prop_assert_eq!(chain.states().len(), partitions(k).len());
        for row in chain.matrix() {
            prop_assert!(row.iter().all(|p| *p >= BigRational::zero() && *p <= BigRational::one()));
            prop_assert_eq!(row.iter().sum::<BigRational>(), BigRational::one());
        }
        prop_assert!(chain.is_irreducible());
    }
}

/// Chi-square of the child and each parent slot against uniform, 1e5 events, alpha = 0.001.
#[test]
fn slots_are_uniform() {
    for v in [SamplingVariant::DistinctTuple, SamplingVariant::IndependentTuple] {
        for (n, m) in [(10usize, 2usize), (7, 3)] {
            let cfg = config(n, m, v, 2024);
            let mut rng = cfg.rng();
            let mut counts = vec![vec![0u64; n]; m + 1];
            for t in 0..100_000 {
                let e = sample_event(&cfg, t, &mut rng).unwrap();
                counts[0][e.child] += 1;
                for (s, &p) in e.parents.iter().enumerate() {
                    counts[s + 1][p] += 1;
                }
            }
            for (slot, c) in counts.iter().enumerate() {
                let test = chi_square_uniform(c);
                assert!(test.p_value > 0.001, "{v} N={n} m={m} slot {slot}: {test:?}");
            }
        }
    }
}

/// Ordered distinct triples at N = 4 are equally likely: 24 cells.
#[test]
fn distinct_triples_are_uniform() {
    let cfg = ModelConfig::biparental(4, 77);
    let mut rng = cfg.rng();
    let mut counts = vec![0u64; 64];
    for t in 0..240_000 {
        let e = sample_event(&cfg, t, &mut rng).unwrap();
        counts[e.child * 16 + e.parents[0] * 4 + e.parents[1]] += 1;
    }
    let used: Vec<u64> = counts.iter().copied().filter(|&c| c > 0).collect();
    assert_eq!(used.len(), 24);
    assert!(chi_square_uniform(&used).p_value > 0.001);
}

/// Under independent slots a parent doubles up with probability 1/N.
#[test]
fn independent_slots_repeat_parents() {
    let n = 5;
    let cfg = config(n, 2, SamplingVariant::IndependentTuple, 9);
    let mut rng = cfg.rng();
    let draws = 200_000;
    let repeats = (0..draws)
        .filter(|&t| {
            let e = sample_event(&cfg, t, &mut rng).unwrap();
            e.parents[0] == e.parents[1]
        })
        .count() as f64;
    let p = 1.0 / n as f64;
    let sigma = (p * (1.0 - p) / draws as f64).sqrt();
    assert!((repeats / draws as f64 - p).abs() < 4.0 * sigma);
}
