use moran_weights::model::{ModelConfig, SamplingVariant};
use moran_weights::montecarlo::{compare_layers, martingale_check, run_experiment, summarize, ExperimentSpec};
use moran_weights::weights::{run_to_convergence, RunSettings};

fn model(n: usize, m: usize, variant: SamplingVariant, seed: u64) -> ModelConfig {
    ModelConfig {
        population_size: n,
        parent_count: m,
        variant,
        seed,
    }
}

#[test]
fn default_settings_converge_at_n20() {
    let cfg = ModelConfig::biparental(20, 0);
    let settings = RunSettings::defaults_for(20);
    let mut converged = 0;
    for r in 0..1000u64 {
        let mut rng = ModelConfig::biparental(20, r).rng();
        let report = run_to_convergence(&cfg, &[0, 1], settings.epsilon, settings.n_max, &mut rng).unwrap();
        if report.converged {
            converged += 1;
        }
        for o in &report.outcomes {
            assert!(o.estimate >= 20.0 * o.lower - 1e-9 && o.estimate <= 20.0 * o.upper + 1e-9);
        }
    }
    assert!(converged >= 990, "{converged} of 1000 converged");
}

fn layers_agree(n: usize, m: usize, seed: u64) {
    let spec = ExperimentSpec::new(model(n, m, SamplingVariant::DistinctTuple, seed), 4000, 2);
    let samples = run_experiment(&spec).unwrap();
    assert_eq!(samples.non_converged(), 0);
    for row in compare_layers(&samples, 3).unwrap() {
        let p = row.p_value.unwrap();
        assert!(p > 0.001, "N={n} m={m} {}: {:?} vs exact {:?}", row.config, row.monte_carlo, row.exact);
    }
}

#[test]
fn simulated_moments_match_exact_chain_biparental() {
    layers_agree(10, 2, 17);
}

#[test]
fn simulated_moments_match_exact_chain_three_parents() {
    layers_agree(10, 3, 18);
}

#[test]
fn independent_slots_keep_unit_mean() {
    let spec = ExperimentSpec::new(model(12, 2, SamplingVariant::IndependentTuple, 5), 3000, 1);
    let samples = run_experiment(&spec).unwrap();
    let summary = summarize(&samples, 1);
    let mean = summary.ancestors[0].moments[0].estimate;
    assert!(mean.p_value(1.0) > 0.001, "{mean:?}");
}

#[test]
fn marginal_weight_is_a_martingale_at_small_n() {
    let mut spec = ExperimentSpec::new(ModelConfig::biparental(8, 31), 3000, 2);
    spec.checkpoints = vec![8, 64, 640];
    let samples = run_experiment(&spec).unwrap();
    let rows = martingale_check(&samples, 0.999);
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert!(row.covers_one, "{row:?}");
        assert!(row.exchangeability.unwrap().p_value > 0.001, "{row:?}");
    }
}
