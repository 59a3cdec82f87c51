//! Replicate harness: many independent pedigrees run to convergence, then
//! compared against the exact finite-`N` moments and the limit law.

use std::io::{self, Write};

use rand::SeedableRng;
use serde::Serialize;
use thiserror::Error;

use crate::exact::{self, partitions, ChainError, Configuration};
use crate::limit_law::MixtureLaw;
use crate::export::Metadata;
use crate::model::{derive_seed, ModelConfig, ModelError, ModelRng};
use crate::stats::{self, bootstrap_mean_ci, Estimate, KsTest};
use crate::weights::{run_replicate, CheckpointRecord, ConvergenceReport, RunSettings, WeightError};

/// Non-extinct estimates below this are counted separately, never coerced.
pub const NEAR_ZERO: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("replicate count must be at least 1")]
    NoReplicates,
    #[error("cannot track {tracked} ancestors in a population of {population_size}")]
    TooManyTracked { tracked: usize, population_size: usize },
    #[error("epsilon must be positive")]
    BadEpsilon,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("replicate {index} failed: {source}")]
    Replicate { index: usize, source: WeightError },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    /// `model.seed` is the master seed.
    pub model: ModelConfig,
    pub replicates: usize,
    /// Ancestors `0..tracked` are followed.
    pub tracked: usize,
    pub epsilon: f64,
    pub n_max: u64,
    pub checkpoints: Vec<u64>,
}

impl ExperimentSpec {
    /// `epsilon = 1e-9`, `n_max = 100 N^2`, no checkpoints.
    pub fn new(model: ModelConfig, replicates: usize, tracked: usize) -> Self {
        let defaults = RunSettings::defaults_for(model.population_size);
        ExperimentSpec {
            model,
            replicates,
            tracked,
            epsilon: defaults.epsilon,
            n_max: defaults.n_max,
            checkpoints: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.model.validate()?;
        if self.replicates == 0 {
            return Err(ExperimentError::NoReplicates);
        }
        if self.tracked == 0 || self.tracked > self.model.population_size {
            return Err(ExperimentError::TooManyTracked {
                tracked: self.tracked,
                population_size: self.model.population_size,
            });
        }
        if !(self.epsilon > 0.0) {
            return Err(ExperimentError::BadEpsilon);
        }
        Ok(())
    }

    /// Seed of replicate `index`; `ModelRng::seed_from_u64` of it replays
    /// that replicate alone.
    pub fn replicate_seed(&self, index: usize) -> u64 {
        derive_seed(self.model.seed, index as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateResult {
    pub index: usize,
    pub seed: u64,
    pub report: ConvergenceReport,
    pub checkpoints: Vec<CheckpointRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    pub spec: ExperimentSpec,
    pub replicates: Vec<ReplicateResult>,
}

pub fn run_single(spec: &ExperimentSpec, index: usize) -> Result<ReplicateResult, ExperimentError> {
    let seed = spec.replicate_seed(index);
    let mut rng = ModelRng::seed_from_u64(seed);
    let tracked: Vec<usize> = (0..spec.tracked).collect();
    let settings = RunSettings {
        epsilon: spec.epsilon,
        n_max: spec.n_max,
        checkpoints: spec.checkpoints.clone(),
    };
    let out = run_replicate(&spec.model, &tracked, &settings, &mut rng)
        .map_err(|source| ExperimentError::Replicate { index, source })?;
    Ok(ReplicateResult {
        index,
        seed,
        report: out.report,
        checkpoints: out.checkpoints,
    })
}

/// Runs every replicate (in parallel with the `parallel` feature). The
/// result is ordered by replicate index and identical for a given master
/// seed regardless of scheduling.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SampleSet, ExperimentError> {
    spec.validate()?;
    #[cfg(feature = "parallel")]
    let results: Vec<Result<ReplicateResult, ExperimentError>> = {
        use rayon::prelude::*;
        (0..spec.replicates).into_par_iter().map(|i| run_single(spec, i)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<ReplicateResult, ExperimentError>> =
        (0..spec.replicates).map(|i| run_single(spec, i)).collect();
    let replicates = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(SampleSet {
        spec: spec.clone(),
        replicates,
    })
}

impl SampleSet {
    /// `M_inf` estimates of tracked ancestor `j`, one per replicate.
    pub fn values(&self, j: usize) -> Vec<f64> {
        self.replicates.iter().map(|r| r.report.outcomes[j].estimate).collect()
    }

    pub fn extinct_fraction(&self, j: usize) -> f64 {
        let n = self.replicates.iter().filter(|r| r.report.outcomes[j].extinct).count();
        n as f64 / self.replicates.len() as f64
    }

    pub fn near_zero_count(&self, j: usize) -> usize {
        self.replicates
            .iter()
            .filter(|r| {
                let o = &r.report.outcomes[j];
                !o.extinct && o.estimate < NEAR_ZERO
            })
            .count()
    }

    pub fn non_converged(&self) -> usize {
        self.replicates.iter().filter(|r| !r.report.converged).count()
    }

    /// `M_n(j)` at checkpoint `step`, one per replicate.
    pub fn checkpoint_values(&self, step: u64, j: usize) -> Vec<f64> {
        let ancestor = j;
        self.replicates
            .iter()
            .filter_map(|r| {
                r.checkpoints
                    .iter()
                    .find(|c| c.step == step && c.ancestor == ancestor)
                    .map(|c| c.marginal)
            })
            .collect()
    }

    /// Per replicate `prod_i M_inf(i)^{k_i}` for exponents `k_0, k_1, ..`.
    pub fn product_values(&self, exponents: &[u32]) -> Vec<f64> {
        self.replicates
            .iter()
            .map(|r| {
                exponents
                    .iter()
                    .enumerate()
                    .map(|(j, &k)| r.report.outcomes[j].estimate.powi(k as i32))
                    .product()
            })
            .collect()
    }

    /// `replicate,seed,j,M_inf,extinct,converged,steps` preceded by `#`
    /// metadata lines.
    pub fn write_csv<W: Write>(&self, metadata: &Metadata, mut out: W) -> io::Result<()> {
        for (key, value) in metadata.lines() {
            writeln!(out, "# {key}: {value}")?;
        }
        writeln!(out, "replicate,seed,j,M_inf,extinct,converged,steps")?;
        for r in &self.replicates {
            for o in &r.report.outcomes {
                writeln!(
                    out,
                    "{},{},{},{:.16e},{},{},{}",
                    r.index,
                    r.seed,
                    o.ancestor + 1,
                    o.estimate,
                    o.extinct,
                    o.converged,
                    r.report.steps
                )?;
            }
        }
        Ok(())
    }

    /// Checkpoint rows `replicate,n,j,M_n,l_n,L_n` preceded by `#` metadata lines.
    pub fn write_trajectories<W: Write>(&self, metadata: &Metadata, mut out: W) -> io::Result<()> {
        for (key, value) in metadata.lines() {
            writeln!(out, "# {key}: {value}")?;
        }
        writeln!(out, "replicate,n,j,M_n,l_n,L_n")?;
        for r in &self.replicates {
            for c in &r.checkpoints {
                writeln!(
                    out,
                    "{},{},{},{:.16e},{:.16e},{:.16e}",
                    r.index,
                    c.step,
                    c.ancestor + 1,
                    c.marginal,
                    c.lower,
                    c.upper
                )?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSummary {
    pub order: u32,
    pub estimate: Estimate,
    pub bootstrap_low: f64,
    pub bootstrap_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AncestorSummary {
    /// 1-based label.
    pub ancestor: usize,
    pub moments: Vec<MomentSummary>,
    pub zero_fraction: f64,
    pub near_zero: usize,
    pub ks_to_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSummary {
    pub i: usize,
    pub j: usize,
    pub covariance: f64,
    pub correlation: f64,
    pub cross_moment: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub replicates: usize,
    pub non_converged: usize,
    pub level: f64,
    pub ancestors: Vec<AncestorSummary>,
    pub pairs: Vec<PairSummary>,
}

impl Summary {
    pub fn mean(&self, ancestor: usize) -> f64 {
        self.ancestors[ancestor].moments[0].estimate.value
    }
}

/// Confidence level used by every simulation gate.
pub const SUMMARY_LEVEL: f64 = 0.99;
const BOOTSTRAP_RESAMPLES: usize = 200;

pub fn summarize(samples: &SampleSet, k_max: u32) -> Summary {
    let law = MixtureLaw::new(samples.spec.model.parent_count as u32).expect("validated parent count");
    let mut rng = ModelRng::seed_from_u64(samples.spec.model.seed ^ 0x5EED_B007);
    let columns: Vec<Vec<f64>> = (0..samples.spec.tracked).map(|j| samples.values(j)).collect();
    let ancestors = columns
        .iter()
        .enumerate()
        .map(|(j, xs)| {
            let moments = (1..=k_max)
                .map(|k| {
                    let powered: Vec<f64> = xs.iter().map(|x| x.powi(k as i32)).collect();
                    let (bootstrap_low, bootstrap_high) =
                        bootstrap_mean_ci(&powered, SUMMARY_LEVEL, BOOTSTRAP_RESAMPLES, &mut rng);
                    MomentSummary {
                        order: k,
                        estimate: Estimate::of_mean(&powered, SUMMARY_LEVEL),
                        bootstrap_low,
                        bootstrap_high,
                    }
                })
                .collect();
            AncestorSummary {
                ancestor: j + 1,
                moments,
                zero_fraction: samples.extinct_fraction(j),
                near_zero: samples.near_zero_count(j),
                ks_to_limit: law.ks_distance(xs).unwrap_or(f64::NAN),
            }
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 0..columns.len() {
        for j in i + 1..columns.len() {
            let (a, b) = (&columns[i], &columns[j]);
            let (ma, mb) = (stats::mean(a), stats::mean(b));
            let n = a.len() as f64;
            let covariance = if a.len() > 1 {
                a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let denom = (stats::variance(a) * stats::variance(b)).sqrt();
            let products: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
            pairs.push(PairSummary {
                i: i + 1,
                j: j + 1,
                covariance,
                correlation: if denom > 0.0 { covariance / denom } else { 0.0 },
                cross_moment: Estimate::of_mean(&products, SUMMARY_LEVEL),
            });
        }
    }
    Summary {
        replicates: samples.replicates.len(),
        non_converged: samples.non_converged(),
        level: SUMMARY_LEVEL,
        ancestors,
        pairs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerRow {
    pub config: String,
    pub monte_carlo: Estimate,
    /// `None` when `N <= k`.
    pub exact: Option<f64>,
    pub limit: f64,
    /// CI excludes the exact value.
    pub flagged: bool,
    pub p_value: Option<f64>,
}

/// Monte Carlo vs exact finite-`N` vs limit, for every joint moment with
/// total order up to `k_max` over at most `tracked` ancestors.
pub fn compare_layers(samples: &SampleSet, k_max: u32) -> Result<Vec<LayerRow>, ChainError> {
    let n = samples.spec.model.population_size as u64;
    let m = samples.spec.model.parent_count as u32;
    let mut rows = Vec::new();
    for k in 1..=k_max {
        for config in partitions(k) {
            if config.size() > samples.spec.tracked {
                continue;
            }
            let mc = Estimate::of_mean(&samples.product_values(config.parts()), SUMMARY_LEVEL);
            let exact = if n > u64::from(k) {
                Some(exact::joint_moment(n, m, config.parts())?)
            } else {
                None
            };
            rows.push(LayerRow {
                config: config.to_string(),
                flagged: exact.is_some_and(|e| !mc.covers(e)),
                p_value: exact.map(|e| mc.p_value(e)),
                monte_carlo: mc,
                exact,
                limit: num_traits::ToPrimitive::to_f64(&exact::k_closed_form(&config, m)).unwrap_or(f64::NAN),
            });
        }
    }
    Ok(rows)
}

/// Runs `spec` then compares layers.
pub fn compare_layers_for(spec: &ExperimentSpec, k_max: u32) -> Result<Vec<LayerRow>, Box<dyn std::error::Error>> {
    let samples = run_experiment(spec)?;
    Ok(compare_layers(&samples, k_max)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleRow {
    pub step: u64,
    pub mean: Estimate,
    pub covers_one: bool,
    pub p_value: f64,
    /// Two-sample KS between `M_n` of the first two tracked ancestors.
    pub exchangeability: Option<KsTest>,
}

/// Mean of `M_n(1)` at each checkpoint against 1, and `M_n(1)` vs `M_n(2)`.
pub fn martingale_check(samples: &SampleSet, level: f64) -> Vec<MartingaleRow> {
    let mut steps = samples.spec.checkpoints.clone();
    steps.sort_unstable();
    steps.dedup();
    steps
        .into_iter()
        .map(|step| {
            let first = samples.checkpoint_values(step, 0);
            let mean = Estimate::of_mean(&first, level);
            let exchangeability = (samples.spec.tracked >= 2)
                .then(|| stats::ks_two_sample(&first, &samples.checkpoint_values(step, 1)));
            MartingaleRow {
                step,
                covers_one: mean.covers(1.0),
                p_value: mean.p_value(1.0),
                mean,
                exchangeability,
            }
        })
        .collect()
}

/// Label for the `{k_1,..}` configuration used by [`compare_layers`].
pub fn layer_label(exponents: &[u32]) -> String {
    Configuration::new(exponents.to_vec()).to_string()
}
