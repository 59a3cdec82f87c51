//! Population model and the reproduction event stream (the pedigree).
//!
//! Individuals are indexed `0..N` in memory. File exports shift to `1..=N`.

use std::fmt;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Generator used for every stochastic component.
pub type ModelRng = ChaCha8Rng;

/// Recorded in output metadata so a run can be reproduced from its seed.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9) seeded with seed_from_u64; \
replicate seeds derived by splitmix64(master, replicate)";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("parent count must be at least 2, got {0}")]
    TooFewParents(usize),
    #[error("distinct sampling needs N >= m + 1 (N = {population_size}, m = {parent_count})")]
    PopulationTooSmall {
        population_size: usize,
        parent_count: usize,
    },
    #[error("population size must be at least 1")]
    EmptyPopulation,
}

/// How the child and its parents are drawn at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingVariant {
    /// Ordered tuple of `m + 1` pairwise distinct individuals, uniform.
    DistinctTuple,
    /// Each of the `m + 1` slots independent and uniform; repeats allowed.
    IndependentTuple,
}

impl fmt::Display for SamplingVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingVariant::DistinctTuple => f.write_str("distinct"),
            SamplingVariant::IndependentTuple => f.write_str("independent"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub population_size: usize,
    pub parent_count: usize,
    pub variant: SamplingVariant,
    pub seed: u64,
}

impl ModelConfig {
    /// Biparental, distinct-tuple model.
    pub fn biparental(population_size: usize, seed: u64) -> Self {
        ModelConfig {
            population_size,
            parent_count: 2,
            variant: SamplingVariant::DistinctTuple,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.parent_count < 2 {
            return Err(ModelError::TooFewParents(self.parent_count));
        }
        if self.population_size == 0 {
            return Err(ModelError::EmptyPopulation);
        }
        if self.variant == SamplingVariant::DistinctTuple
            && self.population_size < self.parent_count + 1
        {
            return Err(ModelError::PopulationTooSmall {
                population_size: self.population_size,
                parent_count: self.parent_count,
            });
        }
        Ok(())
    }

    /// Fresh generator seeded from `self.seed`.
    pub fn rng(&self) -> ModelRng {
        ModelRng::seed_from_u64(self.seed)
    }
}

/// One Moran step: `child` is replaced by an offspring of `parents`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReproductionEvent {
    pub time: u64,
    pub child: usize,
    /// Ordered; for m = 2 the first is the father, the second the mother.
    pub parents: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pedigree {
    pub config: ModelConfig,
    pub events: Vec<ReproductionEvent>,
}

/// Draws the event for step `t`.
///
/// Under [`SamplingVariant::DistinctTuple`] the ordered tuple
/// `(parents.., child)` is uniform over all tuples of pairwise distinct
/// individuals, each with probability `(N - m - 1)! / N!`.
pub fn sample_event<R: Rng + ?Sized>(
    config: &ModelConfig,
    t: u64,
    rng: &mut R,
) -> Result<ReproductionEvent, ModelError> {
    config.validate()?;
    let mut parents = Vec::with_capacity(config.parent_count);
    let child = fill_event(config, rng, &mut parents);
    Ok(ReproductionEvent {
        time: t,
        child,
        parents,
    })
}

/// Allocation-free draw used by the simulation hot loop. Config must be valid.
pub(crate) fn fill_event<R: Rng + ?Sized>(
    config: &ModelConfig,
    rng: &mut R,
    parents: &mut Vec<usize>,
) -> usize {
    let n = config.population_size;
    let m = config.parent_count;
    parents.clear();
    match config.variant {
        SamplingVariant::IndependentTuple => {
            for _ in 0..m {
                parents.push(rng.random_range(0..n));
            }
            rng.random_range(0..n)
        }
        SamplingVariant::DistinctTuple => {
            // sequential rejection gives a uniform ordered tuple
            while parents.len() < m {
                let p = rng.random_range(0..n);
                if !parents.contains(&p) {
                    parents.push(p);
                }
            }
            loop {
                let c = rng.random_range(0..n);
                if !parents.contains(&c) {
                    return c;
                }
            }
        }
    }
}

pub fn generate_pedigree<R: Rng + ?Sized>(
    config: &ModelConfig,
    n_steps: u64,
    rng: &mut R,
) -> Result<Pedigree, ModelError> {
    config.validate()?;
    let events = (0..n_steps)
        .map(|t| {
            let mut parents = Vec::with_capacity(config.parent_count);
            let child = fill_event(config, rng, &mut parents);
            ReproductionEvent {
                time: t,
                child,
                parents,
            }
        })
        .collect();
    Ok(Pedigree {
        config: *config,
        events,
    })
}

impl Pedigree {
    /// Writes `t,child,parent1,...,parentm`, individuals numbered from 1.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (1..=self.config.parent_count)
            .map(|i| format!("parent{i}"))
            .collect();
        writeln!(out, "t,child,{}", header.join(","))?;
        for ev in &self.events {
            write!(out, "{},{}", ev.time, ev.child + 1)?;
            for p in &ev.parents {
                write!(out, ",{}", p + 1)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// SplitMix64 finalizer applied to `master + (replicate + 1) * golden`.
pub fn derive_seed(master: u64, replicate: u64) -> u64 {
    let mut z = master.wrapping_add(replicate.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
