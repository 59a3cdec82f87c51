//! Ancestor weight columns `A_n(., j)` driven by the event stream.
//!
//! Only the tracked columns are stored. Each event rewrites one entry per
//! column, so a step costs `O(m * tracked)`. Weights are dyadic rationals
//! (for m = 2) and stay exact in `f64` until their denominators pass 2^52;
//! a very small weight may underflow to zero, which only makes an almost
//! extinct column look extinct a little sooner.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{fill_event, ModelConfig, ModelError, ReproductionEvent};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("ancestor {index} is outside the population of size {population_size}")]
    OutOfRange { index: usize, population_size: usize },
    #[error("ancestor {0} is tracked twice")]
    Duplicate(usize),
    #[error("ancestor {0} is not tracked")]
    Untracked(usize),
    #[error("event for step {event} applied at step {expected}")]
    OutOfSequence { expected: u64, event: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AncestorWeights {
    population_size: usize,
    tracked: Vec<usize>,
    columns: Vec<Vec<f64>>,
    step: u64,
}

/// `l_n(j) = min_i A_n(i, j)` and `L_n(j) = max_i A_n(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadBounds {
    pub lower: f64,
    pub upper: f64,
}

impl SpreadBounds {
    pub fn spread(&self) -> f64 {
        self.upper - self.lower
    }

    /// True when `next` is at least as tight as `self` on both sides.
    pub fn is_refined_by(&self, next: &SpreadBounds) -> bool {
        next.upper <= self.upper && next.lower >= self.lower && next.lower <= next.upper
    }
}

pub fn init_weights(population_size: usize, tracked: &[usize]) -> Result<AncestorWeights, WeightError> {
    let mut seen = vec![false; population_size];
    for &j in tracked {
        if j >= population_size {
            return Err(WeightError::OutOfRange {
                index: j,
                population_size,
            });
        }
        if seen[j] {
            return Err(WeightError::Duplicate(j));
        }
        seen[j] = true;
    }
    let columns = tracked
        .iter()
        .map(|&j| {
            let mut col = vec![0.0; population_size];
            col[j] = 1.0;
            col
        })
        .collect();
    Ok(AncestorWeights {
        population_size,
        tracked: tracked.to_vec(),
        columns,
        step: 0,
    })
}

impl AncestorWeights {
    pub fn population_size(&self) -> usize {
        self.population_size
    }

    pub fn tracked(&self) -> &[usize] {
        &self.tracked
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Column of ancestor `j`, i.e. `A_n(., j)`.
    pub fn column(&self, j: usize) -> Result<&[f64], WeightError> {
        let pos = self.position(j)?;
        Ok(&self.columns[pos])
    }

    fn position(&self, j: usize) -> Result<usize, WeightError> {
        self.tracked
            .iter()
            .position(|&t| t == j)
            .ok_or(WeightError::Untracked(j))
    }

    pub fn apply_event(&mut self, event: &ReproductionEvent) -> Result<(), WeightError> {
        if event.time != self.step {
            return Err(WeightError::OutOfSequence {
                expected: self.step,
                event: event.time,
            });
        }
        for idx in std::iter::once(event.child).chain(event.parents.iter().copied()) {
            if idx >= self.population_size {
                return Err(WeightError::OutOfRange {
                    index: idx,
                    population_size: self.population_size,
                });
            }
        }
        self.apply_unchecked(event.child, &event.parents);
        Ok(())
    }

    /// Parents are a multiset: a repeated slot contributes once per repeat.
    #[inline]
    pub(crate) fn apply_unchecked(&mut self, child: usize, parents: &[usize]) {
        let m = parents.len() as f64;
        for col in &mut self.columns {
            let (mut total, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
            for &p in parents {
                let w = col[p];
                total += w;
                lo = lo.min(w);
                hi = hi.max(w);
            }
            col[child] = (total / m).clamp(lo, hi);
        }
        self.step += 1;
    }

    /// `M_n(j) = sum_i A_n(i, j)`.
    pub fn marginal_weight(&self, j: usize) -> Result<f64, WeightError> {
        Ok(self.column(j)?.iter().sum())
    }

    pub fn marginal_weights(&self) -> Vec<f64> {
        self.columns.iter().map(|c| c.iter().sum()).collect()
    }

    pub fn bounds(&self) -> Vec<SpreadBounds> {
        self.columns.iter().map(|c| column_bounds(c)).collect()
    }

    pub fn is_extinct(&self, j: usize) -> Result<bool, WeightError> {
        Ok(self.column(j)?.iter().all(|&w| w == 0.0))
    }
}

fn column_bounds(col: &[f64]) -> SpreadBounds {
    let (lower, upper) = col
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| (lo.min(w), hi.max(w)));
    SpreadBounds { lower, upper }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncestorOutcome {
    pub ancestor: usize,
    /// `N * (l_n + L_n) / 2`; off from `M_inf` by at most `N * spread / 2`.
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub spread: f64,
    pub extinct: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub outcomes: Vec<AncestorOutcome>,
    pub steps: u64,
    pub converged: bool,
}

/// Row of the trajectory export: `n,j,M_n,l_n,L_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub step: u64,
    pub ancestor: usize,
    pub marginal: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn write_trajectory<W: Write>(records: &[CheckpointRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "n,j,M_n,l_n,L_n")?;
    for r in records {
        writeln!(
            out,
            "{},{},{:.16e},{:.16e},{:.16e}",
            r.step,
            r.ancestor + 1,
            r.marginal,
            r.lower,
            r.upper
        )?;
    }
    Ok(())
}

/// Stopping rule and optional sampling of `M_n` at fixed steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub epsilon: f64,
    pub n_max: u64,
    /// Steps at which `M_n(j)` and the bounds are recorded, independent of
    /// when the spread drops below `epsilon`.
    pub checkpoints: Vec<u64>,
}

impl RunSettings {
    pub fn new(epsilon: f64, n_max: u64) -> Self {
        RunSettings {
            epsilon,
            n_max,
            checkpoints: Vec::new(),
        }
    }

    /// `epsilon = 1e-9`, `n_max = 100 N^2`.
    pub fn defaults_for(population_size: usize) -> Self {
        let n = population_size as u64;
        RunSettings::new(1e-9, 100 * n * n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: ConvergenceReport,
    pub checkpoints: Vec<CheckpointRecord>,
}

pub fn run_to_convergence<R: Rng + ?Sized>(
    config: &ModelConfig,
    tracked: &[usize],
    epsilon: f64,
    n_max: u64,
    rng: &mut R,
) -> Result<ConvergenceReport, WeightError> {
    Ok(run_replicate(config, tracked, &RunSettings::new(epsilon, n_max), rng)?.report)
}

/// Streams events until every tracked spread is below `epsilon` or `n_max`
/// events have been applied, then keeps going until the last checkpoint.
///
/// Spreads are scanned every `N` events; the bounds are monotone so a late
/// scan can only delay detection.
pub fn run_replicate<R: Rng + ?Sized>(
    config: &ModelConfig,
    tracked: &[usize],
    settings: &RunSettings,
    rng: &mut R,
) -> Result<RunOutput, WeightError> {
    config.validate()?;
    let n = config.population_size;
    let mut weights = init_weights(n, tracked)?;
    let mut checkpoints: Vec<u64> = settings.checkpoints.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let last_checkpoint = checkpoints.last().copied().unwrap_or(0);
    let mut next_cp = 0;
    let mut records = Vec::with_capacity(checkpoints.len() * tracked.len());

    let cadence = n as u64;
    let mut bounds = weights.bounds();
    let mut report: Option<ConvergenceReport> = None;
    let mut parents = Vec::with_capacity(config.parent_count);

    loop {
        let step = weights.step();
        let cp_due = next_cp < checkpoints.len() && checkpoints[next_cp] == step;
        if report.is_none() && (step % cadence == 0 || step == settings.n_max) || cp_due {
            let fresh = weights.bounds();
            for (prev, next) in bounds.iter().zip(&fresh) {
                assert!(
                    prev.is_refined_by(next),
                    "spread bounds widened at step {step}: {prev:?} -> {next:?}"
                );
            }
            bounds = fresh;
        }
        if cp_due {
            let marginals = weights.marginal_weights();
            for ((&j, b), mw) in tracked.iter().zip(&bounds).zip(marginals) {
                records.push(CheckpointRecord {
                    step,
                    ancestor: j,
                    marginal: mw,
                    lower: b.lower,
                    upper: b.upper,
                });
            }
            next_cp += 1;
        }
        if report.is_none() {
            let done = bounds.iter().all(|b| b.spread() < settings.epsilon);
            if done || step >= settings.n_max {
                report = Some(make_report(&weights, &bounds, settings.epsilon, n));
            }
        }
        if report.is_some() && step >= last_checkpoint {
            break;
        }
        let child = fill_event(config, rng, &mut parents);
        weights.apply_unchecked(child, &parents);
    }
    Ok(RunOutput {
        report: report.expect("loop exits only with a report"),
        checkpoints: records,
    })
}

fn make_report(weights: &AncestorWeights, bounds: &[SpreadBounds], epsilon: f64, n: usize) -> ConvergenceReport {
    let outcomes: Vec<AncestorOutcome> = weights
        .tracked
        .iter()
        .zip(&weights.columns)
        .zip(bounds)
        .map(|((&j, col), b)| {
            let extinct = b.upper == 0.0 && col.iter().all(|&w| w == 0.0);
            let spread = b.spread();
            AncestorOutcome {
                ancestor: j,
                estimate: if extinct { 0.0 } else { n as f64 * (b.lower + b.upper) / 2.0 },
                lower: b.lower,
                upper: b.upper,
                spread,
                extinct,
                converged: spread < epsilon,
            }
        })
        .collect();
    let converged = outcomes.iter().all(|o| o.converged);
    ConvergenceReport {
        outcomes,
        steps: weights.step,
        converged,
    }
}
