//! Stationary law of the lumped chain, by three independent routes.

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::chain::{ChainError, LumpedChain};
use super::linalg;
use super::partition::Configuration;

/// State count above which the cofactor route is refused.
pub const TREE_THEOREM_MAX_STATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StationaryMethod {
    LinearSolve,
    TreeTheorem,
    PowerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arithmetic {
    Exact,
    Float,
    /// Exact for `k <= 8` and `N <= 200`, floating beyond.
    Auto,
}

impl Arithmetic {
    fn is_exact(self, chain: &LumpedChain) -> bool {
        match self {
            Arithmetic::Exact => true,
            Arithmetic::Float => false,
            Arithmetic::Auto => chain.order() <= 8 && chain.population_size() <= 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Exact(Vec<BigRational>),
    Float(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryResult {
    pub states: Vec<Configuration>,
    pub nu: Distribution,
    pub method: StationaryMethod,
    /// `max_j |(nu P - nu)_j|` evaluated in `f64`.
    pub residual: f64,
}

impl StationaryResult {
    pub fn to_f64(&self) -> Vec<f64> {
        match &self.nu {
            Distribution::Exact(v) => v.iter().map(|q| q.to_f64().unwrap_or(f64::NAN)).collect(),
            Distribution::Float(v) => v.clone(),
        }
    }

    pub fn exact(&self) -> Option<&[BigRational]> {
        match &self.nu {
            Distribution::Exact(v) => Some(v),
            Distribution::Float(_) => None,
        }
    }

    pub fn probability(&self, config: &Configuration) -> Option<f64> {
        let i = self.states.iter().position(|s| s == config)?;
        Some(self.to_f64()[i])
    }

    pub fn exact_probability(&self, config: &Configuration) -> Option<&BigRational> {
        let i = self.states.iter().position(|s| s == config)?;
        self.exact().map(|v| &v[i])
    }
}

fn residual(p: &[Vec<f64>], nu: &[f64]) -> f64 {
    let n = nu.len();
    (0..n)
        .map(|j| {
            let flow: f64 = (0..n).map(|i| nu[i] * p[i][j]).sum();
            (flow - nu[j]).abs()
        })
        .fold(0.0, f64::max)
}

fn exact_residual(p: &[Vec<BigRational>], nu: &[BigRational]) -> BigRational {
    let n = nu.len();
    (0..n)
        .map(|j| {
            let flow: BigRational = (0..n).map(|i| &nu[i] * &p[i][j]).sum();
            (flow - &nu[j]).abs()
        })
        .fold(BigRational::zero(), |a, b| if b > a { b } else { a })
}

/// System `(P^T - I) nu = 0` with the last equation replaced by `sum nu = 1`.
pub(crate) fn balance_system<T: linalg::Scalar>(p: &[Vec<T>]) -> (Vec<Vec<T>>, Vec<T>) {
    let n = p.len();
    let mut a: Vec<Vec<T>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    let v = p[c][r].clone();
                    if r == c {
                        v - T::one()
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    a[n - 1] = vec![T::one(); n];
    let mut b = vec![T::zero(); n];
    b[n - 1] = T::one();
    (a, b)
}

fn finish(chain: &LumpedChain, nu: Distribution, method: StationaryMethod) -> StationaryResult {
    let mut result = StationaryResult {
        states: chain.states().to_vec(),
        nu,
        method,
        residual: 0.0,
    };
    result.residual = match &result.nu {
        Distribution::Exact(v) => exact_residual(chain.matrix(), v).to_f64().unwrap_or(f64::NAN),
        Distribution::Float(v) => residual(chain.float_matrix(), v),
    };
    result
}

pub fn stationary_linear(chain: &LumpedChain, arithmetic: Arithmetic) -> Result<StationaryResult, ChainError> {
    if !chain.is_irreducible() {
        return Err(ChainError::Reducible);
    }
    let nu = if arithmetic.is_exact(chain) {
        let (a, b) = balance_system(chain.matrix());
        Distribution::Exact(linalg::solve(a, b).ok_or(ChainError::Reducible)?)
    } else {
        let (a, b) = balance_system(chain.float_matrix());
        Distribution::Float(linalg::solve(a, b).ok_or(ChainError::Reducible)?)
    };
    Ok(finish(chain, nu, StationaryMethod::LinearSolve))
}

/// Principal minors of `I - P`: by the matrix-tree theorem the minor with
/// row and column `i` removed equals the total weight of spanning trees
/// directed into state `i`.
pub(crate) fn tree_weights<T: linalg::Scalar>(p: &[Vec<T>]) -> Vec<T> {
    let n = p.len();
    if n == 1 {
        return vec![T::one()];
    }
    (0..n)
        .map(|root| {
            let minor: Vec<Vec<T>> = (0..n)
                .filter(|&r| r != root)
                .map(|r| {
                    (0..n)
                        .filter(|&c| c != root)
                        .map(|c| {
                            let v = -p[r][c].clone();
                            if r == c {
                                v + T::one()
                            } else {
                                v
                            }
                        })
                        .collect()
                })
                .collect();
            linalg::determinant(minor)
        })
        .collect()
}

fn normalise<T: linalg::Scalar>(weights: Vec<T>) -> Option<Vec<T>> {
    let total = weights.iter().cloned().fold(T::zero(), |a, b| a + b);
    if total.is_zero() {
        return None;
    }
    Some(weights.into_iter().map(|w| w / total.clone()).collect())
}

pub fn stationary_tree_theorem(
    chain: &LumpedChain,
    arithmetic: Arithmetic,
) -> Result<StationaryResult, ChainError> {
    let states = chain.states().len();
    if states > TREE_THEOREM_MAX_STATES {
        return Err(ChainError::TooManyStates {
            states,
            limit: TREE_THEOREM_MAX_STATES,
        });
    }
    let nu = if arithmetic.is_exact(chain) {
        Distribution::Exact(normalise(tree_weights(chain.matrix())).ok_or(ChainError::Reducible)?)
    } else {
        Distribution::Float(normalise(tree_weights(chain.float_matrix())).ok_or(ChainError::Reducible)?)
    };
    Ok(finish(chain, nu, StationaryMethod::TreeTheorem))
}

/// Iterates `nu <- nu P` from the uniform law until successive iterates
/// differ by less than `tolerance` in sup norm.
pub fn stationary_power(chain: &LumpedChain, tolerance: f64, max_iterations: usize) -> StationaryResult {
    let p = chain.float_matrix();
    let n = p.len();
    let mut nu = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..max_iterations {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, row) in p.iter().enumerate() {
            for (j, &pij) in row.iter().enumerate() {
                next[j] += nu[i] * pij;
            }
        }
        let total: f64 = next.iter().sum();
        let delta = nu
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b / total).abs())
            .fold(0.0, f64::max);
        for (a, b) in nu.iter_mut().zip(&next) {
            *a = b / total;
        }
        if delta < tolerance {
            break;
        }
    }
    finish(chain, Distribution::Float(nu), StationaryMethod::PowerIteration)
}

/// Convenience: exact or floating `nu` for `(N, m, k)` by the linear route.
pub fn solve_chain(
    population_size: u64,
    parent_count: u32,
    order: u32,
    arithmetic: Arithmetic,
) -> Result<(LumpedChain, StationaryResult), ChainError> {
    let chain = super::chain::build_transition_matrix(population_size, parent_count, order)?;
    let result = stationary_linear(&chain, arithmetic)?;
    Ok((chain, result))
}
