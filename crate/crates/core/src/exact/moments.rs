//! From the configuration law to joint moments of the stationary weights,
//! and the large-`N` coefficients `K`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::chain::ChainError;
use super::partition::{partitions, Configuration};
use super::stationary::{solve_chain, Arithmetic, StationaryResult};

fn int(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn factorial(n: u32) -> BigInt {
    (1..=u64::from(n)).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

fn binomial(n: u32, r: u32) -> BigInt {
    factorial(n) / (factorial(r) * factorial(n - r))
}

/// `N (N - 1) ... (N - l + 1)`: ways to place the `l` blocks on sites.
pub fn falling_factorial(population_size: u64, l: usize) -> BigInt {
    (0..l as u64).fold(BigInt::one(), |acc, i| acc * BigInt::from(population_size - i))
}

/// Set partitions of `k` labelled lineages with block sizes `{k_1..k_l}`:
/// `k! / (prod_i k_i! prod_r c_r!)`, `c_r` counting blocks of size `r`.
pub fn label_arrangements(config: &Configuration) -> BigInt {
    let mut denom = BigInt::one();
    let parts = config.parts();
    let mut i = 0;
    while i < parts.len() {
        let mut j = i;
        while j < parts.len() && parts[j] == parts[i] {
            denom *= factorial(parts[j]);
            j += 1;
        }
        denom *= factorial((j - i) as u32);
        i = j;
    }
    factorial(config.order()) / denom
}

/// Vectors of `I^k` sharing the configuration.
pub fn vectors_per_configuration(config: &Configuration, population_size: u64) -> BigInt {
    falling_factorial(population_size, config.size()) * label_arrangements(config)
}

/// Probability of one particular vector `y` with configuration `config`:
/// `nu({x})` spread evenly over the vectors sharing it.
pub fn lift_to_vector(nu_config: &BigRational, config: &Configuration, population_size: u64) -> BigRational {
    nu_config / BigRational::from_integer(vectors_per_configuration(config, population_size))
}

pub fn lift_to_vector_f64(nu_config: f64, config: &Configuration, population_size: u64) -> f64 {
    let arrangements = label_arrangements(config).to_f64().unwrap_or(f64::NAN);
    (0..config.size() as u64).fold(nu_config / arrangements, |acc, i| acc / (population_size - i) as f64)
}

/// `E[prod_i M_inf(i)^{k_i}] = N^k nu(1..1, 2..2, .., l..l)` read off a solved chain.
pub fn moment_from_exact(config: &Configuration, result: &StationaryResult, population_size: u64) -> Option<BigRational> {
    let nu = result.exact_probability(config)?;
    let scale = int(population_size).pow(config.order() as i32);
    Some(lift_to_vector(nu, config, population_size) * scale)
}

pub fn moment_from_f64(config: &Configuration, result: &StationaryResult, population_size: u64) -> Option<f64> {
    let nu = result.probability(config)?;
    let scale = (population_size as f64).powi(config.order() as i32);
    Some(lift_to_vector_f64(nu, config, population_size) * scale)
}

/// Exact joint moment of `(M_inf(1), .., M_inf(l))` with the given exponents.
pub fn joint_moment_exact(
    population_size: u64,
    parent_count: u32,
    exponents: &[u32],
) -> Result<BigRational, ChainError> {
    let config = Configuration::new(exponents.to_vec());
    if config.order() == 0 {
        return Ok(BigRational::one());
    }
    let (_, result) = solve_chain(population_size, parent_count, config.order(), Arithmetic::Exact)?;
    Ok(moment_from_exact(&config, &result, population_size).expect("exact solve"))
}

pub fn joint_moment(population_size: u64, parent_count: u32, exponents: &[u32]) -> Result<f64, ChainError> {
    let config = Configuration::new(exponents.to_vec());
    if config.order() == 0 {
        return Ok(1.0);
    }
    let (_, result) = solve_chain(population_size, parent_count, config.order(), Arithmetic::Auto)?;
    Ok(moment_from_f64(&config, &result, population_size).expect("configuration in state space"))
}

/// `K({k_1..k_l}) = prod_i k_i! (m / (m - 1))^(k_i - 1)`.
///
/// For `m = 2` this is `prod_i 2^(k_i - 1) k_i!`.
pub fn k_closed_form(config: &Configuration, parent_count: u32) -> BigRational {
    let ratio = BigRational::new(BigInt::from(parent_count), BigInt::from(parent_count - 1));
    config
        .parts()
        .iter()
        .map(|&k| BigRational::from_integer(factorial(k)) * ratio.pow(k as i32 - 1))
        .product()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionCheck {
    pub config: String,
    pub lhs: String,
    pub rhs: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionReport {
    pub parent_count: u32,
    pub k_max: u32,
    pub checked: Vec<RecursionCheck>,
    /// `{1,..,1}` for each `k`: the bracket vanishes there.
    pub excluded: Vec<String>,
}

impl RecursionReport {
    pub fn violations(&self) -> impl Iterator<Item = &RecursionCheck> {
        self.checked.iter().filter(|c| !c.holds)
    }

    pub fn passed(&self) -> bool {
        self.violations().next().is_none()
    }
}

/// Both sides of the first-order balance for `K` at configuration `config`:
///
/// `K(x) [l - m sum_mu m^-k_mu] = m sum_mu sum_{i=1}^{k_mu - 1} m^-i C(k_mu, i) K(x with k_mu split into k_mu - i, i)`
pub fn k_recursion_sides(
    config: &Configuration,
    parent_count: u32,
    k: impl Fn(&Configuration) -> BigRational,
) -> (BigRational, BigRational) {
    let m = BigRational::from_integer(BigInt::from(parent_count));
    let inv_m = m.recip();
    let parts = config.parts();
    let bracket = parts
        .iter()
        .fold(int(parts.len() as u64), |acc, &kmu| acc - &m * inv_m.pow(kmu as i32));
    let lhs = k(config) * bracket;
    let mut rhs = BigRational::zero();
    for (mu, &kmu) in parts.iter().enumerate() {
        for i in 1..kmu {
            let mut split = parts.to_vec();
            split[mu] = kmu - i;
            split.push(i);
            let term = inv_m.pow(i as i32) * BigRational::from_integer(binomial(kmu, i)) * k(&Configuration::new(split));
            rhs += term;
        }
    }
    (lhs, m * rhs)
}

/// Checks the closed form against the recursion for every partition of
/// every `k <= k_max` other than `{1,..,1}`.
pub fn verify_k_recursion_for(k_max: u32, parent_count: u32) -> RecursionReport {
    let mut checked = Vec::new();
    let mut excluded = Vec::new();
    for k in 1..=k_max {
        for config in partitions(k) {
            if config.is_all_ones() {
                excluded.push(config.to_string());
                continue;
            }
            let (lhs, rhs) = k_recursion_sides(&config, parent_count, |c| k_closed_form(c, parent_count));
            checked.push(RecursionCheck {
                config: config.to_string(),
                holds: lhs == rhs,
                lhs: lhs.to_string(),
                rhs: rhs.to_string(),
            });
        }
    }
    RecursionReport {
        parent_count,
        k_max,
        checked,
        excluded,
    }
}

/// The biparental recursion.
pub fn verify_k_recursion(k_max: u32) -> RecursionReport {
    verify_k_recursion_for(k_max, 2)
}

/// Moments and limit coefficients for every configuration of a solved chain.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEntry {
    pub config: Configuration,
    pub exact: Option<BigRational>,
    pub value: f64,
    pub limit: BigRational,
}

pub fn moment_table(result: &StationaryResult, population_size: u64, parent_count: u32) -> Vec<MomentEntry> {
    result
        .states
        .iter()
        .map(|config| {
            let exact = moment_from_exact(config, result, population_size);
            let value = match &exact {
                Some(q) => q.to_f64().unwrap_or(f64::NAN),
                None => moment_from_f64(config, result, population_size).unwrap_or(f64::NAN),
            };
            MomentEntry {
                config: config.clone(),
                exact,
                value,
                limit: k_closed_form(config, parent_count),
            }
        })
        .collect()
}
