//! The lumped k-lineage chain on configurations, built exactly.
//!
//! One backward step of `k` lineages under the distinct-tuple model: the
//! child site is uniform over `N` sites. If it is unoccupied nothing moves.
//! Otherwise its `c` lineages each pick one of the `m` parent slots
//! uniformly; the parents are a uniform set of `m` distinct sites among the
//! other `N - 1`. Every outcome is enumerated and folded into its
//! destination configuration, so the entries are exact rationals.

use std::collections::{HashMap, VecDeque};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use super::partition::{partitions, Configuration};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("the exact layer needs N > k (N = {population_size}, k = {order})")]
    UnsupportedRegime { population_size: u64, order: u32 },
    #[error("order k must be at least 1")]
    EmptyOrder,
    #[error("parent count must be at least 2, got {0}")]
    TooFewParents(u32),
    #[error("distinct parents need N >= m + 1 (N = {population_size}, m = {parent_count})")]
    PopulationTooSmall { population_size: u64, parent_count: u32 },
    #[error("m^k does not fit the split counter (m = {parent_count}, k = {order})")]
    SplitOverflow { parent_count: u32, order: u32 },
    #[error("the chain is not irreducible")]
    Reducible,
    #[error("{states} states exceed the limit of {limit} for this method")]
    TooManyStates { states: usize, limit: usize },
}

#[derive(Debug, Clone)]
pub struct LumpedChain {
    population_size: u64,
    parent_count: u32,
    order: u32,
    states: Vec<Configuration>,
    index: HashMap<Configuration, usize>,
    matrix: Vec<Vec<BigRational>>,
    float: Vec<Vec<f64>>,
}

fn binomial(n: u64, r: u64) -> BigUint {
    if r > n {
        return BigUint::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigUint::one();
    for i in 0..r {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Calls `visit(split, multinomial count)` for every way of putting `total`
/// labelled lineages into `slots` labelled slots.
fn for_each_split(total: u32, slots: usize, visit: &mut impl FnMut(&[u32], u128)) {
    fn rec(
        remaining: u32,
        slot: usize,
        split: &mut Vec<u32>,
        coeff: u128,
        visit: &mut impl FnMut(&[u32], u128),
    ) {
        let slots = split.len();
        if slot + 1 == slots {
            split[slot] = remaining;
            visit(split, coeff);
            return;
        }
        // coeff * C(remaining, a) built incrementally
        let mut c = coeff;
        for a in 0..=remaining {
            if a > 0 {
                c = c * u128::from(remaining - a + 1) / u128::from(a);
            }
            split[slot] = a;
            rec(remaining - a, slot + 1, split, c, visit);
        }
    }
    let mut split = vec![0; slots];
    rec(total, 0, &mut split, 1, visit);
}

/// Subsets of `0..n` with at most `max_len` elements.
fn subsets(n: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for i in 0..n {
        let grown: Vec<Vec<usize>> = out
            .iter()
            .filter(|s| s.len() < max_len)
            .map(|s| {
                let mut t = s.clone();
                t.push(i);
                t
            })
            .collect();
        out.extend(grown);
    }
    out
}

pub fn build_transition_matrix(
    population_size: u64,
    parent_count: u32,
    order: u32,
) -> Result<LumpedChain, ChainError> {
    let n = population_size;
    let m = parent_count;
    if order == 0 {
        return Err(ChainError::EmptyOrder);
    }
    if m < 2 {
        return Err(ChainError::TooFewParents(m));
    }
    if n <= u64::from(order) {
        return Err(ChainError::UnsupportedRegime {
            population_size: n,
            order,
        });
    }
    if n < u64::from(m) + 1 {
        return Err(ChainError::PopulationTooSmall {
            population_size: n,
            parent_count: m,
        });
    }
    if f64::from(order) * f64::from(m).log2() >= 120.0 {
        return Err(ChainError::SplitOverflow {
            parent_count: m,
            order,
        });
    }

    let states = partitions(order);
    let index: HashMap<Configuration, usize> =
        states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let parent_sets = BigInt::from(binomial(n - 1, u64::from(m)));

    let mut matrix = Vec::with_capacity(states.len());
    for state in &states {
        let parts = state.parts();
        let l = parts.len();
        let fresh = n - l as u64;
        let mut row = vec![BigRational::zero(); states.len()];
        row[index[state]] += BigRational::new(BigInt::from(fresh), BigInt::from(n));

        for (child, &c) in parts.iter().enumerate() {
            let rest: Vec<u32> = parts
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != child)
                .map(|(_, &p)| p)
                .collect();
            let denom = BigInt::from(n) * &parent_sets * BigInt::from(m).pow(c);
            for chosen in subsets(rest.len(), m as usize) {
                let s = chosen.len();
                let fresh_slots = m as usize - s;
                if (fresh_slots as u64) > fresh {
                    continue;
                }
                let set_count = BigInt::from(binomial(fresh, fresh_slots as u64));
                let mut counts: HashMap<usize, u128> = HashMap::new();
                for_each_split(c, m as usize, &mut |split, mult| {
                    let mut next = rest.clone();
                    for (slot, &site) in chosen.iter().enumerate() {
                        next[site] += split[slot];
                    }
                    next.extend(split[s..].iter().copied().filter(|&a| a > 0));
                    let dest = index[&Configuration::new(next)];
                    *counts.entry(dest).or_default() += mult;
                });
                for (dest, count) in counts {
                    row[dest] += BigRational::new(&set_count * BigInt::from(count), denom.clone());
                }
            }
        }
        matrix.push(row);
    }
    let float = matrix
        .iter()
        .map(|row| row.iter().map(|q| q.to_f64().unwrap_or(f64::NAN)).collect())
        .collect();
    Ok(LumpedChain {
        population_size: n,
        parent_count: m,
        order,
        states,
        index,
        matrix,
        float,
    })
}

impl LumpedChain {
    pub fn population_size(&self) -> u64 {
        self.population_size
    }

    pub fn parent_count(&self) -> u32 {
        self.parent_count
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn states(&self) -> &[Configuration] {
        &self.states
    }

    pub fn index_of(&self, config: &Configuration) -> Option<usize> {
        self.index.get(config).copied()
    }

    pub fn matrix(&self) -> &[Vec<BigRational>] {
        &self.matrix
    }

    pub fn float_matrix(&self) -> &[Vec<f64>] {
        &self.float
    }

    pub fn probability(&self, from: &Configuration, to: &Configuration) -> Option<&BigRational> {
        Some(&self.matrix[self.index_of(from)?][self.index_of(to)?])
    }

    /// Every state reaches every other along positive entries.
    pub fn is_irreducible(&self) -> bool {
        let n = self.states.len();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(u) = queue.pop_front() {
                for v in 0..n {
                    let positive = if forward {
                        !self.matrix[u][v].is_zero()
                    } else {
                        !self.matrix[v][u].is_zero()
                    };
                    if positive && !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }
}
