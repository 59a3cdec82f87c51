//! Invariant suites cross-checking the exact layer against independent
//! constructions.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::exact::asymptotics::{nu_scaling_check, order_class_report};
use crate::exact::moments::{lift_to_vector_f64, verify_k_recursion, verify_k_recursion_for};
use crate::exact::stationary::{balance_system, solve_chain};
use crate::exact::{
    build_transition_matrix, configuration_of, k_closed_form, linalg, partitions, stationary_linear, stationary_power,
    stationary_tree_theorem, Arithmetic, ChainError, Configuration,
};
use crate::limit_law::MixtureLaw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Recursion,
    Tree,
    Asymptotics,
    Lumping,
    Limit,
}

impl Suite {
    pub const EACH: [Suite; 5] = [Suite::Recursion, Suite::Tree, Suite::Asymptotics, Suite::Lumping, Suite::Limit];

    pub fn name(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Recursion => "recursion",
            Suite::Tree => "tree",
            Suite::Asymptotics => "asymptotics",
            Suite::Lumping => "lumping",
            Suite::Limit => "limit",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownSuite(pub String);

impl fmt::Display for UnknownSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown suite '{}' (expected all, recursion, tree, asymptotics, lumping or limit)",
            self.0
        )
    }
}

impl std::error::Error for UnknownSuite {}

impl FromStr for Suite {
    type Err = UnknownSuite;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        std::iter::once(Suite::All)
            .chain(Suite::EACH)
            .find(|suite| suite.name() == s)
            .ok_or_else(|| UnknownSuite(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn failed(name: impl Into<String>, err: impl fmt::Display) -> Self {
        Check::new(name, false, format!("error: {err}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run_suite(suite: Suite) -> Vec<SuiteReport> {
    match suite {
        Suite::All => Suite::EACH.iter().flat_map(|&s| run_suite(s)).collect(),
        Suite::Recursion => vec![recursion_suite()],
        Suite::Tree => vec![tree_suite()],
        Suite::Asymptotics => vec![asymptotics_suite()],
        Suite::Lumping => vec![lumping_suite()],
        Suite::Limit => vec![limit_suite()],
    }
}

fn recursion_suite() -> SuiteReport {
    let mut checks = Vec::new();
    let report = verify_k_recursion(8);
    let bad: Vec<String> = report.violations().map(|v| v.config.clone()).collect();
    checks.push(Check::new(
        "K recursion, m = 2, k <= 8",
        report.passed(),
        format!("{} configurations checked, {} excluded, violations: {:?}", report.checked.len(), report.excluded.len(), bad),
    ));
    for m in 3..=5 {
        let report = verify_k_recursion_for(6, m);
        checks.push(Check::new(
            format!("K recursion, m = {m}, k <= 6"),
            report.passed(),
            format!("{} configurations checked", report.checked.len()),
        ));
    }
    SuiteReport {
        suite: Suite::Recursion,
        checks,
    }
}

/// Agreement tolerance between stationary solvers.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Spanning in-tree weights by listing every map from non-root states to a
/// successor and keeping the acyclic ones. Exponential; meant for a handful
/// of states.
pub fn tree_weights_by_enumeration(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    (0..n)
        .map(|root| {
            let others: Vec<usize> = (0..n).filter(|&s| s != root).collect();
            let mut choice = vec![0usize; others.len()];
            let mut total = 0.0;
            loop {
                let next = |s: usize| -> usize {
                    let i = others.iter().position(|&o| o == s).expect("non-root");
                    let c = choice[i];
                    if c >= s {
                        c + 1
                    } else {
                        c
                    }
                };
                let rooted = others.iter().all(|&start| {
                    let mut s = start;
                    for _ in 0..n {
                        if s == root {
                            return true;
                        }
                        s = next(s);
                    }
                    s == root
                });
                if rooted {
                    total += others.iter().map(|&s| p[s][next(s)]).product::<f64>();
                }
                // odometer over n - 1 successor choices per state
                let mut i = 0;
                loop {
                    if i == choice.len() {
                        return total;
                    }
                    choice[i] += 1;
                    if choice[i] < n - 1 {
                        break;
                    }
                    choice[i] = 0;
                    i += 1;
                }
            }
        })
        .collect()
}

fn tree_suite() -> SuiteReport {
    let mut checks = Vec::new();
    for k in 1..=4u32 {
        for n in [6u64, 10, 20] {
            let name = format!("tree = linear = power, N = {n}, k = {k}");
            let outcome = (|| -> Result<(f64, f64), ChainError> {
                let chain = build_transition_matrix(n, 2, k)?;
                let linear = stationary_linear(&chain, Arithmetic::Exact)?.to_f64();
                let tree = stationary_tree_theorem(&chain, Arithmetic::Float)?.to_f64();
                let power = stationary_power(&chain, 1e-15, 2_000_000).to_f64();
                Ok((max_abs_diff(&linear, &tree), max_abs_diff(&linear, &power)))
            })();
            checks.push(match outcome {
                Ok((dt, dp)) => Check::new(
                    name,
                    dt <= SOLVER_TOLERANCE && dp <= SOLVER_TOLERANCE,
                    format!("|tree - linear| = {dt:.3e}, |power - linear| = {dp:.3e}"),
                ),
                Err(e) => Check::failed(name, e),
            });
        }
    }
    for k in 2..=4u32 {
        let name = format!("cofactors = enumerated in-trees, N = 6, k = {k}");
        let outcome = build_transition_matrix(6, 2, k).map(|chain| {
            let p = chain.float_matrix();
            let listed = tree_weights_by_enumeration(p);
            let cofactors: Vec<f64> = crate::exact::stationary::tree_weights(p);
            let scale = listed.iter().cloned().fold(0.0, f64::max);
            max_abs_diff(&listed, &cofactors) / scale
        });
        checks.push(match outcome {
            Ok(d) => Check::new(name, d <= SOLVER_TOLERANCE, format!("relative difference {d:.3e}")),
            Err(e) => Check::failed(name, e),
        });
    }
    SuiteReport {
        suite: Suite::Tree,
        checks,
    }
}

/// Exponent tolerance for the transition order classes.
pub const ORDER_TOLERANCE: f64 = 0.05;
pub const ORDER_GRID: [u64; 5] = [16, 32, 64, 128, 256];

fn asymptotics_suite() -> SuiteReport {
    let mut checks = Vec::new();
    for k in 2..=4u32 {
        let name = format!("order classes, k = {k}, N in 16..256");
        checks.push(match order_class_report(k, 2, &ORDER_GRID, ORDER_TOLERANCE) {
            Ok(r) => {
                let worst: Vec<String> = r
                    .rows
                    .iter()
                    .filter(|row| !row.passed)
                    .map(|row| format!("{}->{}: {:.3}", row.from, row.to, row.exponent))
                    .collect();
                Check::new(
                    name,
                    r.passed(),
                    format!("{} moves fitted, {} structurally zero, failing: {:?}", r.rows.len(), r.structurally_zero, worst),
                )
            }
            Err(e) => Check::failed(name, e),
        });
    }
    for k in 2..=4u32 {
        let name = format!("N^k nu(vector) approaches K, k = {k}");
        checks.push(match nu_scaling_check(&[8, 16, 32, 64], k, 2) {
            Ok(r) => {
                let ok = r.rows.iter().all(|row| row.positive && row.errors_decreasing);
                let detail = r
                    .rows
                    .iter()
                    .map(|row| format!("{}: {:.4} (K = {})", row.config, row.moments.last().copied().unwrap_or(f64::NAN), row.limit))
                    .collect::<Vec<_>>()
                    .join(", ");
                Check::new(name, ok, detail)
            }
            Err(e) => Check::failed(name, e),
        });
    }
    SuiteReport {
        suite: Suite::Asymptotics,
        checks,
    }
}

/// The `k`-lineage chain on `I^k` itself, before lumping.
#[derive(Debug, Clone)]
pub struct VectorChain {
    pub population_size: usize,
    pub parent_count: usize,
    pub order: usize,
    /// State `i` is the base-`N` expansion of `i`, lineage 0 first.
    pub states: Vec<Vec<usize>>,
    pub matrix: Vec<Vec<f64>>,
}

fn ordered_distinct_tuples(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(len);
    fn rec(n: usize, len: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == len {
            out.push(current.clone());
            return;
        }
        for i in 0..n {
            if !current.contains(&i) {
                current.push(i);
                rec(n, len, current, out);
                current.pop();
            }
        }
    }
    rec(n, len, &mut current, &mut out);
    out
}

/// Enumerates every ordered distinct `(child, parent_1..parent_m)` and every
/// slot choice of the lineages sitting on the child.
pub fn build_vector_chain(population_size: usize, parent_count: usize, order: usize) -> Result<VectorChain, ChainError> {
    let (n, m, k) = (population_size, parent_count, order);
    if k == 0 {
        return Err(ChainError::EmptyOrder);
    }
    if m < 2 {
        return Err(ChainError::TooFewParents(m as u32));
    }
    if n <= k {
        return Err(ChainError::UnsupportedRegime {
            population_size: n as u64,
            order: k as u32,
        });
    }
    if n < m + 1 {
        return Err(ChainError::PopulationTooSmall {
            population_size: n as u64,
            parent_count: m as u32,
        });
    }
    let count = n.pow(k as u32);
    let states: Vec<Vec<usize>> = (0..count)
        .map(|mut i| {
            (0..k)
                .map(|_| {
                    let d = i % n;
                    i /= n;
                    d
                })
                .collect()
        })
        .collect();
    let encode = |x: &[usize]| x.iter().rev().fold(0, |acc, &d| acc * n + d);
    let events = ordered_distinct_tuples(n, m + 1);
    let event_weight = 1.0 / events.len() as f64;
    let mut matrix = vec![vec![0.0; count]; count];
    for (from, x) in states.iter().enumerate() {
        for event in &events {
            let child = event[0];
            let movers: Vec<usize> = (0..k).filter(|&i| x[i] == child).collect();
            let choices = m.pow(movers.len() as u32);
            let w = event_weight / choices as f64;
            let mut y = x.clone();
            for mut code in 0..choices {
                for &i in &movers {
                    y[i] = event[1 + code % m];
                    code /= m;
                }
                matrix[from][encode(&y)] += w;
            }
        }
    }
    Ok(VectorChain {
        population_size: n,
        parent_count: m,
        order: k,
        states,
        matrix,
    })
}

impl VectorChain {
    pub fn stationary(&self) -> Option<Vec<f64>> {
        let (a, b) = balance_system(&self.matrix);
        linalg::solve(a, b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LumpingCheck {
    pub population_size: usize,
    pub parent_count: usize,
    pub order: usize,
    pub vector_states: usize,
    /// Largest max-minus-min of per-vector mass within one configuration.
    pub within_spread: f64,
    /// Largest gap between aggregated vector mass and the lumped law.
    pub aggregate_error: f64,
    /// Largest gap between per-vector mass and the lift of the lumped law.
    pub lift_error: f64,
    pub passed: bool,
}

/// Tolerance of the lumping oracle.
pub const LUMPING_TOLERANCE: f64 = 1e-12;

pub fn lumping_check(population_size: usize, parent_count: usize, order: usize) -> Result<LumpingCheck, ChainError> {
    let vector = build_vector_chain(population_size, parent_count, order)?;
    let nu = vector.stationary().ok_or(ChainError::Reducible)?;
    let (_, lumped) = solve_chain(population_size as u64, parent_count as u32, order as u32, Arithmetic::Exact)?;
    let lumped_nu = lumped.to_f64();
    let mut aggregate = vec![0.0; lumped.states.len()];
    let mut low = vec![f64::INFINITY; lumped.states.len()];
    let mut high = vec![f64::NEG_INFINITY; lumped.states.len()];
    let mut lift_error: f64 = 0.0;
    for (y, &p) in vector.states.iter().zip(&nu) {
        let config = configuration_of(y);
        let idx = lumped.states.iter().position(|s| *s == config).expect("every vector has a configuration");
        aggregate[idx] += p;
        low[idx] = low[idx].min(p);
        high[idx] = high[idx].max(p);
        let lifted = lift_to_vector_f64(lumped_nu[idx], &config, population_size as u64);
        lift_error = lift_error.max((p - lifted).abs());
    }
    let within_spread = low.iter().zip(&high).map(|(l, h)| h - l).fold(0.0, f64::max);
    let aggregate_error = max_abs_diff(&aggregate, &lumped_nu);
    Ok(LumpingCheck {
        population_size,
        parent_count,
        order,
        vector_states: vector.states.len(),
        within_spread,
        aggregate_error,
        lift_error,
        passed: within_spread <= LUMPING_TOLERANCE
            && aggregate_error <= LUMPING_TOLERANCE
            && lift_error <= LUMPING_TOLERANCE,
    })
}

/// `(k, N, m)` cases of the lumping suite.
pub const LUMPING_CASES: [(usize, usize, usize); 7] =
    [(2, 3, 2), (2, 4, 2), (2, 5, 2), (3, 4, 2), (3, 5, 2), (3, 6, 2), (2, 5, 3)];

fn lumping_suite() -> SuiteReport {
    let checks = LUMPING_CASES
        .iter()
        .map(|&(k, n, m)| {
            let name = format!("vector chain lumps, k = {k}, N = {n}, m = {m}");
            match lumping_check(n, m, k) {
                Ok(c) => Check::new(
                    name,
                    c.passed,
                    format!(
                        "{} vectors, spread {:.1e}, aggregate {:.1e}, lift {:.1e}",
                        c.vector_states, c.within_spread, c.aggregate_error, c.lift_error
                    ),
                ),
                Err(e) => Check::failed(name, e),
            }
        })
        .collect();
    SuiteReport {
        suite: Suite::Lumping,
        checks,
    }
}

fn limit_suite() -> SuiteReport {
    let mut checks = Vec::new();
    let factorial = |k: u32| (1..=u64::from(k)).map(BigInt::from).product::<BigInt>();
    let law = MixtureLaw::new(2).expect("m = 2");
    let mut table_ok = true;
    let mut table = Vec::new();
    for k in 1..=10u32 {
        let expected = BigRational::from_integer(BigInt::from(2).pow(k - 1) * factorial(k));
        let k_value = k_closed_form(&Configuration::new(vec![k]), 2);
        table_ok &= k_value == expected && law.moment(k) == expected;
        table.push(format!("{k}:{k_value}"));
    }
    checks.push(Check::new("K({k}, 2) = 2^(k-1) k! = E[X^k], k <= 10", table_ok, table.join(" ")));

    let mut product_ok = true;
    for k in 1..=6 {
        for config in partitions(k) {
            for m in 2..=5u32 {
                let l = MixtureLaw::new(m).expect("m >= 2");
                let product = config.parts().iter().map(|&p| l.moment(p)).product::<BigRational>();
                product_ok &= product == k_closed_form(&config, m);
            }
        }
    }
    checks.push(Check::new(
        "K factorises into limit-law moments, k <= 6, m = 2..5",
        product_ok,
        "independent coordinates",
    ));

    let means: Vec<f64> = (2..=6u32)
        .map(|m| MixtureLaw::new(m).expect("m >= 2").moment(1).to_f64().unwrap_or(f64::NAN))
        .collect();
    checks.push(Check::new(
        "unit mean, m = 2..6",
        means.iter().all(|&v| v == 1.0),
        format!("{means:?}"),
    ));
    SuiteReport {
        suite: Suite::Limit,
        checks,
    }
}
