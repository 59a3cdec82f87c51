//! JSON documents shared by the command line tool and the browser demo.
//! Rationals are written as `"p/q"` strings.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;
use serde_json::{json, Value};

use crate::exact::moments::moment_table;
use crate::exact::stationary::stationary_tree_theorem;
use crate::exact::{build_transition_matrix, stationary_linear, Arithmetic, ChainError, Distribution};
use crate::limit_law::MixtureLaw;
use crate::model::RNG_ALGORITHM;
use crate::montecarlo::{LayerRow, MartingaleRow, SampleSet, Summary};

/// Provenance attached to every output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub rng: String,
    pub seed: Option<u64>,
    pub config: Value,
}

impl Metadata {
    pub fn new(seed: Option<u64>, config: Value) -> Self {
        Metadata {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            rng: RNG_ALGORITHM.to_string(),
            seed,
            config,
        }
    }

    /// `(key, value)` pairs for line-oriented headers.
    pub fn lines(&self) -> Vec<(&'static str, String)> {
        vec![
            ("tool", self.tool.clone()),
            ("version", self.version.clone()),
            ("rng", self.rng.clone()),
            ("seed", self.seed.map_or_else(|| "none".to_string(), |s| s.to_string())),
            ("config", self.config.to_string()),
        ]
    }
}

/// Always `p/q`, including integers (`4/1`).
pub fn rational_string(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn parse_rational(text: &str) -> Option<BigRational> {
    let (p, q) = text.split_once('/').unwrap_or((text, "1"));
    let p: BigInt = p.trim().parse().ok()?;
    let q: BigInt = q.trim().parse().ok()?;
    if q == BigInt::from(0) {
        return None;
    }
    Some(BigRational::new(p, q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactRequest {
    pub population_size: u64,
    pub order: u32,
    pub parent_count: u32,
    /// Force rational arithmetic regardless of size.
    pub rational: bool,
    pub tree_theorem: bool,
}

/// Transition matrix, stationary law, moments and `K` table for one
/// `(N, m, k)`.
pub fn exact_document(req: &ExactRequest) -> Result<Value, ChainError> {
    let chain = build_transition_matrix(req.population_size, req.parent_count, req.order)?;
    let arithmetic = if req.rational { Arithmetic::Exact } else { Arithmetic::Auto };
    let result = if req.tree_theorem {
        stationary_tree_theorem(&chain, arithmetic)?
    } else {
        stationary_linear(&chain, arithmetic)?
    };
    let labels: Vec<String> = result.states.iter().map(|s| s.to_string()).collect();
    let exact = result.exact().is_some();
    let matrix: Vec<Value> = if exact {
        chain
            .matrix()
            .iter()
            .map(|row| json!(row.iter().map(rational_string).collect::<Vec<_>>()))
            .collect()
    } else {
        chain.float_matrix().iter().map(|row| json!(row)).collect()
    };
    let floats = result.to_f64();
    let nu: BTreeMap<&str, Value> = match &result.nu {
        Distribution::Exact(v) => labels.iter().map(String::as_str).zip(v.iter().map(|q| json!(rational_string(q)))).collect(),
        Distribution::Float(v) => labels.iter().map(String::as_str).zip(v.iter().map(|x| json!(x))).collect(),
    };
    let nu_float: BTreeMap<&str, f64> = labels.iter().map(String::as_str).zip(floats.iter().copied()).collect();
    let table = moment_table(&result, req.population_size, req.parent_count);
    let moments: BTreeMap<String, Value> = table
        .iter()
        .map(|e| {
            (
                e.config.to_string(),
                json!({
                    "exact": e.exact.as_ref().map(rational_string),
                    "value": e.value,
                    "limit": rational_string(&e.limit),
                }),
            )
        })
        .collect();
    let k_table: BTreeMap<String, String> = table.iter().map(|e| (e.config.to_string(), rational_string(&e.limit))).collect();
    let config = json!({
        "pop_size": req.population_size,
        "order": req.order,
        "parents": req.parent_count,
        "rational": req.rational,
        "tree_theorem": req.tree_theorem,
    });
    Ok(json!({
        "metadata": Metadata::new(None, config),
        "N": req.population_size,
        "m": req.parent_count,
        "k": req.order,
        "method": result.method,
        "arithmetic": if exact { "exact" } else { "float" },
        "states": labels,
        "matrix": matrix,
        "nu": nu,
        "nu_float": nu_float,
        "residual": result.residual,
        "moments": moments,
        "K": k_table,
    }))
}

/// CDF samples on `[0, t_max]` plus exact moments up to `k_max`.
pub fn limit_document(law: &MixtureLaw, t_max: f64, points: usize, k_max: u32) -> Value {
    let steps = points.max(2) - 1;
    let cdf: Vec<[f64; 2]> = (0..=steps)
        .map(|i| {
            let t = t_max * i as f64 / steps as f64;
            [t, law.cdf(t)]
        })
        .collect();
    let moments: BTreeMap<String, String> = (1..=k_max).map(|k| (k.to_string(), rational_string(&law.moment(k)))).collect();
    let config = json!({ "parents": law.parent_count(), "t_max": t_max, "points": points, "k_max": k_max });
    json!({
        "metadata": Metadata::new(None, config),
        "m": law.parent_count(),
        "atom": law.atom_weight(),
        "exponential_mean": law.exponential_mean(),
        "moments": moments,
        "cdf": cdf,
    })
}

/// Simulation summary; `mean_M` is keyed by 1-based ancestor label.
pub fn summary_document(
    samples: &SampleSet,
    summary: &Summary,
    layers: &[LayerRow],
    martingale: &[MartingaleRow],
    metadata: &Metadata,
) -> Value {
    let mean_m: BTreeMap<String, f64> = summary
        .ancestors
        .iter()
        .map(|a| (a.ancestor.to_string(), a.moments[0].estimate.value))
        .collect();
    json!({
        "metadata": metadata,
        "N": samples.spec.model.population_size,
        "m": samples.spec.model.parent_count,
        "variant": samples.spec.model.variant,
        "replicates": summary.replicates,
        "tracked": samples.spec.tracked,
        "epsilon": samples.spec.epsilon,
        "max_steps": samples.spec.n_max,
        "non_converged": summary.non_converged,
        "mean_M": mean_m,
        "level": summary.level,
        "ancestors": summary.ancestors,
        "pairs": summary.pairs,
        "layers": layers,
        "martingale": martingale,
    })
}
