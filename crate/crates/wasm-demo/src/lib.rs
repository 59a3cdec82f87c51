//! Browser bindings for the ancestor-weight toolkit.

use moran_weights::export::{exact_document, limit_document, ExactRequest};
use moran_weights::limit_law::MixtureLaw;
use moran_weights::model::{ModelConfig, SamplingVariant};
use moran_weights::montecarlo::{run_experiment, summarize, ExperimentSpec};
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_REPLICATES: usize = 5000;
const MAX_POPULATION: usize = 200;

/// Limit-law curve and moments as a JSON string.
#[wasm_bindgen]
pub fn limit_curve(parents: u32, t_max: f64, points: usize) -> Result<String, JsError> {
    let law = MixtureLaw::new(parents)?;
    if !(t_max > 0.0) || points < 2 {
        return Err(JsError::new("t_max must be positive and points at least 2"));
    }
    Ok(limit_document(&law, t_max, points, 6).to_string())
}

/// Stationary law of the lumped chain for `order` sampled individuals.
#[wasm_bindgen]
pub fn exact_law(pop_size: u32, order: u32, parents: u32) -> Result<String, JsError> {
    let req = ExactRequest {
        population_size: u64::from(pop_size),
        order,
        parent_count: parents,
        rational: false,
        tree_theorem: false,
    };
    Ok(exact_document(&req)?.to_string())
}

/// Simulated limiting weights of one ancestor, with the fitted summary.
#[wasm_bindgen]
pub fn simulate(pop_size: usize, parents: usize, replicates: usize, seed: u64, independent: bool) -> Result<String, JsError> {
    if pop_size > MAX_POPULATION || replicates > MAX_REPLICATES {
        return Err(JsError::new(&format!(
            "keep N <= {MAX_POPULATION} and replicates <= {MAX_REPLICATES} in the browser"
        )));
    }
    let variant = if independent {
        SamplingVariant::IndependentTuple
    } else {
        SamplingVariant::DistinctTuple
    };
    let model = ModelConfig {
        population_size: pop_size,
        parent_count: parents,
        variant,
        seed,
    };
    model.validate()?;
    let spec = ExperimentSpec::new(model, replicates, 1);
    let samples = run_experiment(&spec)?;
    let summary = summarize(&samples, 2);
    let a = &summary.ancestors[0];
    Ok(json!({
        "values": samples.values(0),
        "mean": a.moments[0].estimate,
        "second_moment": a.moments[1].estimate,
        "zero_fraction": a.zero_fraction,
        "ks_to_limit": a.ks_to_limit,
        "non_converged": summary.non_converged,
    })
    .to_string())
}
