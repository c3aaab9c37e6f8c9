//! Browser bindings for the demo page in `www/`.
//!
//! Each export takes plain values or a JSON string and returns JSON. The
//! logic lives in [`api`] so it can be tested natively.

use wasm_bindgen::prelude::*;

pub mod api;

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

/// RTDS schedule of a small vCPU set. See [`api::GanttSpec`].
#[wasm_bindgen]
pub fn rtds_gantt(spec_json: &str) -> Result<String, JsValue> {
    js(api::rtds_gantt(spec_json))
}

/// PoC campaign at the given contention level, summarized.
#[wasm_bindgen]
pub fn campaign(kappa: f64, seed: u64, repetitions: u32, samples: u32) -> Result<String, JsValue> {
    js(api::campaign(kappa, seed, repetitions, samples))
}

/// Welch t-test of two lists of numbers separated by commas or whitespace.
#[wasm_bindgen]
pub fn welch(a: &str, b: &str) -> Result<String, JsValue> {
    js(api::welch(a, b))
}
