//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Pixels cross the boundary as canvas RGBA bytes. The plain functions do
//! the work and are usable natively; the `#[wasm_bindgen]` wrappers only
//! turn error strings into exceptions.

use serde_json::json;
use vqe_core::degrade::{run_recipe, sample_recipe, DegradationProfile, DegradationRecipe};
use vqe_core::eval::{bt_fit, BtOptions, PairCounts};
use vqe_core::lut::{apply_lut, blend_bank, Lut3D, LutBank};
use vqe_core::media::{Clip, Frame};
use vqe_core::rng::SeededRng;
use wasm_bindgen::prelude::*;

/// Lattice size of the built-in looks.
pub const DEMO_LUT_SIZE: usize = 17;

/// Names of the built-in looks, in bank order.
pub const LOOKS: [&str; 5] = ["identity", "warm", "cool", "contrast", "lift"];

pub fn rgba_to_frame(rgba: &[u8], width: usize, height: usize) -> Result<Frame, String> {
    if width == 0 || height == 0 || rgba.len() != width * height * 4 {
        return Err(format!("expected {}x{} RGBA ({} bytes), got {} bytes", width, height, width * height * 4, rgba.len()));
    }
    let data = rgba
        .chunks_exact(4)
        .flat_map(|p| [p[0], p[1], p[2]])
        .map(|v| v as f64 / 255.0)
        .collect();
    Frame::new(width, height, data).map_err(|e| e.to_string())
}

pub fn frame_to_rgba(frame: &Frame) -> Vec<u8> {
    let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    frame.pixels().flat_map(|[r, g, b]| [q(r), q(g), q(b), 255]).collect()
}

fn profile(name: &str) -> Result<DegradationProfile, String> {
    DegradationProfile::preset(name).ok_or_else(|| format!("unknown profile {name:?} (expected default or mild)"))
}

/// The recipe `degrade` would sample for this seed and profile.
pub fn degrade_recipe(seed: u32, profile_name: &str) -> Result<DegradationRecipe, String> {
    let mut rng = SeededRng::new(seed as u64);
    sample_recipe(&mut rng, &profile(profile_name)?).map_err(|e| e.to_string())
}

pub fn degrade_rgba(rgba: &[u8], width: usize, height: usize, seed: u32, profile_name: &str) -> Result<Vec<u8>, String> {
    let frame = rgba_to_frame(rgba, width, height)?;
    let recipe = degrade_recipe(seed, profile_name)?;
    let clip = Clip::new("preview", 30.0, vec![frame]).map_err(|e| e.to_string())?;
    let out = run_recipe(&clip, &recipe).map_err(|e| e.to_string())?;
    Ok(frame_to_rgba(&out.frames()[0]))
}

fn luma(rgb: [f64; 3]) -> f64 {
    0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]
}

/// Five hand-made looks standing in for a trained bank.
pub fn demo_bank() -> LutBank {
    let n = DEMO_LUT_SIZE;
    let looks = vec![
        Lut3D::identity(n),
        Lut3D::from_fn(n, |[r, g, b]| [(r * 1.08 + 0.02).min(1.0), g, b * 0.88]),
        Lut3D::from_fn(n, |[r, g, b]| [r * 0.9, g, (b * 1.1 + 0.02).min(1.0)]),
        Lut3D::from_fn(n, |c| {
            let s = |v: f64| v * v * (3.0 - 2.0 * v);
            [s(c[0]), s(c[1]), s(c[2])]
        }),
        Lut3D::from_fn(n, |c| {
            let y = luma(c);
            let gain = 0.25 * (1.0 - y);
            c.map(|v| (v + gain * (1.0 - v)).min(1.0))
        }),
    ];
    LutBank::new(looks).expect("looks share a lattice size")
}

/// Non-negative weights scaled to sum to one.
pub fn normalize_weights(weights: &[f64]) -> Result<Vec<f64>, String> {
    if weights.len() != LOOKS.len() {
        return Err(format!("expected {} weights, got {}", LOOKS.len(), weights.len()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err("weights must be finite and non-negative".into());
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err("at least one weight must be positive".into());
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

pub fn fuse_rgba(rgba: &[u8], width: usize, height: usize, weights: &[f64]) -> Result<Vec<u8>, String> {
    let frame = rgba_to_frame(rgba, width, height)?;
    let w = normalize_weights(weights)?;
    let lut = blend_bank(&demo_bank(), &w).map_err(|e| e.to_string())?;
    Ok(frame_to_rgba(&apply_lut(&lut, &frame)))
}

/// Fits pair counts (`[{a, b, wins_ab, wins_ba, ties}, ...]`) and returns
/// `{entries, log_likelihood, iterations, converged}`.
pub fn bt_fit_counts(counts_json: &str) -> Result<String, String> {
    let tallies = format!("{{\"tallies\":{counts_json}}}");
    let counts: PairCounts = serde_json::from_str(&tallies).map_err(|e| format!("counts: {e}"))?;
    let fit = bt_fit(&counts, BtOptions::default()).map_err(|e| e.to_string())?;
    Ok(json!({
        "entries": fit.ranking.entries,
        "log_likelihood": fit.log_likelihood,
        "iterations": fit.iterations,
        "converged": fit.converged,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn look_names() -> String {
    LOOKS.join(",")
}

#[wasm_bindgen]
pub fn degrade_preview(rgba: &[u8], width: u32, height: u32, seed: u32, profile: &str) -> Result<Vec<u8>, JsValue> {
    degrade_rgba(rgba, width as usize, height as usize, seed, profile).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn degrade_recipe_json(seed: u32, profile: &str) -> Result<String, JsValue> {
    degrade_recipe(seed, profile).map(|r| r.to_json()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn lut_fusion_preview(rgba: &[u8], width: u32, height: u32, weights: &[f64]) -> Result<Vec<u8>, JsValue> {
    fuse_rgba(rgba, width as usize, height as usize, weights).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn bt_fit_json(counts_json: &str) -> Result<String, JsValue> {
    bt_fit_counts(counts_json).map_err(|e| JsValue::from_str(&e))
}
