//! Browser demo: sWeight and COW weight functions and a weighted toy
//! histogram, exported to JavaScript with wasm-bindgen.
//!
//! Every export returns a flat `Vec<f64>`; the layout is documented on each
//! function. The plain Rust functions of the same name without the `js_`
//! prefix carry the logic and return errors as strings.

use cowlib::cows::{build_cow, CowSpec, VarianceFn};
use cowlib::densities::{bernstein_basis, Density1D, Interval};
use cowlib::sweights::{compute_w_variant_a, extract_sweights, weight_functions, Variant};
use cowlib::toygen::{analysis_model, generate, ToySpec};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn shapes(sig_mean: f64, sig_width: f64, bkg_slope: f64) -> Result<[Density1D; 2], String> {
    let iv = Interval::unit();
    Ok([
        Density1D::normal(sig_mean, sig_width, iv).map_err(err)?,
        Density1D::exponential(bkg_slope, iv).map_err(err)?,
    ])
}

/// sWeight functions on `n_points` grid points of `m ∈ [0, 1]`.
/// Layout: `[m..., g_s..., g_b..., w_s..., w_b...]`, each block `n_points` long.
pub fn sweight_curves(
    sig_mean: f64,
    sig_width: f64,
    bkg_slope: f64,
    z: f64,
    n_points: usize,
) -> Result<Vec<f64>, String> {
    if !(0.0 < z && z < 1.0) {
        return Err("signal fraction must lie in (0, 1)".into());
    }
    let g = shapes(sig_mean, sig_width, bkg_slope)?;
    let wm = compute_w_variant_a(&g, &[z, 1.0 - z], Interval::unit(), 1e-10).map_err(err)?;
    let f = weight_functions(wm, &g).map_err(err)?;
    let grid = Interval::unit().grid(n_points.max(2));
    let mut out: Vec<f64> = grid.clone();
    out.extend(grid.iter().map(|m| g[0].pdf(*m)));
    out.extend(grid.iter().map(|m| g[1].pdf(*m)));
    let w: Vec<Vec<f64>> = grid.iter().map(|m| f.eval(*m)).collect::<Result<_, _>>().map_err(err)?;
    out.extend(w.iter().map(|r| r[0]));
    out.extend(w.iter().map(|r| r[1]));
    Ok(out)
}

/// COW functions for a Gaussian signal plus a Bernstein background of
/// `order`, with `I(m) = 1`. Layout: `[m..., w_sig..., w_b0..., ..., w_b{order}...]`.
pub fn cow_curves(sig_mean: f64, sig_width: f64, order: usize, n_points: usize) -> Result<Vec<f64>, String> {
    if order > 8 {
        return Err("polynomial order above 8 is not supported here".into());
    }
    let iv = Interval::unit();
    let mut basis = vec![Density1D::normal(sig_mean, sig_width, iv).map_err(err)?];
    basis.extend(bernstein_basis(order + 1, iv).map_err(err)?);
    let set = build_cow(CowSpec::new(basis, VarianceFn::Unity, iv), 1e-10).map_err(err)?;
    let grid = iv.grid(n_points.max(2));
    let rows: Vec<Vec<f64>> = grid.iter().map(|m| set.eval(*m)).collect::<Result<_, _>>().map_err(err)?;
    let mut out = grid.clone();
    for k in 0..order + 2 {
        out.extend(rows.iter().map(|r| r[k]));
    }
    Ok(out)
}

/// Generates a two-component toy, extracts variant-B sWeights from a fit
/// in `m` and histograms `t ∈ [0, 3]` with the signal weights.
/// Layout: `[edges (n_bins + 1)..., content..., error..., expected..., n_signal_fit, n_signal_true]`,
/// where `expected` is the true signal count per bin.
pub fn toy_histogram(n_events: usize, z: f64, seed: u64, n_bins: usize) -> Result<Vec<f64>, String> {
    if n_events < 50 || n_events > 200_000 {
        return Err("number of events must lie in [50, 200000]".into());
    }
    if !(0.0 < z && z < 1.0) || n_bins == 0 {
        return Err("need 0 < z < 1 and at least one bin".into());
    }
    let spec = ToySpec::simple(n_events, z, seed);
    let data = generate(&spec).map_err(err)?;
    let res = extract_sweights(&data.m, &analysis_model(&spec).map_err(err)?, Variant::B, true).map_err(err)?;
    let (lo, hi) = spec.shapes.t_range;
    let width = (hi - lo) / n_bins as f64;
    let mut content = vec![0.0; n_bins];
    let mut var = vec![0.0; n_bins];
    for (t, w) in data.t.iter().zip(&res.weights) {
        let b = (((t - lo) / width) as usize).min(n_bins - 1);
        content[b] += w[0];
        var[b] += w[0] * w[0];
    }
    let hs = spec.shapes.signal_t().map_err(err)?;
    let n_true = data.label.iter().filter(|l| **l == 0).count() as f64;
    let edges: Vec<f64> = (0..=n_bins).map(|i| lo + i as f64 * width).collect();
    let expected: Vec<f64> = edges
        .windows(2)
        .map(|e| {
            let steps = 20;
            let h = (e[1] - e[0]) / steps as f64;
            // midpoint rule is ample for a display curve
            n_true * h * (0..steps).map(|k| hs.pdf(e[0] + (k as f64 + 0.5) * h)).sum::<f64>()
        })
        .collect();
    let mut out = edges;
    out.extend(content);
    out.extend(var.into_iter().map(f64::sqrt));
    out.extend(expected);
    out.push(res.refit.params[0]);
    out.push(n_true);
    Ok(out)
}

#[wasm_bindgen]
pub fn js_sweight_curves(sig_mean: f64, sig_width: f64, bkg_slope: f64, z: f64, n_points: usize) -> Result<Vec<f64>, JsError> {
    sweight_curves(sig_mean, sig_width, bkg_slope, z, n_points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn js_cow_curves(sig_mean: f64, sig_width: f64, order: usize, n_points: usize) -> Result<Vec<f64>, JsError> {
    cow_curves(sig_mean, sig_width, order, n_points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn js_toy_histogram(n_events: usize, z: f64, seed: u32, n_bins: usize) -> Result<Vec<f64>, JsError> {
    toy_histogram(n_events, z, seed as u64, n_bins).map_err(|e| JsError::new(&e))
}
