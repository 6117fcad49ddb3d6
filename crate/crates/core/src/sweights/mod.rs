//! sWeights: weight functions orthogonal to the other components' densities,
//! from a `W` matrix estimated by quadrature (A), sample average (B) or a fit
//! covariance (Ci, Cii).

mod functions;
mod matrix;

pub use functions::{apply_weights, weight_functions, RangeMode, WeightFunctionSet, DENOMINATOR_PROBES};
pub use matrix::{
    compute_w_variant_a, compute_w_variant_b, compute_w_variant_c, fractions_from_yields,
    sample_gram, CovarianceMode, Variant, WeightMatrix,
};

use crate::densities::DEFAULT_TOL;
use crate::error::{Error, Result};
use crate::mlfit::{fit_extended_ml, yields_only_refit, FitResult, MixtureModel};

/// Everything produced on the way from data to per-event sWeights.
#[derive(Debug, Clone)]
pub struct SWeightsResult {
    /// Fit with shapes floating (equal to `refit` when shapes are fixed).
    pub fit: FitResult,
    /// Yields-only refit with shapes at the fitted values.
    pub refit: FitResult,
    /// Model at the fitted shapes and refitted yields.
    pub model: MixtureModel,
    pub matrix: WeightMatrix,
    pub functions: WeightFunctionSet,
    /// One row of component weights per event.
    pub weights: Vec<Vec<f64>>,
}

/// Fits `model` to `data`, refits the yields with shapes fixed and builds
/// sWeights with the requested `W` estimate.
///
/// The yields-only refit makes `W ẑ = 1` hold for variant B, so the signal
/// weights then sum to the fitted yield.
pub fn extract_sweights(
    data: &[f64],
    model: &MixtureModel,
    variant: Variant,
    fit_shapes: bool,
) -> Result<SWeightsResult> {
    if model.n_components() < 2 {
        return Err(Error::input("sWeights need at least two components"));
    }
    let fitted = if fit_shapes && !model.shape_layout().is_empty() {
        let fit = fit_extended_ml(data, model, None, None)?;
        if !fit.converged {
            return Err(Error::NotConverged("shape fit did not converge".into()));
        }
        (model.with_params(&fit.params)?, Some(fit))
    } else {
        (model.clone(), None)
    };
    let fixed = fitted.0.shapes_fixed();
    let refit = yields_only_refit(data, &fixed, None)?;
    if !refit.converged {
        return Err(Error::NotConverged("yields-only fit did not converge".into()));
    }
    let fit = fitted.1.unwrap_or_else(|| refit.clone());
    let k = model.n_components();
    let mut out_model = fixed.with_params(&refit.params)?;
    for (c, orig) in out_model.components.iter_mut().zip(&model.components) {
        c.free = orig.free.clone();
    }
    let n = data.len();
    let z = fractions_from_yields(&refit.params, n);
    let densities = fixed.densities();
    let matrix = match variant {
        Variant::A => compute_w_variant_a(&densities, &z, fixed.support(), DEFAULT_TOL * 1e-3)?,
        Variant::B => compute_w_variant_b(&densities, &z, data)?,
        Variant::Ci => compute_w_variant_c(&fit, n, k, CovarianceMode::InvertFullCov)?,
        Variant::Cii => compute_w_variant_c(&refit, n, k, CovarianceMode::YieldsOnlyCov)?,
        Variant::CustomI => {
            return Err(Error::input("custom variance functions are handled by the cows module"))
        }
    };
    let functions = weight_functions(matrix.clone(), &densities)?;
    let weights = apply_weights(&functions, data)?;
    Ok(SWeightsResult {
        fit,
        refit,
        model: out_model,
        matrix,
        functions,
        weights,
    })
}

#[cfg(test)]
mod tests;
