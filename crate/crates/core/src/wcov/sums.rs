use crate::error::{Error, Result};
use crate::mlfit::neumaier_sum;

/// Estimated variance of a sum of weights over a Poisson-distributed number
/// of events: `Σ w_i²`.
pub fn variance_sum_weights(weights: &[f64]) -> f64 {
    neumaier_sum(weights.iter().map(|w| w * w))
}

/// Number of equivalent events `(Σ w)² / Σ w²`.
pub fn equivalent_events(weights: &[f64]) -> Result<f64> {
    let s2 = variance_sum_weights(weights);
    if !(s2 > 0.0) {
        return Err(Error::ZeroWeight);
    }
    let s = neumaier_sum(weights.iter().copied());
    Ok(s * s / s2)
}
