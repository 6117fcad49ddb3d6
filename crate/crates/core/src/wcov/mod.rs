//! Covariance of parameters fitted to weighted data: the full two-step
//! sandwich estimator, the simplified form for known shapes, and sums of
//! weights.

mod quasi;
mod sandwich;
mod sums;

pub use quasi::{sweight_from_w, sweight_w_derivatives, QuasiScoreSpec, Weighting};
pub use sandwich::{
    corrected_covariance_fixed_shapes, corrected_covariance_full, fixed_shape_terms,
    CorrectedCovariance, FixedShapeTerms, JACOBIAN_REL_STEP, ROOT_TOL,
};
pub use sums::{equivalent_events, variance_sum_weights};

#[cfg(test)]
mod tests;
