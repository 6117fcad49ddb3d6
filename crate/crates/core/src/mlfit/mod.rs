//! Maximum-likelihood fitting: extended unbinned fits of mixtures in `m`,
//! weighted fits in `t`, and numerical differentiation.

mod extended;
mod model;
mod numdiff;
mod optimizer;
mod weighted;

pub use extended::{
    component_matrix, fit_extended_ml, fit_yields_weighted, yields_only_refit, MAX_HESSIAN_COND,
};
pub use model::{Component, FitResult, MixtureModel};
pub use numdiff::{neumaier_sum, numerical_gradient, numerical_hessian};
pub use optimizer::{minimize, MinimizeOptions, Minimum, Objective};
pub use weighted::fit_weighted_ml;
