//! Custom orthogonal weight functions (COWs): `n`-component weights for an
//! arbitrary variance function `I(m)`, optionally corrected for a
//! per-event efficiency.

mod build;
mod spec;
mod variance;

pub use build::{
    build_cow, efficiency_corrected_weights, estimate_fractions, CowSet, MAX_COND, MIN_EFFICIENCY,
};
pub use spec::{CowSpec, VarianceFn};
pub use variance::{variance_fn_ml_iterative, variance_fn_qm, MlIteration};

#[cfg(test)]
mod tests;
