use serde::{Deserialize, Serialize};

use crate::densities::{Density1D, EfficiencyMap, Histogram1D, Interval};
use crate::error::{Error, Result};

/// The positive function `I(m)` defining the inner product
/// `<f, g> = ∫ f g / I dm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceFn {
    Unity,
    /// Piecewise-constant `I(m)`; empty bins are floored.
    Histogram(Histogram1D),
    /// `Σ_k z_k g_k(m)` over the spec's basis.
    Mixture(Vec<f64>),
    /// Any density, e.g. a fitted mixture.
    Density(Density1D),
}

/// Everything needed to build custom orthogonal weight functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CowSpec {
    /// `g_0..g_n`, signal elements first.
    pub basis: Vec<Density1D>,
    /// Number of leading basis elements describing the signal.
    #[serde(default = "one")]
    pub n_signal: usize,
    /// Replaces `g_0` as the normalizing density of the signal weight.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_proxy: Option<Density1D>,
    pub variance_fn: VarianceFn,
    pub support: Interval,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<EfficiencyMap>,
}

fn one() -> usize {
    1
}

impl CowSpec {
    pub fn new(basis: Vec<Density1D>, variance_fn: VarianceFn, support: Interval) -> Self {
        Self {
            basis,
            n_signal: 1,
            signal_proxy: None,
            variance_fn,
            support,
            efficiency: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.basis.is_empty() {
            return Err(Error::input("basis is empty"));
        }
        if self.n_signal == 0 || self.n_signal > self.basis.len() {
            return Err(Error::input(format!(
                "n_signal = {} must lie in 1..={}",
                self.n_signal,
                self.basis.len()
            )));
        }
        for d in self.basis.iter().chain(&self.signal_proxy) {
            if d.support() != self.support {
                return Err(Error::input("basis element support differs from the spec support"));
            }
        }
        if let VarianceFn::Mixture(z) = &self.variance_fn {
            if z.len() != self.basis.len() {
                return Err(Error::input(format!(
                    "mixture variance function needs {} fractions, got {}",
                    self.basis.len(),
                    z.len()
                )));
            }
            if z.iter().any(|v| !(*v >= 0.0)) || !(z.iter().sum::<f64>() > 0.0) {
                return Err(Error::input("mixture fractions must be non-negative and not all zero"));
            }
        }
        Ok(())
    }

    /// Basis with `g_0` replaced by the signal proxy, if any.
    pub fn effective_basis(&self) -> Vec<Density1D> {
        let mut b = self.basis.clone();
        if let Some(p) = &self.signal_proxy {
            b[0] = p.clone();
        }
        b
    }

    pub(crate) fn variance_density(&self) -> Result<Option<Density1D>> {
        Ok(match &self.variance_fn {
            VarianceFn::Unity => None,
            VarianceFn::Histogram(h) => Some(h.to_density()?),
            VarianceFn::Mixture(z) => Some(Density1D::mixture(z.clone(), self.basis.clone())?),
            VarianceFn::Density(d) => Some(d.clone()),
        })
    }
}
