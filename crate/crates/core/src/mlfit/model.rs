use serde::{Deserialize, Serialize};

use crate::densities::{Density1D, EfficiencyMap, Interval};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// One mixture component: a label, its density in `m` and its yield.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub label: String,
    pub density: Density1D,
    #[serde(rename = "yield")]
    pub yield_: f64,
    /// Which shape parameters float in a full fit. Defaults to all parameters
    /// of normal and exponential densities and none otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free: Option<Vec<bool>>,
}

impl Component {
    pub fn new(label: impl Into<String>, density: Density1D, yield_: f64) -> Self {
        Self {
            label: label.into(),
            density,
            yield_,
            free: None,
        }
    }

    pub fn free_mask(&self) -> Vec<bool> {
        let n = self.density.params().len();
        match &self.free {
            Some(f) => f.clone(),
            None => vec![matches!(self.density.kind(), "normal" | "exponential"); n],
        }
    }
}

/// Mixture of component densities with yields, `Σ_k N_k g_k(m; φ_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub components: Vec<Component>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<EfficiencyMap>,
}

impl MixtureModel {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let m = Self {
            components,
            efficiency: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::input("mixture needs at least one component"));
        }
        let s = self.support();
        for c in &self.components {
            if c.density.support() != s {
                return Err(Error::input(format!(
                    "component '{}' has a different support",
                    c.label
                )));
            }
            if !(c.yield_ >= 0.0) {
                return Err(Error::input(format!("component '{}' has a negative yield", c.label)));
            }
            if c.free_mask().len() != c.density.params().len() {
                return Err(Error::input(format!(
                    "component '{}': free mask length does not match its parameters",
                    c.label
                )));
            }
        }
        Ok(())
    }

    pub fn support(&self) -> Interval {
        self.components[0].density.support()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn labels(&self) -> Vec<String> {
        self.components.iter().map(|c| c.label.clone()).collect()
    }

    pub fn yields(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.yield_).collect()
    }

    pub fn fractions(&self) -> Vec<f64> {
        let y = self.yields();
        let t: f64 = y.iter().sum();
        y.into_iter().map(|v| v / t).collect()
    }

    pub fn densities(&self) -> Vec<Density1D> {
        self.components.iter().map(|c| c.density.clone()).collect()
    }

    /// `(component, parameter)` index of every free shape parameter.
    pub fn shape_layout(&self) -> Vec<(usize, usize)> {
        let mut out = vec![];
        for (k, c) in self.components.iter().enumerate() {
            for (j, f) in c.free_mask().into_iter().enumerate() {
                if f {
                    out.push((k, j));
                }
            }
        }
        out
    }

    /// Yields followed by the free shape parameters.
    pub fn param_vector(&self) -> Vec<f64> {
        let mut p = self.yields();
        for (k, j) in self.shape_layout() {
            p.push(self.components[k].density.params()[j]);
        }
        p
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut n: Vec<String> = self.components.iter().map(|c| format!("N_{}", c.label)).collect();
        for (k, j) in self.shape_layout() {
            n.push(format!("{}.p{}", self.components[k].label, j));
        }
        n
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(0.0, f64::INFINITY); self.n_components()];
        for (k, j) in self.shape_layout() {
            b.push(self.components[k].density.default_bounds()[j]);
        }
        b
    }

    /// Component densities with shape parameters taken from `p`
    /// (laid out as in [`Self::param_vector`]).
    pub fn densities_at(&self, p: &[f64]) -> Result<Vec<Density1D>> {
        let k = self.n_components();
        let mut params: Vec<Vec<f64>> = self.components.iter().map(|c| c.density.params()).collect();
        for (v, (c, j)) in p[k..].iter().zip(self.shape_layout()) {
            params[c][j] = *v;
        }
        let mut out = Vec::with_capacity(k);
        for (c, pp) in self.components.iter().zip(params) {
            if pp == c.density.params() {
                out.push(c.density.clone());
            } else {
                out.push(c.density.with_params(&pp)?);
            }
        }
        Ok(out)
    }

    /// Copy with yields and free shapes replaced by `p`.
    pub fn with_params(&self, p: &[f64]) -> Result<Self> {
        let d = self.densities_at(p)?;
        let mut m = self.clone();
        for ((c, dens), y) in m.components.iter_mut().zip(d).zip(p) {
            c.density = dens;
            c.yield_ = *y;
        }
        Ok(m)
    }

    /// Copy with every shape parameter fixed.
    pub fn shapes_fixed(&self) -> Self {
        let mut m = self.clone();
        for c in &mut m.components {
            c.free = Some(vec![false; c.density.params().len()]);
        }
        m
    }

    /// Total density `Σ N_k g_k(m) / Σ N_k`.
    pub fn mixture_density(&self) -> Result<Density1D> {
        Density1D::mixture(self.fractions(), self.densities())
    }
}

/// Outcome of a maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(default)]
    pub names: Vec<String>,
    pub params: Vec<f64>,
    /// `-H⁻¹`; absent when the fit did not converge or `H` is singular.
    #[serde(rename = "cov", with = "linalg::serde_rows_opt")]
    pub covariance: Option<Matrix>,
    /// Hessian `H` of the log-likelihood at `params`.
    #[serde(with = "linalg::serde_rows")]
    pub hessian: Matrix,
    pub nll: f64,
    pub converged: bool,
    #[serde(default)]
    pub singular: bool,
    #[serde(default)]
    pub n_calls: usize,
}

impl FitResult {
    pub fn error(&self, i: usize) -> Option<f64> {
        self.covariance.as_ref().map(|c| c[(i, i)].sqrt())
    }

    /// `true` if converged with a usable covariance.
    pub fn is_valid(&self) -> bool {
        self.converged && !self.singular && self.covariance.is_some()
    }
}
