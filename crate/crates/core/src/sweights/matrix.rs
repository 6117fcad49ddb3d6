use serde::{Deserialize, Serialize};

use crate::densities::{integrate_mixed, Density1D, Interval};
use crate::error::{Error, Result};
use crate::linalg::{self, condition_number, inverse_symmetric, Matrix};
use crate::mlfit::{neumaier_sum, FitResult};

/// How the `W` matrix was estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Quadrature integral with the fitted densities.
    A,
    /// Average over the observed events.
    B,
    /// Inverse of the full-fit covariance, yields block, times `N`.
    Ci,
    /// Yields-only fit covariance divided by `N` taken as `A` directly.
    Cii,
    /// Gram matrix for an arbitrary variance function (custom orthogonal weights).
    #[serde(rename = "custom-I")]
    CustomI,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Variant::A),
            "b" => Ok(Variant::B),
            "ci" | "c" => Ok(Variant::Ci),
            "cii" | "d" => Ok(Variant::Cii),
            "custom-i" | "custom" => Ok(Variant::CustomI),
            _ => Err(Error::input(format!("unknown variant '{s}' (expected A, B, Ci or Cii)"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Variant::A => "A",
            Variant::B => "B",
            Variant::Ci => "Ci",
            Variant::Cii => "Cii",
            Variant::CustomI => "custom-I",
        };
        f.write_str(s)
    }
}

/// Which fit covariance variant C is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceMode {
    /// Invert the full covariance, then take the yields block.
    InvertFullCov,
    /// Take the covariance of a yields-only fit as `N A`.
    YieldsOnlyCov,
}

/// Estimated `W` and its inverse `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub variant: Variant,
    #[serde(rename = "W", with = "linalg::serde_rows")]
    pub w: Matrix,
    #[serde(rename = "A", with = "linalg::serde_rows")]
    pub a: Matrix,
    pub z_hat: Vec<f64>,
}

impl WeightMatrix {
    /// Builds from `W`, inverting it. Two components use the closed-form
    /// inverse.
    pub fn from_w(w: Matrix, variant: Variant, z_hat: Vec<f64>) -> Result<Self> {
        let a = invert_w(&w)?;
        Ok(Self { variant, w, a, z_hat })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    /// Row sums of `A`; equal to `ẑ` when `W ẑ = 1`.
    pub fn a_row_sums(&self) -> Vec<f64> {
        (0..self.n()).map(|k| self.a.row(k).sum()).collect()
    }
}

fn check_fractions(z: &[f64], n: usize) -> Result<()> {
    if z.len() != n {
        return Err(Error::input(format!("expected {n} fractions, got {}", z.len())));
    }
    if z.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
        return Err(Error::input("fractions must lie strictly between 0 and 1"));
    }
    let s: f64 = z.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::input(format!("fractions sum to {s}, not 1")));
    }
    Ok(())
}

/// Yields to fractions by dividing by `n_events`.
pub fn fractions_from_yields(yields: &[f64], n_events: usize) -> Vec<f64> {
    yields.iter().map(|y| y / n_events as f64).collect()
}

pub(crate) fn invert_w(w: &Matrix) -> Result<Matrix> {
    let n = w.nrows();
    if n == 2 {
        let det = w[(0, 0)] * w[(1, 1)] - w[(0, 1)] * w[(1, 0)];
        let norm2: f64 = w.iter().map(|v| v * v).sum();
        if !(det > 1e-14 * norm2) {
            return Err(Error::SingularModel(
                "W is singular: the component shapes are (nearly) proportional".into(),
            ));
        }
        return Ok(Matrix::from_row_slice(
            2,
            2,
            &[w[(1, 1)] / det, -w[(0, 1)] / det, -w[(1, 0)] / det, w[(0, 0)] / det],
        ));
    }
    let cond = condition_number(w);
    if !(cond < 1e14) {
        return Err(Error::SingularModel(format!(
            "W is singular (condition number {cond:.3e})"
        )));
    }
    inverse_symmetric(w)
}

fn all_breaks(densities: &[Density1D]) -> Vec<f64> {
    let mut b: Vec<f64> = densities.iter().flat_map(|d| d.breaks()).collect();
    b.sort_by(|a, c| a.total_cmp(c));
    b.dedup();
    b
}

/// `W_kl = ∫ g_k g_l / Σ_j z_j g_j dm` by adaptive quadrature over `iv`, each
/// element to `tol` absolute or relative, whichever is looser.
pub fn compute_w_variant_a(
    densities: &[Density1D],
    z: &[f64],
    iv: Interval,
    tol: f64,
) -> Result<WeightMatrix> {
    let n = densities.len();
    check_fractions(z, n)?;
    let breaks = all_breaks(densities);
    let mut w = Matrix::zeros(n, n);
    for k in 0..n {
        for l in 0..=k {
            let v = integrate_mixed(
                |m| {
                    let mix: f64 = densities.iter().zip(z).map(|(g, zz)| zz * g.pdf(m)).sum();
                    if mix > 0.0 {
                        densities[k].pdf(m) * densities[l].pdf(m) / mix
                    } else {
                        0.0
                    }
                },
                iv,
                &breaks,
                tol,
                tol,
            )?;
            w[(k, l)] = v;
            w[(l, k)] = v;
        }
    }
    WeightMatrix::from_w(w, Variant::A, z.to_vec())
}

/// `Ŵ_kl = (1/N) Σ_i g_k(m_i) g_l(m_i) / (Σ_j z_j g_j(m_i))²`, without
/// inverting it.
pub fn sample_gram(densities: &[Density1D], z: &[f64], data: &[f64]) -> Result<Matrix> {
    let n = densities.len();
    check_fractions(z, n)?;
    if data.is_empty() {
        return Err(Error::input("no events"));
    }
    let mut terms: Vec<Vec<f64>> = vec![Vec::with_capacity(data.len()); n * n];
    let mut g = vec![0.0; n];
    for m in data {
        for (k, d) in densities.iter().enumerate() {
            g[k] = d.pdf(*m);
        }
        let mix: f64 = g.iter().zip(z).map(|(a, b)| a * b).sum();
        if !(mix > 0.0) {
            return Err(Error::ZeroDenominator { m: *m });
        }
        let d2 = mix * mix;
        for k in 0..n {
            for l in 0..=k {
                terms[k * n + l].push(g[k] * g[l] / d2);
            }
        }
    }
    let inv_n = 1.0 / data.len() as f64;
    let mut w = Matrix::zeros(n, n);
    for k in 0..n {
        for l in 0..=k {
            let v = neumaier_sum(std::mem::take(&mut terms[k * n + l])) * inv_n;
            w[(k, l)] = v;
            w[(l, k)] = v;
        }
    }
    Ok(w)
}

/// Variant B: [`sample_gram`] and its inverse.
pub fn compute_w_variant_b(densities: &[Density1D], z: &[f64], data: &[f64]) -> Result<WeightMatrix> {
    let w = sample_gram(densities, z, data)?;
    WeightMatrix::from_w(w, Variant::B, z.to_vec())
}

/// `W` from a fit covariance; the yields must be the first `n_components`
/// parameters.
///
/// With [`CovarianceMode::InvertFullCov`] the full covariance is inverted
/// before the yields block is extracted; extracting first would give a
/// different (wrong) matrix when shapes float.
pub fn compute_w_variant_c(
    fit: &FitResult,
    n_events: usize,
    n_components: usize,
    mode: CovarianceMode,
) -> Result<WeightMatrix> {
    if !fit.converged {
        return Err(Error::NotConverged("fit did not converge".into()));
    }
    let cov = fit
        .covariance
        .as_ref()
        .ok_or_else(|| Error::SingularModel("fit has no covariance".into()))?;
    let k = n_components;
    if cov.nrows() < k {
        return Err(Error::input("covariance smaller than the number of components"));
    }
    let n = n_events as f64;
    let total: f64 = fit.params[..k].iter().sum();
    let z_hat: Vec<f64> = fit.params[..k].iter().map(|y| y / total).collect();
    match mode {
        CovarianceMode::InvertFullCov => {
            let inv = inverse_symmetric(cov)?;
            let w = Matrix::from_fn(k, k, |i, j| inv[(i, j)] * n);
            WeightMatrix::from_w(linalg::symmetrize(&w), Variant::Ci, z_hat)
        }
        CovarianceMode::YieldsOnlyCov => {
            let a = Matrix::from_fn(k, k, |i, j| cov[(i, j)] / n);
            let a = linalg::symmetrize(&a);
            let w = inverse_symmetric(&a)?;
            Ok(WeightMatrix {
                variant: Variant::Cii,
                w,
                a,
                z_hat,
            })
        }
    }
}
