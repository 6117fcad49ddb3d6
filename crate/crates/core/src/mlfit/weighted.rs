//! Weighted maximum-likelihood fit of a single density.

use super::extended::{check_data, finish};
use super::model::FitResult;
use super::numdiff::neumaier_sum;
use super::optimizer::{minimize, MinimizeOptions, Objective};
use crate::densities::Density1D;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

struct WeightedNll<'a> {
    data: &'a [f64],
    weights: &'a [f64],
    density: &'a Density1D,
}

impl WeightedNll<'_> {
    fn at(&self, p: &[f64]) -> Option<Density1D> {
        if p.iter().any(|v| !v.is_finite()) {
            return None;
        }
        self.density.with_params(p).ok()
    }
}

impl Objective for WeightedNll<'_> {
    fn value(&self, p: &[f64]) -> f64 {
        let Some(h) = self.at(p) else {
            return f64::INFINITY;
        };
        let v = -neumaier_sum(
            self.data
                .iter()
                .zip(self.weights)
                .filter(|(_, w)| **w != 0.0)
                .map(|(t, w)| w * h.ln_pdf(*t)),
        );
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }

    fn gradient(&self, p: &[f64], _: &[(f64, f64)]) -> Result<Vec<f64>> {
        let h = self.at(p).ok_or_else(|| Error::NonFinite { point: p.to_vec() })?;
        let mut terms: Vec<Vec<f64>> = vec![Vec::with_capacity(self.data.len()); p.len()];
        for (t, w) in self.data.iter().zip(self.weights) {
            if *w == 0.0 {
                continue;
            }
            for (j, g) in h.ln_pdf_grad(*t).into_iter().enumerate() {
                terms[j].push(w * g);
            }
        }
        let g: Vec<f64> = terms.into_iter().map(|t| -neumaier_sum(t)).collect();
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { point: p.to_vec() });
        }
        Ok(g)
    }

    fn hessian(&self, p: &[f64]) -> Result<Matrix> {
        let h = self.at(p).ok_or_else(|| Error::NonFinite { point: p.to_vec() })?;
        let n = p.len();
        let mut terms: Vec<Vec<f64>> = vec![Vec::with_capacity(self.data.len()); n * n];
        for (t, w) in self.data.iter().zip(self.weights) {
            if *w == 0.0 {
                continue;
            }
            let hh = h.ln_pdf_hessian(*t);
            for a in 0..n {
                for b in 0..n {
                    terms[a * n + b].push(-w * hh[a][b]);
                }
            }
        }
        let m = Matrix::from_fn(n, n, |a, b| neumaier_sum(terms[a * n + b].iter().copied()));
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { point: p.to_vec() });
        }
        Ok(crate::linalg::symmetrize(&m))
    }
}

/// Maximizes `Σ_i w_i ln h(t_i; θ)` over all parameters of `density`.
///
/// Weights may be negative. The covariance in the result is the naive
/// inverse Hessian of the weighted log-likelihood, which does not describe
/// the spread of the estimate; see [`crate::wcov`] for the corrected one.
pub fn fit_weighted_ml(
    data: &[f64],
    weights: &[f64],
    density: &Density1D,
    init: Option<&[f64]>,
) -> Result<FitResult> {
    if data.len() != weights.len() {
        return Err(Error::input("data and weights differ in length"));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::input("weights must be finite"));
    }
    let total = neumaier_sum(weights.iter().copied());
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }
    check_data(data, density.support())?;
    let x0 = init.map_or_else(|| density.params(), |v| v.to_vec());
    if x0.len() != density.params().len() || x0.is_empty() {
        return Err(Error::input(format!(
            "{} density needs {} parameters",
            density.kind(),
            density.params().len()
        )));
    }
    let start = density.with_params(&x0)?;
    let check = |d: &Density1D| -> Result<()> {
        for (t, w) in data.iter().zip(weights) {
            if *w != 0.0 && !(d.pdf(*t) > 0.0) {
                return Err(Error::input(format!("density is not positive at t = {t}")));
            }
        }
        Ok(())
    };
    check(&start)?;
    let obj = WeightedNll {
        data,
        weights,
        density: &start,
    };
    let bounds = density.default_bounds();
    let min = minimize(&obj, &x0, &bounds, &MinimizeOptions::default())?;
    check(&start.with_params(&min.x)?)?;
    let h = obj.hessian(&min.x);
    let names = (0..x0.len()).map(|j| format!("{}.p{j}", density.kind())).collect();
    Ok(finish(min, h, names))
}
