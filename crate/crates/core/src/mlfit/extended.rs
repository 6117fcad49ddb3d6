//! Extended unbinned maximum-likelihood fits of mixture models.

use super::model::{FitResult, MixtureModel};
use super::numdiff::neumaier_sum;
use super::optimizer::{minimize, well_conditioned_pd, Minimum, MinimizeOptions, Objective};
use crate::densities::Density1D;
use crate::error::{Error, Result};
use crate::linalg::{inverse_symmetric, Matrix};

/// Largest scaled condition number of a Hessian accepted for a covariance.
pub const MAX_HESSIAN_COND: f64 = 1e12;

pub(crate) fn check_data(data: &[f64], support: crate::densities::Interval) -> Result<()> {
    if data.is_empty() {
        return Err(Error::input("no events"));
    }
    if let Some(x) = data.iter().find(|x| !support.contains(**x)) {
        return Err(Error::input(format!(
            "value {x} outside the model support [{}, {}]",
            support.lo, support.hi
        )));
    }
    Ok(())
}

/// Component densities evaluated at every event, row-major `n × K`.
pub fn component_matrix(data: &[f64], densities: &[Density1D]) -> Vec<f64> {
    let mut g = Vec::with_capacity(data.len() * densities.len());
    for m in data {
        for d in densities {
            g.push(d.pdf(*m));
        }
    }
    g
}

/// Turns a minimum into a [`FitResult`]; `hessian` is that of the objective
/// (negative log-likelihood).
pub(crate) fn finish(
    min: Minimum,
    hess_nll: Result<Matrix>,
    names: Vec<String>,
) -> FitResult {
    let n = min.x.len();
    let (hessian, covariance, singular) = match hess_nll {
        Ok(h) => {
            let singular = !well_conditioned_pd(&h, MAX_HESSIAN_COND);
            let cov = if min.converged && !singular {
                inverse_symmetric(&h).ok()
            } else {
                None
            };
            (-h, cov, singular)
        }
        Err(_) => (Matrix::from_element(n, n, f64::NAN), None, true),
    };
    FitResult {
        names,
        params: min.x,
        singular: singular || (min.converged && covariance.is_none()),
        covariance,
        hessian,
        nll: min.fval,
        converged: min.converged,
        n_calls: min.n_calls,
    }
}

struct ExtendedNll<'a> {
    data: &'a [f64],
    model: &'a MixtureModel,
    layout: Vec<(usize, usize)>,
}

impl ExtendedNll<'_> {
    fn densities(&self, p: &[f64]) -> Option<Vec<Density1D>> {
        if p.iter().any(|v| !v.is_finite()) {
            return None;
        }
        self.model.densities_at(p).ok()
    }
}

impl Objective for ExtendedNll<'_> {
    fn value(&self, p: &[f64]) -> f64 {
        let Some(dens) = self.densities(p) else {
            return f64::INFINITY;
        };
        let k = dens.len();
        let y = &p[..k];
        let s = neumaier_sum(self.data.iter().map(|m| {
            let d: f64 = dens.iter().zip(y).map(|(g, n)| n * g.pdf(*m)).sum();
            if d > 0.0 {
                d.ln()
            } else {
                f64::NEG_INFINITY
            }
        }));
        let v = neumaier_sum(y.iter().copied()) - s;
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }

    fn gradient(&self, p: &[f64], _: &[(f64, f64)]) -> Result<Vec<f64>> {
        let dens = self
            .densities(p)
            .ok_or_else(|| Error::NonFinite { point: p.to_vec() })?;
        let k = dens.len();
        let y = &p[..k];
        let has_free: Vec<bool> = (0..k).map(|c| self.layout.iter().any(|(a, _)| *a == c)).collect();
        let mut terms: Vec<Vec<f64>> = vec![Vec::with_capacity(self.data.len()); p.len()];
        let mut gk = vec![0.0; k];
        for m in self.data {
            for (c, g) in dens.iter().enumerate() {
                gk[c] = g.pdf(*m);
            }
            let d: f64 = gk.iter().zip(y).map(|(g, n)| g * n).sum();
            if !(d > 0.0) {
                return Err(Error::NonFinite { point: p.to_vec() });
            }
            for c in 0..k {
                terms[c].push(gk[c] / d);
            }
            let mut grads: Vec<Option<Vec<f64>>> = vec![None; k];
            for c in 0..k {
                if has_free[c] {
                    grads[c] = Some(dens[c].pdf_grad(*m));
                }
            }
            for (a, (c, j)) in self.layout.iter().enumerate() {
                let dg = grads[*c].as_ref().unwrap()[*j];
                terms[k + a].push(y[*c] * dg / d);
            }
        }
        Ok(terms
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let s = neumaier_sum(t);
                if i < k {
                    1.0 - s
                } else {
                    -s
                }
            })
            .collect())
    }
}

/// Maximizes the extended log-likelihood
/// `Σ_i ln(Σ_k N_k g_k(m_i; φ)) - Σ_k N_k` over yields and free shapes.
///
/// `init` and `bounds` default to the model's own values.
pub fn fit_extended_ml(
    data: &[f64],
    model: &MixtureModel,
    init: Option<&[f64]>,
    bounds: Option<&[(f64, f64)]>,
) -> Result<FitResult> {
    model.validate()?;
    check_data(data, model.support())?;
    let obj = ExtendedNll {
        data,
        model,
        layout: model.shape_layout(),
    };
    let x0 = init.map_or_else(|| model.param_vector(), |v| v.to_vec());
    let b = bounds.map_or_else(|| model.bounds(), |v| v.to_vec());
    if x0.len() != b.len() {
        return Err(Error::input(format!(
            "expected {} parameters, got {}",
            b.len(),
            x0.len()
        )));
    }
    if obj.layout.is_empty() {
        return yields_only_refit(data, model, Some(&x0));
    }
    let min = minimize(&obj, &x0, &b, &MinimizeOptions::default())?;
    let h = obj.hessian(&min.x);
    Ok(finish(min, h, model.param_names()))
}

/// Yields-only negative log-likelihood with optional per-event weights:
/// `Σ_k N_k - Σ_i w_i ln(Σ_k N_k g_k(m_i))`.
pub(crate) struct YieldsNll<'a> {
    pub g: &'a [f64],
    pub k: usize,
    pub weights: Option<&'a [f64]>,
}

impl YieldsNll<'_> {
    fn n(&self) -> usize {
        self.g.len() / self.k
    }

    fn w(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.g[i * self.k..(i + 1) * self.k]
    }
}

impl Objective for YieldsNll<'_> {
    fn value(&self, y: &[f64]) -> f64 {
        let s = neumaier_sum((0..self.n()).map(|i| {
            let d: f64 = self.row(i).iter().zip(y).map(|(g, n)| g * n).sum();
            if d > 0.0 {
                self.w(i) * d.ln()
            } else if self.w(i) == 0.0 {
                0.0
            } else {
                f64::NAN
            }
        }));
        let v = neumaier_sum(y.iter().copied()) - s;
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }

    fn gradient(&self, y: &[f64], _: &[(f64, f64)]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.k);
        let ds: Vec<f64> = (0..self.n())
            .map(|i| self.row(i).iter().zip(y).map(|(g, n)| g * n).sum())
            .collect();
        if ds.iter().enumerate().any(|(i, d)| !(*d > 0.0) && self.w(i) != 0.0) {
            return Err(Error::NonFinite { point: y.to_vec() });
        }
        for c in 0..self.k {
            let s = neumaier_sum(
                (0..self.n())
                    .filter(|i| self.w(*i) != 0.0)
                    .map(|i| self.w(i) * self.row(i)[c] / ds[i]),
            );
            out.push(1.0 - s);
        }
        Ok(out)
    }

    fn hessian(&self, y: &[f64]) -> Result<Matrix> {
        let k = self.k;
        let mut terms: Vec<Vec<f64>> = vec![Vec::with_capacity(self.n()); k * k];
        for i in 0..self.n() {
            let w = self.w(i);
            if w == 0.0 {
                continue;
            }
            let r = self.row(i);
            let d: f64 = r.iter().zip(y).map(|(g, n)| g * n).sum();
            if !(d > 0.0) {
                return Err(Error::NonFinite { point: y.to_vec() });
            }
            let d2 = d * d;
            for a in 0..k {
                for b in 0..=a {
                    terms[a * k + b].push(w * r[a] * r[b] / d2);
                }
            }
        }
        let mut h = Matrix::zeros(k, k);
        for a in 0..k {
            for b in 0..=a {
                let v = neumaier_sum(std::mem::take(&mut terms[a * k + b]));
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
        }
        Ok(h)
    }
}

fn yields_fit(
    g: &[f64],
    k: usize,
    weights: Option<&[f64]>,
    x0: Vec<f64>,
    names: Vec<String>,
) -> Result<FitResult> {
    let obj = YieldsNll { g, k, weights };
    let b = vec![(0.0, f64::INFINITY); k];
    let opts = MinimizeOptions {
        gtol: 1e-10,
        xtol: 1e-13,
        ..Default::default()
    };
    let mut min = minimize(&obj, &x0, &b, &opts)?;
    // the analytic Hessian makes the Newton stage exact; only the projected
    // gradient decides convergence
    let g = obj.gradient(&min.x, &b)?;
    let total: f64 = weights.map_or(obj.n() as f64, |w| w.iter().sum());
    min.converged = min
        .x
        .iter()
        .zip(&g)
        .all(|(x, gi)| gi.abs() < 1e-6 || (*x == 0.0 && *gi > 0.0))
        && min.x.iter().sum::<f64>() > 0.0
        && total.is_finite();
    let h = obj.hessian(&min.x);
    Ok(finish(min, h, names))
}

/// Refit of the yields with every shape fixed at the model's current values.
/// Gradient and Hessian are analytic, so the optimum is found to machine
/// precision.
pub fn yields_only_refit(
    data: &[f64],
    model: &MixtureModel,
    init_yields: Option<&[f64]>,
) -> Result<FitResult> {
    model.validate()?;
    check_data(data, model.support())?;
    let k = model.n_components();
    let g = component_matrix(data, &model.densities());
    let mut x0 = init_yields.map_or_else(|| model.yields(), |v| v[..k.min(v.len())].to_vec());
    if x0.len() != k {
        return Err(Error::input(format!("expected {k} yields, got {}", x0.len())));
    }
    if x0.iter().sum::<f64>() <= 0.0 {
        x0 = vec![data.len() as f64 / k as f64; k];
    }
    let names = model.param_names()[..k].to_vec();
    yields_fit(&g, k, None, x0, names)
}

/// Yields fit with per-event frequency weights, maximizing
/// `Σ_i w_i ln(Σ_k N_k g_k(m_i)) - Σ_k N_k`. At the optimum `Σ_k N_k = Σ_i w_i`.
pub fn fit_yields_weighted(
    data: &[f64],
    weights: &[f64],
    densities: &[Density1D],
) -> Result<FitResult> {
    if densities.is_empty() {
        return Err(Error::input("no components"));
    }
    if weights.len() != data.len() {
        return Err(Error::input("data and weights differ in length"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::input("frequency weights must be finite and non-negative"));
    }
    check_data(data, densities[0].support())?;
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }
    let k = densities.len();
    let g = component_matrix(data, densities);
    let names = (0..k).map(|i| format!("N_{i}")).collect();
    yields_fit(&g, k, Some(weights), vec![total / k as f64; k], names)
}
