use super::spec::CowSpec;
use crate::densities::{integrate_mixed, Density1D, EfficiencyMap};
use crate::error::{Error, Result};
use crate::linalg::{self, condition_number, Matrix};
use crate::mlfit::neumaier_sum;

/// Largest accepted condition number of `W`.
pub const MAX_COND: f64 = 1e12;

/// Efficiencies below this are rejected to avoid exploding weights.
pub const MIN_EFFICIENCY: f64 = 1e-6;

/// Custom orthogonal weight functions `w_k(m) = Σ_l A_kl g_l(m) / I(m)` with
/// `A = W⁻¹` and `W_kl = ∫ g_k g_l / I dm`.
#[derive(Debug, Clone)]
pub struct CowSet {
    pub spec: CowSpec,
    pub w: Matrix,
    pub a: Matrix,
    basis: Vec<Density1D>,
    variance: Option<Density1D>,
}

/// Builds the weight functions by quadrature; each `W` element is computed
/// to `tol` absolute or relative, whichever is looser.
pub fn build_cow(spec: CowSpec, tol: f64) -> Result<CowSet> {
    spec.validate()?;
    let basis = spec.effective_basis();
    let variance = spec.variance_density()?;
    let iv = spec.support;
    if let Some(v) = &variance {
        let bad = iv.grid(1001).into_iter().find(|m| !(v.pdf(*m) > 0.0));
        if let Some(m) = bad {
            return Err(Error::input(format!("variance function is not positive at m = {m}")));
        }
    }
    let mut breaks: Vec<f64> = basis.iter().flat_map(|d| d.breaks()).collect();
    if let Some(v) = &variance {
        breaks.extend(v.breaks());
    }
    let n = basis.len();
    let inv_i = |m: f64| variance.as_ref().map_or(1.0, |v| 1.0 / v.pdf(m));
    let mut w = Matrix::zeros(n, n);
    for k in 0..n {
        for l in 0..=k {
            let v = integrate_mixed(
                |m| basis[k].pdf(m) * basis[l].pdf(m) * inv_i(m),
                iv,
                &breaks,
                tol,
                tol,
            )?;
            w[(k, l)] = v;
            w[(l, k)] = v;
        }
    }
    let cond = condition_number(&w);
    if !(cond <= MAX_COND) {
        return Err(Error::IllConditioned { cond });
    }
    let a = match w.clone().cholesky() {
        Some(ch) => linalg::symmetrize(&ch.inverse()),
        None => linalg::inverse(&w)?,
    };
    Ok(CowSet {
        spec,
        w,
        a,
        basis,
        variance,
    })
}

impl CowSet {
    pub fn n(&self) -> usize {
        self.basis.len()
    }

    pub fn n_signal(&self) -> usize {
        self.spec.n_signal
    }

    /// Basis actually used (signal proxy substituted).
    pub fn basis(&self) -> &[Density1D] {
        &self.basis
    }

    /// `I(m)`.
    pub fn variance_fn(&self, m: f64) -> f64 {
        self.variance.as_ref().map_or(1.0, |v| v.pdf(m))
    }

    /// All `w_k(m)`.
    pub fn eval(&self, m: f64) -> Result<Vec<f64>> {
        let iv = self.spec.support;
        if !iv.contains(m) {
            return Err(Error::input(format!(
                "m = {m} outside the support [{}, {}]",
                iv.lo, iv.hi
            )));
        }
        let i = self.variance_fn(m);
        if !(i > 0.0) {
            return Err(Error::ZeroDenominator { m });
        }
        let g: Vec<f64> = self.basis.iter().map(|d| d.pdf(m)).collect();
        Ok((0..self.n())
            .map(|k| (0..self.n()).map(|l| self.a[(k, l)] * g[l]).sum::<f64>() / i)
            .collect())
    }

    /// Signal weight `Σ_{k<s} w_k(m)`.
    pub fn signal_weight(&self, m: f64) -> Result<f64> {
        Ok(self.eval(m)?[..self.n_signal()].iter().sum())
    }

    /// Per-event weights, one row per event.
    pub fn weights(&self, data: &[f64]) -> Result<Vec<Vec<f64>>> {
        data.iter().map(|m| self.eval(*m)).collect()
    }
}

pub(crate) fn efficiencies(eff: Option<&EfficiencyMap>, m: &[f64], t: &[f64]) -> Result<Vec<f64>> {
    if eff.is_none() && t.is_empty() {
        return Ok(vec![1.0; m.len()]);
    }
    if m.len() != t.len() {
        return Err(Error::input("m and t columns differ in length"));
    }
    m.iter()
        .zip(t)
        .map(|(mi, ti)| {
            let e = eff.map_or(1.0, |e| e.eval(*mi, *ti));
            if !(e >= MIN_EFFICIENCY) {
                Err(Error::TinyEfficiency {
                    m: *mi,
                    t: *ti,
                    eps: e,
                })
            } else {
                Ok(e)
            }
        })
        .collect()
}

/// Per-event `w_k(m_i) / ε(m_i, t_i)`.
pub fn efficiency_corrected_weights(
    cow: &CowSet,
    eff: Option<&EfficiencyMap>,
    m: &[f64],
    t: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let e = efficiencies(eff, m, t)?;
    m.iter()
        .zip(e)
        .map(|(mi, ei)| Ok(cow.eval(*mi)?.into_iter().map(|w| w / ei).collect()))
        .collect()
}

/// Fractions `ẑ_k = (D̂/N) Σ_i w_k(m_i)/ε_i` and the harmonic-mean
/// efficiency `D̂ = (N⁻¹ Σ_i 1/ε_i)⁻¹`.
pub fn estimate_fractions(
    cow: &CowSet,
    eff: Option<&EfficiencyMap>,
    m: &[f64],
    t: &[f64],
) -> Result<(Vec<f64>, f64)> {
    if m.is_empty() {
        return Err(Error::input("no events"));
    }
    let e = efficiencies(eff, m, t)?;
    let n = m.len() as f64;
    let d_hat = n / neumaier_sum(e.iter().map(|v| 1.0 / v));
    let rows = efficiency_corrected_weights(cow, eff, m, t)?;
    let z = (0..cow.n())
        .map(|k| d_hat / n * neumaier_sum(rows.iter().map(|r| r[k])))
        .collect();
    Ok((z, d_hat))
}
