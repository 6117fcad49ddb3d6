use serde::{Deserialize, Serialize};

use super::quasi::{sweight_from_w, sweight_w_derivatives, QuasiScoreSpec};
use crate::densities::Density1D;
use crate::error::{Error, Result};
use crate::linalg::{self, inverse, is_psd, symmetrize, Matrix};
use crate::mlfit::neumaier_sum;

/// Relative step of the numerical Jacobian of the quasi-score.
pub const JACOBIAN_REL_STEP: f64 = 1e-6;

/// Largest accepted `|S_j|` relative to `Σ_i |u_ij| + |c_j|`.
pub const ROOT_TOL: f64 = 1e-5;

/// Covariance of parameters fitted to weighted data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedCovariance {
    /// Full `C_λ` (full path only).
    #[serde(with = "linalg::serde_rows_opt", default, skip_serializing_if = "Option::is_none")]
    pub full: Option<Matrix>,
    /// Corrected covariance of `θ`.
    #[serde(with = "linalg::serde_rows")]
    pub theta_block: Matrix,
    /// Inverse Hessian of the weighted log-likelihood, for comparison.
    #[serde(with = "linalg::serde_rows")]
    pub naive: Matrix,
    /// `H⁻¹ H' H⁻ᵀ` (fixed-shape path only).
    #[serde(with = "linalg::serde_rows_opt", default, skip_serializing_if = "Option::is_none")]
    pub first_term: Option<Matrix>,
    /// `H⁻¹ E C' Eᵀ H⁻ᵀ` (fixed-shape path only).
    #[serde(with = "linalg::serde_rows_opt", default, skip_serializing_if = "Option::is_none")]
    pub reduction_term: Option<Matrix>,
}

impl CorrectedCovariance {
    pub fn theta_error(&self, k: usize) -> f64 {
        self.theta_block[(k, k)].sqrt()
    }

    pub fn naive_error(&self, k: usize) -> f64 {
        self.naive[(k, k)].sqrt()
    }
}

/// `H_kl = Σ_i w_i ∂² ln h(t_i) / ∂θ_k ∂θ_l`.
fn weighted_hessian(t: &[f64], w: &[f64], h: &Density1D) -> Matrix {
    let p = h.params().len();
    let mut terms: Vec<Vec<f64>> = vec![Vec::with_capacity(t.len()); p * p];
    for (ti, wi) in t.iter().zip(w) {
        if *wi == 0.0 {
            continue;
        }
        let hh = h.ln_pdf_hessian(*ti);
        for a in 0..p {
            for b in 0..p {
                terms[a * p + b].push(wi * hh[a][b]);
            }
        }
    }
    symmetrize(&Matrix::from_fn(p, p, |a, b| neumaier_sum(terms[a * p + b].iter().copied())))
}

fn naive_from_hessian(h: &Matrix) -> Result<Matrix> {
    Ok(-inverse(h).map_err(|_| Error::SingularModel("weighted-fit Hessian is singular".into()))?)
}

/// Central-difference Jacobian `∂S/∂λᵀ`.
fn jacobian(spec: &QuasiScoreSpec, m: &[f64], t: &[f64], lambda: &[f64]) -> Result<Matrix> {
    let d = lambda.len();
    let mut j = Matrix::zeros(d, d);
    let mut l = lambda.to_vec();
    let w_range = 2 + spec.n_phi()..5 + spec.n_phi();
    for c in 0..d {
        // W elements scale like 1/N; step them relative to their own size
        let scale = if w_range.contains(&c) && lambda[c] != 0.0 {
            lambda[c].abs()
        } else {
            lambda[c].abs().max(1.0)
        };
        let h = JACOBIAN_REL_STEP * scale;
        l[c] = lambda[c] + h;
        let sp = spec.score(m, t, &l)?;
        l[c] = lambda[c] - h;
        let sm = spec.score(m, t, &l)?;
        l[c] = lambda[c];
        for r in 0..d {
            j[(r, c)] = (sp[r] - sm[r]) / (2.0 * h);
        }
    }
    Ok(j)
}

/// Sandwich covariance `C_λ = J⁻¹ Ĉ_S J⁻ᵀ` of the full two-step estimate.
///
/// `scaling`, if given, multiplies each quasi-score component by a nonzero
/// constant; the result does not depend on it.
pub fn corrected_covariance_full(
    m: &[f64],
    t: &[f64],
    spec: &QuasiScoreSpec,
    lambda: &[f64],
    scaling: Option<&[f64]>,
) -> Result<CorrectedCovariance> {
    let d = spec.dim();
    if let Some(c) = scaling {
        if c.len() != d || c.iter().any(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::input("scaling must hold one nonzero constant per score component"));
        }
    }
    let max_rel = spec.root_residual(m, t, lambda)?;
    if !(max_rel < ROOT_TOL) {
        return Err(Error::NotARoot { max_rel });
    }
    let mut j = jacobian(spec, m, t, lambda)?;
    let mut cs = spec.score_variance(m, t, lambda)?;
    if let Some(c) = scaling {
        for r in 0..d {
            for k in 0..d {
                j[(r, k)] *= c[r];
                cs[(r, k)] *= c[r] * c[k];
            }
        }
    }
    let jinv = inverse(&j).map_err(|_| Error::SingularModel("quasi-score Jacobian is singular".into()))?;
    let full = symmetrize(&(&jinv * cs * jinv.transpose()));
    let o = spec.theta_offset();
    let p = spec.n_theta();
    let theta_block = full.view((o, o), (p, p)).into_owned();
    let point = spec.unpack(lambda)?;
    let w = spec.signal_weights(m, lambda)?;
    let naive = naive_from_hessian(&weighted_hessian(t, &w, &point.h))?;
    Ok(CorrectedCovariance {
        full: Some(full),
        theta_block,
        naive,
        first_term: None,
        reduction_term: None,
    })
}

/// Per-event inputs of the fixed-shape correction for two components.
#[derive(Debug, Clone)]
pub struct FixedShapeTerms {
    /// `(W_ss, W_sb, W_bb)` in the Hessian normalization.
    pub w: [f64; 3],
    pub weights: Vec<f64>,
    /// `∂w_s/∂(W_ss, W_sb, W_bb)` per event.
    pub dw: Vec<[f64; 3]>,
    /// `C'_(xy)(uv) = Σ_i g_x g_y g_u g_v / (N_s g_s + N_b g_b)⁴`.
    pub c_prime: Matrix,
}

/// Signal weights, their `W` derivatives and `C'` for known shapes `gs`,
/// `gb` and fitted yields.
pub fn fixed_shape_terms(
    m: &[f64],
    gs: &Density1D,
    gb: &Density1D,
    yields: [f64; 2],
) -> Result<FixedShapeTerms> {
    let mut g = Vec::with_capacity(m.len());
    let mut wt: [Vec<f64>; 3] = Default::default();
    for mi in m {
        let (s, b) = (gs.pdf(*mi), gb.pdf(*mi));
        let d = yields[0] * s + yields[1] * b;
        if !(d > 0.0) {
            return Err(Error::ZeroDenominator { m: *mi });
        }
        let q = [s * s / (d * d), s * b / (d * d), b * b / (d * d)];
        for k in 0..3 {
            wt[k].push(q[k]);
        }
        g.push(q);
    }
    let w = wt.map(neumaier_sum);
    let mut c = Matrix::zeros(3, 3);
    for a in 0..3 {
        for b in 0..=a {
            let v = neumaier_sum(g.iter().map(|q| q[a] * q[b]));
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    let mut weights = Vec::with_capacity(m.len());
    let mut dw = Vec::with_capacity(m.len());
    for mi in m {
        let (s, b) = (gs.pdf(*mi), gb.pdf(*mi));
        weights.push(sweight_from_w(s, b, &w));
        dw.push(sweight_w_derivatives(s, b, &w));
    }
    Ok(FixedShapeTerms {
        w,
        weights,
        dw,
        c_prime: c,
    })
}

/// `Ĉ_θ = H⁻¹ H' H⁻ᵀ - H⁻¹ E C' Eᵀ H⁻ᵀ` for weights computed with known
/// shapes. With `dw = None` (weights that do not depend on the data) only the
/// first term remains.
pub fn corrected_covariance_fixed_shapes(
    t: &[f64],
    weights: &[f64],
    dw: Option<&[[f64; 3]]>,
    c_prime: Option<&Matrix>,
    hs: &Density1D,
    theta: &[f64],
) -> Result<CorrectedCovariance> {
    if t.len() != weights.len() || dw.is_some_and(|d| d.len() != t.len()) {
        return Err(Error::input("t, weights and weight derivatives differ in length"));
    }
    if dw.is_some() != c_prime.is_some() {
        return Err(Error::input("weight derivatives and C' must be given together"));
    }
    let h = hs.with_params(theta)?;
    let p = theta.len();
    let hm = weighted_hessian(t, weights, &h);
    let hinv = inverse(&hm).map_err(|_| Error::SingularModel("weighted-fit Hessian is singular".into()))?;
    let mut hp_terms: Vec<Vec<f64>> = vec![Vec::with_capacity(t.len()); p * p];
    let mut e_terms: Vec<Vec<f64>> = vec![Vec::with_capacity(t.len()); p * 3];
    for (i, (ti, wi)) in t.iter().zip(weights).enumerate() {
        let g = h.ln_pdf_grad(*ti);
        for a in 0..p {
            for b in 0..p {
                hp_terms[a * p + b].push(wi * wi * g[a] * g[b]);
            }
            if let Some(d) = dw {
                for x in 0..3 {
                    e_terms[a * 3 + x].push(d[i][x] * g[a]);
                }
            }
        }
    }
    let hprime = Matrix::from_fn(p, p, |a, b| neumaier_sum(hp_terms[a * p + b].iter().copied()));
    let first = symmetrize(&(&hinv * hprime * hinv.transpose()));
    let reduction = match c_prime {
        Some(c) => {
            let e = Matrix::from_fn(p, 3, |a, x| neumaier_sum(e_terms[a * 3 + x].iter().copied()));
            let r = symmetrize(&(&hinv * &e * c * e.transpose() * hinv.transpose()));
            if !is_psd(&r, 1e-10) {
                return Err(Error::SingularModel("reduction term is not positive semi-definite".into()));
            }
            r
        }
        None => Matrix::zeros(p, p),
    };
    Ok(CorrectedCovariance {
        full: None,
        theta_block: &first - &reduction,
        naive: -hinv,
        first_term: Some(first),
        reduction_term: Some(reduction),
    })
}
