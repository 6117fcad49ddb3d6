//! Finite-difference derivatives and accurate summation.

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, Matrix};

/// Compensated (Neumaier) summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in it {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

fn probe<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { point: x.to_vec() })
    }
}

/// Hessian by central second differences with per-parameter step
/// `rel_step * max(|p_i|, 1)`, symmetrized.
pub fn numerical_hessian<F: Fn(&[f64]) -> f64>(f: F, params: &[f64], rel_step: f64) -> Result<Matrix> {
    let n = params.len();
    let h: Vec<f64> = params.iter().map(|p| rel_step * p.abs().max(1.0)).collect();
    let f0 = probe(&f, params)?;
    let mut x = params.to_vec();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        x[i] = params[i] + h[i];
        let fp = probe(&f, &x)?;
        x[i] = params[i] - h[i];
        let fm = probe(&f, &x)?;
        x[i] = params[i];
        out[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| -> Result<f64> {
                x[i] = params[i] + si * h[i];
                x[j] = params[j] + sj * h[j];
                let v = probe(&f, &x);
                x[i] = params[i];
                x[j] = params[j];
                v
            };
            let pp = corner(1.0, 1.0)?;
            let pm = corner(1.0, -1.0)?;
            let mp = corner(-1.0, 1.0)?;
            let mm = corner(-1.0, -1.0)?;
            let v = (pp - pm - mp + mm) / (4.0 * h[i] * h[j]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(symmetrize(&out))
}

/// Central-difference gradient; falls back to one-sided differences next to
/// a bound.
pub fn numerical_gradient<F: Fn(&[f64]) -> f64>(
    f: F,
    params: &[f64],
    bounds: Option<&[(f64, f64)]>,
) -> Result<Vec<f64>> {
    let mut x = params.to_vec();
    let f0 = probe(&f, params)?;
    let mut g = vec![0.0; params.len()];
    for i in 0..params.len() {
        let h = 6e-6 * params[i].abs().max(1.0);
        let (lo, hi) = bounds.map_or((f64::NEG_INFINITY, f64::INFINITY), |b| b[i]);
        let up = params[i] + h <= hi;
        let down = params[i] - h >= lo;
        g[i] = if up && down {
            x[i] = params[i] + h;
            let fp = probe(&f, &x)?;
            x[i] = params[i] - h;
            let fm = probe(&f, &x)?;
            (fp - fm) / (2.0 * h)
        } else if up {
            x[i] = params[i] + h;
            (probe(&f, &x)? - f0) / h
        } else {
            x[i] = params[i] - h;
            (f0 - probe(&f, &x)?) / h
        };
        x[i] = params[i];
    }
    Ok(g)
}
