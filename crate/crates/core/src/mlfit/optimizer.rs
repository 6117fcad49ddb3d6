//! Box-constrained quasi-Newton minimizer (projected BFGS) with a Newton
//! polishing stage.

use std::cell::Cell;

use super::numdiff::{numerical_gradient, numerical_hessian};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A scalar objective to be minimized.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], bounds: &[(f64, f64)]) -> Result<Vec<f64>> {
        numerical_gradient(|p| self.value(p), x, Some(bounds))
    }

    fn hessian(&self, x: &[f64]) -> Result<Matrix> {
        numerical_hessian(|p| self.value(p), x, 1e-5)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    /// Projected-gradient infinity-norm threshold.
    pub gtol: f64,
    /// Relative step threshold, scaled by `max(|x_i|, 1)`.
    pub xtol: f64,
    pub max_iter: usize,
    pub newton_polish: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            gtol: 1e-6,
            xtol: 1e-9,
            max_iter: 1000,
            newton_polish: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fval: f64,
    pub grad: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub n_calls: usize,
}

struct Counted<'a> {
    inner: &'a dyn Objective,
    calls: Cell<usize>,
}

impl Objective for Counted<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.calls.set(self.calls.get() + 1);
        self.inner.value(x)
    }
    fn gradient(&self, x: &[f64], b: &[(f64, f64)]) -> Result<Vec<f64>> {
        self.calls.set(self.calls.get() + 1);
        self.inner.gradient(x, b)
    }
    fn hessian(&self, x: &[f64]) -> Result<Matrix> {
        self.calls.set(self.calls.get() + 1);
        self.inner.hessian(x)
    }
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Variables held at a bound by a gradient pointing outward.
fn free_mask(x: &[f64], g: &[f64], bounds: &[(f64, f64)]) -> Vec<bool> {
    x.iter()
        .zip(g)
        .zip(bounds)
        .map(|((v, gi), (lo, hi))| !((*v <= *lo && *gi > 0.0) || (*v >= *hi && *gi < 0.0)))
        .collect()
}

fn projected_norm(g: &[f64], free: &[bool]) -> f64 {
    g.iter()
        .zip(free)
        .filter(|(_, f)| **f)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max)
}

fn rel_step(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(1.0))
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Hessian scaled to unit diagonal; `None` when a diagonal entry is not
/// positive.
pub(crate) fn unit_diagonal(h: &Matrix) -> Option<Matrix> {
    let d: Vec<f64> = (0..h.nrows()).map(|i| h[(i, i)]).collect();
    if d.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    Some(Matrix::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)] / (d[i] * d[j]).sqrt()))
}

/// True if `h` is positive definite with scaled condition number below `max_cond`.
pub(crate) fn well_conditioned_pd(h: &Matrix, max_cond: f64) -> bool {
    let Some(s) = unit_diagonal(h) else {
        return false;
    };
    let eig = s.symmetric_eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(0.0, f64::max);
    min > 0.0 && max / min < max_cond
}

fn initial_inverse(h: Option<&Matrix>, n: usize) -> Matrix {
    if let Some(h) = h {
        if well_conditioned_pd(h, 1e12) {
            if let Some(ch) = h.clone().cholesky() {
                return ch.inverse();
            }
        }
        let mut b = Matrix::identity(n, n);
        for i in 0..n {
            let d = h[(i, i)];
            if d > 0.0 && d.is_finite() {
                b[(i, i)] = 1.0 / d;
            }
        }
        return b;
    }
    Matrix::identity(n, n)
}

fn submatrix(m: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// Minimizes `obj` inside the box `bounds`, starting from `x0`.
pub fn minimize(
    obj: &dyn Objective,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &MinimizeOptions,
) -> Result<Minimum> {
    let n = x0.len();
    if bounds.len() != n {
        return Err(Error::input("bounds and start point differ in length"));
    }
    for (i, (v, (lo, hi))) in x0.iter().zip(bounds).enumerate() {
        if !(v >= lo && v <= hi) {
            return Err(Error::input(format!(
                "start value {v} of parameter {i} outside bounds [{lo}, {hi}]"
            )));
        }
    }
    let obj = Counted {
        inner: obj,
        calls: Cell::new(0),
    };
    let mut x = x0.to_vec();
    let mut f = obj.value(&x);
    if !f.is_finite() {
        return Err(Error::NonFinite { point: x });
    }
    let mut g = obj.gradient(&x, bounds)?;
    let h0 = obj.hessian(&x).ok();
    let mut binv = initial_inverse(h0.as_ref(), n);
    let mut fresh = true;
    let mut iterations = 0;
    let mut last_step = f64::INFINITY;

    while iterations < opts.max_iter {
        let free = free_mask(&x, &g, bounds);
        let pg = projected_norm(&g, &free);
        if pg < opts.gtol || last_step < opts.xtol {
            break;
        }
        iterations += 1;
        let mut d = vec![0.0; n];
        for i in 0..n {
            if free[i] {
                d[i] = -(0..n).filter(|j| free[*j]).map(|j| binv[(i, j)] * g[j]).sum::<f64>();
            }
        }
        if dot(&d, &g) >= 0.0 {
            binv = initial_inverse(h0.as_ref(), n);
            fresh = true;
            for i in 0..n {
                d[i] = if free[i] { -binv[(i, i)] * g[i] } else { 0.0 };
            }
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            project(&mut xn, bounds);
            let fnew = obj.value(&xn);
            let delta: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let slope = dot(&g, &delta);
            if fnew.is_finite() && fnew <= f + 1e-4 * slope.min(0.0) + 4.0 * f64::EPSILON * f.abs() {
                accepted = Some((xn, fnew));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            if fresh {
                break;
            }
            binv = initial_inverse(h0.as_ref(), n);
            fresh = true;
            continue;
        };
        let gn = obj.gradient(&xn, bounds)?;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        last_step = rel_step(&xn, &x);
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            let rho = 1.0 / sy;
            let sv = nalgebra::DVector::from_column_slice(&s);
            let yv = nalgebra::DVector::from_column_slice(&y);
            let eye = Matrix::identity(n, n);
            let left = &eye - rho * &sv * yv.transpose();
            let right = &eye - rho * &yv * sv.transpose();
            binv = &left * &binv * &right + rho * &sv * sv.transpose();
            fresh = false;
        }
        x = xn;
        f = fnew;
        g = gn;
    }

    let mut polished = false;
    if opts.newton_polish {
        for _ in 0..50 {
            let free = free_mask(&x, &g, bounds);
            let Ok(h) = obj.hessian(&x) else { break };
            // parameters the objective does not depend on are left alone
            let idx: Vec<usize> = (0..n)
                .filter(|i| free[*i] && !(h[(*i, *i)] == 0.0 && g[*i] == 0.0))
                .collect();
            if idx.is_empty() {
                polished = true;
                break;
            }
            let hf = submatrix(&h, &idx);
            if !well_conditioned_pd(&hf, 1e13) {
                break;
            }
            let Some(ch) = hf.cholesky() else { break };
            let gf = nalgebra::DVector::from_iterator(idx.len(), idx.iter().map(|i| g[*i]));
            let step = ch.solve(&gf);
            let mut alpha = 1.0;
            let mut moved = None;
            for _ in 0..30 {
                let mut xn = x.clone();
                for (a, i) in idx.iter().enumerate() {
                    xn[*i] -= alpha * step[a];
                }
                project(&mut xn, bounds);
                let fnew = obj.value(&xn);
                if fnew.is_finite() && fnew <= f + 8.0 * f64::EPSILON * f.abs().max(1.0) {
                    moved = Some((xn, fnew));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((xn, fnew)) = moved else { break };
            let st = rel_step(&xn, &x);
            x = xn;
            f = fnew;
            g = obj.gradient(&x, bounds)?;
            if st < opts.xtol {
                polished = true;
                break;
            }
        }
    }
    let free = free_mask(&x, &g, bounds);
    let pg = projected_norm(&g, &free);
    // a vanishing Newton step certifies the minimum even when rounding keeps
    // the gradient just above `gtol`
    let converged = pg < opts.gtol || polished;
    Ok(Minimum {
        x,
        fval: f,
        grad: g,
        converged,
        iterations,
        n_calls: obj.calls.get(),
    })
}
