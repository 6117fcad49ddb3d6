use super::build::{build_cow, efficiencies, estimate_fractions};
use super::spec::{CowSpec, VarianceFn};
use crate::densities::{Density1D, EfficiencyMap, Histogram1D, Interval, DEFAULT_TOL};
use crate::error::{Error, Result};

/// `q(m)` estimate: histogram of `m` with weights `1/ε²`, scaled to unit total.
pub fn variance_fn_qm(
    m: &[f64],
    t: &[f64],
    eff: Option<&EfficiencyMap>,
    bins: usize,
    support: Interval,
) -> Result<Histogram1D> {
    let e = efficiencies(eff, m, t)?;
    let mut h = Histogram1D::uniform(bins, support)?;
    for (mi, ei) in m.iter().zip(e) {
        h.fill(*mi, 1.0 / (ei * ei));
    }
    let total = h.total();
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }
    for (c, s) in h.contents.iter_mut().zip(h.sumw2.iter_mut()) {
        *c /= total;
        *s /= total * total;
    }
    Ok(h)
}

/// Lower limit applied to fractions when forming `I(m)` during iteration.
pub const FRACTION_FLOOR: f64 = 1e-6;

/// Outcome of [`variance_fn_ml_iterative`].
#[derive(Debug, Clone)]
pub struct MlIteration {
    pub z: Vec<f64>,
    /// `I(m) = Σ_k ẑ_k g_k(m)` at the final fractions.
    pub variance_fn: VarianceFn,
    pub iterations: usize,
    /// Some intermediate fraction left `[0, 1]` and was clipped.
    pub clipped: bool,
    /// Fractions after every iteration.
    pub trace: Vec<Vec<f64>>,
}

/// Iterates `I(m) = Σ ẑ_k g_k(m)` → weights → `ẑ` from the efficiency-corrected
/// weight sums, starting at `ẑ_k = 1/n`, until `max_k |Δẑ_k| < tol`.
///
/// `W` is always computed by quadrature; its fixed point is the
/// `1/ε`-weighted maximum-likelihood estimate of the fractions.
pub fn variance_fn_ml_iterative(
    basis: &[Density1D],
    m: &[f64],
    t: &[f64],
    eff: Option<&EfficiencyMap>,
    max_iter: usize,
    tol: f64,
) -> Result<MlIteration> {
    if max_iter == 0 {
        return Err(Error::input("max_iter must be at least 1"));
    }
    if basis.is_empty() {
        return Err(Error::input("basis is empty"));
    }
    let n = basis.len();
    let support = basis[0].support();
    let mut z = vec![1.0 / n as f64; n];
    let mut trace = vec![];
    let mut clipped = false;
    for it in 1..=max_iter {
        // a small floor keeps I(m) positive once a fraction has been clipped to zero
        let floored: Vec<f64> = z.iter().map(|v| v.max(FRACTION_FLOOR)).collect();
        let spec = CowSpec::new(basis.to_vec(), VarianceFn::Mixture(floored), support);
        let cow = build_cow(spec, DEFAULT_TOL * 1e-3)?;
        let (mut zn, _) = estimate_fractions(&cow, eff, m, t)?;
        for v in zn.iter_mut() {
            if !(0.0..=1.0).contains(v) {
                *v = v.clamp(0.0, 1.0);
                clipped = true;
            }
        }
        let step = zn
            .iter()
            .zip(&z)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        trace.push(zn.clone());
        z = zn;
        if step < tol {
            return Ok(MlIteration {
                variance_fn: VarianceFn::Mixture(z.clone()),
                z,
                iterations: it,
                clipped,
                trace,
            });
        }
    }
    Err(Error::NotConverged(format!(
        "fraction iteration did not settle in {max_iter} steps; trace: {trace:?}"
    )))
}
