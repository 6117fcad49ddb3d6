use serde::{Deserialize, Serialize};

use crate::mlfit::neumaier_sum;

/// `(estimate - truth) / sigma`; NaN unless `sigma > 0`.
pub fn pull(estimate: f64, truth: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        (estimate - truth) / sigma
    } else {
        f64::NAN
    }
}

/// Mean, width and 68% coverage of a set of pulls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PullSummary {
    pub n: usize,
    pub mean: f64,
    /// Standard error of the mean.
    pub mean_error: f64,
    /// Sample standard deviation.
    pub width: f64,
    /// Approximate standard error of the width, `width / √(2(n-1))`.
    pub width_error: f64,
    /// Fraction of pulls with `|pull| < 1`.
    pub coverage68: f64,
}

impl PullSummary {
    /// Summary of the finite entries of `pulls`; `None` with fewer than two.
    pub fn from_pulls(pulls: &[f64]) -> Option<Self> {
        let p: Vec<f64> = pulls.iter().copied().filter(|v| v.is_finite()).collect();
        let n = p.len();
        if n < 2 {
            return None;
        }
        let nf = n as f64;
        let mean = neumaier_sum(p.iter().copied()) / nf;
        let var = neumaier_sum(p.iter().map(|v| (v - mean) * (v - mean))) / (nf - 1.0);
        let width = var.sqrt();
        Some(Self {
            n,
            mean,
            mean_error: width / nf.sqrt(),
            width,
            width_error: width / (2.0 * (nf - 1.0)).sqrt(),
            coverage68: p.iter().filter(|v| v.abs() < 1.0).count() as f64 / nf,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_pulls() {
        assert_eq!(pull(2.0, 2.0, 0.1), 0.0);
        assert!((pull(2.1, 2.0, 0.1) - 1.0).abs() < 1e-12);
        assert!(pull(1.0, 0.0, 0.0).is_nan());
        let s = PullSummary::from_pulls(&[-1.5, -0.5, 0.5, 1.5, f64::NAN]).unwrap();
        assert_eq!(s.n, 4);
        assert_eq!(s.mean, 0.0);
        assert!((s.width - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(s.coverage68, 0.5);
        assert!(PullSummary::from_pulls(&[1.0]).is_none());
    }
}
