use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kendall rank correlation of two samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    /// Tie-corrected `τ_b`.
    pub tau: f64,
    pub n: usize,
    /// Standard deviation of `τ` for independent samples without ties,
    /// `√(2(2n+5) / (9n(n-1)))`.
    pub approx_sigma: f64,
}

impl IndependenceReport {
    /// `τ / σ`.
    pub fn significance(&self) -> f64 {
        self.tau / self.approx_sigma
    }
}

fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` and returns the number of inversions (swaps of a bubble sort).
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall's `τ_b` in `O(n log n)` by merge-sort counting.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<IndependenceReport> {
    if x.len() != y.len() {
        return Err(Error::input("x and y differ in length"));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::input("Kendall tau needs at least two pairs"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::input("NaN in Kendall tau input"));
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let n1 = tied_pairs(&xs);
    let n3 = tied_pairs(&pairs);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = Vec::with_capacity(n);
    let swaps = merge_count(&mut ys, &mut buf);
    let n2 = tied_pairs(&ys);
    if n1 == n0 || n2 == n0 {
        return Err(Error::AllTied);
    }
    // concordant minus discordant pairs
    let s = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    let (a, b) = ((n0 - n1) as f64, (n0 - n2) as f64);
    let tau = if a == b { s / a } else { s / (a * b).sqrt() };
    let nf = n as f64;
    Ok(IndependenceReport {
        tau: tau.clamp(-1.0, 1.0),
        n,
        approx_sigma: (2.0 * (2.0 * nf + 5.0) / (9.0 * nf * (nf - 1.0))).sqrt(),
    })
}
