use serde::{Deserialize, Serialize};

use super::{Density1D, Interval};
use crate::error::{Error, Result};

/// Weighted 1-D histogram keeping the sum of weights and sum of squared
/// weights per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram1D {
    pub edges: Vec<f64>,
    pub contents: Vec<f64>,
    pub sumw2: Vec<f64>,
}

impl Histogram1D {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::input("histogram edges must be strictly increasing"));
        }
        let n = edges.len() - 1;
        Ok(Self {
            edges,
            contents: vec![0.0; n],
            sumw2: vec![0.0; n],
        })
    }

    pub fn uniform(bins: usize, range: Interval) -> Result<Self> {
        if bins == 0 {
            return Err(Error::input("need at least one bin"));
        }
        Self::new(range.grid(bins + 1))
    }

    pub fn n_bins(&self) -> usize {
        self.contents.len()
    }

    pub fn range(&self) -> Interval {
        Interval {
            lo: self.edges[0],
            hi: *self.edges.last().unwrap(),
        }
    }

    /// Bin index of `x`; the upper edge belongs to the last bin.
    pub fn find_bin(&self, x: f64) -> Option<usize> {
        if !self.range().contains(x) {
            return None;
        }
        let j = self.edges.partition_point(|e| *e <= x);
        Some(j.clamp(1, self.n_bins()) - 1)
    }

    /// Adds `w` at `x`; returns false if `x` is out of range.
    pub fn fill(&mut self, x: f64, w: f64) -> bool {
        match self.find_bin(x) {
            Some(j) => {
                self.contents[j] += w;
                self.sumw2[j] += w * w;
                true
            }
            None => false,
        }
    }

    pub fn total(&self) -> f64 {
        self.contents.iter().sum()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Piecewise-constant density with empty (or negative) bins floored at
    /// `1e-3` times the smallest positive bin height.
    pub fn to_density(&self) -> Result<Density1D> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::ZeroWeight);
        }
        let heights: Vec<f64> = self
            .contents
            .iter()
            .zip(self.widths())
            .map(|(c, w)| c / w)
            .collect();
        let min_pos = heights
            .iter()
            .copied()
            .filter(|h| *h > 0.0)
            .fold(f64::INFINITY, f64::min);
        if !min_pos.is_finite() {
            return Err(Error::ZeroWeight);
        }
        let floor = 1e-3 * min_pos;
        let heights = heights.into_iter().map(|h| h.max(floor)).collect();
        Density1D::histogram(self.edges.clone(), heights)
    }
}

/// Result of [`histogram_density`].
#[derive(Debug, Clone)]
pub struct HistogramDensity {
    pub density: Density1D,
    pub histogram: Histogram1D,
    pub dropped: usize,
}

/// Piecewise-constant density estimate from weighted samples.
///
/// Samples outside `support` are dropped and counted.
pub fn histogram_density(
    samples: &[f64],
    weights: &[f64],
    bins: usize,
    support: Interval,
) -> Result<HistogramDensity> {
    if samples.len() != weights.len() {
        return Err(Error::input("samples and weights differ in length"));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::input("weights must be finite"));
    }
    let mut h = Histogram1D::uniform(bins, support)?;
    let mut dropped = 0;
    for (x, w) in samples.iter().zip(weights) {
        if !h.fill(*x, *w) {
            dropped += 1;
        }
    }
    Ok(HistogramDensity {
        density: h.to_density()?,
        histogram: h,
        dropped,
    })
}
