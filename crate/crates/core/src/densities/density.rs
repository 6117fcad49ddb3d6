//! Normalized one-dimensional densities on a finite support.
//!
//! Every density is truncated to its support and renormalized there; outside
//! the support it evaluates to zero.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::quadrature::{integrate_with_breaks, DEFAULT_TOL};
use super::Interval;
use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Normal { mu: f64, sigma: f64, ln_z: f64 },
    Exponential { lambda: f64 },
    Uniform,
    /// `k * u^(k-1)` on the unit-mapped support.
    Monomial { k: u32 },
    /// Normalized Bernstein basis polynomial `b_{k,n}`.
    Bernstein { k: u32, n: u32 },
    Histogram { edges: Vec<f64>, values: Vec<f64> },
    Mixture { fractions: Vec<f64>, components: Vec<Density1D> },
    /// Piecewise-linear table, normalized numerically.
    Table { xs: Vec<f64>, ys: Vec<f64>, norm: f64 },
}

/// A normalized probability density on a finite interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensitySpec", into = "DensitySpec")]
pub struct Density1D {
    shape: Shape,
    support: Interval,
}

/// JSON description of a density: `{kind, params, support}` plus the extra
/// arrays needed by histogram, mixture and table densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    pub support: Interval,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<DensitySpec>>,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Probability mass of a standard normal between `a` and `b`, accurate in the tails.
fn normal_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        std_normal_cdf(-a) - std_normal_cdf(-b)
    } else {
        std_normal_cdf(b) - std_normal_cdf(a)
    }
}

fn invalid(kind: &str, reason: impl Into<String>) -> Error {
    Error::InvalidDensity {
        kind: kind.to_string(),
        reason: reason.into(),
    }
}

/// `lambda / (1 - exp(-lambda * w))`, continuous through zero.
fn exp_norm(lambda: f64, w: f64) -> f64 {
    let x = lambda * w;
    if x.abs() < 1e-8 {
        (1.0 + 0.5 * x) / w
    } else {
        lambda / -(-x).exp_m1()
    }
}

/// d/dλ ln(exp_norm) = 1/λ - w/(e^{λw} - 1).
fn exp_norm_dlog(lambda: f64, w: f64) -> f64 {
    let x = lambda * w;
    if x.abs() < 1e-5 {
        w / 2.0 - lambda * w * w / 12.0
    } else {
        1.0 / lambda - w / x.exp_m1()
    }
}

fn exp_norm_d2log(lambda: f64, w: f64) -> f64 {
    let x = lambda * w;
    if x.abs() < 1e-4 {
        -w * w / 12.0 + x * x * w * w / 240.0
    } else {
        let em = x.exp_m1();
        -1.0 / (lambda * lambda) + w * w * x.exp() / (em * em)
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Density1D {
    /// Truncated normal.
    pub fn normal(mu: f64, sigma: f64, support: Interval) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
            return Err(invalid("normal", format!("need finite mu and sigma > 0, got ({mu}, {sigma})")));
        }
        let a = (support.lo - mu) / sigma;
        let b = (support.hi - mu) / sigma;
        let z = normal_mass(a, b);
        if !(z > 0.0) {
            return Err(invalid("normal", "no probability mass inside the support"));
        }
        Ok(Self {
            shape: Shape::Normal {
                mu,
                sigma,
                ln_z: z.ln(),
            },
            support,
        })
    }

    /// Truncated exponential `∝ exp(-lambda * x)`; `lambda` may be negative or zero.
    pub fn exponential(lambda: f64, support: Interval) -> Result<Self> {
        if !lambda.is_finite() || (lambda * support.width()).abs() > 700.0 {
            return Err(invalid("exponential", format!("slope {lambda} out of range")));
        }
        Ok(Self {
            shape: Shape::Exponential { lambda },
            support,
        })
    }

    pub fn uniform(support: Interval) -> Self {
        Self {
            shape: Shape::Uniform,
            support,
        }
    }

    /// `k m^(k-1)` on `[0, 1]`, affinely remapped to `support`. `k >= 1`.
    pub fn monomial(k: u32, support: Interval) -> Result<Self> {
        if k == 0 {
            return Err(invalid("monomial", "order k must be >= 1"));
        }
        Ok(Self {
            shape: Shape::Monomial { k },
            support,
        })
    }

    /// Bernstein polynomial `b_{k,n}` normalized to unit integral, `0 <= k <= n`.
    pub fn bernstein(k: u32, n: u32, support: Interval) -> Result<Self> {
        if k > n {
            return Err(invalid("bernstein", format!("need k <= n, got k={k}, n={n}")));
        }
        Ok(Self {
            shape: Shape::Bernstein { k, n },
            support,
        })
    }

    /// Piecewise-constant density with the given bin heights (renormalized).
    pub fn histogram(edges: Vec<f64>, heights: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || heights.len() + 1 != edges.len() {
            return Err(invalid("histogram", "need len(edges) = len(values) + 1 >= 2"));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) || edges.iter().any(|e| !e.is_finite()) {
            return Err(invalid("histogram", "edges must be finite and strictly increasing"));
        }
        if heights.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("histogram", "bin values must be finite and non-negative"));
        }
        let area: f64 = heights
            .iter()
            .zip(edges.windows(2))
            .map(|(v, w)| v * (w[1] - w[0]))
            .sum();
        if !(area > 0.0) {
            return Err(Error::ZeroWeight);
        }
        let support = Interval::new(edges[0], *edges.last().unwrap())?;
        Ok(Self {
            shape: Shape::Histogram {
                values: heights.iter().map(|v| v / area).collect(),
                edges,
            },
            support,
        })
    }

    /// Mixture `Σ f_k p_k`; fractions must be non-negative and are renormalized.
    pub fn mixture(fractions: Vec<f64>, components: Vec<Density1D>) -> Result<Self> {
        if fractions.is_empty() || fractions.len() != components.len() {
            return Err(invalid("mixture", "need one fraction per component"));
        }
        if fractions.iter().any(|f| !(*f >= 0.0)) {
            return Err(invalid("mixture", "fractions must be non-negative"));
        }
        let total: f64 = fractions.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroWeight);
        }
        let lo = components.iter().map(|c| c.support.lo).fold(f64::INFINITY, f64::min);
        let hi = components.iter().map(|c| c.support.hi).fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            shape: Shape::Mixture {
                fractions: fractions.iter().map(|f| f / total).collect(),
                components,
            },
            support: Interval::new(lo, hi)?,
        })
    }

    /// Piecewise-linear interpolation through `(xs, ys)`, renormalized.
    pub fn table(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(invalid("table", "need at least two points and matching lengths"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("table", "abscissae must be strictly increasing"));
        }
        if ys.iter().any(|y| !(*y >= 0.0) || !y.is_finite()) {
            return Err(invalid("table", "values must be finite and non-negative"));
        }
        let norm: f64 = xs
            .windows(2)
            .zip(ys.windows(2))
            .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
            .sum();
        if !(norm > 0.0) {
            return Err(Error::ZeroWeight);
        }
        let support = Interval::new(xs[0], *xs.last().unwrap())?;
        Ok(Self {
            shape: Shape::Table { xs, ys, norm },
            support,
        })
    }

    /// Generic constructor from a kind name and a parameter vector.
    pub fn make(kind: &str, params: &[f64], support: Interval) -> Result<Self> {
        let need = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(invalid(kind, format!("expected {n} parameters, got {}", params.len())))
            }
        };
        let as_order = |x: f64| -> Result<u32> {
            if x >= 0.0 && x.fract() == 0.0 && x < 1e6 {
                Ok(x as u32)
            } else {
                Err(invalid(kind, format!("order {x} is not a non-negative integer")))
            }
        };
        match kind {
            "normal" | "gauss" | "gaussian" => {
                need(2)?;
                Self::normal(params[0], params[1], support)
            }
            "exponential" | "exp" => {
                need(1)?;
                Self::exponential(params[0], support)
            }
            "uniform" => {
                need(0)?;
                Ok(Self::uniform(support))
            }
            "monomial" => {
                need(1)?;
                Self::monomial(as_order(params[0])?, support)
            }
            "bernstein" => {
                need(2)?;
                Self::bernstein(as_order(params[0])?, as_order(params[1])?, support)
            }
            "histogram" => {
                let n = params.len();
                let edges = support.grid(n + 1);
                Self::histogram(edges, params.to_vec())
            }
            other => Err(invalid(other, "unknown density kind")),
        }
    }

    pub fn support(&self) -> Interval {
        self.support
    }

    pub fn kind(&self) -> &'static str {
        match self.shape {
            Shape::Normal { .. } => "normal",
            Shape::Exponential { .. } => "exponential",
            Shape::Uniform => "uniform",
            Shape::Monomial { .. } => "monomial",
            Shape::Bernstein { .. } => "bernstein",
            Shape::Histogram { .. } => "histogram",
            Shape::Mixture { .. } => "mixture",
            Shape::Table { .. } => "table",
        }
    }

    /// Continuous shape parameters (those a fit may vary).
    pub fn params(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Normal { mu, sigma, .. } => vec![*mu, *sigma],
            Shape::Exponential { lambda } => vec![*lambda],
            Shape::Uniform => vec![],
            Shape::Monomial { k } => vec![*k as f64],
            Shape::Bernstein { k, n } => vec![*k as f64, *n as f64],
            Shape::Histogram { values, .. } => values.clone(),
            Shape::Mixture { fractions, .. } => fractions.clone(),
            Shape::Table { ys, .. } => ys.clone(),
        }
    }

    /// Same kind and support with new parameters.
    pub fn with_params(&self, p: &[f64]) -> Result<Self> {
        match &self.shape {
            Shape::Histogram { edges, .. } => Self::histogram(edges.clone(), p.to_vec()),
            Shape::Mixture { components, .. } => Self::mixture(p.to_vec(), components.clone()),
            Shape::Table { xs, .. } => Self::table(xs.clone(), p.to_vec()),
            _ => Self::make(self.kind(), p, self.support),
        }
    }

    /// Natural parameter bounds for fitting.
    pub fn default_bounds(&self) -> Vec<(f64, f64)> {
        let w = self.support.width();
        match &self.shape {
            Shape::Normal { .. } => vec![
                (self.support.lo - w, self.support.hi + w),
                (1e-4 * w, 10.0 * w),
            ],
            Shape::Exponential { .. } => vec![(-500.0 / w, 500.0 / w)],
            _ => vec![(0.0, f64::INFINITY); self.params().len()],
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !self.support.contains(x) {
            return 0.0;
        }
        let w = self.support.width();
        match &self.shape {
            Shape::Normal { mu, sigma, ln_z } => {
                let u = (x - mu) / sigma;
                (-0.5 * u * u - sigma.ln() - LN_SQRT_2PI - ln_z).exp()
            }
            Shape::Exponential { lambda } => {
                exp_norm(*lambda, w) * (-lambda * (x - self.support.lo)).exp()
            }
            Shape::Uniform => 1.0 / w,
            Shape::Monomial { k } => {
                let u = self.support.to_unit(x);
                *k as f64 * u.powi(*k as i32 - 1) / w
            }
            Shape::Bernstein { k, n } => {
                let u = self.support.to_unit(x);
                (*n as f64 + 1.0)
                    * binomial(*n, *k)
                    * u.powi(*k as i32)
                    * (1.0 - u).powi((*n - *k) as i32)
                    / w
            }
            Shape::Histogram { edges, values } => {
                let j = edges.partition_point(|e| *e <= x);
                let j = j.clamp(1, values.len()) - 1;
                values[j]
            }
            Shape::Mixture {
                fractions,
                components,
            } => fractions
                .iter()
                .zip(components)
                .map(|(f, c)| f * c.pdf(x))
                .sum(),
            Shape::Table { xs, ys, norm } => {
                let j = xs.partition_point(|e| *e <= x).clamp(1, xs.len() - 1);
                let (x0, x1, y0, y1) = (xs[j - 1], xs[j], ys[j - 1], ys[j]);
                (y0 + (y1 - y0) * (x - x0) / (x1 - x0)) / norm
            }
        }
    }

    /// Evaluates the density without the support cut-off (extrapolation mode).
    pub fn pdf_unbounded(&self, x: f64) -> f64 {
        if self.support.contains(x) {
            return self.pdf(x);
        }
        let w = self.support.width();
        match &self.shape {
            Shape::Normal { mu, sigma, ln_z } => {
                let u = (x - mu) / sigma;
                (-0.5 * u * u - sigma.ln() - LN_SQRT_2PI - ln_z).exp()
            }
            Shape::Exponential { lambda } => {
                exp_norm(*lambda, w) * (-lambda * (x - self.support.lo)).exp()
            }
            Shape::Mixture {
                fractions,
                components,
            } => fractions
                .iter()
                .zip(components)
                .map(|(f, c)| f * c.pdf_unbounded(x))
                .sum(),
            _ => self.pdf(x.clamp(self.support.lo, self.support.hi)),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.pdf(x).ln()
    }

    /// Gradient of `ln pdf(x)` with respect to [`Self::params`].
    pub fn ln_pdf_grad(&self, x: f64) -> Vec<f64> {
        let w = self.support.width();
        match &self.shape {
            Shape::Normal { mu, sigma, ln_z } => {
                let u = (x - mu) / sigma;
                let a = (self.support.lo - mu) / sigma;
                let b = (self.support.hi - mu) / sigma;
                let z = ln_z.exp();
                let (pa, pb) = (std_normal_pdf(a), std_normal_pdf(b));
                vec![
                    u / sigma - (pa - pb) / (sigma * z),
                    (u * u - 1.0) / sigma - (a * pa - b * pb) / (sigma * z),
                ]
            }
            Shape::Exponential { lambda } => {
                vec![exp_norm_dlog(*lambda, w) - (x - self.support.lo)]
            }
            _ => self.numeric_ln_grad(x),
        }
    }

    /// Hessian of `ln pdf(x)` with respect to [`Self::params`].
    pub fn ln_pdf_hessian(&self, x: f64) -> Vec<Vec<f64>> {
        match &self.shape {
            Shape::Exponential { lambda } => {
                vec![vec![exp_norm_d2log(*lambda, self.support.width())]]
            }
            _ => {
                // central differences of the gradient
                let p = self.params();
                let n = p.len();
                let mut h = vec![vec![0.0; n]; n];
                for j in 0..n {
                    let step = 1e-5 * p[j].abs().max(1e-2 * self.support.width().max(1.0));
                    let mut pp = p.clone();
                    pp[j] += step;
                    let mut pm = p.clone();
                    pm[j] -= step;
                    let (Ok(dp), Ok(dm)) = (self.with_params(&pp), self.with_params(&pm)) else {
                        continue;
                    };
                    let gp = dp.ln_pdf_grad(x);
                    let gm = dm.ln_pdf_grad(x);
                    for i in 0..n {
                        h[i][j] = (gp[i] - gm[i]) / (2.0 * step);
                    }
                }
                for i in 0..n {
                    for j in 0..i {
                        let s = 0.5 * (h[i][j] + h[j][i]);
                        h[i][j] = s;
                        h[j][i] = s;
                    }
                }
                h
            }
        }
    }

    fn numeric_ln_grad(&self, x: f64) -> Vec<f64> {
        let p = self.params();
        (0..p.len())
            .map(|j| {
                let step = 1e-6 * p[j].abs().max(1e-3);
                let mut pp = p.clone();
                pp[j] += step;
                let mut pm = p.clone();
                pm[j] -= step;
                match (self.with_params(&pp), self.with_params(&pm)) {
                    (Ok(a), Ok(b)) => (a.ln_pdf(x) - b.ln_pdf(x)) / (2.0 * step),
                    _ => f64::NAN,
                }
            })
            .collect()
    }

    /// Gradient of `pdf(x)` with respect to [`Self::params`].
    pub fn pdf_grad(&self, x: f64) -> Vec<f64> {
        let v = self.pdf(x);
        if v == 0.0 {
            return vec![0.0; self.params().len()];
        }
        self.ln_pdf_grad(x).into_iter().map(|g| g * v).collect()
    }

    /// Points where the density may be discontinuous or have a kink.
    pub fn breaks(&self) -> Vec<f64> {
        let mut b = vec![self.support.lo, self.support.hi];
        match &self.shape {
            Shape::Histogram { edges, .. } => b.extend_from_slice(edges),
            Shape::Table { xs, .. } => b.extend_from_slice(xs),
            Shape::Mixture { components, .. } => {
                for c in components {
                    b.extend(c.breaks());
                }
            }
            _ => {}
        }
        b
    }

    /// Numerical integral over the support (should be 1).
    pub fn integral(&self, tol: f64) -> Result<f64> {
        integrate_with_breaks(|x| self.pdf(x), self.support, &self.breaks(), tol)
    }

    /// Upper bound of the density on its support, used by samplers.
    pub fn max_value(&self) -> f64 {
        let w = self.support.width();
        match &self.shape {
            Shape::Normal { mu, .. } => self.pdf(mu.clamp(self.support.lo, self.support.hi)),
            Shape::Exponential { .. } => self.pdf(self.support.lo).max(self.pdf(self.support.hi)),
            Shape::Uniform => 1.0 / w,
            Shape::Monomial { k } => *k as f64 / w,
            Shape::Histogram { values, .. } => values.iter().copied().fold(0.0, f64::max),
            Shape::Table { ys, norm, .. } => ys.iter().copied().fold(0.0, f64::max) / norm,
            Shape::Mixture {
                fractions,
                components,
            } => fractions
                .iter()
                .zip(components)
                .map(|(f, c)| f * c.max_value())
                .sum(),
            Shape::Bernstein { .. } => super::envelope_max(|x| self.pdf(x), self.support),
        }
    }

    /// Draws one variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let iv = self.support;
        let w = iv.width();
        match &self.shape {
            Shape::Normal { mu, sigma, ln_z } => {
                let a = (iv.lo - mu) / sigma;
                let b = (iv.hi - mu) / sigma;
                if *ln_z > (0.2f64).ln() {
                    loop {
                        let x: f64 = mu + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
                        if iv.contains(x) {
                            return x;
                        }
                    }
                }
                // inverse CDF on the tail side that keeps precision
                let u: f64 = rng.random();
                let dist = statrs::distribution::Normal::standard();
                use statrs::distribution::ContinuousCDF;
                let x = if a > 0.0 {
                    let (ua, ub) = (std_normal_cdf(-a), std_normal_cdf(-b));
                    -dist.inverse_cdf(ua + u * (ub - ua))
                } else {
                    let (ua, ub) = (std_normal_cdf(a), std_normal_cdf(b));
                    dist.inverse_cdf(ua + u * (ub - ua))
                };
                (mu + sigma * x).clamp(iv.lo, iv.hi)
            }
            Shape::Exponential { lambda } => {
                let u: f64 = rng.random();
                let x = lambda * w;
                if x.abs() < 1e-10 {
                    iv.lo + u * w
                } else {
                    // inverse of (1 - e^{-λy}) / (1 - e^{-λw})
                    let y = -(u * (-x).exp_m1()).ln_1p() / lambda;
                    (iv.lo + y).clamp(iv.lo, iv.hi)
                }
            }
            Shape::Uniform => iv.lo + w * rng.random::<f64>(),
            Shape::Monomial { k } => iv.lo + w * rng.random::<f64>().powf(1.0 / *k as f64),
            Shape::Histogram { edges, values } => {
                let masses: Vec<f64> = values
                    .iter()
                    .zip(edges.windows(2))
                    .map(|(v, e)| v * (e[1] - e[0]))
                    .collect();
                let j = pick(rng, &masses);
                edges[j] + (edges[j + 1] - edges[j]) * rng.random::<f64>()
            }
            Shape::Mixture {
                fractions,
                components,
            } => components[pick(rng, fractions)].sample(rng),
            Shape::Bernstein { .. } | Shape::Table { .. } => {
                let env = 1.2 * self.max_value();
                loop {
                    let x = iv.lo + w * rng.random::<f64>();
                    if rng.random::<f64>() * env <= self.pdf(x) {
                        return x;
                    }
                }
            }
        }
    }
}

fn pick<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

impl TryFrom<DensitySpec> for Density1D {
    type Error = Error;
    fn try_from(s: DensitySpec) -> Result<Self> {
        match s.kind.as_str() {
            "histogram" => {
                let edges = s
                    .edges
                    .unwrap_or_else(|| s.support.grid(s.params.len() + 1));
                Density1D::histogram(edges, s.params)
            }
            "mixture" => {
                let comps = s
                    .components
                    .ok_or_else(|| invalid("mixture", "missing components"))?
                    .into_iter()
                    .map(Density1D::try_from)
                    .collect::<Result<Vec<_>>>()?;
                Density1D::mixture(s.params, comps)
            }
            "table" => {
                let xs = s.xs.ok_or_else(|| invalid("table", "missing xs"))?;
                Density1D::table(xs, s.params)
            }
            kind => Density1D::make(kind, &s.params, s.support),
        }
    }
}

impl From<Density1D> for DensitySpec {
    fn from(d: Density1D) -> Self {
        let mut spec = DensitySpec {
            kind: d.kind().to_string(),
            params: d.params(),
            support: d.support,
            edges: None,
            xs: None,
            components: None,
        };
        match d.shape {
            Shape::Histogram { edges, .. } => spec.edges = Some(edges),
            Shape::Table { xs, .. } => spec.xs = Some(xs),
            Shape::Mixture { components, .. } => {
                spec.components = Some(components.into_iter().map(DensitySpec::from).collect())
            }
            _ => {}
        }
        spec
    }
}

/// `make_density`: builds a density of the named kind, normalized on `support`.
pub fn make_density(kind: &str, params: &[f64], support: Interval) -> Result<Density1D> {
    Density1D::make(kind, params, support)
}

/// Normalization check helper.
pub fn is_normalized(d: &Density1D) -> bool {
    d.integral(DEFAULT_TOL)
        .map(|v| (v - 1.0).abs() <= 10.0 * DEFAULT_TOL + 1e-12)
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn unit() -> Interval {
        Interval::unit()
    }

    #[test]
    fn uniform_is_constant() {
        let d = make_density("uniform", &[], unit()).unwrap();
        for x in unit().grid(11) {
            assert_eq!(d.pdf(x), 1.0);
        }
        assert_eq!(d.pdf(1.5), 0.0);
    }

    #[test]
    fn wide_normal_approaches_uniform() {
        let d = Density1D::normal(0.5, 1e6, unit()).unwrap();
        for x in unit().grid(7) {
            assert!((d.pdf(x) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn truncated_exponential_closed_form() {
        for lam in [-3.0, -0.5, 1e-12, 0.7, 4.0] {
            let d = Density1D::exponential(lam, unit()).unwrap();
            for m in [0.0, 0.3, 0.9] {
                let expect = if lam.abs() < 1e-9 {
                    1.0
                } else {
                    lam * (-lam * m).exp() / (1.0 - (-lam).exp())
                };
                assert!((d.pdf(m) - expect).abs() < 1e-12 * expect.max(1.0), "lam={lam} m={m}");
            }
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(Density1D::normal(0.0, 0.0, unit()).is_err());
        assert!(Density1D::normal(0.0, -1.0, unit()).is_err());
        assert!(make_density("normal", &[0.0], unit()).is_err());
        assert!(make_density("nonsense", &[], unit()).is_err());
        assert!(Density1D::monomial(0, unit()).is_err());
        assert!(Density1D::histogram(vec![0.0, 1.0], vec![0.0]).is_err());
    }

    #[test]
    fn every_kind_integrates_to_one() {
        let iv = Interval::new(-1.0, 2.0).unwrap();
        let ds = vec![
            Density1D::normal(0.3, 0.2, iv).unwrap(),
            Density1D::normal(5.0, 1.0, iv).unwrap(),
            Density1D::exponential(2.5, iv).unwrap(),
            Density1D::exponential(-1.5, iv).unwrap(),
            Density1D::uniform(iv),
            Density1D::monomial(4, iv).unwrap(),
            Density1D::bernstein(2, 5, iv).unwrap(),
            Density1D::histogram(vec![-1.0, 0.0, 0.5, 2.0], vec![1.0, 3.0, 0.5]).unwrap(),
            Density1D::table(vec![-1.0, 0.0, 2.0], vec![0.0, 2.0, 1.0]).unwrap(),
            Density1D::mixture(
                vec![0.3, 0.7],
                vec![Density1D::normal(0.0, 0.3, iv).unwrap(), Density1D::uniform(iv)],
            )
            .unwrap(),
        ];
        for d in &ds {
            assert!(is_normalized(d), "{} not normalized", d.kind());
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let iv = Interval::new(0.0, 1.0).unwrap();
        let cases = [
            Density1D::normal(0.4, 0.15, iv).unwrap(),
            Density1D::normal(1.2, 0.3, iv).unwrap(),
            Density1D::exponential(2.0, iv).unwrap(),
            Density1D::exponential(-0.7, iv).unwrap(),
            Density1D::exponential(1e-7, iv).unwrap(),
        ];
        for d in &cases {
            for x in [0.05, 0.4, 0.93] {
                let g = d.ln_pdf_grad(x);
                let n = d.numeric_ln_grad(x);
                for (a, b) in g.iter().zip(&n) {
                    assert!((a - b).abs() < 1e-6 * a.abs().max(1.0), "{}: {a} vs {b}", d.kind());
                }
            }
        }
        let d = Density1D::exponential(1.3, iv).unwrap();
        let h = d.ln_pdf_hessian(0.2)[0][0];
        let step = 1e-5;
        let num = (Density1D::exponential(1.3 + step, iv).unwrap().ln_pdf_grad(0.2)[0]
            - Density1D::exponential(1.3 - step, iv).unwrap().ln_pdf_grad(0.2)[0])
            / (2.0 * step);
        assert!((h - num).abs() < 1e-7);
    }

    #[test]
    fn json_round_trip() {
        let iv = Interval::new(0.0, 3.0).unwrap();
        let d = Density1D::mixture(
            vec![0.25, 0.75],
            vec![
                Density1D::exponential(2.0, iv).unwrap(),
                Density1D::histogram(vec![0.0, 1.0, 3.0], vec![2.0, 1.0]).unwrap(),
            ],
        )
        .unwrap();
        let s = serde_json::to_string(&d).unwrap();
        let back: Density1D = serde_json::from_str(&s).unwrap();
        assert_eq!(d, back);
        let j: Density1D =
            serde_json::from_str(r#"{"kind":"normal","params":[0.5,0.1],"support":[0,1]}"#).unwrap();
        assert_eq!(j.params(), vec![0.5, 0.1]);
    }

    #[test]
    fn samplers_stay_in_support_and_match_mean() {
        let iv = Interval::new(0.0, 3.0).unwrap();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        let d = Density1D::exponential(2.0, iv).unwrap();
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        assert!(xs.iter().all(|x| iv.contains(*x)));
        let mean = xs.iter().sum::<f64>() / n as f64;
        let exact = super::super::quadrature::integrate(|x| x * d.pdf(x), iv, 1e-12).unwrap();
        assert!((mean - exact).abs() < 5.0 * 0.5 / (n as f64).sqrt());
        // far-tail truncated normal goes through the inverse-CDF path
        let t = Density1D::normal(-1.0, 0.3, iv).unwrap();
        for _ in 0..1000 {
            assert!(iv.contains(t.sample(&mut rng)));
        }
    }
}
