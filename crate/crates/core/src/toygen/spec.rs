use serde::{Deserialize, Serialize};

use crate::densities::{integrate, Density1D, EfficiencyMap, Interval, DEFAULT_TOL};
use crate::error::{Error, Result};

/// Which pseudo-experiment setup to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Study {
    /// Two factorising components in `(m, t)`.
    #[default]
    Simple,
    /// Three components in `m` with a true label and two banded control
    /// variables `(u, v)`.
    Multicomponent,
    /// Background whose `m` slope depends on `t` and whose `t` mean and
    /// width depend on `m`, optionally seen through an efficiency.
    Nonfactorising,
}

/// Component shapes of the two-component studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyShapes {
    pub m_range: (f64, f64),
    pub t_range: (f64, f64),
    pub signal_m_mean: f64,
    pub signal_m_width: f64,
    pub background_m_slope: f64,
    pub signal_t_slope: f64,
    pub background_t_mean: f64,
    pub background_t_width: f64,
}

impl Default for ToyShapes {
    fn default() -> Self {
        Self {
            m_range: (0.0, 1.0),
            t_range: (0.0, 3.0),
            signal_m_mean: 0.5,
            signal_m_width: 0.05,
            background_m_slope: 1.5,
            signal_t_slope: 2.0,
            background_t_mean: 1.0,
            background_t_width: 0.4,
        }
    }
}

impl ToyShapes {
    pub fn m_interval(&self) -> Result<Interval> {
        Interval::new(self.m_range.0, self.m_range.1)
    }

    pub fn t_interval(&self) -> Result<Interval> {
        Interval::new(self.t_range.0, self.t_range.1)
    }

    pub fn signal_m(&self) -> Result<Density1D> {
        Density1D::normal(self.signal_m_mean, self.signal_m_width, self.m_interval()?)
    }

    pub fn background_m(&self) -> Result<Density1D> {
        Density1D::exponential(self.background_m_slope, self.m_interval()?)
    }

    pub fn signal_t(&self) -> Result<Density1D> {
        Density1D::exponential(self.signal_t_slope, self.t_interval()?)
    }

    pub fn background_t(&self) -> Result<Density1D> {
        Density1D::normal(self.background_t_mean, self.background_t_width, self.t_interval()?)
    }
}

/// Coupling constants of the non-factorising background
/// `b(m, t) ∝ exp(-λ(t) m) N(t; μ(m), σ(m))` with
/// `λ(t) = λ₀ + slope_coupling (t - t_ref)`,
/// `μ(m) = μ₀ + mean_coupling (m - m_ref)` and
/// `σ(m) = σ₀ + width_coupling (m - m_ref)`; `λ₀`, `μ₀`, `σ₀` come from
/// [`ToyShapes`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Coupling {
    pub slope_coupling: f64,
    pub mean_coupling: f64,
    pub width_coupling: f64,
    pub t_ref: f64,
    pub m_ref: f64,
}

impl Default for Coupling {
    fn default() -> Self {
        Self {
            slope_coupling: 1.5,
            mean_coupling: 1.0,
            width_coupling: 0.3,
            t_ref: 1.0,
            m_ref: 0.5,
        }
    }
}

impl Coupling {
    pub fn none() -> Self {
        Self {
            slope_coupling: 0.0,
            mean_coupling: 0.0,
            width_coupling: 0.0,
            ..Self::default()
        }
    }
}

/// The default efficiency of the non-factorising study.
pub fn default_efficiency() -> EfficiencyMap {
    EfficiencyMap::Bilinear {
        coeffs: [0.5, 0.3, 0.15, -0.1],
    }
}

/// Configuration of one pseudo-experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToySpec {
    pub study: Study,
    /// Number of observed events (the Poisson mean when `poisson` is set).
    pub n_events: usize,
    /// Component fractions, signal first; `None` takes the study default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fractions: Option<Vec<f64>>,
    pub poisson: bool,
    pub shapes: ToyShapes,
    pub coupling: Coupling,
    /// Apply `efficiency_map` (non-factorising study only).
    pub efficiency: bool,
    pub efficiency_map: EfficiencyMap,
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            study: Study::Simple,
            n_events: 2500,
            fractions: None,
            poisson: false,
            shapes: ToyShapes::default(),
            coupling: Coupling::default(),
            efficiency: false,
            efficiency_map: default_efficiency(),
            seed: 1,
        }
    }
}

impl ToySpec {
    pub fn simple(n_events: usize, z: f64, seed: u64) -> Self {
        Self {
            n_events,
            fractions: Some(vec![z, 1.0 - z]),
            seed,
            ..Self::default()
        }
    }

    pub fn nonfactorising(n_events: usize, z: f64, seed: u64) -> Self {
        Self {
            study: Study::Nonfactorising,
            efficiency: true,
            ..Self::simple(n_events, z, seed)
        }
    }

    pub fn multicomponent(n_events: usize, fractions: [f64; 3], seed: u64) -> Self {
        Self {
            study: Study::Multicomponent,
            n_events,
            fractions: Some(fractions.to_vec()),
            seed,
            ..Self::default()
        }
    }

    /// Fractions with the study default filled in.
    pub fn fractions(&self) -> Vec<f64> {
        match (&self.fractions, self.study) {
            (Some(f), _) => f.clone(),
            (None, Study::Simple) => vec![0.2, 0.8],
            (None, Study::Nonfactorising) => vec![0.5, 0.5],
            (None, Study::Multicomponent) => vec![0.3, 0.3, 0.4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_events == 0 {
            return Err(Error::input("n_events must be at least 1"));
        }
        let f = self.fractions();
        let want = if self.study == Study::Multicomponent { 3 } else { 2 };
        if f.len() != want {
            return Err(Error::input(format!("{:?} study needs {want} fractions", self.study)));
        }
        if f.iter().any(|v| !(0.0..=1.0).contains(v)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::input("fractions must lie in [0, 1] and sum to 1"));
        }
        self.shapes.signal_m()?;
        self.shapes.background_m()?;
        self.shapes.signal_t()?;
        self.shapes.background_t()?;
        if self.study == Study::Nonfactorising {
            let (mi, ti) = (self.shapes.m_interval()?, self.shapes.t_interval()?);
            let c = &self.coupling;
            let s = &self.shapes;
            for m in [mi.lo, mi.hi] {
                if !(s.background_t_width + c.width_coupling * (m - c.m_ref) > 0.0) {
                    return Err(Error::input("coupled background width must stay positive"));
                }
            }
            if self.efficiency {
                self.efficiency_map.validate(mi, ti)?;
            }
        }
        Ok(())
    }

    /// Efficiency applied when generating, if any.
    pub fn active_efficiency(&self) -> Option<&EfficiencyMap> {
        (self.study == Study::Nonfactorising && self.efficiency).then_some(&self.efficiency_map)
    }

    /// Unnormalized coupled background density.
    pub fn background_kernel(&self, m: f64, t: f64) -> f64 {
        let s = &self.shapes;
        let c = &self.coupling;
        let lambda = s.background_m_slope + c.slope_coupling * (t - c.t_ref);
        let mu = s.background_t_mean + c.mean_coupling * (m - c.m_ref);
        let sigma = s.background_t_width + c.width_coupling * (m - c.m_ref);
        let x = (t - mu) / sigma;
        (-lambda * (m - s.m_range.0)).exp() * (-0.5 * x * x).exp() / sigma
    }

    /// Normalized coupled background density on the `(m, t)` rectangle.
    pub fn background_density(&self) -> Result<impl Fn(f64, f64) -> f64 + '_> {
        let (mi, ti) = (self.shapes.m_interval()?, self.shapes.t_interval()?);
        let norm = integrate(
            |m| integrate(|t| self.background_kernel(m, t), ti, DEFAULT_TOL).unwrap_or(f64::NAN),
            mi,
            DEFAULT_TOL,
        )?;
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::input("coupled background cannot be normalized"));
        }
        Ok(move |m, t| self.background_kernel(m, t) / norm)
    }
}

/// One generated dataset. Columns not produced by a study are empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ToyData {
    pub m: Vec<f64>,
    pub t: Vec<f64>,
    /// True component index per event.
    pub label: Vec<usize>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Efficiency applied while generating.
    pub efficiency: Option<EfficiencyMap>,
}

impl ToyData {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Named non-empty columns, `m` first then `t`.
    pub fn columns(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = vec![("m".to_string(), self.m.clone())];
        for (name, col) in [("t", &self.t), ("u", &self.u), ("v", &self.v)] {
            if !col.is_empty() {
                out.push((name.to_string(), col.clone()));
            }
        }
        out.push(("label".to_string(), self.label.iter().map(|l| *l as f64).collect()));
        out
    }

    /// Number of events per true label.
    pub fn label_counts(&self, n: usize) -> Vec<usize> {
        let mut c = vec![0; n];
        for l in &self.label {
            c[*l] += 1;
        }
        c
    }
}
