use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate, toy_seed};
use super::spec::{Study, ToySpec};
use crate::diagnostics::{pull, PullSummary};
use crate::error::{Error, Result};
use crate::mlfit::{neumaier_sum, Component, MixtureModel};
use crate::pipeline::{analyse, AnalysisInput, Method};

/// Largest tolerated fraction of failed toys.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

fn default_methods() -> Vec<Method> {
    vec![Method::default()]
}

fn default_n_toys() -> usize {
    100
}

fn default_seed() -> u64 {
    1
}

/// Ensemble configuration. Toy `i` is generated with seed
/// `base_seed + i`; the seed inside `toy` is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    #[serde(default)]
    pub toy: ToySpec,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_n_toys")]
    pub n_toys: usize,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
    /// Worker threads; `None` uses all cores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            toy: ToySpec::default(),
            methods: default_methods(),
            n_toys: default_n_toys(),
            base_seed: default_seed(),
            jobs: None,
        }
    }
}

/// One method on one toy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: String,
    pub estimate: Vec<f64>,
    pub corrected_sigma: Vec<f64>,
    pub naive_sigma: Vec<f64>,
    pub sum_w: f64,
    pub sum_w2: f64,
    pub n_eq: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yields_only: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yields_only_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free_fit_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRecord {
    pub index: usize,
    pub seed: u64,
    pub n_events: usize,
    pub methods: Vec<MethodRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyFailure {
    pub index: usize,
    pub seed: u64,
    pub reason: String,
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanError {
    pub mean: f64,
    pub error: f64,
}

impl MeanError {
    pub fn of(v: &[f64]) -> Option<Self> {
        let s = PullSummary::from_pulls(v)?;
        Some(Self {
            mean: s.mean,
            error: s.mean_error,
        })
    }
}

/// Ensemble summary of one method, for the first `θ` parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: String,
    pub pulls: Option<PullSummary>,
    pub naive_pulls: Option<PullSummary>,
    /// Mean of `estimate - truth`.
    pub bias: Option<MeanError>,
    pub mean_n_eq: f64,
    /// `100 (Σw - N̂) / N̂` against the yields-only fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yield_percent_difference: Option<MeanError>,
    /// `√(Σw²) / σ(N̂)` against the yields-only fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_ratio: Option<MeanError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub config: EnsembleConfig,
    /// True value of `θ`.
    pub truth: Vec<f64>,
    pub seeds: Vec<u64>,
    pub records: Vec<ToyRecord>,
    pub failures: Vec<ToyFailure>,
    pub aggregates: Vec<MethodAggregate>,
    /// False when more than 10% of the toys failed.
    pub valid: bool,
}

/// Fit model in `m` for a two-component study, started at the truth.
pub fn analysis_model(toy: &ToySpec) -> Result<MixtureModel> {
    let z = toy.fractions();
    let n = toy.n_events as f64;
    MixtureModel::new(vec![
        Component::new("sig", toy.shapes.signal_m()?, z[0] * n),
        Component::new("bkg", toy.shapes.background_m()?, z[1] * n),
    ])
}

fn run_toy(config: &EnsembleConfig, index: usize) -> std::result::Result<ToyRecord, ToyFailure> {
    let seed = toy_seed(config.base_seed, index);
    let fail = |e: Error| ToyFailure {
        index,
        seed,
        reason: e.to_string(),
    };
    let spec = ToySpec {
        seed,
        ..config.toy.clone()
    };
    let data = generate(&spec).map_err(fail)?;
    let model = analysis_model(&spec).map_err(fail)?;
    let hs = spec.shapes.signal_t().map_err(fail)?;
    let mut methods = Vec::with_capacity(config.methods.len());
    for method in &config.methods {
        let efficiency = match method {
            Method::Cow { .. } => data.efficiency.as_ref(),
            Method::Sweights { .. } => None,
        };
        let input = AnalysisInput {
            m: &data.m,
            t: &data.t,
            efficiency,
            divide_sweights_by_efficiency: false,
            model: &model,
            hs: &hs,
        };
        let a = analyse(&input, method).map_err(|e| ToyFailure {
            index,
            seed,
            reason: format!("{}: {e}", method.label()),
        })?;
        let p = a.theta.len();
        methods.push(MethodRecord {
            method: a.method.clone(),
            corrected_sigma: (0..p).map(|k| a.corrected_error(k)).collect(),
            naive_sigma: (0..p).map(|k| a.naive_error(k)).collect(),
            estimate: a.theta,
            sum_w: a.sum_w,
            sum_w2: a.sum_w2,
            n_eq: a.n_eq,
            yields_only: a.yields.map(|y| y.yields_only),
            yields_only_error: a.yields.map(|y| y.yields_only_error),
            free_fit_error: a.yields.and_then(|y| y.free_fit_error),
        });
    }
    Ok(ToyRecord {
        index,
        seed,
        n_events: data.len(),
        methods,
    })
}

/// Aggregates per method from the toy records.
pub fn aggregate(records: &[ToyRecord], methods: &[Method], truth: &[f64]) -> Vec<MethodAggregate> {
    (0..methods.len())
        .map(|k| {
            let rs: Vec<&MethodRecord> = records.iter().map(|r| &r.methods[k]).collect();
            let pulls: Vec<f64> = rs.iter().map(|r| pull(r.estimate[0], truth[0], r.corrected_sigma[0])).collect();
            let naive: Vec<f64> = rs.iter().map(|r| pull(r.estimate[0], truth[0], r.naive_sigma[0])).collect();
            let bias: Vec<f64> = rs.iter().map(|r| r.estimate[0] - truth[0]).collect();
            let pct: Vec<f64> = rs
                .iter()
                .filter_map(|r| r.yields_only.map(|y| 100.0 * (r.sum_w - y) / y))
                .collect();
            let ratio: Vec<f64> = rs
                .iter()
                .filter_map(|r| r.yields_only_error.map(|e| r.sum_w2.sqrt() / e))
                .collect();
            MethodAggregate {
                method: methods[k].label(),
                pulls: PullSummary::from_pulls(&pulls),
                naive_pulls: PullSummary::from_pulls(&naive),
                bias: MeanError::of(&bias),
                mean_n_eq: neumaier_sum(rs.iter().map(|r| r.n_eq)) / rs.len().max(1) as f64,
                yield_percent_difference: MeanError::of(&pct),
                error_ratio: MeanError::of(&ratio),
            }
        })
        .collect()
}

/// Generates and analyses `n_toys` pseudo-experiments. Failed toys are
/// listed in the report; the ensemble is marked invalid when more than
/// 10% fail.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleReport> {
    if config.n_toys == 0 {
        return Err(Error::input("n_toys must be at least 1"));
    }
    if config.methods.is_empty() {
        return Err(Error::input("no methods given"));
    }
    if config.toy.study == Study::Multicomponent {
        return Err(Error::input(
            "ensembles run the two-component studies; the multicomponent study has no t fit",
        ));
    }
    config.toy.validate()?;
    let work = || -> Vec<_> {
        (0..config.n_toys)
            .into_par_iter()
            .map(|i| run_toy(config, i))
            .collect()
    };
    let outcomes = match config.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::input(e.to_string()))?
            .install(work),
        None => work(),
    };
    let mut records = vec![];
    let mut failures = vec![];
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }
    let truth = vec![config.toy.shapes.signal_t_slope];
    let aggregates = aggregate(&records, &config.methods, &truth);
    let valid = (failures.len() as f64) <= MAX_FAILURE_FRACTION * config.n_toys as f64;
    Ok(EnsembleReport {
        config: config.clone(),
        truth,
        seeds: (0..config.n_toys).map(|i| toy_seed(config.base_seed, i)).collect(),
        records,
        failures,
        aggregates,
        valid,
    })
}
