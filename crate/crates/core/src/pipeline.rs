//! End-to-end extraction of a signal distribution in `t`: fit in `m`,
//! per-event weights, weighted fit in `t` and its corrected covariance.

use serde::{Deserialize, Serialize};

use crate::cows::{
    build_cow, efficiency_corrected_weights, CowSet, MIN_EFFICIENCY, variance_fn_ml_iterative, variance_fn_qm, CowSpec, VarianceFn,
};
use crate::densities::{bernstein_basis, Density1D, EfficiencyMap, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::mlfit::{fit_weighted_ml, FitResult, MixtureModel};
use crate::sweights::{extract_sweights, Variant};
use crate::wcov::{
    corrected_covariance_fixed_shapes, corrected_covariance_full, equivalent_events, fixed_shape_terms,
    variance_sum_weights, CorrectedCovariance, QuasiScoreSpec,
};

/// Covariance reported for the weighted fit of sWeighted data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Correction {
    /// Sandwich over yields, shapes, `W` and `θ`.
    #[default]
    Full,
    /// Shapes treated as known; only the yields and `W` are propagated.
    FixedShapes,
    /// Inverse Hessian of the weighted log-likelihood.
    None,
}

/// Choice of `I(m)` for custom orthogonal weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CowVariance {
    /// `q(m)` from a histogram of `m` with `1/ε²` weights.
    Qm { bins: usize },
    Unity,
    /// Fitted mixture of the basis, found by iteration.
    MlIterative { max_iter: usize, tol: f64 },
}

impl Default for CowVariance {
    fn default() -> Self {
        CowVariance::Qm { bins: 50 }
    }
}

fn variant_b() -> Variant {
    Variant::B
}

fn yes() -> bool {
    true
}

fn three() -> usize {
    3
}

/// How the per-event signal weights are made.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    Sweights {
        #[serde(default = "variant_b")]
        variant: Variant,
        #[serde(default = "yes")]
        fit_shapes: bool,
        #[serde(default)]
        correction: Correction,
    },
    /// Signal shape from the model plus a Bernstein polynomial background
    /// of order `poly_order`; weights divided by the efficiency.
    Cow {
        #[serde(default = "three")]
        poly_order: usize,
        #[serde(default)]
        variance: CowVariance,
    },
}

impl Default for Method {
    fn default() -> Self {
        Method::sweights(Variant::B)
    }
}

impl Method {
    pub fn sweights(variant: Variant) -> Self {
        Method::Sweights {
            variant,
            fit_shapes: true,
            correction: Correction::Full,
        }
    }

    pub fn cow(poly_order: usize, variance: CowVariance) -> Self {
        Method::Cow { poly_order, variance }
    }

    /// Short name such as `sweights-B` or `cow-qm50-p3`.
    pub fn label(&self) -> String {
        match self {
            Method::Sweights { variant, .. } => format!("sweights-{variant}"),
            Method::Cow { poly_order, variance } => {
                let v = match variance {
                    CowVariance::Qm { bins } => format!("qm{bins}"),
                    CowVariance::Unity => "unity".into(),
                    CowVariance::MlIterative { .. } => "ml".into(),
                };
                format!("cow-{v}-p{poly_order}")
            }
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let l = s.to_ascii_lowercase();
        if l == "cow" {
            return Ok(Method::cow(3, CowVariance::default()));
        }
        match l.strip_prefix("sweights-") {
            Some(v) => Ok(Method::sweights(v.parse()?)),
            None => Err(Error::input(format!(
                "unknown method '{s}' (expected sweights-A, sweights-B, sweights-Ci, sweights-Cii or cow)"
            ))),
        }
    }
}

/// Yields from the fit in `m` (sWeights methods only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldSummary {
    pub yields_only: f64,
    pub yields_only_error: f64,
    /// Signal-yield error with shapes floating.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free_fit_error: Option<f64>,
}

/// Result of [`analyse`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub method: String,
    pub theta: Vec<f64>,
    pub covariance: CorrectedCovariance,
    pub sum_w: f64,
    pub sum_w2: f64,
    pub n_eq: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yields: Option<YieldSummary>,
    /// Per-event signal weights.
    #[serde(skip)]
    pub weights: Vec<f64>,
    /// Fit in `m` (sWeights methods only).
    #[serde(skip)]
    pub m_fit: Option<FitResult>,
}

impl Analysis {
    pub fn corrected_error(&self, k: usize) -> f64 {
        self.covariance.theta_error(k)
    }

    pub fn naive_error(&self, k: usize) -> f64 {
        self.covariance.naive_error(k)
    }
}

/// Data and models entering [`analyse`].
#[derive(Debug, Clone, Copy)]
pub struct AnalysisInput<'a> {
    pub m: &'a [f64],
    pub t: &'a [f64],
    /// Per-event efficiency. sWeights accept one only together with
    /// `divide_sweights_by_efficiency`.
    pub efficiency: Option<&'a EfficiencyMap>,
    /// Divide each sWeight by `ε(m_i, t_i)`. Biased when `ε` depends on `m`.
    pub divide_sweights_by_efficiency: bool,
    /// Two components in `m`, signal first.
    pub model: &'a MixtureModel,
    /// Signal density in `t`; its parameters are the starting point.
    pub hs: &'a Density1D,
}

fn inverse_efficiencies(e: &EfficiencyMap, m: &[f64], t: &[f64]) -> Result<Vec<f64>> {
    m.iter()
        .zip(t)
        .map(|(mi, ti)| {
            let eps = e.eval(*mi, *ti);
            if eps >= MIN_EFFICIENCY {
                Ok(1.0 / eps)
            } else {
                Err(Error::TinyEfficiency { m: *mi, t: *ti, eps })
            }
        })
        .collect()
}

fn weighted_t_fit(t: &[f64], w: &[f64], hs: &Density1D) -> Result<FitResult> {
    let f = fit_weighted_ml(t, w, hs, None)?;
    if !f.converged {
        return Err(Error::NotConverged("weighted fit in t did not converge".into()));
    }
    Ok(f)
}

fn finish(
    method: &Method,
    weights: Vec<f64>,
    theta: Vec<f64>,
    covariance: CorrectedCovariance,
    yields: Option<YieldSummary>,
    m_fit: Option<FitResult>,
) -> Result<Analysis> {
    Ok(Analysis {
        method: method.label(),
        theta,
        covariance,
        sum_w: weights.iter().sum(),
        sum_w2: variance_sum_weights(&weights),
        n_eq: equivalent_events(&weights)?,
        yields,
        weights,
        m_fit,
    })
}

/// COW built from the model's signal shape plus a Bernstein background of
/// order `poly_order`, and the per-event weights `w_k / ε`.
pub fn cow_weights(
    m: &[f64],
    t: &[f64],
    efficiency: Option<&EfficiencyMap>,
    model: &MixtureModel,
    poly_order: usize,
    variance: CowVariance,
) -> Result<(CowSet, Vec<Vec<f64>>)> {
    let support = model.support();
    let mut basis = vec![model.components[0].density.clone()];
    basis.extend(bernstein_basis(poly_order + 1, support)?);
    let variance_fn = match variance {
        CowVariance::Qm { bins } => VarianceFn::Histogram(variance_fn_qm(m, t, efficiency, bins, support)?),
        CowVariance::Unity => VarianceFn::Unity,
        CowVariance::MlIterative { max_iter, tol } => {
            variance_fn_ml_iterative(&basis, m, t, efficiency, max_iter, tol)?.variance_fn
        }
    };
    let mut spec = CowSpec::new(basis, variance_fn, support);
    spec.efficiency = efficiency.cloned();
    let cow = build_cow(spec, DEFAULT_TOL)?;
    let rows = efficiency_corrected_weights(&cow, efficiency, m, t)?;
    Ok((cow, rows))
}

/// Runs one method on one dataset.
pub fn analyse(input: &AnalysisInput, method: &Method) -> Result<Analysis> {
    let AnalysisInput {
        m,
        t,
        efficiency,
        divide_sweights_by_efficiency,
        model,
        hs,
    } = *input;
    if m.len() != t.len() {
        return Err(Error::input("m and t columns differ in length"));
    }
    if model.n_components() != 2 {
        return Err(Error::input("the analysis chain needs a two-component model"));
    }
    match *method {
        Method::Sweights {
            variant,
            fit_shapes,
            correction,
        } => {
            let factors = match efficiency {
                Some(_) if !divide_sweights_by_efficiency => {
                    return Err(Error::input(
                        "sWeights cannot absorb an efficiency that depends on m; use the cow method",
                    ))
                }
                Some(e) => Some(inverse_efficiencies(e, m, t)?),
                None => None,
            };
            let res = extract_sweights(m, model, variant, fit_shapes)?;
            let mut w: Vec<f64> = res.weights.iter().map(|r| r[0]).collect();
            if let Some(f) = &factors {
                w.iter_mut().zip(f).for_each(|(w, f)| *w *= f);
            }
            let tf = weighted_t_fit(t, &w, hs)?;
            let naive = tf
                .covariance
                .clone()
                .ok_or_else(|| Error::SingularModel("weighted fit has no covariance".into()))?;
            let mut cov = match correction {
                Correction::Full => {
                    let qmodel = if fit_shapes { model.clone() } else { model.shapes_fixed() };
                    let mut spec = QuasiScoreSpec::new(qmodel, hs.clone())?;
                    spec.event_factors = factors.clone();
                    let yields_phi = if spec.n_phi() > 0 { &res.fit.params } else { &res.refit.params };
                    let mut lambda = spec.lambda_from_fit(m, yields_phi, &tf.params)?;
                    if variant != Variant::B {
                        // the quasi-score root uses sample-average weights
                        let wq = spec.signal_weights(m, &lambda)?;
                        let tq = weighted_t_fit(t, &wq, hs)?;
                        lambda = spec.lambda_from_fit(m, yields_phi, &tq.params)?;
                    }
                    corrected_covariance_full(m, t, &spec, &lambda, None)?
                }
                Correction::FixedShapes => {
                    let d = res.model.densities();
                    let y = [res.refit.params[0], res.refit.params[1]];
                    let mut terms = fixed_shape_terms(m, &d[0], &d[1], y)?;
                    if let Some(f) = &factors {
                        for (dw, f) in terms.dw.iter_mut().zip(f) {
                            dw.iter_mut().for_each(|v| *v *= f);
                        }
                    }
                    corrected_covariance_fixed_shapes(
                        t,
                        &w,
                        Some(&terms.dw),
                        Some(&terms.c_prime),
                        hs,
                        &tf.params,
                    )?
                }
                Correction::None => CorrectedCovariance {
                    full: None,
                    theta_block: naive.clone(),
                    naive: naive.clone(),
                    first_term: None,
                    reduction_term: None,
                },
            };
            cov.naive = naive;
            let yields = YieldSummary {
                yields_only: res.refit.params[0],
                yields_only_error: res.refit.error(0).unwrap_or(f64::NAN),
                free_fit_error: if fit_shapes && !model.shape_layout().is_empty() {
                    res.fit.error(0)
                } else {
                    None
                },
            };
            finish(method, w, tf.params, cov, Some(yields), Some(res.refit))
        }
        Method::Cow { poly_order, variance } => {
            let (_, rows) = cow_weights(m, t, efficiency, model, poly_order, variance)?;
            let w: Vec<f64> = rows.iter().map(|r| r[0]).collect();
            let tf = weighted_t_fit(t, &w, hs)?;
            let cov = corrected_covariance_fixed_shapes(t, &w, None, None, hs, &tf.params)?;
            finish(method, w, tf.params, cov, None, None)
        }
    }
}
