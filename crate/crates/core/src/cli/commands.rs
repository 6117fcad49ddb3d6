use std::path::Path;

use serde::Serialize;

use super::config::{load, seed_override, AnalysisConfig};
use super::{Command, Common, ConfigKind, CorrectMode, EXIT_INVALID_ENSEMBLE, EXIT_NUMERICAL, EXIT_OK};
use crate::diagnostics::{kendall_tau, IndependenceReport};
use crate::error::{Error, Result};
use crate::io::{read_csv, read_json, write_csv, write_json, Document, Provenance, Table};
use crate::linalg::{self, Matrix};
use crate::mlfit::{fit_extended_ml, fit_weighted_ml, FitResult};
use crate::pipeline::{analyse, cow_weights, AnalysisInput, Correction, CowVariance, Method, YieldSummary};
use crate::sweights::{extract_sweights, Variant, WeightMatrix};
use crate::toygen::{generate, run_ensemble, EnsembleConfig, ToySpec};
use crate::wcov::{corrected_covariance_fixed_shapes, equivalent_events, variance_sum_weights, CorrectedCovariance};

pub(super) fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Fit(c) => fit(&c),
        Command::Sweights { common, variant } => sweights(&common, variant.as_deref()),
        Command::Cow {
            common,
            order,
            bins,
            unity,
        } => cow(&common, order, bins, unity),
        Command::Correct {
            common,
            weights,
            column,
            control,
            mode,
        } => correct(&common, weights.as_deref(), &column, control.as_deref(), mode),
        Command::CheckIndependence {
            data,
            x,
            y,
            label_column,
            label,
            out,
        } => check_independence(&data, x.as_deref(), y.as_deref(), label_column.as_deref(), label, out.as_deref()),
        Command::Toys { config, out, jobs } => toys(config.as_deref(), &out, jobs),
        Command::Generate { config, out } => generate_toy(config.as_deref(), &out),
        Command::Pipeline(c) => pipeline(&c),
        Command::EchoConfig { config, kind } => echo_config(config.as_deref(), kind),
        Command::Version => {
            println!("cowlib {}", env!("CARGO_PKG_VERSION"));
            Ok(EXIT_OK)
        }
    }
}

/// Loaded, overridden and resolved config; the data path and output
/// directory from the command line are folded in so the hash covers them.
fn analysis_config(c: &Common) -> Result<AnalysisConfig> {
    let mut cfg: AnalysisConfig = load(c.config.as_deref())?;
    if let Some(d) = &c.data {
        cfg.data = Some(d.clone());
    }
    if let Some(o) = &c.out_dir {
        cfg.output.dir = o.clone();
    }
    if let Some(p) = &c.model {
        cfg.model = read_json(p)?;
    }
    cfg.resolve()
}

/// Points the main output of a subcommand at `--out` when given.
fn main_output(c: &Common, cfg: &mut AnalysisConfig, pick: fn(&mut super::OutputPaths) -> &mut std::path::PathBuf) {
    if let Some(o) = &c.out {
        *pick(&mut cfg.output) = o.clone();
    }
}

struct Loaded {
    cfg: AnalysisConfig,
    table: Table,
    provenance: Provenance,
}

fn load_analysis(cfg: AnalysisConfig) -> Result<Loaded> {
    cfg.validate()?;
    let table = cfg.read_data(None)?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    let provenance = Provenance::new(&cfg, cfg.seed)?;
    Ok(Loaded { cfg, table, provenance })
}

fn weight_table(m: &[f64], t: Option<&[f64]>, names: &[String], rows: &[Vec<f64>]) -> Result<Table> {
    let mut cols = vec![("m".to_string(), m.to_vec())];
    if let Some(t) = t {
        cols.push(("t".to_string(), t.to_vec()));
    }
    for (k, name) in names.iter().enumerate() {
        cols.push((format!("w_{name}"), rows.iter().map(|r| r[k]).collect()));
    }
    let (names, columns) = cols.into_iter().unzip();
    Table::new(names, columns)
}

fn fit(c: &Common) -> Result<i32> {
    let mut cfg = analysis_config(c)?;
    main_output(c, &mut cfg, |o| &mut o.fit);
    let l = load_analysis(cfg)?;
    let m = l.cfg.m(&l.table)?;
    let res = fit_extended_ml(m, &l.cfg.model, None, None)?;
    let path = l.cfg.output.path(&l.cfg.output.fit);
    let converged = res.converged;
    write_json(
        &path,
        &Document {
            provenance: l.provenance,
            body: res,
        },
    )?;
    if converged {
        println!("wrote {}", path.display());
        Ok(EXIT_OK)
    } else {
        eprintln!("error: fit did not converge (result written to {})", path.display());
        Ok(EXIT_NUMERICAL)
    }
}

#[derive(Serialize)]
struct SweightsOutput {
    labels: Vec<String>,
    #[serde(flatten)]
    matrix: WeightMatrix,
    /// Yields of the yields-only refit.
    yields: Vec<f64>,
    sum_w: Vec<f64>,
    fit: FitResult,
}

fn sweights(c: &Common, variant: Option<&str>) -> Result<i32> {
    let mut cfg = analysis_config(c)?;
    let fit_shapes = match cfg.method {
        Method::Sweights { fit_shapes, .. } => fit_shapes,
        Method::Cow { .. } => true,
    };
    let variant: Variant = match (variant, cfg.method) {
        (Some(v), _) => v.parse()?,
        (None, Method::Sweights { variant, .. }) => variant,
        (None, Method::Cow { .. }) => Variant::B,
    };
    cfg.method = Method::Sweights {
        variant,
        fit_shapes,
        correction: Default::default(),
    };
    main_output(c, &mut cfg, |o| &mut o.weights);
    let l = load_analysis(cfg)?;
    let m = l.cfg.m(&l.table)?;
    let res = extract_sweights(m, &l.cfg.model, variant, fit_shapes)?;
    let labels = l.cfg.model.labels();
    let out = &l.cfg.output;
    write_csv(
        &out.path(&out.weights),
        &weight_table(m, None, &labels, &res.weights)?,
        Some(&l.provenance),
    )?;
    let sum_w = (0..labels.len()).map(|k| res.weights.iter().map(|r| r[k]).sum()).collect();
    write_json(
        &out.path(&out.matrix),
        &Document {
            provenance: l.provenance.clone(),
            body: SweightsOutput {
                labels,
                matrix: res.matrix,
                yields: res.refit.params.clone(),
                sum_w,
                fit: res.fit,
            },
        },
    )?;
    println!("wrote {} and {}", out.path(&out.weights).display(), out.path(&out.matrix).display());
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CowOutput {
    labels: Vec<String>,
    #[serde(rename = "W", with = "linalg::serde_rows")]
    w: Matrix,
    #[serde(rename = "A", with = "linalg::serde_rows")]
    a: Matrix,
    sum_w: Vec<f64>,
    /// Equivalent number of signal events.
    n_eq: f64,
}

fn cow(c: &Common, order: Option<usize>, bins: Option<usize>, unity: bool) -> Result<i32> {
    let mut cfg = analysis_config(c)?;
    let (mut poly_order, mut variance) = match cfg.method {
        Method::Cow { poly_order, variance } => (poly_order, variance),
        Method::Sweights { .. } => (3, CowVariance::default()),
    };
    if let Some(o) = order {
        poly_order = o;
    }
    if let Some(b) = bins {
        variance = CowVariance::Qm { bins: b };
    }
    if unity {
        variance = CowVariance::Unity;
    }
    cfg.method = Method::Cow { poly_order, variance };
    main_output(c, &mut cfg, |o| &mut o.weights);
    let l = load_analysis(cfg)?;
    let m = l.cfg.m(&l.table)?;
    let t = l.cfg.t(&l.table).ok();
    let t_or_m = t.unwrap_or(m);
    if l.cfg.efficiency.is_some() && t.is_none() {
        return Err(Error::input("an efficiency map needs a t column"));
    }
    let (set, rows) = cow_weights(m, t_or_m, l.cfg.efficiency.as_ref(), &l.cfg.model, poly_order, variance)?;
    let mut labels = vec![l.cfg.model.components[0].label.clone()];
    labels.extend((0..=poly_order).map(|j| format!("b{j}")));
    let out = &l.cfg.output;
    write_csv(
        &out.path(&out.weights),
        &weight_table(m, t, &labels, &rows)?,
        Some(&l.provenance),
    )?;
    let signal: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let sum_w = (0..labels.len()).map(|k| rows.iter().map(|r| r[k]).sum()).collect();
    write_json(
        &out.path(&out.matrix),
        &Document {
            provenance: l.provenance.clone(),
            body: CowOutput {
                labels,
                w: set.w,
                a: set.a,
                sum_w,
                n_eq: equivalent_events(&signal)?,
            },
        },
    )?;
    println!("wrote {} and {}", out.path(&out.weights).display(), out.path(&out.matrix).display());
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CovarianceOutput {
    method: String,
    theta: Vec<f64>,
    corrected_error: Vec<f64>,
    naive_error: Vec<f64>,
    covariance: CorrectedCovariance,
}

impl CovarianceOutput {
    fn new(method: String, theta: Vec<f64>, covariance: CorrectedCovariance) -> Self {
        let p = theta.len();
        Self {
            method,
            corrected_error: (0..p).map(|k| covariance.theta_error(k)).collect(),
            naive_error: (0..p).map(|k| covariance.naive_error(k)).collect(),
            theta,
            covariance,
        }
    }
}

fn correct(
    c: &Common,
    weights: Option<&Path>,
    column: &str,
    control: Option<&Path>,
    mode: Option<CorrectMode>,
) -> Result<i32> {
    let mut cfg = analysis_config(c)?;
    if let Some(p) = control {
        cfg.control = read_json(p)?;
    }
    match (mode, weights, &mut cfg.method) {
        (Some(CorrectMode::Full), Some(_), _) => {
            return Err(Error::input("external weights support only --mode fixed"));
        }
        (Some(mode), None, Method::Sweights { correction, .. }) => {
            *correction = match mode {
                CorrectMode::Fixed => Correction::FixedShapes,
                CorrectMode::Full => Correction::Full,
                CorrectMode::None => Correction::None,
            };
        }
        (Some(_), None, Method::Cow { .. }) => {
            return Err(Error::input("--mode applies to sWeight methods and external weights"));
        }
        _ => {}
    }
    main_output(c, &mut cfg, |o| &mut o.covariance);
    let l = load_analysis(cfg)?;
    let m = l.cfg.m(&l.table)?;
    let t = l.cfg.t(&l.table)?;
    let body = match weights {
        Some(p) => {
            let wt = read_csv(p)?;
            let w = wt.require(column)?;
            if w.len() != t.len() {
                return Err(Error::input(format!(
                    "{} has {} rows but the data has {}",
                    p.display(),
                    w.len(),
                    t.len()
                )));
            }
            let tf = fit_weighted_ml(t, w, &l.cfg.control, None)?;
            if !tf.converged {
                return Err(Error::NotConverged("weighted fit in t did not converge".into()));
            }
            // external weights: treated as fixed functions of m
            let cov = corrected_covariance_fixed_shapes(t, w, None, None, &l.cfg.control, &tf.params)?;
            CovarianceOutput::new(format!("weights:{column}"), tf.params, cov)
        }
        None => {
            let a = run_analysis(&l.cfg, m, t)?;
            CovarianceOutput::new(a.method, a.theta, a.covariance)
        }
    };
    let out = &l.cfg.output;
    write_json(
        &out.path(&out.covariance),
        &Document {
            provenance: l.provenance.clone(),
            body,
        },
    )?;
    println!("wrote {}", out.path(&out.covariance).display());
    Ok(EXIT_OK)
}

fn run_analysis(cfg: &AnalysisConfig, m: &[f64], t: &[f64]) -> Result<crate::pipeline::Analysis> {
    let input = AnalysisInput {
        m,
        t,
        efficiency: cfg.efficiency.as_ref(),
        divide_sweights_by_efficiency: cfg.divide_sweights_by_efficiency,
        model: &cfg.model,
        hs: &cfg.control,
    };
    analyse(&input, &cfg.method)
}

fn check_independence(
    data: &Path,
    x: Option<&str>,
    y: Option<&str>,
    label_column: Option<&str>,
    label: Option<f64>,
    out: Option<&Path>,
) -> Result<i32> {
    let table = read_csv(data)?;
    let xs = match x {
        Some(n) => table.require(n)?,
        None => table.m()?,
    };
    let ys = match y {
        Some(n) => table.require(n)?,
        None => table.t()?,
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = match (label_column, label) {
        (Some(col), Some(v)) => {
            let lab = table.require(col)?;
            xs.iter()
                .zip(ys)
                .zip(lab)
                .filter(|(_, l)| **l == v)
                .map(|((a, b), _)| (*a, *b))
                .unzip()
        }
        _ => (xs.to_vec(), ys.to_vec()),
    };
    let report = kendall_tau(&xs, &ys)?;
    let body = IndependenceOutput {
        significance: report.significance(),
        report,
    };
    println!("{}", serde_json::to_string_pretty(&body)?);
    if let Some(p) = out {
        let cfg = serde_json::json!({
            "data": data, "x": x, "y": y, "label_column": label_column, "label": label,
        });
        write_json(
            p,
            &Document {
                provenance: Provenance::new(&cfg, 0)?,
                body,
            },
        )?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct IndependenceOutput {
    #[serde(flatten)]
    report: IndependenceReport,
    /// `τ / σ` under independence.
    significance: f64,
}

fn toys(config: Option<&Path>, out: &Path, jobs: Option<usize>) -> Result<i32> {
    let mut cfg: EnsembleConfig = load(config)?;
    if let Some(s) = seed_override()? {
        cfg.base_seed = s;
    }
    if jobs.is_some() {
        cfg.jobs = jobs;
    }
    let report = run_ensemble(&cfg)?;
    // the thread count does not change the results
    let hashed = EnsembleConfig { jobs: None, ..cfg.clone() };
    let provenance = Provenance::new(&hashed, cfg.base_seed)?;
    for a in &report.aggregates {
        if let Some(p) = &a.pulls {
            println!(
                "{}: pull mean {:.3} ± {:.3}, width {:.3} ± {:.3}, <N_eq> {:.1}",
                a.method, p.mean, p.mean_error, p.width, p.width_error, a.mean_n_eq
            );
        }
    }
    let valid = report.valid;
    let n_failed = report.failures.len();
    write_json(out, &Document { provenance, body: report })?;
    if valid {
        Ok(EXIT_OK)
    } else {
        eprintln!("error: ensemble invalid: {n_failed} of {} toys failed", cfg.n_toys);
        Ok(EXIT_INVALID_ENSEMBLE)
    }
}

fn generate_toy(config: Option<&Path>, out: &Path) -> Result<i32> {
    let mut spec: ToySpec = load(config)?;
    if let Some(s) = seed_override()? {
        spec.seed = s;
    }
    let data = generate(&spec)?;
    let (names, columns) = data.columns().into_iter().unzip();
    write_csv(out, &Table::new(names, columns)?, Some(&Provenance::new(&spec, spec.seed)?))?;
    println!("wrote {} events to {}", data.len(), out.display());
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Summary {
    method: String,
    n_events: usize,
    sum_w: f64,
    sum_w2: f64,
    n_eq: f64,
    theta: Vec<f64>,
    corrected_error: Vec<f64>,
    naive_error: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    yields: Option<YieldSummary>,
    /// Kendall τ between `m` and `t` over all events.
    independence: Option<IndependenceOutput>,
}

fn pipeline(c: &Common) -> Result<i32> {
    let mut cfg = analysis_config(c)?;
    main_output(c, &mut cfg, |o| &mut o.summary);
    let l = load_analysis(cfg)?;
    let m = l.cfg.m(&l.table)?;
    let t = l.cfg.t(&l.table)?;
    let a = run_analysis(&l.cfg, m, t)?;
    let out = &l.cfg.output;
    let rows: Vec<Vec<f64>> = a.weights.iter().map(|w| vec![*w]).collect();
    write_csv(
        &out.path(&out.weights),
        &weight_table(m, Some(t), &["sig".to_string()], &rows)?,
        Some(&l.provenance),
    )?;
    let cov = CovarianceOutput::new(a.method.clone(), a.theta.clone(), a.covariance.clone());
    let independence = kendall_tau(m, t).ok().map(|report| IndependenceOutput {
        significance: report.significance(),
        report,
    });
    let summary = Summary {
        method: a.method,
        n_events: m.len(),
        sum_w: a.sum_w,
        sum_w2: variance_sum_weights(&a.weights),
        n_eq: a.n_eq,
        corrected_error: cov.corrected_error.clone(),
        naive_error: cov.naive_error.clone(),
        theta: a.theta,
        yields: a.yields,
        independence,
    };
    write_json(
        &out.path(&out.covariance),
        &Document {
            provenance: l.provenance.clone(),
            body: cov,
        },
    )?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    write_json(
        &out.path(&out.summary),
        &Document {
            provenance: l.provenance.clone(),
            body: summary,
        },
    )?;
    Ok(EXIT_OK)
}

fn echo_config(config: Option<&Path>, kind: ConfigKind) -> Result<i32> {
    let text = match kind {
        ConfigKind::Analysis => {
            let mut cfg: AnalysisConfig = load(config)?;
            if let Some(s) = seed_override()? {
                cfg.seed = s;
            }
            serde_json::to_string_pretty(&cfg)?
        }
        ConfigKind::Ensemble => {
            let mut cfg: EnsembleConfig = load(config)?;
            if let Some(s) = seed_override()? {
                cfg.base_seed = s;
            }
            serde_json::to_string_pretty(&cfg)?
        }
        ConfigKind::Toy => {
            let mut cfg: ToySpec = load(config)?;
            if let Some(s) = seed_override()? {
                cfg.seed = s;
            }
            serde_json::to_string_pretty(&cfg)?
        }
    };
    println!("{text}");
    Ok(EXIT_OK)
}
