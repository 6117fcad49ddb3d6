use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::densities::{Density1D, EfficiencyMap};
use crate::error::{Error, Result};
use crate::io::{read_csv, read_json, Table};
use crate::mlfit::MixtureModel;
use crate::pipeline::Method;
use crate::toygen::{analysis_model, ToySpec};

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "COWLIB_SEED";

/// File names of the analysis outputs, relative to `dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub dir: PathBuf,
    pub fit: PathBuf,
    pub weights: PathBuf,
    pub matrix: PathBuf,
    pub covariance: PathBuf,
    pub summary: PathBuf,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
            fit: "fit.json".into(),
            weights: "weights.csv".into(),
            matrix: "matrix.json".into(),
            covariance: "covariance.json".into(),
            summary: "summary.json".into(),
        }
    }
}

impl OutputPaths {
    pub fn path(&self, name: &Path) -> PathBuf {
        self.dir.join(name)
    }
}

/// Analysis configuration read from JSON; missing fields take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// CSV input; first column `m`, second `t` unless named otherwise.
    pub data: Option<PathBuf>,
    pub m_column: String,
    pub t_column: String,
    /// Mixture in `m`, signal first.
    pub model: MixtureModel,
    /// Signal density in `t` fitted to the weighted data.
    pub control: Density1D,
    pub method: Method,
    pub efficiency: Option<EfficiencyMap>,
    /// JSON file holding an efficiency map; overrides `efficiency`.
    pub efficiency_path: Option<PathBuf>,
    /// Allow sWeights with an efficiency by dividing each weight by `ε`.
    pub divide_sweights_by_efficiency: bool,
    pub output: OutputPaths,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let toy = ToySpec::default();
        Self {
            data: None,
            m_column: "m".into(),
            t_column: "t".into(),
            model: analysis_model(&toy).expect("default toy model is valid"),
            control: toy.shapes.signal_t().expect("default control density is valid"),
            method: Method::default(),
            efficiency: None,
            efficiency_path: None,
            divide_sweights_by_efficiency: false,
            output: OutputPaths::default(),
            seed: 1,
        }
    }
}

/// Seed from the environment, if set.
pub fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::input(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// Reads a JSON config, or the defaults when `path` is `None`.
pub fn load<T: Default + serde::de::DeserializeOwned>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => read_json(p),
        None => Ok(T::default()),
    }
}

impl AnalysisConfig {
    /// Applies the seed override and inlines the efficiency file.
    pub fn resolve(mut self) -> Result<Self> {
        if let Some(s) = seed_override()? {
            self.seed = s;
        }
        if let Some(p) = self.efficiency_path.take() {
            self.efficiency = Some(read_json(&p)?);
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.model.n_components() != 2 {
            return Err(Error::input("the model needs exactly two components (signal first)"));
        }
        if let (Some(_), Method::Sweights { .. }) = (&self.efficiency, &self.method) {
            if !self.divide_sweights_by_efficiency {
                return Err(Error::input(
                    "an efficiency map needs the cow method (or divide_sweights_by_efficiency = true)",
                ));
            }
        }
        if let Method::Cow { poly_order, .. } = self.method {
            if poly_order > 12 {
                return Err(Error::input("poly_order above 12 is numerically unusable"));
            }
        }
        Ok(())
    }

    pub fn read_data(&self, override_path: Option<&Path>) -> Result<Table> {
        let path = override_path
            .or(self.data.as_deref())
            .ok_or_else(|| Error::input("no data file given (set \"data\" or pass --data)"))?;
        read_csv(path)
    }

    /// `m` column: the named one, else the first.
    pub fn m<'a>(&self, table: &'a Table) -> Result<&'a [f64]> {
        match table.column(&self.m_column) {
            Some(c) => Ok(c),
            None => table.m(),
        }
    }

    /// `t` column: the named one, else the second.
    pub fn t<'a>(&self, table: &'a Table) -> Result<&'a [f64]> {
        match table.column(&self.t_column) {
            Some(c) => Ok(c),
            None => table.t(),
        }
    }
}
