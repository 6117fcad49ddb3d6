use super::matrix::WeightMatrix;
use crate::densities::Density1D;
use crate::error::{Error, Result};

/// Behaviour for `m` outside the densities' support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RangeMode {
    /// Reject such points.
    #[default]
    Strict,
    /// Evaluate the densities' analytic continuation.
    Extrapolate,
}

/// Number of grid points probed for a non-positive denominator.
pub const DENOMINATOR_PROBES: usize = 10_000;

/// Per-component weight functions
/// `w_k(m) = Σ_l A_kl g_l(m) / Σ_l (A·1)_l g_l(m)`.
///
/// For two components this is evaluated in the equivalent `W` form
/// `w_s = (W_bb g_s - W_sb g_b) / ((W_bb - W_sb) g_s + (W_ss - W_sb) g_b)`.
/// The weights sum to one at every `m` for any symmetric `W`.
#[derive(Debug, Clone)]
pub struct WeightFunctionSet {
    pub matrix: WeightMatrix,
    pub densities: Vec<Density1D>,
    pub mode: RangeMode,
    /// Set when the denominator is not positive somewhere on the support.
    pub warning: Option<String>,
    denom: Vec<f64>,
}

impl WeightFunctionSet {
    pub fn new(matrix: WeightMatrix, densities: Vec<Density1D>, mode: RangeMode) -> Result<Self> {
        if densities.len() != matrix.n() {
            return Err(Error::input(format!(
                "{} densities for a {}x{} weight matrix",
                densities.len(),
                matrix.n(),
                matrix.n()
            )));
        }
        if densities.len() < 2 {
            return Err(Error::input("weights need at least two components"));
        }
        let denom = matrix.a_row_sums();
        let mut set = Self {
            matrix,
            densities,
            mode,
            warning: None,
            denom,
        };
        let iv = set.densities[0].support();
        let bad = iv
            .grid(DENOMINATOR_PROBES)
            .into_iter()
            .find(|m| !(set.denominator_at(&set.g_unchecked(*m)) > 0.0));
        if let Some(m) = bad {
            set.warning = Some(format!("weight denominator is not positive at m = {m}"));
        }
        Ok(set)
    }

    pub fn n(&self) -> usize {
        self.densities.len()
    }

    fn g_unchecked(&self, m: f64) -> Vec<f64> {
        self.densities.iter().map(|d| d.pdf_unbounded(m)).collect()
    }

    /// Component densities at `m`, honouring the range mode.
    pub fn g(&self, m: f64) -> Result<Vec<f64>> {
        let iv = self.densities[0].support();
        if !iv.contains(m) {
            return match self.mode {
                RangeMode::Strict => Err(Error::input(format!(
                    "m = {m} outside the fit range [{}, {}]",
                    iv.lo, iv.hi
                ))),
                RangeMode::Extrapolate => Ok(self.g_unchecked(m)),
            };
        }
        Ok(self.densities.iter().map(|d| d.pdf(m)).collect())
    }

    fn denominator_at(&self, g: &[f64]) -> f64 {
        if self.n() == 2 {
            let w = &self.matrix.w;
            (w[(1, 1)] - w[(0, 1)]) * g[0] + (w[(0, 0)] - w[(0, 1)]) * g[1]
        } else {
            self.denom.iter().zip(g).map(|(a, b)| a * b).sum()
        }
    }

    /// All weights from precomputed density values.
    pub fn eval_with_g(&self, g: &[f64], m: f64) -> Result<Vec<f64>> {
        let d = self.denominator_at(g);
        if d == 0.0 {
            return Err(Error::ZeroDenominator { m });
        }
        if self.n() == 2 {
            let w = &self.matrix.w;
            let ws = (w[(1, 1)] * g[0] - w[(0, 1)] * g[1]) / d;
            let wb = (w[(0, 0)] * g[1] - w[(0, 1)] * g[0]) / d;
            return Ok(vec![ws, wb]);
        }
        let a = &self.matrix.a;
        Ok((0..self.n())
            .map(|k| (0..self.n()).map(|l| a[(k, l)] * g[l]).sum::<f64>() / d)
            .collect())
    }

    /// All component weights at `m`.
    pub fn eval(&self, m: f64) -> Result<Vec<f64>> {
        let g = self.g(m)?;
        self.eval_with_g(&g, m)
    }

    pub fn eval_one(&self, k: usize, m: f64) -> Result<f64> {
        Ok(self.eval(m)?[k])
    }
}

/// Weight functions with the default (strict) range mode.
pub fn weight_functions(wm: WeightMatrix, densities: &[Density1D]) -> Result<WeightFunctionSet> {
    WeightFunctionSet::new(wm, densities.to_vec(), RangeMode::Strict)
}

/// Per-event weights, one row `(w_1(m_i), ..., w_n(m_i))` per event.
pub fn apply_weights(wfs: &WeightFunctionSet, data: &[f64]) -> Result<Vec<Vec<f64>>> {
    data.iter().map(|m| wfs.eval(*m)).collect()
}
