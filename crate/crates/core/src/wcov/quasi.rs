//! Quasi-score of the two-step (yields, `W`, weighted fit) estimation.

use crate::densities::Density1D;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mlfit::{neumaier_sum, MixtureModel};

/// Signal weight in terms of the three unique `W` elements `(ss, sb, bb)`.
pub fn sweight_from_w(gs: f64, gb: f64, w: &[f64; 3]) -> f64 {
    let [ss, sb, bb] = *w;
    (bb * gs - sb * gb) / ((bb - sb) * gs + (ss - sb) * gb)
}

/// Analytic `∂w_s/∂(W_ss, W_sb, W_bb)` of [`sweight_from_w`].
pub fn sweight_w_derivatives(gs: f64, gb: f64, w: &[f64; 3]) -> [f64; 3] {
    let [ss, sb, bb] = *w;
    let num = bb * gs - sb * gb;
    let den = (bb - sb) * gs + (ss - sb) * gb;
    let dnum = [0.0, -gb, gs];
    let dden = [gb, -gs - gb, gs];
    let d2 = den * den;
    [
        (dnum[0] * den - num * dden[0]) / d2,
        (dnum[1] * den - num * dden[1]) / d2,
        (dnum[2] * den - num * dden[2]) / d2,
    ]
}

/// Which per-event weight enters the `θ` estimating equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Signal sWeights `w_s(m; φ, W)`.
    #[default]
    SWeights,
    /// `w ≡ 1`: an ordinary unweighted fit in `t`.
    Unit,
}

/// Parameter layout and model pieces of the quasi-score
/// `λ = (N_s, N_b, φ, W_ss, W_sb, W_bb, θ)`.
///
/// `W` here is normalized like the Hessian of the yields fit,
/// `W_xy = Σ_i g_x g_y / (N_s g_s + N_b g_b)²`, which is the sample-average
/// `W` divided by `N`. The weight functions are invariant under this scaling.
#[derive(Debug, Clone)]
pub struct QuasiScoreSpec {
    /// Two components, signal first; free shape parameters form `φ`.
    pub model: MixtureModel,
    /// Signal density in `t`; all its parameters form `θ`.
    pub hs: Density1D,
    pub weighting: Weighting,
    /// Optional per-event factors multiplying the signal weight in the `θ`
    /// equations (for example `1/ε`).
    pub event_factors: Option<Vec<f64>>,
}

pub(crate) struct Point {
    pub ns: f64,
    pub nb: f64,
    pub gs: Density1D,
    pub gb: Density1D,
    pub w: [f64; 3],
    pub h: Density1D,
}

impl QuasiScoreSpec {
    pub fn new(model: MixtureModel, hs: Density1D) -> Result<Self> {
        if model.n_components() != 2 {
            return Err(Error::input("the quasi-score needs exactly two components"));
        }
        if hs.params().is_empty() {
            return Err(Error::input("signal density in t has no parameters"));
        }
        Ok(Self {
            model,
            hs,
            weighting: Weighting::SWeights,
            event_factors: None,
        })
    }

    pub fn n_phi(&self) -> usize {
        self.model.shape_layout().len()
    }

    pub fn n_theta(&self) -> usize {
        self.hs.params().len()
    }

    pub fn dim(&self) -> usize {
        2 + self.n_phi() + 3 + self.n_theta()
    }

    /// Index of the first `θ` parameter in `λ`.
    pub fn theta_offset(&self) -> usize {
        5 + self.n_phi()
    }

    pub fn lambda_names(&self) -> Vec<String> {
        let mut n = self.model.param_names();
        n.extend(["W_ss", "W_sb", "W_bb"].map(String::from));
        n.extend((0..self.n_theta()).map(|j| format!("theta{j}")));
        n
    }

    pub(crate) fn unpack(&self, lambda: &[f64]) -> Result<Point> {
        if lambda.len() != self.dim() {
            return Err(Error::input(format!(
                "λ has {} entries, expected {}",
                lambda.len(),
                self.dim()
            )));
        }
        let np = self.n_phi();
        let dens = self.model.densities_at(&lambda[..2 + np])?;
        let w = [lambda[2 + np], lambda[3 + np], lambda[4 + np]];
        let h = self.hs.with_params(&lambda[self.theta_offset()..])?;
        let mut it = dens.into_iter();
        Ok(Point {
            ns: lambda[0],
            nb: lambda[1],
            gs: it.next().unwrap(),
            gb: it.next().unwrap(),
            w,
            h,
        })
    }

    /// `(W_ss, W_sb, W_bb)` at yields and shapes `yields_phi`, so that the
    /// `ψ` equations vanish.
    pub fn w_at(&self, m: &[f64], yields_phi: &[f64]) -> Result<[f64; 3]> {
        let dens = self.model.densities_at(yields_phi)?;
        let (ns, nb) = (yields_phi[0], yields_phi[1]);
        let mut t: [Vec<f64>; 3] = Default::default();
        for mi in m {
            let (s, b) = (dens[0].pdf(*mi), dens[1].pdf(*mi));
            let d = ns * s + nb * b;
            if !(d > 0.0) {
                return Err(Error::ZeroDenominator { m: *mi });
            }
            let d2 = d * d;
            t[0].push(s * s / d2);
            t[1].push(s * b / d2);
            t[2].push(b * b / d2);
        }
        Ok(t.map(neumaier_sum))
    }

    /// Assembles `λ` from the `m`-fit parameters (yields then `φ`) and `θ`,
    /// with `W` chosen to solve the `ψ` equations.
    pub fn lambda_from_fit(&self, m: &[f64], yields_phi: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        if yields_phi.len() != 2 + self.n_phi() || theta.len() != self.n_theta() {
            return Err(Error::input("parameter vectors do not match the quasi-score layout"));
        }
        let w = self.w_at(m, yields_phi)?;
        let mut l = yields_phi.to_vec();
        l.extend_from_slice(&w);
        l.extend_from_slice(theta);
        Ok(l)
    }

    /// Signal weights `w_s(m_i; φ, W)` (times any event factors) at `λ`.
    pub fn signal_weights(&self, m: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
        let p = self.unpack(lambda)?;
        m.iter()
            .enumerate()
            .map(|(i, mi)| {
                let f = self.event_factors.as_ref().map_or(1.0, |e| e[i]);
                Ok(f * match self.weighting {
                    Weighting::Unit => 1.0,
                    Weighting::SWeights => sweight_from_w(p.gs.pdf(*mi), p.gb.pdf(*mi), &p.w),
                })
            })
            .collect()
    }

    fn check_data(&self, m: &[f64], t: &[f64]) -> Result<()> {
        if m.len() != t.len() {
            return Err(Error::input("m and t columns differ in length"));
        }
        if m.is_empty() {
            return Err(Error::input("no events"));
        }
        if let Some(e) = &self.event_factors {
            if e.len() != m.len() {
                return Err(Error::input("event factors and data differ in length"));
            }
        }
        Ok(())
    }

    /// Per-event random parts `u_i` of the quasi-score; `S = Σ_i u_i - c`
    /// with `c = (1, 1, 0.., W_ss, W_sb, W_bb, 0..)`.
    pub fn score_terms(&self, m: &[f64], t: &[f64], lambda: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_data(m, t)?;
        let p = self.unpack(lambda)?;
        let layout = self.model.shape_layout();
        let np = layout.len();
        let dim = self.dim();
        let free_s = layout.iter().any(|(c, _)| *c == 0);
        let free_b = layout.iter().any(|(c, _)| *c == 1);
        let mut out = Vec::with_capacity(m.len());
        for (i, (mi, ti)) in m.iter().zip(t).enumerate() {
            let (s, b) = (p.gs.pdf(*mi), p.gb.pdf(*mi));
            let d = p.ns * s + p.nb * b;
            if !(d > 0.0) {
                return Err(Error::ZeroDenominator { m: *mi });
            }
            let mut u = vec![0.0; dim];
            u[0] = s / d;
            u[1] = b / d;
            let ds = if free_s { p.gs.pdf_grad(*mi) } else { vec![] };
            let db = if free_b { p.gb.pdf_grad(*mi) } else { vec![] };
            for (a, (c, j)) in layout.iter().enumerate() {
                u[2 + a] = if *c == 0 { p.ns * ds[*j] } else { p.nb * db[*j] } / d;
            }
            let d2 = d * d;
            u[2 + np] = s * s / d2;
            u[3 + np] = s * b / d2;
            u[4 + np] = b * b / d2;
            let f = self.event_factors.as_ref().map_or(1.0, |e| e[i]);
            let w = f * match self.weighting {
                Weighting::Unit => 1.0,
                Weighting::SWeights => sweight_from_w(s, b, &p.w),
            };
            if w != 0.0 {
                for (k, g) in p.h.ln_pdf_grad(*ti).into_iter().enumerate() {
                    u[5 + np + k] = w * g;
                }
            }
            out.push(u);
        }
        Ok(out)
    }

    /// The quasi-score vector `S(λ)`.
    pub fn score(&self, m: &[f64], t: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
        let terms = self.score_terms(m, t, lambda)?;
        let np = self.n_phi();
        let mut s: Vec<f64> = (0..self.dim())
            .map(|j| neumaier_sum(terms.iter().map(|u| u[j])))
            .collect();
        s[0] -= 1.0;
        s[1] -= 1.0;
        for k in 0..3 {
            s[2 + np + k] -= lambda[2 + np + k];
        }
        Ok(s)
    }

    /// Largest `|S_j|` relative to the size of its terms,
    /// `Σ_i |u_ij| + |c_j|`.
    pub fn root_residual(&self, m: &[f64], t: &[f64], lambda: &[f64]) -> Result<f64> {
        let terms = self.score_terms(m, t, lambda)?;
        let s = self.score(m, t, lambda)?;
        let np = self.n_phi();
        let mut worst: f64 = 0.0;
        for (j, sj) in s.iter().enumerate() {
            let c = match j {
                0 | 1 => 1.0,
                _ if (2 + np..5 + np).contains(&j) => lambda[j].abs(),
                _ => 0.0,
            };
            let scale = neumaier_sum(terms.iter().map(|u| u[j].abs())) + c;
            if scale > 0.0 {
                worst = worst.max(sj.abs() / scale);
            }
        }
        Ok(worst)
    }

    /// Sample estimate of `E[S Sᵀ]`, `Σ_i u_i u_iᵀ`. Its blocks are the
    /// ten sample-estimate formulas for the yields, shape, `ψ` and `ξ`
    /// components; the constant offsets do not enter because the number of
    /// events is Poisson distributed.
    pub fn score_variance(&self, m: &[f64], t: &[f64], lambda: &[f64]) -> Result<Matrix> {
        let terms = self.score_terms(m, t, lambda)?;
        let d = self.dim();
        let mut c = Matrix::zeros(d, d);
        for a in 0..d {
            for b in 0..=a {
                let v = neumaier_sum(terms.iter().map(|u| u[a] * u[b]));
                c[(a, b)] = v;
                c[(b, a)] = v;
            }
        }
        Ok(c)
    }
}
