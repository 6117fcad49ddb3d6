use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::*;
use crate::densities::{Density1D, Interval};
use crate::linalg::Matrix;
use crate::mlfit::{fit_extended_ml, fit_weighted_ml, yields_only_refit, Component, MixtureModel};

fn m_range() -> Interval {
    Interval::unit()
}

fn t_range() -> Interval {
    Interval::new(0.0, 3.0).unwrap()
}

fn model(free_shapes: bool) -> MixtureModel {
    let mut s = Component::new("sig", Density1D::normal(0.5, 0.08, m_range()).unwrap(), 600.0);
    let mut b = Component::new("bkg", Density1D::exponential(1.5, m_range()).unwrap(), 1400.0);
    if !free_shapes {
        s.free = Some(vec![false, false]);
        b.free = Some(vec![false]);
    }
    MixtureModel::new(vec![s, b]).unwrap()
}

fn hs() -> Density1D {
    Density1D::exponential(2.0, t_range()).unwrap()
}

/// Factorising two-component toy in `(m, t)`.
fn toy(n: usize, z: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let gs = Density1D::normal(0.5, 0.08, m_range()).unwrap();
    let gb = Density1D::exponential(1.5, m_range()).unwrap();
    let hb = Density1D::normal(1.0, 0.4, t_range()).unwrap();
    let (mut m, mut t) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        if rng.random::<f64>() < z {
            m.push(gs.sample(&mut rng));
            t.push(hs().sample(&mut rng));
        } else {
            m.push(gb.sample(&mut rng));
            t.push(hb.sample(&mut rng));
        }
    }
    (m, t)
}

/// Fit in `m`, weights at the fitted `W`, weighted fit in `t`; returns `λ̂`.
fn fitted_lambda(spec: &QuasiScoreSpec, m: &[f64], t: &[f64]) -> Vec<f64> {
    let fit = if spec.n_phi() > 0 {
        fit_extended_ml(m, &spec.model, None, None).unwrap()
    } else {
        yields_only_refit(m, &spec.model, None).unwrap()
    };
    assert!(fit.converged);
    let l0 = spec.lambda_from_fit(m, &fit.params, &spec.hs.params()).unwrap();
    let w = spec.signal_weights(m, &l0).unwrap();
    let tf = fit_weighted_ml(t, &w, &spec.hs, None).unwrap();
    assert!(tf.converged);
    spec.lambda_from_fit(m, &fit.params, &tf.params).unwrap()
}

fn max_rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let s = (a[(i, i)] * a[(j, j)]).sqrt();
            worst = worst.max((a[(i, j)] - b[(i, j)]).abs() / s);
        }
    }
    worst
}

#[test]
fn weight_derivatives_match_finite_differences() {
    let w = [3.1, 0.7, 1.9];
    for (gs, gb) in [(2.0, 0.5), (0.1, 1.3), (4.0, 4.0)] {
        let d = sweight_w_derivatives(gs, gb, &w);
        for k in 0..3 {
            let h = 1e-6;
            let (mut p, mut q) = (w, w);
            p[k] += h;
            q[k] -= h;
            let num = (sweight_from_w(gs, gb, &p) - sweight_from_w(gs, gb, &q)) / (2.0 * h);
            assert!((num - d[k]).abs() < 1e-8 * d[k].abs().max(1.0), "{k}: {num} vs {}", d[k]);
        }
    }
}

#[test]
fn hessian_normalized_weights_sum_to_yield() {
    let (m, _) = toy(3000, 0.3, 11);
    let spec = QuasiScoreSpec::new(model(false), hs()).unwrap();
    let fit = yields_only_refit(&m, &spec.model, None).unwrap();
    let l = spec.lambda_from_fit(&m, &fit.params, &[2.0]).unwrap();
    let w = spec.signal_weights(&m, &l).unwrap();
    let sum: f64 = w.iter().sum();
    assert!((sum - fit.params[0]).abs() < 1e-9 * fit.params[0], "{sum} vs {}", fit.params[0]);
}

#[test]
fn fitted_point_is_a_root_and_perturbation_is_not() {
    let (m, t) = toy(3000, 0.3, 5);
    let spec = QuasiScoreSpec::new(model(true), hs()).unwrap();
    assert_eq!(spec.dim(), 2 + 3 + 3 + 1);
    assert_eq!(spec.lambda_names()[5 + 3], "theta0");
    let l = fitted_lambda(&spec, &m, &t);
    assert!(spec.root_residual(&m, &t, &l).unwrap() < ROOT_TOL);
    let c = corrected_covariance_full(&m, &t, &spec, &l, None).unwrap();
    assert!(c.theta_error(0) > 0.0 && c.naive_error(0) > 0.0);
    let full = c.full.as_ref().unwrap();
    assert!(crate::linalg::is_psd(full, 1e-8));

    let mut bad = l.clone();
    bad[0] *= 1.01;
    assert!(matches!(
        corrected_covariance_full(&m, &t, &spec, &bad, None),
        Err(crate::Error::NotARoot { .. })
    ));
}

#[test]
fn score_rescaling_leaves_covariance_unchanged() {
    let (m, t) = toy(2000, 0.4, 8);
    let spec = QuasiScoreSpec::new(model(true), hs()).unwrap();
    let l = fitted_lambda(&spec, &m, &t);
    let base = corrected_covariance_full(&m, &t, &spec, &l, None).unwrap();
    let scale: Vec<f64> = (0..spec.dim()).map(|k| [3.0, -0.25, 1e3, 7.0][k % 4]).collect();
    let scaled = corrected_covariance_full(&m, &t, &spec, &l, Some(&scale)).unwrap();
    assert!(max_rel_diff(base.full.as_ref().unwrap(), scaled.full.as_ref().unwrap()) < 1e-8);
    assert!(corrected_covariance_full(&m, &t, &spec, &l, Some(&[1.0])).is_err());
}

#[test]
fn unit_weights_reduce_to_unweighted_sandwich() {
    let (m, _) = toy(3000, 0.5, 21);
    // well-specified unweighted fit: every t from the signal density
    let mut rng = ChaCha20Rng::seed_from_u64(22);
    let t: Vec<f64> = m.iter().map(|_| hs().sample(&mut rng)).collect();
    let mut spec = QuasiScoreSpec::new(model(true), hs()).unwrap();
    spec.weighting = Weighting::Unit;
    let l = fitted_lambda(&spec, &m, &t);
    let o = spec.theta_offset();
    let full = corrected_covariance_full(&m, &t, &spec, &l, None).unwrap();
    let ones = vec![1.0; t.len()];
    let fixed = corrected_covariance_fixed_shapes(&t, &ones, None, None, &spec.hs, &l[o..]).unwrap();
    let rel = (full.theta_block[(0, 0)] - fixed.theta_block[(0, 0)]).abs() / fixed.theta_block[(0, 0)];
    assert!(rel < 1e-6, "{rel}");
    let r = full.theta_block[(0, 0)] / full.naive[(0, 0)];
    assert!((r - 1.0).abs() < 0.1, "{r}");
}

#[test]
fn fixed_shape_terms_and_reduction() {
    let (m, t) = toy(4000, 0.3, 3);
    let mdl = model(false);
    let fit = yields_only_refit(&m, &mdl, None).unwrap();
    let d = mdl.densities();
    let terms = fixed_shape_terms(&m, &d[0], &d[1], [fit.params[0], fit.params[1]]).unwrap();
    let sum: f64 = terms.weights.iter().sum();
    assert!((sum - fit.params[0]).abs() < 1e-9 * fit.params[0]);
    let tf = fit_weighted_ml(&t, &terms.weights, &hs(), None).unwrap();

    let no_e = corrected_covariance_fixed_shapes(&t, &terms.weights, None, None, &hs(), &tf.params).unwrap();
    assert_eq!(no_e.theta_block, no_e.first_term.clone().unwrap());
    assert!(no_e.reduction_term.as_ref().unwrap().iter().all(|v| *v == 0.0));

    let c = corrected_covariance_fixed_shapes(
        &t,
        &terms.weights,
        Some(&terms.dw),
        Some(&terms.c_prime),
        &hs(),
        &tf.params,
    )
    .unwrap();
    let red = c.reduction_term.as_ref().unwrap();
    assert!(red[(0, 0)] >= 0.0);
    assert!(c.theta_block[(0, 0)] <= c.first_term.as_ref().unwrap()[(0, 0)]);
    assert!(
        corrected_covariance_fixed_shapes(&t, &terms.weights, Some(&terms.dw), None, &hs(), &tf.params)
            .is_err()
    );
}

#[test]
fn score_variance_psi_block_is_c_prime() {
    let (m, t) = toy(2000, 0.3, 17);
    let spec = QuasiScoreSpec::new(model(false), hs()).unwrap();
    let l = fitted_lambda(&spec, &m, &t);
    let cs = spec.score_variance(&m, &t, &l).unwrap();
    let d = spec.model.densities();
    let terms = fixed_shape_terms(&m, &d[0], &d[1], [l[0], l[1]]).unwrap();
    for a in 0..3 {
        for b in 0..3 {
            let x = cs[(2 + a, 2 + b)];
            let y = terms.c_prime[(a, b)];
            assert!((x - y).abs() <= 1e-12 * y.abs(), "{a}{b}: {x} vs {y}");
        }
        assert!((l[2 + a] - terms.w[a]).abs() <= 1e-12 * terms.w[a]);
    }
    // yields block is the yields-fit Hessian
    let h00: f64 = m
        .iter()
        .map(|x| {
            let den = l[0] * d[0].pdf(*x) + l[1] * d[1].pdf(*x);
            (d[0].pdf(*x) / den).powi(2)
        })
        .sum();
    assert!((cs[(0, 0)] - h00).abs() < 1e-10 * h00);
}

#[test]
fn full_and_fixed_paths_agree_for_known_shapes() {
    let (m, t) = toy(20_000, 0.3, 99);
    let spec = QuasiScoreSpec::new(model(false), hs()).unwrap();
    let l = fitted_lambda(&spec, &m, &t);
    let full = corrected_covariance_full(&m, &t, &spec, &l, None).unwrap();
    let d = spec.model.densities();
    let terms = fixed_shape_terms(&m, &d[0], &d[1], [l[0], l[1]]).unwrap();
    let o = spec.theta_offset();
    let fixed = corrected_covariance_fixed_shapes(
        &t,
        &terms.weights,
        Some(&terms.dw),
        Some(&terms.c_prime),
        &spec.hs,
        &l[o..],
    )
    .unwrap();
    let rel = (full.theta_block[(0, 0)] / fixed.theta_block[(0, 0)] - 1.0).abs();
    assert!(rel < 1e-3, "{rel}");
}

#[test]
fn rejects_bad_layouts() {
    let three = MixtureModel::new(vec![
        Component::new("a", Density1D::uniform(m_range()), 1.0),
        Component::new("b", Density1D::uniform(m_range()), 1.0),
        Component::new("c", Density1D::uniform(m_range()), 1.0),
    ])
    .unwrap();
    assert!(QuasiScoreSpec::new(three, hs()).is_err());
    let spec = QuasiScoreSpec::new(model(false), hs()).unwrap();
    assert!(spec.score(&[0.5], &[1.0], &[1.0, 2.0]).is_err());
    assert!(spec.score(&[0.5, 0.6], &[1.0], &[1.0, 1.0, 1.0, 0.0, 1.0, 2.0]).is_err());
}

#[test]
fn json_round_trip() {
    let c = CorrectedCovariance {
        full: None,
        theta_block: Matrix::from_element(1, 1, 0.1234567890123456789),
        naive: Matrix::from_element(1, 1, 0.1),
        first_term: Some(Matrix::from_element(1, 1, 0.2)),
        reduction_term: None,
    };
    let s = serde_json::to_string(&c).unwrap();
    assert!(!s.contains("\"full\""));
    let back: CorrectedCovariance = serde_json::from_str(&s).unwrap();
    assert_eq!(back, c);
}
