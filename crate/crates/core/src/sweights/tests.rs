use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::*;
use crate::densities::{integrate_with_breaks, Density1D, Interval};
use crate::linalg::Matrix;
use crate::mlfit::{Component, MixtureModel};

fn step_signal() -> Density1D {
    Density1D::histogram(vec![0.0, 0.5, 1.0], vec![2.0, 0.0]).unwrap()
}

fn toy_model(ns: f64, nb: f64) -> MixtureModel {
    let iv = Interval::unit();
    MixtureModel::new(vec![
        Component::new("sig", Density1D::normal(0.5, 0.05, iv).unwrap(), ns),
        Component::new("bkg", Density1D::exponential(1.5, iv).unwrap(), nb),
    ])
    .unwrap()
}

fn sample(model: &MixtureModel, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = vec![];
    for c in &model.components {
        for _ in 0..c.yield_ as usize {
            out.push(c.density.sample(&mut rng));
        }
    }
    out
}

#[test]
fn piecewise_uniform_variant_a() {
    let d = [step_signal(), Density1D::uniform(Interval::unit())];
    let wm = compute_w_variant_a(&d, &[0.5, 0.5], Interval::unit(), 1e-12).unwrap();
    let expect = [[4.0 / 3.0, 2.0 / 3.0], [2.0 / 3.0, 4.0 / 3.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((wm.w[(i, j)] - expect[i][j]).abs() < 1e-9);
        }
    }
    // α_s = 1, α_b = -1/2, β_s = -1/2, β_b = 1
    assert!((wm.a[(0, 0)] - 1.0).abs() < 1e-9 && (wm.a[(0, 1)] + 0.5).abs() < 1e-9);
    let rs = wm.a_row_sums();
    assert!((rs[0] - 0.5).abs() < 1e-10 && (rs[1] - 0.5).abs() < 1e-10);
    let prod = &wm.a * &wm.w;
    assert!((prod - Matrix::identity(2, 2)).abs().max() < 1e-10);

    let f = weight_functions(wm, &d).unwrap();
    assert!(f.warning.is_none());
    let rows = apply_weights(&f, &[0.25, 0.75]).unwrap();
    assert!((rows[0][0] - 1.0).abs() < 1e-9 && rows[0][1].abs() < 1e-9);
    assert!((rows[1][0] + 1.0).abs() < 1e-9 && (rows[1][1] - 2.0).abs() < 1e-9);
    for m in Interval::unit().grid(101) {
        let w = f.eval(m).unwrap();
        assert!((w[0] + w[1] - 1.0).abs() < 1e-12);
    }
    assert!(apply_weights(&f, &[]).unwrap().is_empty());
}

#[test]
fn proportional_shapes_are_singular() {
    let g = Density1D::exponential(1.0, Interval::unit()).unwrap();
    let err = compute_w_variant_a(&[g.clone(), g.clone()], &[0.3, 0.7], Interval::unit(), 1e-10);
    assert!(matches!(err, Err(crate::Error::SingularModel(_))));
}

#[test]
fn variant_b_single_event_by_hand() {
    let iv = Interval::unit();
    let d = [Density1D::normal(0.5, 0.1, iv).unwrap(), Density1D::uniform(iv)];
    let m = 0.42;
    let (gs, gb) = (d[0].pdf(m), d[1].pdf(m));
    let z = 0.3;
    let mix = z * gs + (1.0 - z) * gb;
    let w = sample_gram(&d, &[z, 1.0 - z], &[m]).unwrap();
    assert!((w[(0, 0)] - gs * gs / (mix * mix)).abs() < 1e-12);
    assert!((w[(0, 1)] - gs * gb / (mix * mix)).abs() < 1e-12);
    assert!((w[(1, 1)] - gb * gb / (mix * mix)).abs() < 1e-12);
    // a single event gives a rank-one matrix
    assert!(compute_w_variant_b(&d, &[z, 1.0 - z], &[m]).is_err());
}

#[test]
fn variant_b_denominator_zero_names_event() {
    let d = [step_signal(), step_signal().with_params(&[0.0, 2.0]).unwrap()];
    // both fine; an event outside any component's support gives a zero mixture
    let g0 = Density1D::histogram(vec![0.0, 0.5, 1.0], vec![1.0, 0.0]).unwrap();
    let err = compute_w_variant_b(&[g0.clone(), g0], &[0.5, 0.5], &[0.75]);
    assert!(matches!(err, Err(crate::Error::ZeroDenominator { m }) if m == 0.75));
    assert!(compute_w_variant_b(&d, &[0.5, 0.5], &[0.25, 0.75]).is_ok());
}

#[test]
fn variant_b_converges_to_quadrature() {
    let d = [step_signal(), Density1D::uniform(Interval::unit())];
    let mix = MixtureModel::new(vec![
        Component::new("s", d[0].clone(), 50_000.0),
        Component::new("b", d[1].clone(), 50_000.0),
    ])
    .unwrap();
    let data = sample(&mix, 11);
    let wm = compute_w_variant_b(&d, &[0.5, 0.5], &data).unwrap();
    let expect = [[4.0 / 3.0, 2.0 / 3.0], [2.0 / 3.0, 4.0 / 3.0]];
    for i in 0..2 {
        for j in 0..2 {
            // per-event terms are bounded by 16/9 so the MC error is below 0.006
            assert!((wm.w[(i, j)] - expect[i][j]).abs() < 0.02, "{}", wm.w[(i, j)]);
        }
    }
}

#[test]
fn self_consistency_and_variant_c() {
    let model = toy_model(1000.0, 4000.0);
    let data = sample(&model, 12);
    let n = data.len() as f64;
    let b = extract_sweights(&data, &model, Variant::B, true).unwrap();
    let ws: f64 = crate::mlfit::neumaier_sum(b.weights.iter().map(|r| r[0]));
    let zs = b.matrix.z_hat[0];
    assert!(((ws - n * zs) / (n * zs)).abs() < 1e-12, "{ws} vs {}", n * zs);
    assert!((ws - b.refit.params[0]).abs() < 1e-12 * ws);
    // variance of the weights equals the yields-only variance
    let w2: f64 = b.weights.iter().map(|r| r[0] * r[0]).sum();
    let var = b.refit.covariance.as_ref().unwrap()[(0, 0)];
    assert!((w2 / var - 1.0).abs() < 1e-9, "{w2} vs {var}");

    let cii = extract_sweights(&data, &model, Variant::Cii, true).unwrap();
    let ci = extract_sweights(&data, &model, Variant::Ci, true).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let r = b.matrix.w[(i, j)];
            assert!((cii.matrix.w[(i, j)] - r).abs() < 1e-9 * r.abs(), "Cii {i}{j}");
            assert!((ci.matrix.w[(i, j)] - r).abs() < 1e-3 * r.abs(), "Ci {i}{j}");
        }
    }
    // a yields-only "full" fit carries the analytic Hessian, so Ci is exact
    let fixed = extract_sweights(&data, &b.model, Variant::Ci, false).unwrap();
    let bb = extract_sweights(&data, &b.model, Variant::B, false).unwrap();
    assert!((fixed.matrix.w.clone() - bb.matrix.w.clone()).abs().max() < 1e-10 * bb.matrix.w.max());
}

#[test]
fn orthonormal_and_unit_sum_for_variant_a() {
    let model = toy_model(1000.0, 4000.0);
    let data = sample(&model, 13);
    let a = extract_sweights(&data, &model, Variant::A, true).unwrap();
    let d = a.model.densities();
    let iv = Interval::unit();
    for x in 0..2 {
        for y in 0..2 {
            let v = integrate_with_breaks(
                |m| a.functions.eval(m).unwrap()[x] * d[y].pdf(m),
                iv,
                &[],
                1e-12,
            )
            .unwrap();
            let e = if x == y { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 1e-8, "{x}{y}: {v}");
        }
    }
    for m in iv.grid(10_000) {
        let w = a.functions.eval(m).unwrap();
        assert!((w[0] + w[1] - 1.0).abs() < 1e-9);
    }
    // E[w_s] = ẑ within MC error for variant A
    let mean = a.weights.iter().map(|r| r[0]).sum::<f64>() / data.len() as f64;
    assert!((mean - a.matrix.z_hat[0]).abs() < 0.01);
}

#[test]
fn three_components() {
    let iv = Interval::unit();
    let model = MixtureModel::new(vec![
        Component::new("s", Density1D::normal(0.5, 0.05, iv).unwrap(), 1000.0),
        Component::new("p", Density1D::normal(0.2, 0.05, iv).unwrap(), 800.0),
        Component::new("b", Density1D::exponential(1.0, iv).unwrap(), 3000.0),
    ])
    .unwrap();
    let data = sample(&model, 14);
    let r = extract_sweights(&data, &model, Variant::B, false).unwrap();
    let n = data.len() as f64;
    for k in 0..3 {
        let s: f64 = r.weights.iter().map(|row| row[k]).sum();
        assert!((s - n * r.matrix.z_hat[k]).abs() < 1e-10 * n);
    }
    for row in &r.weights {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn strict_and_extrapolating_modes() {
    let d = [step_signal(), Density1D::uniform(Interval::unit())];
    let wm = compute_w_variant_a(&d, &[0.5, 0.5], Interval::unit(), 1e-12).unwrap();
    let strict = weight_functions(wm.clone(), &d).unwrap();
    assert!(strict.eval(1.2).is_err());
    let lenient = WeightFunctionSet::new(wm, d.to_vec(), RangeMode::Extrapolate).unwrap();
    assert!(lenient.eval(1.2).is_ok());
}

#[test]
fn weight_matrix_json() {
    let d = [step_signal(), Density1D::uniform(Interval::unit())];
    let wm = compute_w_variant_a(&d, &[0.5, 0.5], Interval::unit(), 1e-12).unwrap();
    let s = serde_json::to_string(&wm).unwrap();
    assert!(s.contains("\"variant\":\"A\""));
    let back: WeightMatrix = serde_json::from_str(&s).unwrap();
    assert_eq!(back, wm);
    assert_eq!("cii".parse::<Variant>().unwrap(), Variant::Cii);
}
