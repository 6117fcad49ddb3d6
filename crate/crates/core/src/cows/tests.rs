use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::*;
use crate::densities::{integrate_with_breaks, monomial_basis, Density1D, EfficiencyMap, Interval};
use crate::linalg::Matrix;
use crate::sweights::{compute_w_variant_a, weight_functions};

fn sig() -> Density1D {
    Density1D::normal(0.5, 0.05, Interval::unit()).unwrap()
}

fn bkg() -> Density1D {
    Density1D::exponential(1.5, Interval::unit()).unwrap()
}

fn sample_mix(ns: usize, nb: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (s, b) = (sig(), bkg());
    let mut v: Vec<f64> = (0..ns).map(|_| s.sample(&mut rng)).collect();
    v.extend((0..nb).map(|_| b.sample(&mut rng)));
    v
}

fn overlap(f: impl Fn(f64) -> f64, g: &Density1D) -> f64 {
    integrate_with_breaks(|m| f(m) * g.pdf(m), Interval::unit(), &g.breaks(), 1e-12).unwrap()
}

#[test]
fn mixture_variance_reproduces_sweights() {
    let z = [0.2, 0.8];
    let spec = CowSpec::new(vec![sig(), bkg()], VarianceFn::Mixture(z.to_vec()), Interval::unit());
    let cow = build_cow(spec, 1e-13).unwrap();
    let wm = compute_w_variant_a(&[sig(), bkg()], &z, Interval::unit(), 1e-13).unwrap();
    let sw = weight_functions(wm, &[sig(), bkg()]).unwrap();
    for m in Interval::unit().grid(1001) {
        let a = cow.eval(m).unwrap();
        let b = sw.eval(m).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-10 && (a[1] - b[1]).abs() < 1e-10, "m={m}");
    }
}

#[test]
fn polynomial_basis_unit_variance() {
    let basis = monomial_basis(3, Interval::unit()).unwrap();
    let cow = build_cow(CowSpec::new(basis.clone(), VarianceFn::Unity, Interval::unit()), 1e-13).unwrap();
    let prod = &cow.a * &cow.w;
    assert!((prod - Matrix::identity(3, 3)).abs().max() < 1e-10);
    for k in 0..3 {
        for (l, g) in basis.iter().enumerate() {
            let v = overlap(|m| cow.eval(m).unwrap()[k], g);
            let e = if k == l { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 1e-8);
        }
    }
    // I = 1 lies in the span of the basis, so the weights sum to one
    for m in Interval::unit().grid(10_000) {
        assert!((cow.eval(m).unwrap().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    // weights are polynomials of degree 2: the third difference on a grid vanishes
    let f = |m: f64| cow.eval(m).unwrap()[0];
    let h = 0.1;
    let d3 = f(0.6) - 3.0 * f(0.5) + 3.0 * f(0.4) - f(0.3);
    assert!(d3.abs() < 1e-9 * (1.0 / h));
}

#[test]
fn duplicate_basis_is_ill_conditioned() {
    let spec = CowSpec::new(vec![sig(), bkg(), bkg()], VarianceFn::Unity, Interval::unit());
    assert!(matches!(build_cow(spec, 1e-12), Err(crate::Error::IllConditioned { .. })));
}

#[test]
fn single_bin_q_equals_unity() {
    let m = sample_mix(500, 500, 1);
    let h = variance_fn_qm(&m, &[], None, 1, Interval::unit()).unwrap();
    let basis = vec![sig(), bkg()];
    let a = build_cow(CowSpec::new(basis.clone(), VarianceFn::Histogram(h), Interval::unit()), 1e-12).unwrap();
    let b = build_cow(CowSpec::new(basis, VarianceFn::Unity, Interval::unit()), 1e-12).unwrap();
    for x in Interval::unit().grid(57) {
        let (wa, wb) = (a.eval(x).unwrap(), b.eval(x).unwrap());
        assert!((wa[0] - wb[0]).abs() < 1e-9);
    }
}

#[test]
fn constant_efficiency_cancels_in_q() {
    let m = sample_mix(500, 500, 2);
    let t = vec![0.0; m.len()];
    let e1 = EfficiencyMap::Constant { value: 1.0 };
    let e2 = EfficiencyMap::Constant { value: 0.5 };
    let h1 = variance_fn_qm(&m, &t, Some(&e1), 20, Interval::unit()).unwrap();
    let h2 = variance_fn_qm(&m, &t, Some(&e2), 20, Interval::unit()).unwrap();
    for (a, b) in h1.contents.iter().zip(&h2.contents) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn corrected_weights_scale_with_inverse_efficiency() {
    let m = sample_mix(100, 100, 3);
    let t = vec![0.3; m.len()];
    let cow = build_cow(CowSpec::new(vec![sig(), bkg()], VarianceFn::Unity, Interval::unit()), 1e-12).unwrap();
    let plain = cow.weights(&m).unwrap();
    let one = efficiency_corrected_weights(&cow, None, &m, &t).unwrap();
    let half = efficiency_corrected_weights(&cow, Some(&EfficiencyMap::Constant { value: 0.5 }), &m, &t).unwrap();
    for ((p, o), h) in plain.iter().zip(&one).zip(&half) {
        assert_eq!(p, o);
        assert!((h[0] - 2.0 * p[0]).abs() < 1e-15 * p[0].abs().max(1.0));
    }
    let tiny = EfficiencyMap::Constant { value: 1e-7 };
    assert!(matches!(
        efficiency_corrected_weights(&cow, Some(&tiny), &m, &t),
        Err(crate::Error::TinyEfficiency { .. })
    ));
}

#[test]
fn ml_iteration_matches_extended_fit() {
    let m = sample_mix(1000, 4000, 4);
    let it = variance_fn_ml_iterative(&[sig(), bkg()], &m, &[], None, 50, 1e-12).unwrap();
    let model = crate::mlfit::MixtureModel::new(vec![
        crate::mlfit::Component::new("s", sig(), 1000.0),
        crate::mlfit::Component::new("b", bkg(), 4000.0),
    ])
    .unwrap();
    let fit = crate::mlfit::yields_only_refit(&m, &model, None).unwrap();
    let z_fit = fit.params[0] / m.len() as f64;
    assert!((it.z[0] - z_fit).abs() < 1e-6, "{} vs {z_fit}", it.z[0]);
    let quick = variance_fn_ml_iterative(&[sig(), bkg()], &m, &[], None, 50, 1e-6).unwrap();
    assert!(quick.iterations <= 4, "{} iterations", quick.iterations);
}

#[test]
fn pure_signal_drives_fraction_to_one() {
    let m = sample_mix(3000, 0, 5);
    let it = variance_fn_ml_iterative(&[sig(), bkg()], &m, &[], None, 100, 1e-9).unwrap();
    assert!(it.z[0] > 0.98, "{:?}", it.z);
}

#[test]
fn single_component_fraction_is_one() {
    let m = sample_mix(200, 0, 6);
    let cow = build_cow(CowSpec::new(vec![sig()], VarianceFn::Unity, Interval::unit()), 1e-12).unwrap();
    let (z, d) = estimate_fractions(&cow, None, &m, &[]).unwrap();
    assert_eq!(d, 1.0);
    assert_eq!(z.len(), 1);
    // w_0 = g_0 / ∫g_0², so the estimate fluctuates around one
    assert!((z[0] - 1.0).abs() < 0.1);
}

#[test]
fn signal_proxy_normalization() {
    let proxy = Density1D::normal(0.5, 0.06, Interval::unit()).unwrap();
    let mut spec = CowSpec::new(vec![sig(), bkg()], VarianceFn::Unity, Interval::unit());
    spec.signal_proxy = Some(proxy.clone());
    let cow = build_cow(spec, 1e-13).unwrap();
    let w0 = |m: f64| cow.eval(m).unwrap()[0];
    assert!((overlap(w0, &proxy) - 1.0).abs() < 1e-8);
    assert!(overlap(w0, &bkg()).abs() < 1e-8);
}

#[test]
fn spec_json_round_trip() {
    let mut spec = CowSpec::new(
        vec![sig(), bkg()],
        VarianceFn::Mixture(vec![0.3, 0.7]),
        Interval::unit(),
    );
    spec.efficiency = Some(EfficiencyMap::Bilinear {
        coeffs: [0.5, 0.3, 0.15, -0.1],
    });
    let s = serde_json::to_string(&spec).unwrap();
    let back: CowSpec = serde_json::from_str(&s).unwrap();
    assert_eq!(back, spec);
    let u: VarianceFn = serde_json::from_str("\"unity\"").unwrap();
    assert_eq!(u, VarianceFn::Unity);
}
