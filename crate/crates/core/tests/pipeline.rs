use cowlib::cows::{build_cow, efficiency_corrected_weights, CowSpec, VarianceFn};
use cowlib::densities::{Density1D, Interval};
use cowlib::mlfit::{Component, MixtureModel};
use cowlib::pipeline::{analyse, AnalysisInput, Correction, CowVariance, Method};
use cowlib::sweights::{extract_sweights, Variant};
use cowlib::toygen::{analysis_model, generate, multicomponent_shapes, ToySpec};

#[test]
fn weighted_projections_recover_true_label_counts() {
    let fractions = [0.3, 0.3, 0.4];
    let d = generate(&ToySpec::multicomponent(20_000, fractions, 31)).unwrap();
    let shapes = multicomponent_shapes();
    let model = MixtureModel::new(
        shapes
            .m
            .iter()
            .zip(["a", "b", "c"])
            .zip(fractions)
            .map(|((g, name), z)| Component::new(name, g.clone(), z * 20_000.0))
            .collect(),
    )
    .unwrap();
    let sw = extract_sweights(&d.m, &model.shapes_fixed(), Variant::B, false).unwrap();
    let cow = build_cow(
        CowSpec::new(shapes.m.to_vec(), VarianceFn::Unity, Interval::unit()),
        1e-10,
    )
    .unwrap();
    let cw = efficiency_corrected_weights(&cow, None, &d.m, &d.m).unwrap();
    let counts = d.label_counts(3);

    // u band of component 0 and v band of component 1
    let in_u = |i: usize| (0.15..0.35).contains(&d.u[i]);
    let in_v = |i: usize| (0.65..0.85).contains(&d.v[i]);
    for (name, rows) in [("sweights", &sw.weights), ("cow", &cw)] {
        for k in 0..3 {
            let s: f64 = rows.iter().map(|r| r[k]).sum();
            let e: f64 = rows.iter().map(|r| r[k] * r[k]).sum::<f64>().sqrt();
            let truth = counts[k] as f64;
            assert!((s - truth).abs() < 3.0 * e, "{name} {k}: {s} vs {truth} ± {e}");
        }
        for (k, sel) in [(0usize, &in_u as &dyn Fn(usize) -> bool), (1, &in_v)] {
            let idx: Vec<usize> = (0..d.len()).filter(|i| sel(*i)).collect();
            let s: f64 = idx.iter().map(|i| rows[*i][k]).sum();
            let e: f64 = idx.iter().map(|i| rows[*i][k].powi(2)).sum::<f64>().sqrt();
            let truth = idx.iter().filter(|i| d.label[**i] == k).count() as f64;
            assert!((s - truth).abs() < 3.0 * e, "{name} band {k}: {s} vs {truth} ± {e}");
        }
    }
}

#[test]
fn every_method_runs_end_to_end() {
    let toy = ToySpec::simple(3000, 0.3, 8);
    let d = generate(&toy).unwrap();
    let model = analysis_model(&toy).unwrap();
    let hs = toy.shapes.signal_t().unwrap();
    let input = AnalysisInput {
        m: &d.m,
        t: &d.t,
        efficiency: None,
        divide_sweights_by_efficiency: false,
        model: &model,
        hs: &hs,
    };
    let mut methods: Vec<Method> = [Variant::A, Variant::B, Variant::Ci, Variant::Cii]
        .into_iter()
        .map(Method::sweights)
        .collect();
    for correction in [Correction::FixedShapes, Correction::None] {
        methods.push(Method::Sweights {
            variant: Variant::B,
            fit_shapes: true,
            correction,
        });
    }
    methods.push(Method::cow(3, CowVariance::Qm { bins: 50 }));
    methods.push(Method::cow(2, CowVariance::Unity));
    methods.push(Method::cow(2, CowVariance::MlIterative { max_iter: 200, tol: 1e-8 }));
    for method in methods {
        let a = analyse(&input, &method).unwrap_or_else(|e| panic!("{}: {e}", method.label()));
        let pull = (a.theta[0] - 2.0) / a.corrected_error(0);
        assert!(pull.abs() < 4.0, "{}: {} ± {}", a.method, a.theta[0], a.corrected_error(0));
        assert!(a.n_eq > 0.0 && a.n_eq < a.sum_w * 1.5, "{}", a.method);
        if method == Method::sweights(Variant::B) {
            let y = a.yields.unwrap().yields_only;
            assert!((a.sum_w - y).abs() < 1e-10 * y);
            // the correction adds the uncertainty of the weights
            assert!(a.corrected_error(0) > a.naive_error(0));
        }
    }
}

#[test]
fn efficiency_requires_cow_or_explicit_division() {
    let toy = ToySpec::nonfactorising(2000, 0.5, 4);
    let d = generate(&toy).unwrap();
    let model = analysis_model(&toy).unwrap();
    let hs = toy.shapes.signal_t().unwrap();
    let eff = d.efficiency.clone().unwrap();
    let mut input = AnalysisInput {
        m: &d.m,
        t: &d.t,
        efficiency: Some(&eff),
        divide_sweights_by_efficiency: false,
        model: &model,
        hs: &hs,
    };
    assert!(analyse(&input, &Method::default()).is_err());
    assert!(analyse(&input, &Method::cow(3, CowVariance::default())).is_ok());
    input.divide_sweights_by_efficiency = true;
    let a = analyse(&input, &Method::default()).unwrap();
    let plain: f64 = extract_sweights(&d.m, &model, Variant::B, true)
        .unwrap()
        .weights
        .iter()
        .map(|r| r[0])
        .sum();
    // every weight is scaled up by 1/ε ≥ 1
    assert!(a.sum_w > plain);
}

#[test]
fn two_component_model_is_required() {
    let iv = Interval::unit();
    let one = MixtureModel::new(vec![Component::new("s", Density1D::uniform(iv), 10.0)]).unwrap();
    let hs = Density1D::exponential(1.0, Interval::new(0.0, 3.0).unwrap()).unwrap();
    let input = AnalysisInput {
        m: &[0.5],
        t: &[0.5],
        efficiency: None,
        divide_sweights_by_efficiency: false,
        model: &one,
        hs: &hs,
    };
    assert!(analyse(&input, &Method::default()).is_err());
}
