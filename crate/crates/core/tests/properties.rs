use approx::assert_relative_eq;
use proptest::prelude::*;
use renewal_lab::measure::MeasureSpec;
use renewal_lab::speed::{decay_profile, fit_decay, DecayModel, ProfilePoint};
use renewal_lab::testfn::TestFunction;
use renewal_lab::weights::{theta_grid, ThetaSampler, WeightFn};
use renewal_lab::{Complex64, ProbabilityMeasure, GOLDEN};
use std::f64::consts::PI;

fn atomic_measure() -> impl Strategy<Value = ProbabilityMeasure> {
    prop::collection::vec((-3.0..3.0f64, 0.05..1.0f64), 1..6).prop_map(|atoms| {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let atoms: Vec<(f64, f64)> = atoms.iter().map(|&(x, w)| (x, w / total)).collect();
        ProbabilityMeasure::atomic_normalized(&atoms).unwrap()
    })
}

fn strip_point() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -40.0..40.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * b.norm().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn transform_conjugate_symmetry(mu in atomic_measure(), z in strip_point()) {
        prop_assert!(close(mu.rho_hat(z.conj()), mu.rho_hat(z).conj(), 1e-10));
    }

    #[test]
    fn convolution_power_transform(mu in atomic_measure(), z in strip_point(), n in 1usize..5) {
        let p = mu.convolve_power(n).unwrap();
        prop_assert!(close(p.rho_hat(z), mu.rho_hat(z).powu(n as u32), 1e-10));
    }

    #[test]
    fn integer_support_is_periodic(
        atoms in prop::collection::vec((-4i32..6, 0.05..1.0f64), 1..5),
        z in strip_point(),
        k in -3i32..4,
    ) {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let atoms: Vec<(f64, f64)> = atoms.iter().map(|&(x, w)| (x as f64, w / total)).collect();
        let mu = ProbabilityMeasure::atomic_normalized(&atoms).unwrap();
        let shifted = z + Complex64::new(0.0, 2.0 * PI * k as f64);
        prop_assert!(close(mu.rho_hat(shifted), mu.rho_hat(z), 1e-10));
    }

    #[test]
    fn measure_file_round_trip(mu in atomic_measure(), z in strip_point()) {
        let spec = MeasureSpec::from_measure(&mu);
        let back = MeasureSpec::from_json(&spec.to_json()).unwrap().build().unwrap();
        prop_assert_eq!(mu.rho_hat(z), back.rho_hat(z));
        let toml_text = toml::to_string(&spec).unwrap();
        let back = MeasureSpec::from_toml(&toml_text).unwrap().build().unwrap();
        prop_assert_eq!(mu.rho_hat(z), back.rho_hat(z));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fit_is_scale_equivariant(rate in 0.2..2.0f64, c in 1e-3..1e3f64) {
        let xs: Vec<f64> = (1..=40).flat_map(|k| [-(k as f64) * 0.5, k as f64 * 0.5]).collect();
        let profile = |amp: f64| -> Vec<ProfilePoint> {
            xs.iter().map(|&x| ProfilePoint { x, d: amp * (-rate * x.abs()).exp(), bound: 0.0 }).collect()
        };
        let a = fit_decay(&profile(1.0)).unwrap();
        let b = fit_decay(&profile(c)).unwrap();
        match (a.model, b.model) {
            (DecayModel::Exponential { rate: r1 }, DecayModel::Exponential { rate: r2 }) => {
                prop_assert!((r1 - rate).abs() < 1e-6 * rate);
                prop_assert!((r1 - r2).abs() < 1e-9 * rate);
            }
            other => prop_assert!(false, "unexpected models {:?}", other),
        }
    }

    #[test]
    fn profile_is_linear(c in -3.0..3.0f64, center in -1.0..1.0f64) {
        let mu = ProbabilityMeasure::two_atom(1.0, GOLDEN, 0.5).unwrap();
        let f = TestFunction::gaussian(center, 1.0);
        let g = TestFunction::bump(0.0, 1.0);
        let scaled = TestFunction::PolyGaussian { center, width: 1.0, coeffs: vec![c] };
        let sum = TestFunction::Sum { terms: vec![f.clone(), g.clone()] };
        let xs = [-9.0, -4.0, 3.0, 7.5];
        let pf = decay_profile(&mu, &f, &xs, 1e-12).unwrap();
        let pg = decay_profile(&mu, &g, &xs, 1e-12).unwrap();
        let ps = decay_profile(&mu, &sum, &xs, 1e-12).unwrap();
        let pc = decay_profile(&mu, &scaled, &xs, 1e-12).unwrap();
        for i in 0..xs.len() {
            prop_assert!((ps[i].d - pf[i].d - pg[i].d).abs() <= 1e-9 + ps[i].bound + pf[i].bound + pg[i].bound);
            prop_assert!((pc[i].d - c * pf[i].d).abs() <= 1e-9 + pc[i].bound + c.abs() * pf[i].bound);
        }
    }
}

#[test]
fn theta_is_monotone_in_delta() {
    let deltas = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
    for omega in [WeightFn::Constant, WeightFn::power_exp(1.0, 0.5), WeightFn::Polynomial { degree: 2 }] {
        let grid = theta_grid(&omega, &deltas, &ThetaSampler::default()).unwrap();
        for w in grid.windows(2) {
            assert!(w[1].sup_value <= w[0].sup_value, "{omega:?}: {w:?}");
        }
    }
    let one = theta_grid(&WeightFn::Constant, &deltas, &ThetaSampler::default()).unwrap();
    for (t, d) in one.iter().zip(deltas) {
        assert_relative_eq!(t.sup_value, 1.0 / d, max_relative = 1e-12);
    }
}
