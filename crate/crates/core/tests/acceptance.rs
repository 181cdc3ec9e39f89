//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use renewal_lab::cli::random_control_config;
use renewal_lab::renewal::{
    green_engine, green_fourier, green_series, harmonic_check, renewal_h, renewal_r, stieltjes_with, symbol_u,
};
use renewal_lab::speed::{control_theta_check, speed_analysis, tail_grid, DecayModel, DiophantineClass, Verdict};
use renewal_lab::testfn::TestFunction;
use renewal_lab::weights::{gamma_series, laplace_quadrature, ThetaSampler, WeightFn};
use renewal_lab::zeros::{count_zeros, scan_zeros, ComplexRect};
use renewal_lab::{Complex64, ProbabilityMeasure, GOLDEN};
use statrs::distribution::{ContinuousCDF, Gamma};
use std::f64::consts::PI;
use std::time::Instant;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn golden() -> ProbabilityMeasure {
    ProbabilityMeasure::two_atom(1.0, GOLDEN, 0.5).unwrap()
}

// H(x) = 1 + sum_n P(Gamma(n, 1) <= x)
fn exp_renewal_oracle(x: f64) -> f64 {
    let mut h = 1.0;
    for n in 1..400 {
        let p = Gamma::new(n as f64, 1.0).unwrap().cdf(x);
        h += p;
        if p < 1e-17 {
            break;
        }
    }
    h
}

fn smith_exponential() -> Outcome {
    let mu = ProbabilityMeasure::exponential(1.0);
    let mut worst_r: f64 = 0.0;
    let mut worst_h: f64 = 0.0;
    for k in 0..20 {
        let x = 20.0 * k as f64 / 19.0;
        let oracle = exp_renewal_oracle(x);
        if (oracle - (1.0 + x)).abs() > 1e-9 {
            return Err(format!("oracle H({x}) = {oracle} is not 1 + x"));
        }
        let h = renewal_h(&mu, x, 1e-10).map_err(|e| e.to_string())?.value;
        let r = renewal_r(&mu, x, 1e-10).map_err(|e| e.to_string())?;
        worst_h = worst_h.max((h - oracle).abs());
        worst_r = worst_r.max(r.abs());
    }
    let m = mu.moments();
    let moments_ok = (m.lambda - 1.0).abs() < 1e-6 && (m.lambda2 - 2.0).abs() < 1e-6;
    check(
        worst_r < 1e-5 && worst_h < 1e-5 && moments_ok,
        format!("max|R| = {worst_r:.2e}, max|H - oracle| = {worst_h:.2e}, lambda = {:.8}, lambda2 = {:.8}", m.lambda, m.lambda2),
    )
}

fn lattice_ladder() -> Outcome {
    let mu = ProbabilityMeasure::dirac(1.0);
    let set = scan_zeros(&mu, 0.3, 20.0).map_err(|e| e.to_string())?;
    let mut found: Vec<Complex64> = set.zeros.iter().map(|z| z.z).collect();
    found.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
    if found.len() != 7 {
        return Err(format!("{} zeros found, expected 7", found.len()));
    }
    let mut worst: f64 = 0.0;
    for (z, k) in found.iter().zip(-3..=3) {
        worst = worst.max((z - Complex64::new(0.0, 2.0 * PI * k as f64)).norm());
    }
    let seed = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    for _ in 0..10 {
        let re_min: f64 = rng.gen_range(-0.3..0.1);
        let re_max = (re_min + rng.gen_range(0.05..0.3)).min(0.3);
        let im_min = rng.gen_range(-20.0..15.0);
        let rect = ComplexRect::new(re_min, re_max, im_min, im_min + rng.gen_range(1.0..12.0)).map_err(|e| e.to_string())?;
        // refined zeros from the scan that fall inside
        let expected = found.iter().filter(|z| rect.contains(**z, 0.0)).count();
        let counted = count_zeros(&mu, &rect).map_err(|e| e.to_string())?;
        if counted != expected {
            mismatches += 1;
        }
    }
    check(worst < 1e-9 && mismatches == 0, format!("max|z - 2 pi i k| = {worst:.2e}, count mismatches {mismatches}/10 (seed {seed})"))
}

fn stieltjes() -> Outcome {
    let xs = [-12.0, -8.0, -5.0, -3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0];
    let fs = [TestFunction::gaussian(0.0, 1.0), TestFunction::bump(0.0, 1.0)];
    let mut worst: f64 = 0.0;
    for mu in [ProbabilityMeasure::exponential(1.0), golden()] {
        for f in &fs {
            let engine = green_engine(&mu, f, &xs, 1e-10).map_err(|e| e.to_string())?;
            for &x in &xs {
                let r = stieltjes_with(&engine, f, x, 1e-10).map_err(|e| e.to_string())?;
                worst = worst.max(r.residual);
            }
        }
    }
    check(worst < 1e-3, format!("max residual = {worst:.2e} over 48 evaluations"))
}

fn fourier_series() -> Outcome {
    let mu = ProbabilityMeasure::exponential(1.0);
    let f = TestFunction::gaussian(0.0, 1.0);
    let mut worst: f64 = 0.0;
    for x in [-5.0, 0.0, 5.0] {
        let a = green_series(&mu, &f, x, 1e-10).map_err(|e| e.to_string())?.value;
        let b = green_fourier(&mu, &f, x, 1e-3, 1e-10).map_err(|e| e.to_string())?.value;
        worst = worst.max((a - b).abs());
    }
    check(worst < 5e-3, format!("max|fourier - series| = {worst:.2e}"))
}

fn symbol_regularity() -> Outcome {
    let mu = ProbabilityMeasure::exponential(1.0);
    let mut zs: Vec<Complex64> = (0..8).map(|k| Complex64::from_polar(1e-4, k as f64 * PI / 4.0 + 0.1)).collect();
    for &(re, im) in &[
        (1e-3, 0.0),
        (0.01, 0.5),
        (-0.2, 1.0),
        (0.3, -2.0),
        (0.5, 0.0),
        (-0.5, 3.0),
        (0.8, 7.0),
        (-0.8, -7.0),
        (0.0, 12.0),
        (0.1, -25.0),
        (-0.3, 50.0),
        (0.0, 1e-3),
    ] {
        zs.push(Complex64::new(re, im));
    }
    let mut worst: f64 = 0.0;
    for &z in &zs {
        let u = symbol_u(&mu, z).map_err(|e| e.to_string())?;
        worst = worst.max((u - 1.0).norm());
    }
    // Taylor oracle from closed-form moments
    let limits = [
        // lambda = 1, lambda2 = 2
        ("Exp(1)", mu.clone(), 1.0),
        ("two-atom {1, 2}", ProbabilityMeasure::two_atom(1.0, 2.0, 0.5).unwrap(), 2.5 / (2.0 * 1.5 * 1.5)),
        ("uniform [0, 2]", ProbabilityMeasure::uniform(0.0, 2.0).unwrap(), (4.0 / 3.0) / 2.0),
    ];
    let mut worst_limit: f64 = 0.0;
    for (_, m, expected) in &limits {
        let u = symbol_u(m, Complex64::new(1e-7, 0.0)).map_err(|e| e.to_string())?;
        worst_limit = worst_limit.max((u - expected).norm());
    }
    check(
        worst < 1e-9 && worst_limit < 1e-6,
        format!("max|U - 1| = {worst:.2e} on {} points, max|U(0) - lambda2/(2 lambda^2)| = {worst_limit:.2e}", zs.len()),
    )
}

fn gamma_vs_quadrature() -> Outcome {
    let mut zs = Vec::new();
    for (i, re) in [0.01, 0.1, 1.0, 10.0].into_iter().enumerate() {
        for (j, im) in [0.0, 1.0, 10.0, 50.0, 100.0].into_iter().enumerate() {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            zs.push(Complex64::new(re, sign * im));
        }
    }
    let mut worst: f64 = 0.0;
    for (a, alpha) in [(1.0, 0.5), (2.0, 1.0 / 3.0)] {
        let omega = WeightFn::power_exp(a, alpha);
        for &z in &zs {
            let s = gamma_series(a, alpha, z, 1e-13).map_err(|e| e.to_string())?.value;
            let q = laplace_quadrature(&omega, z, 1e-12).map_err(|e| e.to_string())?.value;
            worst = worst.max((s - q).norm() / q.norm());
        }
    }
    let mut exact = true;
    for &z in &zs {
        exact &= gamma_series(0.0, 0.5, z, 1e-13).map_err(|e| e.to_string())?.value == 1.0 / z;
    }
    check(worst < 1e-8 && exact, format!("max relative difference = {worst:.2e} on {} points, A = 0 exact: {exact}", zs.len()))
}

fn essential_singularity() -> Outcome {
    let omega = WeightFn::Polynomial { degree: 2 };
    let mut parts = Vec::new();
    let mut ok = true;
    for (s, floor) in [(1e-3, 1e3), (1e-5, 1e4)] {
        let l = laplace_quadrature(&omega, Complex64::new(s, 0.0), 1e-12).map_err(|e| e.to_string())?.value.re;
        // int (1 + x)^2 e^{-sx} = 1/s + 2/s^2 + 2/s^3
        let exact = 1.0 / s + 2.0 / (s * s) + 2.0 / (s * s * s);
        let scaled = s * s * l;
        ok &= scaled > floor && ((l - exact) / exact).abs() < 1e-8;
        parts.push(format!("s = {s:e}: s^2 L = {scaled:.4e} (closed form {:.4e})", s * s * exact));
    }
    check(ok, parts.join(", "))
}

fn control_suite() -> Outcome {
    let seed = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = ThetaSampler::default();
    let weights = [WeightFn::Constant, WeightFn::power_exp(1.0, 0.5)];
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let (a, u, eta, delta) = random_control_config(&mut rng);
        let r = control_theta_check(&a, &u, &weights[trial % 2], eta, delta, 200.0, &sampler).map_err(|e| e.to_string())?;
        if !r.holds {
            violations += 1;
        }
        worst = worst.max(r.lhs / r.rhs);
    }
    check(violations == 0, format!("{violations} violations in 100 configurations (seed {seed}), max lhs/rhs = {worst:.4}"))
}

fn classification() -> Outcome {
    let b = 4096.0;
    let mut lines = Vec::new();
    let mut ok = true;

    let xs: Vec<f64> = (0..45).flat_map(|k| [-(1.0 + 0.25 * k as f64), 1.0 + 0.25 * k as f64]).collect();
    let mu = ProbabilityMeasure::exponential(1.0);
    let (_, _, rep) = speed_analysis(&mu, &TestFunction::gaussian(0.0, 1.0), &xs, 1e-12, b, "Exp(1)").map_err(|e| e.to_string())?;
    let fit = rep.fit.as_ref().map(|f| f.model);
    ok &= rep.verdict() == Verdict::Consistent
        && rep.diophantine_class == DiophantineClass::ZeroWeak
        && matches!(fit, Some(DecayModel::Exponential { .. }));
    lines.push(format!("Exp(1) {:?}", rep.verdict()));

    let bump = TestFunction::bump(0.0, 1.0);
    let xs = tail_grid(2.0, 1000.0, 48);
    let lattice = ProbabilityMeasure::two_atom(1.0, 2.0, 0.5).unwrap();
    let (_, fit, rep) = speed_analysis(&lattice, &bump, &xs, 1e-12, b, "lattice").map_err(|e| e.to_string())?;
    ok &= rep.verdict() == Verdict::Consistent
        && matches!(rep.diophantine_class, DiophantineClass::Lattice { .. })
        && fit.is_none();
    lines.push(format!("lattice {:?}", rep.verdict()));

    let (_, _, rep) = speed_analysis(&golden(), &bump, &xs, 1e-12, b, "golden").map_err(|e| e.to_string())?;
    let l_ok = matches!(rep.diophantine_class, DiophantineClass::Weak { l } if l > 0.0 && l.is_finite());
    let fit_ok = matches!(rep.fit.as_ref().map(|f| f.model), Some(DecayModel::Stretched { alpha, .. }) if alpha > 0.0 && alpha < 1.0);
    ok &= rep.verdict() == Verdict::Consistent && l_ok && fit_ok;
    lines.push(format!("golden {:?} ({:?}, {:?})", rep.verdict(), rep.diophantine_class, rep.fit.map(|f| f.model)));
    check(ok, lines.join("; "))
}

fn harmonic() -> Outcome {
    let xs: Vec<f64> = (0..50).map(|k| -3.0 + 0.13 * k as f64).collect();
    let lattice_dev = harmonic_check(&ProbabilityMeasure::dirac(1.0), Complex64::new(0.0, 2.0 * PI), &xs, 1e-12)
        .map_err(|e| e.to_string())?;
    let mu = golden();
    let set = scan_zeros(&mu, 0.3, 20.0).map_err(|e| e.to_string())?;
    let mut worst_ratio: f64 = 0.0;
    let mut count = 0;
    for z in set.zeros.iter().filter(|z| z.z.norm() > 1e-6) {
        let r = z;
        let dev = harmonic_check(&mu, r.z, &xs, 1e-9).map_err(|e| e.to_string())?;
        let scale = xs.iter().map(|x| (r.z.re * x).exp()).fold(0.0, f64::max);
        let bound = 10.0 * r.residual * scale;
        worst_ratio = worst_ratio.max(if bound > 0.0 { dev / bound } else if dev == 0.0 { 0.0 } else { f64::INFINITY });
        count += 1;
    }
    check(
        lattice_dev < 1e-12 && worst_ratio <= 1.0 && count > 0,
        format!("lattice deviation = {lattice_dev:.2e}, {count} golden zeros, max deviation/bound = {worst_ratio:.3}"),
    )
}

fn transform_invariants() -> Outcome {
    let seed = 11;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_conj: f64 = 0.0;
    let mut worst_pow: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.gen_range(1..=5);
        let atoms: Vec<(f64, f64)> = (0..k).map(|_| (rng.gen_range(-3.0..3.0), rng.gen_range(0.1..1.0))).collect();
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let atoms: Vec<(f64, f64)> = atoms.iter().map(|&(x, w)| (x, w / total)).collect();
        let mu = ProbabilityMeasure::atomic_normalized(&atoms).map_err(|e| e.to_string())?;
        let n = rng.gen_range(2..=4);
        let power = mu.convolve_power(n).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-30.0..30.0));
            let a = mu.rho_hat(z.conj());
            let b = mu.rho_hat(z).conj();
            worst_conj = worst_conj.max((a - b).norm() / b.norm().max(1.0));
            let lhs = power.rho_hat(z);
            let rhs = mu.rho_hat(z).powu(n as u32);
            worst_pow = worst_pow.max((lhs - rhs).norm() / rhs.norm().max(1.0));
        }
    }
    check(
        worst_conj < 1e-10 && worst_pow < 1e-10,
        format!("conjugate symmetry {worst_conj:.2e}, convolution power {worst_pow:.2e} (200 measures, seed {seed})"),
    )
}

fn main() {
    let criteria: [(&str, f64, fn() -> Outcome); 11] = [
        ("exponential Smith check", 10.0, smith_exponential),
        ("lattice zero ladder", 30.0, lattice_ladder),
        ("Stieltjes identity", 120.0, stieltjes),
        ("Fourier-series agreement", 60.0, fourier_series),
        ("symbol regularity", 5.0, symbol_regularity),
        ("Gamma series vs quadrature", 10.0, gamma_vs_quadrature),
        ("essential singularity", 1.0, essential_singularity),
        ("control inequality suite", 120.0, control_suite),
        ("classification consistency", 300.0, classification),
        ("harmonic obstruction", 30.0, harmonic),
        ("transform invariants", 60.0, transform_invariants),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        let (ok, detail) = match outcome {
            Ok(d) if secs <= *limit => (true, d),
            Ok(d) => (false, format!("{d}; runtime over {limit} s")),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {:>2} {name}: {detail} [{secs:.2} s]", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
