//! Sub-exponential weights: Laplace transforms, Theta_omega and the control inequality.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use renewal_lab::cli::random_control_config;
use renewal_lab::speed::control_theta_check;
use renewal_lab::weights::{gamma_series, laplace_quadrature, omega_report, ThetaSampler, WeightFn};
use renewal_lab::Complex64;

fn main() -> renewal_lab::Result<()> {
    let omega = WeightFn::power_exp(1.0, 0.5);
    let z = Complex64::new(0.05, 20.0);
    let q = laplace_quadrature(&omega, z, 1e-12)?;
    let s = gamma_series(1.0, 0.5, z, 1e-13)?;
    println!("L(e^sqrt x)({z}): quadrature {:.12}, series {:.12} ({} terms)", q.value, s.value, s.terms);

    let sampler = ThetaSampler::default();
    let report = omega_report(&omega, &[0.5, 1.0, 2.0], &sampler)?;
    println!("member: {}", report.member);
    for t in &report.theta {
        println!("  Theta({}) = {:.6} at {:.4}", t.delta, t.sup_value, t.argmax_z);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..3 {
        let (a, u, eta, delta) = random_control_config(&mut rng);
        let r = control_theta_check(&a, &u, &omega, eta, delta, 200.0, &sampler)?;
        println!("  {} exponents: lhs {:.4e} <= rhs {:.4e}: {}", a.len(), r.lhs, r.rhs, r.holds);
    }
    Ok(())
}
