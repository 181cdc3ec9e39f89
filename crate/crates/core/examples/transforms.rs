//! Fourier-Laplace transforms, moments and convolution of a few measures.
use renewal_lab::{Complex64, ProbabilityMeasure, GOLDEN};

fn main() -> renewal_lab::Result<()> {
    let measures = [
        ("Exp(1)", ProbabilityMeasure::exponential(1.0)),
        ("golden", ProbabilityMeasure::two_atom(1.0, GOLDEN, 0.5)?),
        ("uniform[0,2]", ProbabilityMeasure::uniform(0.0, 2.0)?),
    ];
    let z = Complex64::new(0.2, 3.0);
    for (name, mu) in &measures {
        let m = mu.moments();
        println!(
            "{name:>12}: lambda = {:.6}, lambda2 = {:.6}, smith = {:.6}, rho_hat({z}) = {:.6}",
            m.lambda,
            m.lambda2,
            m.smith_constant(),
            mu.rho_hat(z)
        );
    }
    // transform of a convolution power is the power of the transform
    let g = &measures[1].1;
    let cube = g.convolve_power(3)?;
    println!("rho_hat^3 = {:.12}, (rho^*3)_hat = {:.12}", g.rho_hat(z).powu(3), cube.rho_hat(z));
    Ok(())
}
