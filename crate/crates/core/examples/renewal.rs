//! Renewal function, Smith remainder and the Green kernel against a test function.
use renewal_lab::renewal::{green_fourier, green_series, renewal_h, renewal_r, stieltjes_residual, t_lambda_apply};
use renewal_lab::testfn::TestFunction;
use renewal_lab::{ProbabilityMeasure, GOLDEN};

fn main() -> renewal_lab::Result<()> {
    let mu = ProbabilityMeasure::two_atom(1.0, GOLDEN, 0.5)?;
    let lambda = mu.moments().lambda;
    let f = TestFunction::gaussian(0.0, 1.0);
    println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "x", "H", "R", "G*f", "T*f");
    for x in [0.0, 2.5, 5.0, 10.0, 20.0] {
        let h = renewal_h(&mu, x, 1e-10)?;
        let r = renewal_r(&mu, x, 1e-10)?;
        let g = green_series(&mu, &f, x, 1e-10)?;
        println!("{x:>6} {:>12.6} {:>12.3e} {:>12.6} {:>12.6}", h.value, r, g.value, t_lambda_apply(&f, x, lambda)?);
    }
    let exp = ProbabilityMeasure::exponential(1.0);
    let a = green_series(&exp, &f, 0.0, 1e-10)?.value;
    let b = green_fourier(&exp, &f, 0.0, 1e-4, 1e-10)?.value;
    println!("Exp(1) at 0: series {a:.8}, Fourier (s = 1e-4) {b:.8}");
    println!("Stieltjes residual at x = -4: {:.2e}", stieltjes_residual(&mu, &f, -4.0, 1e-10)?.residual);
    Ok(())
}
