//! Weak-diophantine exponent of two-atom measures from window minima of |1 - rho_hat(ib)|.
use renewal_lab::diophantine::{convergents, fit_exponent, make_two_atom};
use renewal_lab::GOLDEN;

fn main() -> renewal_lab::Result<()> {
    println!("convergents of the golden ratio: {:?}", convergents(GOLDEN, 8));
    for (name, y) in [("1/2 d1 + 1/2 d2", 2.0), ("1/2 d1 + 1/2 d_phi", GOLDEN), ("1/2 d1 + 1/2 d_sqrt2", 2f64.sqrt())] {
        let mu = make_two_atom(1.0, y, 0.5)?;
        let fit = fit_exponent(&mu, 2048.0)?;
        println!("{name:>22}: l* = {:?} ({})", fit.l_star, fit.diagnostic);
    }
    Ok(())
}
