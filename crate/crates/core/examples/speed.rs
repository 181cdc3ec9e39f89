//! Decay of (G - T_lambda)*f and its consistency with the diophantine class.
use renewal_lab::speed::{speed_analysis, tail_grid};
use renewal_lab::testfn::TestFunction;
use renewal_lab::{ProbabilityMeasure, GOLDEN};

fn main() -> renewal_lab::Result<()> {
    let f = TestFunction::bump(0.0, 1.0);
    let xs = tail_grid(2.0, 1000.0, 48);
    for (name, mu) in [
        ("lattice", ProbabilityMeasure::two_atom(1.0, 2.0, 0.5)?),
        ("golden", ProbabilityMeasure::two_atom(1.0, GOLDEN, 0.5)?),
    ] {
        let (profile, fit, report) = speed_analysis(&mu, &f, &xs, 1e-12, 4096.0, name)?;
        println!("{name}: class {:?}, verdict {:?}", report.diophantine_class, report.verdict());
        if let Some(fit) = fit {
            println!("  model {:?}, r2 = {:.4}", fit.model, fit.r_squared);
        }
        // D vanishes for x > 1 here, the slow tail is on the left
        for p in profile.iter().filter(|p| p.x < 0.0).step_by(6) {
            println!("  x = {:>9.2}  D = {:+.3e}", p.x, p.d);
        }
    }
    Ok(())
}
