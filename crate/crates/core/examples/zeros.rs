//! Zeros of 1 - rho_hat in a strip, for a lattice and a non-lattice measure.
use renewal_lab::zeros::{scan_zeros, zero_set_stats};
use renewal_lab::{ProbabilityMeasure, GOLDEN};

fn main() -> renewal_lab::Result<()> {
    for (name, mu) in [("dirac(1)", ProbabilityMeasure::dirac(1.0)), ("golden", ProbabilityMeasure::two_atom(1.0, GOLDEN, 0.5)?)] {
        let set = scan_zeros(&mu, 0.3, 40.0)?;
        println!("{name}: {} zeros with |Re z| < 0.3, |Im z| < 40", set.zeros.len());
        for z in &set.zeros {
            println!("  {:+.10} {:+.10}i  residual {:.1e}", z.z.re, z.z.im, z.residual);
        }
        let stats = zero_set_stats(&set, 2.0)?;
        println!("  min separation {:?}, zero-free constant {:?}", stats.min_separation, stats.zero_free_constant);
    }
    Ok(())
}
