//! Zeros of 1 - rho_hat(z) in strips around the imaginary axis: argument
//! principle counts, Newton refinement, recursive scans and set statistics.

use crate::error::{LabError, Result};
use crate::measure::ProbabilityMeasure;
use crate::quad::{golden_min, integrate, QuadOptions};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexRect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl ComplexRect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        if !(re_min < re_max && im_min < im_max) {
            return Err(LabError::InvalidArgument(format!(
                "degenerate rectangle [{re_min}, {re_max}] x [{im_min}, {im_max}]"
            )));
        }
        Ok(ComplexRect { re_min, re_max, im_min, im_max })
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }
    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re_min - slack && z.re <= self.re_max + slack && z.im >= self.im_min - slack && z.im <= self.im_max + slack
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    /// Split across the longer side at the given fraction.
    fn split(&self, frac: f64) -> (ComplexRect, ComplexRect) {
        if self.height() >= self.width() {
            let m = self.im_min + frac * self.height();
            (ComplexRect { im_max: m, ..*self }, ComplexRect { im_min: m, ..*self })
        } else {
            let m = self.re_min + frac * self.width();
            (ComplexRect { re_max: m, ..*self }, ComplexRect { re_min: m, ..*self })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroFinderConfig {
    /// Residual |1 - rho_hat(z)| accepted as converged.
    pub tolerance: f64,
    /// Approximate-zero threshold on rho_circle(z0) for `refine_zero`.
    pub approx_threshold: f64,
    pub max_newton: usize,
    /// Boundary guard as a fraction of the smaller rectangle side.
    pub guard: f64,
    pub boundary_samples: usize,
    pub max_retries: usize,
}

impl Default for ZeroFinderConfig {
    fn default() -> Self {
        ZeroFinderConfig {
            tolerance: 1e-11,
            approx_threshold: 0.1,
            max_newton: 100,
            guard: 1e-4,
            boundary_samples: 64,
            max_retries: 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub z: Complex64,
    pub residual: f64,
    pub derivative: Complex64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZeroSet {
    pub zeros: Vec<Zero>,
    pub strip_halfwidth: f64,
    pub im_max: f64,
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinedZero {
    pub z: Complex64,
    pub residual: f64,
    pub displacement: f64,
    pub rho_circle: f64,
    /// |z - z0| / rho_circle(z0), the realized constant of the approximate-zero lemma.
    pub ratio: f64,
}

fn f_and_df(mu: &ProbabilityMeasure, z: Complex64) -> (Complex64, Complex64) {
    let f = Complex64::new(1.0, 0.0) - mu.transform_unchecked(z, 0);
    let df = -mu.transform_unchecked(z, 1);
    (f, df)
}

fn check_rect(mu: &ProbabilityMeasure, rect: &ComplexRect) -> Result<()> {
    let r = rect.re_min.abs().max(rect.re_max.abs());
    if r >= mu.eta() {
        return Err(LabError::StripViolation { re_abs: r, eta: mu.eta() });
    }
    Ok(())
}

/// Number of zeros of 1 - rho_hat inside `rect` (argument principle).
pub fn count_zeros(mu: &ProbabilityMeasure, rect: &ComplexRect) -> Result<usize> {
    count_zeros_with(mu, rect, &ZeroFinderConfig::default())
}

pub fn count_zeros_with(mu: &ProbabilityMeasure, rect: &ComplexRect, cfg: &ZeroFinderConfig) -> Result<usize> {
    check_rect(mu, rect)?;
    let guard = cfg.guard * rect.width().min(rect.height());
    let c = rect.corners();
    let mut total = Complex64::new(0.0, 0.0);
    for e in 0..4 {
        let p = c[e];
        let q = c[(e + 1) % 4];
        let d = q - p;
        for s in 0..=cfg.boundary_samples {
            let z = p + d * (s as f64 / cfg.boundary_samples as f64);
            let (f, df) = f_and_df(mu, z);
            if f.norm() <= guard * df.norm() || f.norm() < 1e-300 {
                return Err(LabError::BoundaryZero(z));
            }
        }
        let r = integrate(
            |t: f64| {
                let (f, df) = f_and_df(mu, p + d * t);
                df / f * d
            },
            0.0,
            1.0,
            QuadOptions::new(1e-8, 0.0).with_max_intervals(3000),
        );
        if !r.converged || !r.value.re.is_finite() || !r.value.im.is_finite() {
            return Err(LabError::NonConvergent(format!("contour quadrature on edge {e} of {rect:?}")));
        }
        total += r.value;
    }
    let n = total / Complex64::new(0.0, 2.0 * PI);
    let rounded = n.re.round();
    if (n.re - rounded).abs() > 0.25 || n.im.abs() > 0.25 || rounded < 0.0 {
        return Err(LabError::NonConvergent(format!("winding number estimate {n} is not an integer")));
    }
    Ok(rounded as usize)
}

fn newton(mu: &ProbabilityMeasure, z0: Complex64, cfg: &ZeroFinderConfig) -> Result<(Complex64, f64)> {
    let mut z = z0;
    let eta = mu.eta();
    let mut best = (z, f64::INFINITY);
    for _ in 0..cfg.max_newton {
        let (f, df) = f_and_df(mu, z);
        let res = f.norm();
        if res < best.1 {
            best = (z, res);
        }
        if df.norm() == 0.0 || !df.re.is_finite() {
            return Err(LabError::Diverged(z0));
        }
        let step = f / df;
        z -= step;
        if z.re.abs() >= eta || !z.re.is_finite() || !z.im.is_finite() {
            return Err(LabError::Diverged(z0));
        }
        if step.norm() <= 4.0 * f64::EPSILON * (1.0 + z.norm()) {
            break;
        }
    }
    let res = (Complex64::new(1.0, 0.0) - mu.transform_unchecked(z, 0)).norm();
    if res < best.1 {
        best = (z, res);
    }
    if best.1 > cfg.tolerance {
        return Err(LabError::Diverged(z0));
    }
    Ok(best)
}

/// Newton refinement from an approximate zero (rho_circle(z0) below the
/// configured threshold).
pub fn refine_zero(mu: &ProbabilityMeasure, z0: Complex64) -> Result<RefinedZero> {
    refine_zero_with(mu, z0, &ZeroFinderConfig::default())
}

pub fn refine_zero_with(mu: &ProbabilityMeasure, z0: Complex64, cfg: &ZeroFinderConfig) -> Result<RefinedZero> {
    let rc = mu.rho_circle(z0)?;
    if rc > cfg.approx_threshold {
        return Err(LabError::NotApproximateZero(rc));
    }
    let (z, residual) = newton(mu, z0, cfg)?;
    let displacement = (z - z0).norm();
    Ok(RefinedZero { z, residual, displacement, rho_circle: rc, ratio: if rc > 0.0 { displacement / rc } else { 0.0 } })
}

/// Checks rho_hat(s) < 1 on (0, halfwidth] (positive drift side).
pub fn validate_halfwidth(mu: &ProbabilityMeasure, halfwidth: f64) -> Result<()> {
    if !(halfwidth > 0.0) || halfwidth >= mu.eta() {
        return Err(LabError::StripViolation { re_abs: halfwidth, eta: mu.eta() });
    }
    for k in 1..=64 {
        let s = halfwidth * k as f64 / 64.0;
        if mu.transform_unchecked(Complex64::new(s, 0.0), 0).re >= 1.0 {
            return Err(LabError::InvalidArgument(format!(
                "strip half-width {halfwidth} exceeds the s0 surrogate: rho_hat({s}) >= 1"
            )));
        }
    }
    Ok(())
}

const SPLIT_FRACTIONS: [f64; 6] = [0.4796, 0.5313, 0.4427, 0.5671, 0.4139, 0.5893];

fn count_nudged(mu: &ProbabilityMeasure, rect: &ComplexRect, cfg: &ZeroFinderConfig) -> Result<usize> {
    count_zeros_with(mu, rect, cfg)
}

fn locate(mu: &ProbabilityMeasure, rect: ComplexRect, n: usize, cfg: &ZeroFinderConfig, depth: usize) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Ok(vec![]);
    }
    if n == 1 {
        let k = 8;
        let mut best = (Complex64::new(0.0, 0.0), f64::INFINITY);
        for i in 0..k {
            for j in 0..k {
                let z = Complex64::new(
                    rect.re_min + rect.width() * (i as f64 + 0.5) / k as f64,
                    rect.im_min + rect.height() * (j as f64 + 0.5) / k as f64,
                );
                let (f, df) = f_and_df(mu, z);
                let v = f.norm() / df.norm().max(1e-300);
                if v < best.1 {
                    best = (z, v);
                }
            }
        }
        if let Ok((z, _)) = newton(mu, best.0, cfg) {
            if rect.contains(z, 1e-9 * (1.0 + z.norm())) {
                return Ok(vec![z]);
            }
        }
    }
    if depth > 60 || rect.width().max(rect.height()) < 1e-9 {
        return Err(LabError::NonConvergent(format!("could not isolate {n} zeros in {rect:?}")));
    }
    let mut last_err = None;
    for (attempt, frac) in SPLIT_FRACTIONS.iter().enumerate() {
        if attempt > cfg.max_retries {
            break;
        }
        let (a, b) = rect.split(*frac);
        let (ca, cb) = rayon::join(|| count_nudged(mu, &a, cfg), || count_nudged(mu, &b, cfg));
        match (ca, cb) {
            (Ok(na), Ok(nb)) if na + nb == n => {
                let (za, zb) = rayon::join(|| locate(mu, a, na, cfg, depth + 1), || locate(mu, b, nb, cfg, depth + 1));
                let mut v = za?;
                v.extend(zb?);
                return Ok(v);
            }
            (Ok(na), Ok(nb)) => {
                last_err = Some(LabError::NonConvergent(format!("split counts {na} + {nb} != {n} in {rect:?}")));
            }
            (Err(e), _) | (_, Err(e)) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| LabError::NonConvergent("subdivision failed".into())))
}

/// All zeros of 1 - rho_hat with |Re z| <= halfwidth and |Im z| <= im_max.
pub fn scan_zeros(mu: &ProbabilityMeasure, halfwidth: f64, im_max: f64) -> Result<ZeroSet> {
    scan_zeros_with(mu, halfwidth, im_max, &ZeroFinderConfig::default())
}

pub fn scan_zeros_with(mu: &ProbabilityMeasure, halfwidth: f64, im_max: f64, cfg: &ZeroFinderConfig) -> Result<ZeroSet> {
    validate_halfwidth(mu, halfwidth)?;
    if !(im_max > 0.0) {
        return Err(LabError::InvalidArgument("im_max must be positive".into()));
    }
    let mut last_err = None;
    let step = (2.0 * im_max / 4096.0).min(halfwidth / 64.0);
    for attempt in 0..=cfg.max_retries {
        // outer edges move outwards by half a step per retry
        let pad = 0.5 * step * attempt as f64;
        let left = if halfwidth + pad < mu.eta() { halfwidth + pad } else { halfwidth - pad };
        let rect = ComplexRect::new(-left, halfwidth, -im_max - pad, im_max + pad)?;
        let n = match count_zeros_with(mu, &rect, cfg) {
            Ok(n) => n,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        match locate(mu, rect, n, cfg, 0) {
            Ok(v) => {
                let mut zeros: Vec<Zero> = v
                    .into_iter()
                    .map(|z| {
                        let (f, df) = f_and_df(mu, z);
                        Zero { z, residual: f.norm(), derivative: -df }
                    })
                    .filter(|z: &Zero| z.z.re >= -halfwidth && z.z.im.abs() <= im_max)
                    .collect();
                zeros.sort_by(|a, b| a.z.im.total_cmp(&b.z.im).then(a.z.re.total_cmp(&b.z.re)));
                return Ok(ZeroSet { zeros, strip_halfwidth: halfwidth, im_max, tolerance: cfg.tolerance });
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| LabError::NonConvergent("scan failed".into())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostLatticeRow {
    pub z1: Complex64,
    pub z2: Complex64,
    pub z3: Complex64,
    pub distance: f64,
    /// distance / (|Re z1| + sqrt|Re z2|)^{1/2}; None when the denominator vanishes.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroStats {
    /// None with fewer than two zeros.
    pub min_separation: Option<f64>,
    /// min over nonzero zeros a of -Re(a)(1 + |Im a|^l); None without nonzero zeros.
    pub zero_free_constant: Option<f64>,
    pub almost_lattice: Vec<AlmostLatticeRow>,
    pub max_almost_lattice_ratio: Option<f64>,
}

pub fn zero_set_stats(zs: &ZeroSet, l: f64) -> Result<ZeroStats> {
    if zs.zeros.is_empty() {
        return Err(LabError::EmptySet);
    }
    let z: Vec<Complex64> = zs.zeros.iter().map(|x| x.z).collect();
    let mut min_sep: Option<f64> = None;
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            let d = (z[i] - z[j]).norm();
            min_sep = Some(min_sep.map_or(d, |m: f64| m.min(d)));
        }
    }
    let nonzero: Vec<Complex64> = z.iter().copied().filter(|a| a.norm() > 1e-8).collect();
    let zero_free_constant =
        nonzero.iter().map(|a| -a.re * (1.0 + a.im.abs().powf(l))).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
    let mut rows = Vec::new();
    for &z1 in &nonzero {
        for &z2 in &nonzero {
            let s = z1 + z2;
            if s.re.abs() > zs.strip_halfwidth || s.im.abs() > zs.im_max {
                continue;
            }
            let z3 = *z.iter().min_by(|a, b| (**a - s).norm().total_cmp(&(**b - s).norm())).expect("nonempty");
            let distance = (z3 - s).norm();
            let denom = (z1.re.abs() + z2.re.abs().sqrt()).sqrt();
            rows.push(AlmostLatticeRow { z1, z2, z3, distance, ratio: (denom > 1e-300).then(|| distance / denom) });
        }
    }
    let max_ratio = rows.iter().filter_map(|r| r.ratio).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    Ok(ZeroStats { min_separation: min_sep, zero_free_constant, almost_lattice: rows, max_almost_lattice_ratio: max_ratio })
}

impl ZeroSet {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["re", "im", "residual", "d_rho_prime_re", "d_rho_prime_im"]).expect("in-memory write");
        for z in &self.zeros {
            w.write_record(&[
                z.z.re.to_string(),
                z.z.im.to_string(),
                z.residual.to_string(),
                z.derivative.re.to_string(),
                z.derivative.im.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// Smallest b in (0, b_max] with |1 - rho_hat(ib)| <= tol. Densities are
/// absolutely continuous and never lattice, so they return None directly.
pub fn lattice_period(mu: &ProbabilityMeasure, b_max: f64) -> Option<f64> {
    lattice_period_tol(mu, b_max, 1e-9)
}

pub fn lattice_period_tol(mu: &ProbabilityMeasure, b_max: f64, tol: f64) -> Option<f64> {
    let atoms = mu.atoms()?;
    let spread = atoms.iter().map(|a| a.location.abs()).fold(0.0, f64::max);
    if spread == 0.0 {
        return None;
    }
    let c3 = |b: f64| 2.0 - 2.0 * mu.transform_unchecked(Complex64::new(0.0, b), 0).re;
    let c1 = |b: f64| (Complex64::new(1.0, 0.0) - mu.transform_unchecked(Complex64::new(0.0, b), 0)).norm();
    let h = 0.1 / spread;
    let n = (b_max / h).ceil() as usize;
    let mut prev2 = c3(h);
    let mut prev = c3(2.0 * h);
    for k in 3..=n + 1 {
        let b = k as f64 * h;
        let cur = c3(b);
        if prev <= prev2 && prev <= cur {
            let (mut bm, _) = golden_min(c3, b - 2.0 * h, b, 1e-12);
            // Gauss-Newton on the complex residual in the real variable b
            for _ in 0..30 {
                let zb = Complex64::new(0.0, bm);
                let f = Complex64::new(1.0, 0.0) - mu.transform_unchecked(zb, 0);
                let df = Complex64::new(0.0, 1.0) * mu.transform_unchecked(zb, 1) * -1.0;
                let g = df.norm_sqr();
                if g == 0.0 {
                    break;
                }
                let step = (df.conj() * f).re / g;
                bm -= step;
                if step.abs() < 1e-15 * bm.abs() {
                    break;
                }
            }
            if bm > 0.0 && bm <= b_max * (1.0 + 1e-12) && c1(bm) <= tol {
                return Some(bm);
            }
        }
        prev2 = prev;
        prev = cur;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GOLDEN;

    fn rect(a: f64, b: f64, c: f64, d: f64) -> ComplexRect {
        ComplexRect::new(a, b, c, d).unwrap()
    }

    #[test]
    fn counts_for_dirac() {
        let mu = ProbabilityMeasure::dirac(1.0);
        assert_eq!(count_zeros(&mu, &rect(-0.5, 0.5, 5.0, 8.0)).unwrap(), 1);
        assert_eq!(count_zeros(&mu, &rect(-0.5, 0.5, 1.0, 5.0)).unwrap(), 0);
        assert!(matches!(count_zeros(&mu, &rect(-0.5, 0.5, 0.0, 5.0)), Err(LabError::BoundaryZero(_))));
    }

    #[test]
    fn refine_examples() {
        let mu = ProbabilityMeasure::dirac(1.0);
        let r = refine_zero(&mu, Complex64::new(0.05, 6.2)).unwrap();
        assert!((r.z - Complex64::new(0.0, 2.0 * PI)).norm() < 1e-10);
        let g = ProbabilityMeasure::two_atom(1.0, GOLDEN, 0.5).unwrap();
        let r = refine_zero(&g, Complex64::new(1e-3, 0.0)).unwrap();
        assert!(r.z.norm() < 1e-10);
        let again = refine_zero(&g, r.z).unwrap();
        assert!((again.z - r.z).norm() < 1e-12);
        assert!(matches!(refine_zero(&mu, Complex64::new(0.0, 3.0)), Err(LabError::NotApproximateZero(_))));
    }

    #[test]
    fn scan_exponential_has_only_origin() {
        let mu = ProbabilityMeasure::exponential(1.0);
        let zs = scan_zeros(&mu, 0.3, 50.0).unwrap();
        assert_eq!(zs.zeros.len(), 1);
        assert!(zs.zeros[0].z.norm() < 1e-10);
    }

    #[test]
    fn scan_two_lattice_atoms() {
        let mu = ProbabilityMeasure::two_atom(1.0, 2.0, 0.5).unwrap();
        let zs = scan_zeros(&mu, 0.3, 20.0).unwrap();
        assert_eq!(zs.zeros.len(), 7);
        for z in &zs.zeros {
            let k = (z.z.im / (2.0 * PI)).round();
            assert!((z.z - Complex64::new(0.0, 2.0 * PI * k)).norm() < 1e-9);
        }
        let st = zero_set_stats(&zs, 2.0).unwrap();
        assert!((st.min_separation.unwrap() - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn lattice_periods() {
        assert!((lattice_period(&ProbabilityMeasure::dirac(1.0), 100.0).unwrap() - 2.0 * PI).abs() < 1e-9);
        let m = ProbabilityMeasure::two_atom(1.0, 2.0, 0.5).unwrap();
        assert!((lattice_period(&m, 100.0).unwrap() - 2.0 * PI).abs() < 1e-9);
        let g = ProbabilityMeasure::two_atom(1.0, GOLDEN, 0.5).unwrap();
        assert_eq!(lattice_period(&g, 1e4), None);
        assert_eq!(lattice_period(&ProbabilityMeasure::exponential(1.0), 100.0), None);
    }
}
