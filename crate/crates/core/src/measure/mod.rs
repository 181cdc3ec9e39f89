//! Probability measures with exponential moments and their Fourier-Laplace
//! transforms rho_hat(z) = int e^{-zy} drho(y).

mod density;
mod io;

pub use density::{exp_moments, fft_convolve, gregory_convolve, GridDensity};
pub use io::{AtomSpec, DensitySpec, MeasureSpec, PresetSpec};

use crate::error::{LabError, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Default strip half-width for atomic measures.
pub const ATOMIC_ETA: f64 = 8.0;
const MOMENT_CACHE: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub enum Representation {
    Atomic(Vec<Atom>),
    Density(GridDensity),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentData {
    pub lambda: f64,
    pub lambda2: f64,
}

impl MomentData {
    pub fn require_drift(&self) -> Result<()> {
        if self.lambda > 0.0 {
            Ok(())
        } else {
            Err(LabError::NoDrift)
        }
    }

    /// lambda_2 / (2 lambda^2), the constant in the Smith asymptote.
    pub fn smith_constant(&self) -> f64 {
        self.lambda2 / (2.0 * self.lambda * self.lambda)
    }
}

#[derive(Clone, Debug)]
pub struct ProbabilityMeasure {
    repr: Representation,
    eta: f64,
    mass: f64,
    moments: OnceLock<Vec<f64>>,
}

/// Sort atoms and merge those closer than 1e-11 relative.
pub(crate) fn merge_atoms(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        if let Some(last) = out.last_mut() {
            if (a.location - last.location).abs() <= 1e-11 * a.location.abs().max(1.0) {
                last.weight += a.weight;
                continue;
            }
        }
        out.push(a);
    }
    out
}

impl ProbabilityMeasure {
    /// Atomic probability measure; weights must be positive and sum to 1.
    pub fn atomic(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::atomic_with_eta(atoms, ATOMIC_ETA)
    }

    pub fn atomic_with_eta(atoms: &[(f64, f64)], eta: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(LabError::InvalidMeasure("no atoms".into()));
        }
        if !(eta > 0.0) {
            return Err(LabError::InvalidMeasure("eta must be positive".into()));
        }
        let mut v = Vec::with_capacity(atoms.len());
        for &(location, weight) in atoms {
            if !location.is_finite() || !(weight > 0.0) || !weight.is_finite() {
                return Err(LabError::InvalidMeasure(format!("bad atom ({location}, {weight})")));
            }
            v.push(Atom { location, weight });
        }
        let total: f64 = v.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LabError::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(Self::from_parts(Representation::Atomic(merge_atoms(v)), eta, total))
    }

    /// Atomic measure with weights rescaled to sum to 1.
    pub fn atomic_normalized(atoms: &[(f64, f64)]) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !(total > 0.0) {
            return Err(LabError::InvalidMeasure("weights must be positive".into()));
        }
        let scaled: Vec<(f64, f64)> = atoms.iter().map(|&(x, w)| (x, w / total)).collect();
        let mut m = Self::atomic(&scaled)?;
        m.mass = 1.0;
        Ok(m)
    }

    pub fn dirac(c: f64) -> Self {
        Self::atomic(&[(c, 1.0)]).expect("single atom is valid")
    }

    /// p delta_x + (1 - p) delta_y.
    pub fn two_atom(x: f64, y: f64, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(LabError::InvalidArgument(format!("p = {p} must lie in (0, 1)")));
        }
        Self::atomic(&[(x, p), (y, 1.0 - p)])
    }

    /// Gridded density, renormalized to unit mass. Tail rates must exceed eta.
    pub fn density(grid: GridDensity, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(LabError::InvalidMeasure("eta must be positive".into()));
        }
        if grid.min_tail_rate() <= eta {
            return Err(LabError::InvalidMeasure(format!(
                "tail rate {} must exceed eta = {eta}",
                grid.min_tail_rate()
            )));
        }
        let m = grid.mass();
        if !(m > 0.0) {
            return Err(LabError::InvalidMeasure("density has zero mass".into()));
        }
        let grid = if (m - 1.0).abs() > 1e-14 { grid.scaled(1.0 / m) } else { grid };
        Ok(Self::from_parts(Representation::Density(grid), eta, 1.0))
    }

    /// Density e^{-rate y} rate on y > 0, grid [0, 16/rate], step 1/(256 rate).
    pub fn exponential(rate: f64) -> Self {
        Self::exponential_with(rate, 256)
    }

    pub fn exponential_with(rate: f64, per_unit: usize) -> Self {
        let step = 1.0 / (per_unit as f64 * rate);
        let n = 16 * per_unit + 1;
        let values = (0..n).map(|j| rate * (-(j as f64) * step * rate).exp()).collect();
        let grid = GridDensity::new(0.0, step, values, None, Some(rate)).expect("valid grid");
        Self::density(grid, 0.9 * rate).expect("valid density")
    }

    /// Normal density truncated at 12 standard deviations.
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0) {
            return Err(LabError::InvalidArgument("sd must be positive".into()));
        }
        let step = sd / 64.0;
        let n = 24 * 64 + 1;
        let values = (0..n)
            .map(|j| {
                let u = -12.0 + j as f64 / 64.0;
                (-0.5 * u * u).exp()
            })
            .collect();
        let grid = GridDensity::new(mean - 12.0 * sd, step, values, None, None)?;
        Self::density(grid, 2.0 / sd)
    }

    /// Uniform density on [a, b].
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(b > a) {
            return Err(LabError::InvalidArgument("uniform needs a < b".into()));
        }
        let n = 257;
        let grid = GridDensity::new(a, (b - a) / (n - 1) as f64, vec![1.0; n], None, None)?;
        Self::density(grid, ATOMIC_ETA)
    }

    fn from_parts(repr: Representation, eta: f64, mass: f64) -> Self {
        ProbabilityMeasure { repr, eta, mass, moments: OnceLock::new() }
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn is_atomic(&self) -> bool {
        matches!(self.repr, Representation::Atomic(_))
    }
    pub fn atoms(&self) -> Option<&[Atom]> {
        match &self.repr {
            Representation::Atomic(a) => Some(a),
            _ => None,
        }
    }
    pub fn grid(&self) -> Option<&GridDensity> {
        match &self.repr {
            Representation::Density(g) => Some(g),
            _ => None,
        }
    }

    /// Smallest and largest point of the support (infinite with tails).
    pub fn support(&self) -> (f64, f64) {
        match &self.repr {
            Representation::Atomic(a) => (a[0].location, a[a.len() - 1].location),
            Representation::Density(g) => (
                if g.left_rate().is_some() { f64::NEG_INFINITY } else { g.start() },
                if g.right_rate().is_some() { f64::INFINITY } else { g.end() },
            ),
        }
    }

    fn check_strip(&self, z: Complex64, eta: f64) -> Result<()> {
        if z.re.abs() >= eta || !z.re.is_finite() || !z.im.is_finite() {
            return Err(LabError::StripViolation { re_abs: z.re.abs(), eta });
        }
        Ok(())
    }

    /// int (-y)^k e^{-zy} drho(y), k <= 4.
    pub fn eval_transform(&self, z: Complex64, k: usize) -> Result<Complex64> {
        self.check_strip(z, self.eta)?;
        if k > 4 {
            return Err(LabError::InvalidArgument(format!("derivative order {k} > 4")));
        }
        Ok(self.transform_unchecked(z, k))
    }

    pub(crate) fn transform_unchecked(&self, z: Complex64, k: usize) -> Complex64 {
        match &self.repr {
            Representation::Atomic(atoms) => {
                let mut s = Complex64::new(0.0, 0.0);
                for a in atoms {
                    let e = (-z * a.location).exp() * a.weight;
                    s += if k == 0 { e } else { e * (-a.location).powi(k as i32) };
                }
                s
            }
            Representation::Density(g) => g.transform(z, k),
        }
    }

    /// rho_hat(z); panics outside the strip.
    pub fn rho_hat(&self, z: Complex64) -> Complex64 {
        self.eval_transform(z, 0).expect("z inside strip")
    }

    /// Raw moments int y^k drho for k = 0..=kmax (kmax < 60, cached).
    pub fn raw_moments(&self) -> &[f64] {
        self.moments.get_or_init(|| match &self.repr {
            Representation::Atomic(atoms) => (0..=MOMENT_CACHE)
                .map(|k| atoms.iter().map(|a| a.weight * a.location.powi(k as i32)).sum())
                .collect(),
            Representation::Density(g) => g.raw_moments(MOMENT_CACHE),
        })
    }

    pub fn moments(&self) -> MomentData {
        let m = self.raw_moments();
        MomentData { lambda: m[1], lambda2: m[2] }
    }

    /// (int |e^{-zy} - 1|^2 drho)^{1/2}, for |Re z| < eta / 2.
    pub fn rho_circle(&self, z: Complex64) -> Result<f64> {
        self.check_strip(z, self.eta / 2.0)?;
        let v = match &self.repr {
            Representation::Atomic(atoms) => atoms
                .iter()
                .map(|a| a.weight * ((-z * a.location).exp() - 1.0).norm_sqr())
                .sum::<f64>(),
            Representation::Density(g) => {
                let two = g.transform(Complex64::new(2.0 * z.re, 0.0), 0).re;
                two - 2.0 * g.transform(z, 0).re + g.mass()
            }
        };
        Ok(v.max(0.0).sqrt())
    }

    /// Mass of (-inf, x].
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.repr {
            Representation::Atomic(atoms) => atoms.iter().take_while(|a| a.location <= x).map(|a| a.weight).sum(),
            Representation::Density(g) => g.cdf(x),
        }
    }

    /// Smallest x with cdf(x) >= p (bisection for densities).
    pub fn quantile(&self, p: f64) -> f64 {
        match &self.repr {
            Representation::Atomic(atoms) => {
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.weight;
                    if acc >= p * self.mass {
                        return a.location;
                    }
                }
                atoms[atoms.len() - 1].location
            }
            Representation::Density(g) => {
                let target = p * g.mass();
                let width = g.end() - g.start() + 1.0;
                let mut lo = g.start() - width;
                while g.cdf(lo) > target {
                    lo -= width;
                }
                let mut hi = g.end() + width;
                while g.cdf(hi) < target {
                    hi += width;
                }
                for _ in 0..100 {
                    let m = 0.5 * (lo + hi);
                    if g.cdf(m) < target {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                hi
            }
        }
    }

    /// Largest |y| over the bulk of the measure (mass outside below 1e-7).
    pub fn spread(&self) -> f64 {
        match &self.repr {
            Representation::Atomic(a) => a.iter().map(|x| x.location.abs()).fold(0.0, f64::max),
            Representation::Density(_) => self.quantile(1e-7).abs().max(self.quantile(1.0 - 1e-7).abs()),
        }
    }

    /// int g drho for a real integrand. Densities use 8 Gauss points per panel.
    pub fn integrate<F: Fn(f64) -> f64 + Sync>(&self, g: F) -> f64 {
        match &self.repr {
            Representation::Atomic(atoms) => atoms.iter().map(|a| a.weight * g(a.location)).sum(),
            Representation::Density(d) => d.integrate(g, 8),
        }
    }

    pub fn convolve(&self, other: &ProbabilityMeasure) -> Result<ProbabilityMeasure> {
        let eta = self.eta.min(other.eta);
        match (&self.repr, &other.repr) {
            (Representation::Atomic(a), Representation::Atomic(b)) => {
                let mut v = Vec::with_capacity(a.len() * b.len());
                for x in a {
                    for y in b {
                        v.push(Atom { location: x.location + y.location, weight: x.weight * y.weight });
                    }
                }
                Ok(Self::from_parts(Representation::Atomic(merge_atoms(v)), eta, self.mass * other.mass))
            }
            (Representation::Density(a), Representation::Density(b)) => {
                let g = a.convolve(b)?;
                Ok(Self::from_parts(Representation::Density(g), eta, self.mass * other.mass))
            }
            _ => Err(LabError::IncompatibleRepresentation("cannot convolve atomic with density".into())),
        }
    }

    /// n-fold convolution power (n >= 1).
    pub fn convolve_power(&self, n: usize) -> Result<ProbabilityMeasure> {
        if n == 0 {
            return Err(LabError::InvalidArgument("power must be at least 1".into()));
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.convolve(self)?;
        }
        Ok(acc)
    }

    /// Image under y -> -y.
    pub fn reflect(&self) -> ProbabilityMeasure {
        let repr = match &self.repr {
            Representation::Atomic(a) => Representation::Atomic(merge_atoms(
                a.iter().map(|x| Atom { location: -x.location, weight: x.weight }).collect(),
            )),
            Representation::Density(g) => Representation::Density(g.reflect()),
        };
        Self::from_parts(repr, self.eta, self.mass)
    }

    /// Sub-probability measure e^{-ay} drho(y); its total mass is rho_hat(a).
    /// The strip shrinks to eta - |a|.
    pub fn tilt(&self, a: f64) -> Result<ProbabilityMeasure> {
        if a.abs() >= self.eta {
            return Err(LabError::StripViolation { re_abs: a.abs(), eta: self.eta });
        }
        let eta = self.eta - a.abs();
        match &self.repr {
            Representation::Atomic(atoms) => {
                let v: Vec<Atom> = atoms
                    .iter()
                    .map(|x| Atom { location: x.location, weight: x.weight * (-a * x.location).exp() })
                    .collect();
                let mass = v.iter().map(|x| x.weight).sum();
                Ok(Self::from_parts(Representation::Atomic(v), eta, mass))
            }
            Representation::Density(g) => {
                let t = g.tilt(a)?;
                let mass = t.mass();
                Ok(Self::from_parts(Representation::Density(t), eta, mass))
            }
        }
    }

    /// Largest s from a dyadic search with rho_hat(s) < 1 - 1e-6; None
    /// when no such s exists below eta.
    pub fn s0_surrogate(&self) -> Option<f64> {
        let mut s = 0.9 * self.eta;
        for _ in 0..60 {
            let v = self.transform_unchecked(Complex64::new(s, 0.0), 0).re;
            if v < 1.0 - 1e-6 {
                return Some(s);
            }
            s *= 0.5;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn spec_transform_examples() {
        let z = c(0.3, 2.0);
        assert!((ProbabilityMeasure::dirac(2.5).rho_hat(z) - (-z * 2.5).exp()).norm() < 1e-15);
        let m = ProbabilityMeasure::two_atom(1.0, 2.0, 0.5).unwrap();
        assert!(m.rho_hat(c(0.0, PI)).norm() < 1e-15);
        let e = ProbabilityMeasure::exponential(1.0);
        assert!((e.rho_hat(c(1.0 * 0.85, 0.0)) - 1.0 / 1.85).norm() < 1e-10);
        assert!(matches!(e.eval_transform(c(0.95, 0.0), 0), Err(LabError::StripViolation { .. })));
    }

    #[test]
    fn spec_moment_examples() {
        let m = ProbabilityMeasure::two_atom(1.0, 2.0, 0.5).unwrap().moments();
        assert_eq!((m.lambda, m.lambda2), (1.5, 2.5));
        let d = ProbabilityMeasure::dirac(0.0).moments();
        assert_eq!((d.lambda, d.lambda2), (0.0, 0.0));
        let e = ProbabilityMeasure::exponential(1.0);
        let mom = e.raw_moments();
        let mut fact = 1.0;
        for k in 0..=8 {
            if k > 0 {
                fact *= k as f64;
            }
            assert!((mom[k] / fact - 1.0).abs() < 1e-9, "k = {k}");
        }
    }

    #[test]
    fn spec_rho_circle_examples() {
        assert!((ProbabilityMeasure::dirac(1.0).rho_circle(c(0.0, PI)).unwrap() - 2.0).abs() < 1e-15);
        let m = ProbabilityMeasure::two_atom(1.0, 2.0, 0.5).unwrap();
        assert_eq!(m.rho_circle(c(0.0, 0.0)).unwrap(), 0.0);
        let z = c(0.0, 0.1);
        let direct = (0.5 * ((-z).exp() - 1.0).norm_sqr() + 0.5 * ((-z * 2.0).exp() - 1.0).norm_sqr()).sqrt();
        let v = m.rho_circle(z).unwrap();
        assert!((v - direct).abs() < 1e-15);
        assert!((v * v - (2.0 - 2.0 * m.rho_hat(z).re)).abs() < 1e-14);
    }

    #[test]
    fn spec_convolve_examples() {
        let d = ProbabilityMeasure::dirac(0.7).convolve(&ProbabilityMeasure::dirac(1.1)).unwrap();
        assert_eq!(d.atoms().unwrap().len(), 1);
        assert!((d.atoms().unwrap()[0].location - 1.8).abs() < 1e-15);
        let b = ProbabilityMeasure::two_atom(0.0, 1.0, 0.5).unwrap().convolve_power(2).unwrap();
        let w: Vec<f64> = b.atoms().unwrap().iter().map(|a| a.weight).collect();
        assert_eq!(w, vec![0.25, 0.5, 0.25]);
        let e = ProbabilityMeasure::exponential(1.0);
        let e2 = e.convolve(&e).unwrap();
        let z = c(0.3, 2.0);
        assert!((e2.rho_hat(z) - 1.0 / ((1.0 + z) * (1.0 + z))).norm() < 1e-8);
        assert!(matches!(
            e.convolve(&ProbabilityMeasure::dirac(0.0)),
            Err(LabError::IncompatibleRepresentation(_))
        ));
    }

    #[test]
    fn spec_reflect_and_tilt_examples() {
        let r = ProbabilityMeasure::dirac(1.0).reflect();
        assert_eq!(r.atoms().unwrap()[0].location, -1.0);
        let s = ProbabilityMeasure::two_atom(-1.0, 1.0, 0.5).unwrap();
        assert_eq!(s.reflect().atoms().unwrap(), s.atoms().unwrap());
        let e = ProbabilityMeasure::exponential(1.0);
        let z = c(0.2, 1.0);
        assert!((e.reflect().rho_hat(z) - e.rho_hat(-z)).norm() < 1e-13);

        assert_eq!(ProbabilityMeasure::dirac(0.0).tilt(0.4).unwrap().mass(), 1.0);
        let t = ProbabilityMeasure::dirac(1.0).tilt(2f64.ln()).unwrap();
        assert!((t.mass() - 0.5).abs() < 1e-15);
        let te = e.tilt(0.5).unwrap();
        assert!((te.mass() - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(ProbabilityMeasure::atomic(&[(0.0, 0.5), (1.0, 0.4)]).is_err());
        assert!(ProbabilityMeasure::atomic(&[(0.0, -0.5), (1.0, 1.5)]).is_err());
    }

    #[test]
    fn s0_for_positive_drift() {
        let m = ProbabilityMeasure::two_atom(1.0, 2.0, 0.5).unwrap();
        assert!(m.s0_surrogate().is_some());
        assert!(ProbabilityMeasure::dirac(0.0).s0_surrogate().is_none());
    }
}
