//! Sub-exponential weights omega, their one-sided Laplace transforms
//! L(omega)(z) = int_0^inf e^{-zx} omega(x) dx, the supremum Theta_omega(delta)
//! over {Re z > 0, |z| >= delta}, and the membership checks around them.

use crate::error::{LabError, Result};
use crate::quad::{integrate, QuadOptions};
use libm::lgamma;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Panels past this point count as a failure to decay.
pub const MAX_CUTOFF: f64 = 1e9;
const MAX_PANELS: usize = 5_000_000;
const MAX_SERIES_TERMS: usize = 200_000;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Weights on R_+, extended evenly to R.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightFn {
    /// omega = 1
    Constant,
    /// (1 + x)^degree
    Polynomial { degree: u32 },
    /// exp(a x^alpha), 0 < alpha < 1
    PowerExp { a: f64, alpha: f64 },
    /// exp(a ln(1+x) l^m(x)^power), l(x) = ln(1 + x) applied `depth` times
    IteratedLog { a: f64, power: f64, depth: u32 },
    /// exp(a x^2); not sub-exponential, kept as a negative probe
    SquareExp { a: f64 },
    Scaled { factor: f64, inner: Box<WeightFn> },
    Sum { terms: Vec<WeightFn> },
    /// omega(x + shift)
    Shifted { shift: f64, inner: Box<WeightFn> },
    /// int_0^x omega
    Primitive { inner: Box<WeightFn> },
}

/// Exponent Phi of a weight e^{Phi}, continued to the right half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Exponent {
    /// a z^alpha (alpha = 1 allowed here as a probe)
    Power { a: f64, alpha: f64 },
    /// a ln(1+z) l^depth(z)^power
    IteratedLog { a: f64, power: f64, depth: u32 },
}

fn iterate_log(w: Complex64, depth: u32) -> Complex64 {
    (0..depth).fold(w, |v, _| (v + 1.0).ln())
}

impl Exponent {
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        match *self {
            Exponent::Power { a, alpha } => Ok(if z == c(0.0) { c(0.0) } else { z.powf(alpha) * a }),
            Exponent::IteratedLog { a, power, depth } => {
                let mut v = z;
                for _ in 0..depth {
                    v = (v + 1.0).ln();
                    if v.re < 0.0 {
                        return Err(LabError::BranchViolation(format!("ln(1 + w) left the right half-plane at z = {z}")));
                    }
                }
                let l1 = (z + 1.0).ln();
                let p = if v == c(0.0) { c(if power == 0.0 { 1.0 } else { 0.0 }) } else { v.powf(power) };
                Ok(l1 * p * a)
            }
        }
    }
}

impl WeightFn {
    pub fn power_exp(a: f64, alpha: f64) -> Self {
        WeightFn::PowerExp { a, alpha }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LabError::InvalidArgument(m.to_string()));
        match self {
            WeightFn::Constant | WeightFn::Polynomial { .. } => Ok(()),
            WeightFn::PowerExp { a, alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return bad("power_exp needs 0 < alpha < 1");
                }
                if !(*a >= 0.0) || !a.is_finite() {
                    return bad("power_exp needs a >= 0 so that omega >= 1");
                }
                Ok(())
            }
            WeightFn::IteratedLog { a, power, depth } => {
                if *depth == 0 {
                    return bad("iterated_log needs depth >= 1");
                }
                if !(*a >= 0.0 && *power >= 0.0) || !a.is_finite() || !power.is_finite() {
                    return bad("iterated_log needs a >= 0 and power >= 0");
                }
                Ok(())
            }
            WeightFn::SquareExp { a } => {
                if !(*a > 0.0) {
                    return bad("square_exp needs a > 0");
                }
                Ok(())
            }
            WeightFn::Scaled { factor, inner } => {
                if !(*factor > 0.0) || !factor.is_finite() {
                    return bad("scale factor must be positive");
                }
                inner.validate()
            }
            WeightFn::Sum { terms } => {
                if terms.is_empty() {
                    return bad("empty weight sum");
                }
                terms.iter().try_for_each(|t| t.validate())
            }
            WeightFn::Shifted { shift, inner } => {
                if !(*shift >= 0.0) || !shift.is_finite() {
                    return bad("shift must be nonnegative");
                }
                inner.validate()
            }
            WeightFn::Primitive { inner } => inner.validate(),
        }
    }

    /// ln omega(|x|).
    pub fn ln_value(&self, x: f64) -> f64 {
        let x = x.abs();
        match self {
            WeightFn::Constant => 0.0,
            WeightFn::Polynomial { degree } => *degree as f64 * x.ln_1p(),
            WeightFn::PowerExp { a, alpha } => a * x.powf(*alpha),
            WeightFn::IteratedLog { a, power, depth } => {
                let l = (0..*depth).fold(x, |v, _| v.ln_1p());
                let p = if l == 0.0 { if *power == 0.0 { 1.0 } else { 0.0 } } else { l.powf(*power) };
                a * x.ln_1p() * p
            }
            WeightFn::SquareExp { a } => a * x * x,
            WeightFn::Shifted { shift, inner } => inner.ln_value(x + shift),
            WeightFn::Scaled { factor, inner } => factor.ln() + inner.ln_value(x),
            _ => self.value(x).ln(),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let x = x.abs();
        match self {
            WeightFn::Scaled { factor, inner } => factor * inner.value(x),
            WeightFn::Sum { terms } => terms.iter().map(|t| t.value(x)).sum(),
            WeightFn::Primitive { inner } => {
                if x == 0.0 {
                    0.0
                } else {
                    integrate(|t| inner.value(t), 0.0, x, QuadOptions::new(1e-300, 1e-14)).value
                }
            }
            _ => self.ln_value(x).exp(),
        }
    }

    /// omega'(x) for x > 0.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            WeightFn::Constant => 0.0,
            WeightFn::Polynomial { degree } => {
                if *degree == 0 {
                    0.0
                } else {
                    *degree as f64 * (1.0 + x).powi(*degree as i32 - 1)
                }
            }
            WeightFn::Scaled { factor, inner } => factor * inner.derivative(x),
            WeightFn::Sum { terms } => terms.iter().map(|t| t.derivative(x)).sum(),
            WeightFn::Shifted { shift, inner } => inner.derivative(x + shift),
            WeightFn::Primitive { inner } => inner.value(x),
            _ => self.log_derivative(x) * self.value(x),
        }
    }

    /// Growth rate (ln omega)'(x), computed without forming omega where possible.
    pub fn log_derivative(&self, x: f64) -> f64 {
        match self {
            WeightFn::Constant => 0.0,
            WeightFn::Polynomial { degree } => *degree as f64 / (1.0 + x),
            WeightFn::PowerExp { a, alpha } => {
                if x == 0.0 {
                    f64::INFINITY
                } else {
                    a * alpha * x.powf(alpha - 1.0)
                }
            }
            WeightFn::IteratedLog { a, power, depth } => {
                let mut l = x;
                let mut dl = 1.0;
                for _ in 0..*depth {
                    dl /= 1.0 + l;
                    l = l.ln_1p();
                }
                let p = if l == 0.0 { if *power == 0.0 { 1.0 } else { 0.0 } } else { l.powf(*power) };
                let dp = if l == 0.0 || *power == 0.0 { 0.0 } else { power * l.powf(power - 1.0) * dl };
                a * (p / (1.0 + x) + x.ln_1p() * dp)
            }
            WeightFn::SquareExp { a } => 2.0 * a * x,
            WeightFn::Scaled { inner, .. } => inner.log_derivative(x),
            WeightFn::Shifted { shift, inner } => inner.log_derivative(x + shift),
            _ => {
                let v = self.value(x);
                if v > 0.0 {
                    self.derivative(x) / v
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Exponent Phi with omega = e^{Phi}, when it has a known continuation.
    pub fn exponent(&self) -> Option<Exponent> {
        match self {
            WeightFn::PowerExp { a, alpha } => Some(Exponent::Power { a: *a, alpha: *alpha }),
            WeightFn::IteratedLog { a, power, depth } => Some(Exponent::IteratedLog { a: *a, power: *power, depth: *depth }),
            WeightFn::Polynomial { degree } => Some(Exponent::IteratedLog { a: *degree as f64, power: 0.0, depth: 1 }),
            _ => None,
        }
    }

    // ln omega continued to Re w > 0 (principal branches).
    fn ln_complex(&self, w: Complex64) -> Option<Complex64> {
        match self {
            WeightFn::Constant => Some(c(0.0)),
            WeightFn::Polynomial { degree } => Some((w + 1.0).ln() * *degree as f64),
            WeightFn::PowerExp { a, alpha } => Some(if w == c(0.0) { c(0.0) } else { w.powf(*alpha) * *a }),
            WeightFn::IteratedLog { a, power, depth } => {
                let l = iterate_log(w, *depth);
                let p = if l == c(0.0) { c(if *power == 0.0 { 1.0 } else { 0.0 }) } else { l.powf(*power) };
                Some((w + 1.0).ln() * p * *a)
            }
            WeightFn::SquareExp { a } => Some(w * w * *a),
            WeightFn::Shifted { shift, inner } => inner.ln_complex(w + *shift),
            WeightFn::Scaled { factor, inner } => inner.ln_complex(w).map(|v| v + factor.ln()),
            _ => None,
        }
    }

    /// C with x^l <= C omega(x) on R_+, when certified for the kind.
    pub fn domination_constant(&self, l: u32) -> Option<f64> {
        match self {
            WeightFn::Constant => (l == 0).then_some(1.0),
            WeightFn::Polynomial { degree } => (*degree >= l).then_some(1.0),
            WeightFn::PowerExp { a, alpha } => {
                if l == 0 {
                    return Some(1.0);
                }
                if *a <= 0.0 {
                    return None;
                }
                // max of x^l e^{-a x^alpha} at x^alpha = l / (a alpha)
                let l = l as f64;
                Some((l / (a * alpha * std::f64::consts::E)).powf(l / alpha))
            }
            WeightFn::Scaled { factor, inner } => inner.domination_constant(l).map(|k| k / factor),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceValue {
    pub value: Complex64,
    pub error: f64,
    /// Truncation point of the integration variable.
    pub cutoff: f64,
}

/// L(omega)(z) for Re z > 0 with relative accuracy about tol.
///
/// Weights with an analytic exponent are integrated along the ray x = u / z,
/// L = (1/z) int_0^inf exp(Phi(u/z) - u) du, which removes the oscillation;
/// the others use panels of one oscillation wavelength on the real axis.
pub fn laplace_quadrature(omega: &WeightFn, z: Complex64, tol: f64) -> Result<LaplaceValue> {
    if !(z.re > 0.0) || !z.im.is_finite() {
        return Err(LabError::InvalidArgument(format!("Laplace transform needs Re z > 0, got {z}")));
    }
    if !(tol > 0.0) {
        return Err(LabError::InvalidArgument("tolerance must be positive".into()));
    }
    match omega {
        WeightFn::Scaled { factor, inner } if inner.ln_complex(c(1.0)).is_none() => {
            let v = laplace_quadrature(inner, z, tol)?;
            Ok(LaplaceValue { value: v.value * *factor, error: v.error * factor, cutoff: v.cutoff })
        }
        WeightFn::Sum { terms } => {
            let mut out = LaplaceValue { value: c(0.0), error: 0.0, cutoff: 0.0 };
            for t in terms {
                let v = laplace_quadrature(t, z, tol)?;
                out.value += v.value;
                out.error += v.error;
                out.cutoff = out.cutoff.max(v.cutoff);
            }
            Ok(out)
        }
        WeightFn::Constant => Ok(LaplaceValue { value: 1.0 / z, error: 0.0, cutoff: 0.0 }),
        _ => {
            if omega.ln_complex(c(1.0)).is_some() {
                laplace_ray(omega, z, tol)
            } else {
                laplace_panels(omega, z, tol)
            }
        }
    }
}

fn laplace_ray(omega: &WeightFn, z: Complex64, tol: f64) -> Result<LaplaceValue> {
    let phase = |u: f64| omega.ln_complex(c(u) / z).expect("analytic exponent") - u;
    let logmag = |u: f64| phase(u).re;
    // locate the peak of the envelope to size the panels
    let mut peak = 1.0;
    while peak < MAX_CUTOFF && logmag(2.0 * peak) > logmag(peak) {
        peak *= 2.0;
    }
    if peak >= MAX_CUTOFF {
        return Err(LabError::SlowDecay(format!("envelope still growing at u = {peak:.3e} for z = {z}")));
    }
    let top = logmag(peak).max(logmag(0.0));
    if top > 700.0 {
        return Err(LabError::Overflow(format!("|L(omega)(z)| ~ e^{top:.0} at z = {z}")));
    }
    let panel = (peak / 4.0).max(1.0);
    let f = |u: f64| phase(u).exp();
    let opts = QuadOptions::new(1e-300, 0.01 * tol.min(1e-6)).with_max_intervals(4000);
    let mut total = c(0.0);
    let mut err = 0.0;
    let mut a = 0.0;
    let mut panels = 0;
    loop {
        let b = a + panel;
        let r = integrate(f, a, b, opts);
        total += r.value;
        err += r.error;
        panels += 1;
        if b > 2.0 * peak {
            // envelope log-concave past the peak: tail <= e^{h(b)} / (-h'(b))
            let hb = logmag(b);
            let slope = (logmag(b + 1e-3 * panel) - hb) / (1e-3 * panel);
            if slope < -0.5 {
                let tail = hb.exp() / -slope;
                if tail <= 0.01 * tol * total.norm() || tail < 1e-300 {
                    err += tail;
                    return Ok(LaplaceValue { value: total / z, error: err / z.norm(), cutoff: b });
                }
            }
        }
        if panels > MAX_PANELS {
            return Err(LabError::SlowDecay(format!("no convergence along the ray for z = {z}")));
        }
        a = b;
    }
}

/// Real-axis panels sized to the oscillation wavelength 2 pi / |Im z|.
pub fn laplace_panels(omega: &WeightFn, z: Complex64, tol: f64) -> Result<LaplaceValue> {
    let s = z.re;
    let wave = if z.im != 0.0 { 2.0 * PI / z.im.abs() } else { f64::INFINITY };
    let panel = wave.min(2.0 / s).max(1e-6);
    let f = |x: f64| (c(omega.ln_value(x)) - z * x).exp();
    let opts = QuadOptions::new(1e-300, 0.01 * tol.min(1e-6)).with_max_intervals(2000);
    let mut total = c(0.0);
    let mut err = 0.0;
    let mut a = 0.0;
    let mut panels = 0usize;
    loop {
        let b = a + panel;
        let r = integrate(f, a, b, opts);
        total += r.value;
        err += r.error;
        panels += 1;
        let g = omega.log_derivative(b);
        if g < 0.5 * s {
            let tail = (omega.ln_value(b) - s * b).exp() / (s - g);
            if tail <= 0.01 * tol * total.norm() || tail < 1e-300 {
                return Ok(LaplaceValue { value: total, error: err + tail, cutoff: b });
            }
        }
        if b > MAX_CUTOFF || panels > MAX_PANELS {
            return Err(LabError::SlowDecay(format!("e^(-{s} x) omega(x) not negligible by x = {b:.3e}")));
        }
        a = b;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: Complex64,
    pub terms: usize,
    pub remainder_bound: f64,
}

/// (1/z) sum_k (A / z^alpha)^k Gamma(alpha k + 1) / Gamma(k + 1), the Laplace
/// transform of exp(A x^alpha), with a ratio-test remainder bound.
pub fn gamma_series(a: f64, alpha: f64, z: Complex64, tol: f64) -> Result<SeriesValue> {
    if !(z.re > 0.0) {
        return Err(LabError::InvalidArgument(format!("gamma_series needs Re z > 0, got {z}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) || !(tol > 0.0) {
        return Err(LabError::InvalidArgument("need 0 < alpha < 1 and tol > 0".into()));
    }
    let first = 1.0 / z;
    if a == 0.0 {
        return Ok(SeriesValue { value: first, terms: 1, remainder_bound: 0.0 });
    }
    // A / z^alpha as a complex logarithm: ln|A| + i pi [A < 0] - alpha Log z
    let log_q = Complex64::new(a.abs().ln(), if a < 0.0 { PI } else { 0.0 }) - z.ln() * alpha;
    let qmod = log_q.re.exp();
    let term = |k: usize| -> Complex64 {
        let kf = k as f64;
        (log_q * kf + (lgamma(alpha * kf + 1.0) - lgamma(kf + 1.0))).exp() / z
    };
    // ratio bound r_k = |q| (alpha k + 1)^alpha / (k + 1) dominates |t_{k+1} / t_k| and decreases
    let ratio = |k: usize| qmod * (alpha * k as f64 + 1.0).powf(alpha) / (k as f64 + 1.0);
    let mut sum = first;
    let mut k = 1;
    loop {
        let t = term(k);
        sum += t;
        let r = ratio(k);
        if r < 1.0 {
            let rem = t.norm() * r / (1.0 - r);
            if rem <= tol * sum.norm() {
                return Ok(SeriesValue { value: sum, terms: k + 1, remainder_bound: rem });
            }
        }
        k += 1;
        if k > MAX_SERIES_TERMS || !sum.re.is_finite() {
            return Err(LabError::NonConvergent(format!("gamma series at z = {z} after {k} terms")));
        }
    }
}

/// Jensen majorant (1/|z|) sum_k (|A| / |z|^alpha)^k Gamma(alpha k + 1) / k!.
pub fn gamma_majorant(a: f64, alpha: f64, z: Complex64, tol: f64) -> Result<f64> {
    let r = z.norm();
    Ok(gamma_series(a.abs(), alpha, c(r), tol)?.value.re)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaSampler {
    pub arc_points: usize,
    pub points_per_decade: usize,
    pub refine_iterations: usize,
    pub im_cap: f64,
    pub tol: f64,
}

impl Default for ThetaSampler {
    fn default() -> Self {
        ThetaSampler { arc_points: 64, points_per_decade: 16, refine_iterations: 40, im_cap: 1e6, tol: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub delta: f64,
    pub sup_value: f64,
    pub argmax_z: Complex64,
    pub sample_count: usize,
    /// Doubling the sample density moved the supremum by less than 1e-3 relative.
    pub stable: bool,
}

fn sample_theta(omega: &WeightFn, delta: f64, cfg: &ThetaSampler, density: usize) -> Result<(f64, Complex64, usize)> {
    let tol = cfg.tol;
    let eval = |z: Complex64| -> Result<f64> { Ok(laplace_quadrature(omega, z, tol)?.value.norm()) };
    // conjugate symmetry: Im z >= 0 suffices
    let n_arc = cfg.arc_points * density;
    let mut pts: Vec<Complex64> = (0..n_arc)
        .map(|j| Complex64::from_polar(delta, FRAC_PI_2 * (j as f64 + 0.5) / n_arc as f64))
        .collect();
    let arc_vals: Vec<f64> = pts.par_iter().map(|&z| eval(z)).collect::<Result<_>>()?;
    let mut best = (0.0, c(delta));
    for (z, v) in pts.iter().zip(&arc_vals) {
        if *v > best.0 {
            best = (*v, *z);
        }
    }
    let mut count = pts.len();
    for re in [delta / 100.0, delta / 10.0, delta] {
        let im0 = (delta * delta - re * re).max(0.0).sqrt().max(1e-3 * delta);
        // |L(z)| <= (omega(0) + L(|omega'|)(Re z)) / |z| caps the sweep
        let dl = laplace_panels_real_abs_derivative(omega, re, tol)?;
        let cap = ((omega.value(0.0) + dl) / best.0.max(1e-300)).min(cfg.im_cap).max(im0 * 10.0);
        let decades = (cap / im0).log10().max(1.0);
        let n = (decades * (cfg.points_per_decade * density) as f64).ceil() as usize;
        pts = (0..=n).map(|j| Complex64::new(re, im0 * (cap / im0).powf(j as f64 / n as f64))).collect();
        let vals: Vec<f64> = pts.par_iter().map(|&z| eval(z)).collect::<Result<_>>()?;
        count += pts.len();
        for (z, v) in pts.iter().zip(&vals) {
            if *v > best.0 {
                best = (*v, *z);
            }
        }
    }
    // compass search in (ln |z|, arg z) around the running argmax
    let (mut lr, mut th) = (best.1.norm().ln(), best.1.arg());
    let mut step = (0.1, 0.05);
    for _ in 0..cfg.refine_iterations {
        let mut moved = false;
        for (dr, dt) in [(step.0, 0.0), (-step.0, 0.0), (0.0, step.1), (0.0, -step.1)] {
            let r = (lr + dr).exp().max(delta);
            let t = (th + dt).clamp(-FRAC_PI_2 + 1e-9, FRAC_PI_2 - 1e-9);
            let z = Complex64::from_polar(r, t);
            if z.re <= 0.0 {
                continue;
            }
            let v = eval(z)?;
            count += 1;
            if v > best.0 {
                best = (v, z);
                lr = r.ln();
                th = t;
                moved = true;
            }
        }
        if !moved {
            step = (step.0 / 2.0, step.1 / 2.0);
        }
    }
    Ok((best.0, best.1, count))
}

impl WeightFn {
    /// ln |omega'(x)|, without forming omega where the kind allows.
    fn ln_abs_derivative(&self, x: f64) -> f64 {
        match self {
            WeightFn::Sum { .. } | WeightFn::Primitive { .. } => self.derivative(x).abs().ln(),
            _ => self.log_derivative(x).abs().ln() + self.ln_value(x),
        }
    }
}

// int_0^inf |omega'(x)| e^{-sx} dx on the real axis.
fn laplace_panels_real_abs_derivative(omega: &WeightFn, s: f64, tol: f64) -> Result<f64> {
    let panel = 2.0 / s;
    let f = |x: f64| (omega.ln_abs_derivative(x.max(1e-300)) - s * x).exp();
    let mut total = 0.0;
    let mut a = 0.0;
    loop {
        let b = a + panel;
        total += integrate(f, a, b, QuadOptions::new(1e-300, 1e-8)).value;
        let g = omega.log_derivative(b);
        if g < 0.5 * s {
            let tail = 2.0 * f(b) / (s - g).max(1e-300);
            if tail <= tol * total.max(1e-300) || tail < 1e-300 {
                return Ok(total + tail);
            }
        }
        if b > MAX_CUTOFF {
            return Err(LabError::SlowDecay(format!("omega' e^(-{s} x) not negligible by x = {b:.3e}")));
        }
        a = b;
    }
}

/// Sampled estimate of Theta_omega(delta) = sup_{Re z > 0, |z| >= delta} |L(omega)(z)|.
/// A lower estimate, never a certified bound.
pub fn theta_omega(omega: &WeightFn, delta: f64, cfg: &ThetaSampler) -> Result<ThetaEstimate> {
    if !(delta > 0.0) {
        return Err(LabError::InvalidArgument("delta must be positive".into()));
    }
    omega.validate()?;
    if matches!(omega, WeightFn::Constant) {
        return Ok(ThetaEstimate { delta, sup_value: 1.0 / delta, argmax_z: c(delta), sample_count: 1, stable: true });
    }
    let (v1, z1, n1) = sample_theta(omega, delta, cfg, 1)?;
    let (v2, z2, n2) = sample_theta(omega, delta, cfg, 2)?;
    let (sup_value, argmax_z) = if v2 >= v1 { (v2, z2) } else { (v1, z1) };
    Ok(ThetaEstimate {
        delta,
        sup_value,
        argmax_z,
        sample_count: n1 + n2,
        stable: (v2 - v1).abs() <= 1e-3 * sup_value,
    })
}

/// Theta along a delta grid; U_delta shrinks as delta grows, so each estimate
/// also takes the larger-delta samples into account.
pub fn theta_grid(omega: &WeightFn, deltas: &[f64], cfg: &ThetaSampler) -> Result<Vec<ThetaEstimate>> {
    let mut out: Vec<ThetaEstimate> = deltas.iter().map(|&d| theta_omega(omega, d, cfg)).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&i, &j| deltas[j].partial_cmp(&deltas[i]).unwrap());
    let mut best: Option<ThetaEstimate> = None;
    for i in order {
        if let Some(b) = best {
            if b.sup_value > out[i].sup_value {
                out[i].sup_value = b.sup_value;
                out[i].argmax_z = b.argmax_z;
            }
        }
        best = Some(out[i]);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiBound {
    pub sup_ratio: f64,
    pub sup_ratio_coarse: f64,
    /// sup of the ratio over the last sampled decade of |z|
    pub outer_ratio: f64,
    pub holds: bool,
}

fn phi_ratio_sup(phi: &Exponent, alpha_probe: f64, per_decade: usize, n_arg: usize) -> Result<(f64, f64)> {
    let ratio = |lr: f64, t: f64| -> Result<f64> {
        let z = Complex64::from_polar(lr.exp(), t);
        Ok(phi.eval(z)?.norm() / (z + 1.0).norm().powf(alpha_probe))
    };
    let decades = 9;
    let n = decades * per_decade;
    let (mut sup, mut outer, mut arg) = (0.0f64, 0.0f64, (0.0, 0.0));
    for i in 0..=n {
        let lr = (1e-3f64).ln() + (i as f64 / per_decade as f64) * 10f64.ln();
        for j in 0..n_arg {
            let t = -FRAC_PI_2 + PI * (j as f64 + 0.5) / n_arg as f64;
            let v = ratio(lr, t)?;
            if v > sup {
                sup = v;
                arg = (lr, t);
            }
            if i + per_decade > n {
                outer = outer.max(v);
            }
        }
    }
    // compass refinement inside the sampled annulus
    let (lo, hi) = ((1e-3f64).ln(), (1e6f64).ln());
    let mut step = (10f64.ln() / per_decade as f64, PI / n_arg as f64);
    for _ in 0..60 {
        let mut moved = false;
        for (dr, dt) in [(step.0, 0.0), (-step.0, 0.0), (0.0, step.1), (0.0, -step.1)] {
            let (lr, t) = ((arg.0 + dr).clamp(lo, hi), (arg.1 + dt).clamp(-FRAC_PI_2 + 1e-12, FRAC_PI_2 - 1e-12));
            let v = ratio(lr, t)?;
            if v > sup {
                sup = v;
                arg = (lr, t);
                moved = true;
            }
        }
        if !moved {
            step = (step.0 / 2.0, step.1 / 2.0);
        }
    }
    Ok((sup, outer))
}

/// sup |Phi(z)| / |1 + z|^alpha_probe over a log-spaced sample of the right
/// half-plane, |z| in [1e-3, 1e6]. Holds when the sup is stable under
/// refinement and not attained in the outermost decade.
pub fn phi_bound_check(phi: &Exponent, alpha_probe: f64) -> Result<PhiBound> {
    let (coarse, _) = phi_ratio_sup(phi, alpha_probe, 8, 16)?;
    let (fine, outer) = phi_ratio_sup(phi, alpha_probe, 16, 32)?;
    let holds = fine.is_finite() && (fine - coarse).abs() <= 1e-3 * fine && outer < fine * (1.0 - 1e-3);
    Ok(PhiBound { sup_ratio: fine, sup_ratio_coarse: coarse, outer_ratio: outer, holds })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularityRow {
    pub s: f64,
    /// s^l L(omega)(s)
    pub value: f64,
    /// Gamma(l + 1) / (C s) with x^l <= C omega(x)
    pub lower_bound: f64,
}

/// s^l L(omega)(s) along a decreasing s grid.
pub fn singularity_scan(omega: &WeightFn, l: u32, s_grid: &[f64]) -> Result<Vec<SingularityRow>> {
    let cst = omega.domination_constant(l).ok_or_else(|| {
        LabError::PreconditionUnverifiable(format!("no certificate that x^{l} = O(omega) for {omega:?}"))
    })?;
    if s_grid.windows(2).any(|w| !(w[1] < w[0])) || s_grid.iter().any(|s| !(*s > 0.0)) {
        return Err(LabError::InvalidArgument("s grid must be positive and decreasing".into()));
    }
    let fact = libm::tgamma(l as f64 + 1.0);
    s_grid
        .iter()
        .map(|&s| {
            let lv = laplace_quadrature(omega, c(s), 1e-10)?.value.re;
            Ok(SingularityRow { s, value: s.powi(l as i32) * lv, lower_bound: fact / (cst * s) })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubexpCheck {
    pub epsilon: f64,
    /// Beyond this x, e^{-eps x} omega(x) <= 1 on the sampled range.
    pub threshold: Option<f64>,
    pub passed: bool,
}

/// For eps in {0.1, 0.01}: e^{-eps x} omega(x) <= 1 beyond a threshold, with
/// the growth rate below eps at the end of the sampled range (x <= 1e8).
pub fn subexponential_check(omega: &WeightFn) -> Vec<SubexpCheck> {
    [0.1, 0.01]
        .iter()
        .map(|&eps| {
            let xs: Vec<f64> = (0..=800).map(|i| 10f64.powf(-2.0 + 10.0 * i as f64 / 800.0)).collect();
            let mut threshold = Some(0.0);
            for &x in &xs {
                if omega.ln_value(x) - eps * x > 0.0 {
                    threshold = None;
                } else if threshold.is_none() {
                    threshold = Some(x);
                }
            }
            let end = *xs.last().unwrap();
            let passed = threshold.is_some() && omega.log_derivative(end) < eps;
            SubexpCheck { epsilon: eps, threshold, passed }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureCheck {
    pub property: String,
    pub max_relative_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaReport {
    pub omega: WeightFn,
    pub subexponential: Vec<SubexpCheck>,
    pub member: bool,
    pub theta: Vec<ThetaEstimate>,
    pub closure: Vec<ClosureCheck>,
    pub note: String,
}

fn closure_points() -> [Complex64; 4] {
    [Complex64::new(1.0, 0.0), Complex64::new(0.5, 3.0), Complex64::new(2.0, -1.0), Complex64::new(0.3, 0.7)]
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Spot checks of the closure properties: sums, primitives, constants, delays.
pub fn closure_checks(omega: &WeightFn) -> Result<Vec<ClosureCheck>> {
    let tol = 1e-10;
    let lap = |w: &WeightFn, z: Complex64| laplace_quadrature(w, z, tol).map(|v| v.value);
    let partner = WeightFn::Polynomial { degree: 1 };
    let mut out = Vec::new();
    let mut push = |name: &str, errs: Vec<f64>, limit: f64| {
        let m = errs.into_iter().fold(0.0, f64::max);
        out.push(ClosureCheck { property: name.into(), max_relative_error: m, passed: m <= limit });
    };

    let sum = WeightFn::Sum { terms: vec![omega.clone(), partner.clone()] };
    let mut e = Vec::new();
    for z in closure_points() {
        // the sum is evaluated on the real axis to stay independent of the parts
        let direct = laplace_panels(&sum, z, tol)?.value;
        e.push(rel(direct, lap(omega, z)? + lap(&partner, z)?));
    }
    push("vector space", e, 1e-7);

    let prim = WeightFn::Primitive { inner: Box::new(omega.clone()) };
    let mut e = Vec::new();
    for z in closure_points() {
        let lf = laplace_panels(&prim, z, tol)?.value;
        // L(F)(z) = F(0)/z + L(omega)(z)/z with F(0) = 0
        e.push(rel(lf, lap(omega, z)? / z));
    }
    push("integration", e, 1e-7);

    let scaled = WeightFn::Scaled { factor: 3.0, inner: Box::new(omega.clone()) };
    let mut e = Vec::new();
    for z in closure_points() {
        e.push(rel(laplace_panels(&scaled, z, tol)?.value, lap(omega, z)? * 3.0));
        e.push(rel(lap(&WeightFn::Constant, z)?, 1.0 / z));
    }
    push("constants", e, 1e-7);

    let t = 1.5;
    let delayed = WeightFn::Shifted { shift: t, inner: Box::new(omega.clone()) };
    let mut e = Vec::new();
    for z in closure_points() {
        // L(omega(. + t))(z) = e^{zt} (L(omega)(z) - int_0^t omega e^{-zx} dx)
        let head = integrate(|x| (c(omega.ln_value(x)) - z * x).exp(), 0.0, t, QuadOptions::new(1e-300, 1e-13)).value;
        let expect = (z * t).exp() * (lap(omega, z)? - head);
        e.push(rel(laplace_panels(&delayed, z, tol)?.value, expect));
    }
    push("delay", e, 1e-7);
    Ok(out)
}

/// Sub-exponentiality, Theta along the delta grid and closure spot checks.
pub fn omega_report(omega: &WeightFn, deltas: &[f64], cfg: &ThetaSampler) -> Result<OmegaReport> {
    omega.validate()?;
    let subexponential = subexponential_check(omega);
    if !subexponential.iter().all(|s| s.passed) {
        return Ok(OmegaReport {
            omega: omega.clone(),
            subexponential,
            member: false,
            theta: vec![],
            closure: vec![],
            note: "rejected: not strictly sub-exponential".into(),
        });
    }
    let theta = theta_grid(omega, deltas, cfg)?;
    let closure = closure_checks(omega)?;
    let finite = theta.iter().all(|t| t.sup_value.is_finite());
    let note = if finite {
        "member: sub-exponential and Theta finite on the sampled delta grid (sampled lower estimates)".to_string()
    } else {
        "Theta estimate not finite".to_string()
    };
    Ok(OmegaReport { omega: omega.clone(), subexponential, member: finite, theta, closure, note })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let one = WeightFn::Constant;
        let z = Complex64::new(0.7, 2.0);
        assert!((laplace_quadrature(&one, z, 1e-12).unwrap().value - 1.0 / z).norm() < 1e-15);
        let p2 = WeightFn::Polynomial { degree: 2 };
        for s in [0.05, 0.5, 3.0] {
            let v = laplace_quadrature(&p2, c(s), 1e-12).unwrap().value.re;
            let exact = 1.0 / s + 2.0 / (s * s) + 2.0 / (s * s * s);
            assert!((v / exact - 1.0).abs() < 1e-11, "{s} {v} {exact}");
            let v = laplace_panels(&p2, c(s), 1e-12).unwrap().value.re;
            assert!((v / exact - 1.0).abs() < 1e-10, "{s} {v} {exact}");
        }
    }

    #[test]
    fn series_matches_quadrature() {
        for (a, alpha) in [(1.0, 0.5), (2.0, 1.0 / 3.0)] {
            let w = WeightFn::power_exp(a, alpha);
            for z in [c(1.0), c(0.01), Complex64::new(0.01, 100.0), Complex64::new(0.3, -5.0), Complex64::new(10.0, 40.0)] {
                let s = gamma_series(a, alpha, z, 1e-14).unwrap().value;
                let q = laplace_quadrature(&w, z, 1e-12).unwrap().value;
                assert!(rel(q, s) < 1e-10, "{a} {alpha} {z} {s} {q}");
            }
        }
        assert_eq!(gamma_series(0.0, 0.5, Complex64::new(2.0, 1.0), 1e-12).unwrap().value, 1.0 / Complex64::new(2.0, 1.0));
    }

    #[test]
    fn theta_constant_and_sqrt() {
        let cfg = ThetaSampler::default();
        let t = theta_omega(&WeightFn::Constant, 0.5, &cfg).unwrap();
        assert_eq!(t.sup_value, 2.0);
        let t = theta_omega(&WeightFn::power_exp(1.0, 0.5), 1.0, &cfg).unwrap();
        assert!(t.sup_value.is_finite() && t.sup_value > 1.0);
    }

    #[test]
    fn phi_bounds() {
        assert!(phi_bound_check(&Exponent::Power { a: 1.0, alpha: 0.5 }, 0.6).unwrap().holds);
        assert!(phi_bound_check(&Exponent::IteratedLog { a: 2.0, power: 1.0, depth: 1 }, 0.5).unwrap().holds);
        assert!(!phi_bound_check(&Exponent::Power { a: 1.0, alpha: 1.0 }, 0.9).unwrap().holds);
    }

    #[test]
    fn singularity_and_membership() {
        let p2 = WeightFn::Polynomial { degree: 2 };
        let rows = singularity_scan(&p2, 2, &[1e-3, 1e-5]).unwrap();
        assert!(rows[0].value > 1e3 && rows[1].value > 1e4);
        assert!((rows[0].value / (2.0 / 1e-3 + 2.0 + 1e-3) - 1.0).abs() < 1e-9);
        assert!(matches!(singularity_scan(&WeightFn::Constant, 1, &[1e-3]), Err(LabError::PreconditionUnverifiable(_))));
        let rep = omega_report(&WeightFn::SquareExp { a: 1.0 }, &[1.0], &ThetaSampler::default()).unwrap();
        assert!(!rep.member);
        let checks = closure_checks(&WeightFn::power_exp(1.0, 0.5)).unwrap();
        for ch in &checks {
            assert!(ch.passed, "{ch:?}");
        }
    }
}
