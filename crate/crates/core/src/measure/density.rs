//! Gridded densities: uniform samples, local cubic interpolation, optional
//! exponential tail continuations past either end of the grid.

use crate::error::{LabError, Result};
use crate::quad::{gauss_legendre, gl_fixed, QuadValue};
use num_complex::Complex64;
use rustfft::FftPlanner;

const RESYNC: usize = 32;

#[derive(Clone, Debug)]
pub struct GridDensity {
    start: f64,
    step: f64,
    values: Vec<f64>,
    left_rate: Option<f64>,
    right_rate: Option<f64>,
    coeffs: Vec<[f64; 4]>,
    cumulative: Vec<f64>,
}

// Monomial coefficients (in t, panel-local) of the Lagrange basis on nodes
// offset, offset+1, offset+2, offset+3.
fn lagrange_matrix(offset: f64) -> [[f64; 4]; 4] {
    let tau = [offset, offset + 1.0, offset + 2.0, offset + 3.0];
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        let mut poly = [1.0, 0.0, 0.0, 0.0];
        let mut denom = 1.0;
        for (k, &tk) in tau.iter().enumerate() {
            if k == i {
                continue;
            }
            let mut next = [0.0; 4];
            for d in 0..3 {
                next[d + 1] += poly[d];
                next[d] -= tk * poly[d];
            }
            poly = next;
            denom *= tau[i] - tk;
        }
        for d in 0..4 {
            m[d][i] = poly[d] / denom;
        }
    }
    m
}

fn binom(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, b| a * b as f64)
}

/// mu_m(w) = int_0^1 u^m e^{-w u} du for m = 0..8.
pub fn exp_moments(w: Complex64) -> [Complex64; 9] {
    let mut mu = [Complex64::new(0.0, 0.0); 9];
    let e = (-w).exp();
    if w.norm() >= 8.0 {
        mu[0] = (Complex64::new(1.0, 0.0) - e) / w;
        for m in 1..9 {
            mu[m] = (mu[m - 1] * m as f64 - e) / w;
        }
    } else {
        let top = 60;
        let mut cur = Complex64::new(0.0, 0.0);
        for m in (0..top).rev() {
            cur = (w * cur + e) / (m + 1) as f64;
            if m < 9 {
                mu[m] = cur;
            }
        }
    }
    mu
}

impl GridDensity {
    pub fn new(start: f64, step: f64, values: Vec<f64>, left_rate: Option<f64>, right_rate: Option<f64>) -> Result<Self> {
        if !(step > 0.0) || !start.is_finite() || !step.is_finite() {
            return Err(LabError::InvalidMeasure("grid step must be positive and finite".into()));
        }
        if values.len() < 4 {
            return Err(LabError::InvalidMeasure("density grid needs at least 4 samples".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(LabError::InvalidMeasure("density values must be finite and nonnegative".into()));
        }
        for r in [left_rate, right_rate].into_iter().flatten() {
            if !(r > 0.0) || !r.is_finite() {
                return Err(LabError::InvalidMeasure("tail rate must be positive".into()));
            }
        }
        let n = values.len();
        let mats = [lagrange_matrix(-1.0), lagrange_matrix(0.0), lagrange_matrix(-2.0)];
        let mut coeffs = Vec::with_capacity(n - 1);
        for j in 0..n - 1 {
            let s = j.saturating_sub(1).min(n - 4);
            let m = match s as isize - j as isize {
                -1 => &mats[0],
                0 => &mats[1],
                _ => &mats[2],
            };
            let mut c = [0.0; 4];
            for d in 0..4 {
                for i in 0..4 {
                    c[d] += m[d][i] * values[s + i];
                }
            }
            coeffs.push(c);
        }
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for c in &coeffs {
            acc += step * (c[0] + c[1] / 2.0 + c[2] / 3.0 + c[3] / 4.0);
            cumulative.push(acc);
        }
        Ok(GridDensity { start, step, values, left_rate, right_rate, coeffs, cumulative })
    }

    pub fn start(&self) -> f64 {
        self.start
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn end(&self) -> f64 {
        self.start + self.step * (self.values.len() - 1) as f64
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn left_rate(&self) -> Option<f64> {
        self.left_rate
    }
    pub fn right_rate(&self) -> Option<f64> {
        self.right_rate
    }
    pub fn node(&self, j: usize) -> f64 {
        self.start + self.step * j as f64
    }

    /// Smallest tail rate, or infinity without tails.
    pub fn min_tail_rate(&self) -> f64 {
        self.left_rate.unwrap_or(f64::INFINITY).min(self.right_rate.unwrap_or(f64::INFINITY))
    }

    fn left_tail_mass(&self) -> f64 {
        self.left_rate.map_or(0.0, |r| self.values[0] / r)
    }
    fn right_tail_mass(&self) -> f64 {
        self.right_rate.map_or(0.0, |r| self.values[self.values.len() - 1] / r)
    }

    pub fn mass(&self) -> f64 {
        self.left_tail_mass() + self.cumulative[self.cumulative.len() - 1] + self.right_tail_mass()
    }

    pub fn scaled(&self, c: f64) -> GridDensity {
        let values = self.values.iter().map(|v| v * c).collect();
        GridDensity::new(self.start, self.step, values, self.left_rate, self.right_rate).expect("scaling keeps validity")
    }

    /// Density value at y (interpolant inside the grid, tails outside).
    pub fn value(&self, y: f64) -> f64 {
        let n = self.values.len();
        if y < self.start {
            return self.left_rate.map_or(0.0, |r| self.values[0] * (-r * (self.start - y)).exp());
        }
        let end = self.end();
        if y > end {
            return self.right_rate.map_or(0.0, |r| self.values[n - 1] * (-r * (y - end)).exp());
        }
        let u = (y - self.start) / self.step;
        let j = (u.floor() as usize).min(n - 2);
        let t = u - j as f64;
        let c = &self.coeffs[j];
        ((c[3] * t + c[2]) * t + c[1]) * t + c[0]
    }

    /// Mass of (-inf, x].
    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.values.len();
        if x < self.start {
            return self.left_rate.map_or(0.0, |r| self.values[0] / r * (-r * (self.start - x)).exp());
        }
        let end = self.end();
        if x >= end {
            let beyond = self.right_rate.map_or(0.0, |r| self.values[n - 1] / r * (-r * (x - end)).exp());
            return self.mass() - beyond;
        }
        let u = (x - self.start) / self.step;
        let j = (u.floor() as usize).min(n - 2);
        let t = u - j as f64;
        let c = &self.coeffs[j];
        let part = t * (c[0] + t * (c[1] / 2.0 + t * (c[2] / 3.0 + t * c[3] / 4.0)));
        self.left_tail_mass() + self.cumulative[j] + self.step * part
    }

    /// int (-y)^k e^{-zy} p(y) dy, computed by exact panel integration of the
    /// cubic interpolant against the exponential and closed-form tails.
    pub fn transform(&self, z: Complex64, k: usize) -> Complex64 {
        let h = self.step;
        let n = self.values.len();
        let w = z * h;
        let mu = exp_moments(w);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let step_factor = (-w).exp();
        let mut total = Complex64::new(0.0, 0.0);
        let mut e = Complex64::new(0.0, 0.0);
        for j in 0..n - 1 {
            if j % RESYNC == 0 {
                e = (-z * self.node(j)).exp();
            } else {
                e *= step_factor;
            }
            let c = &self.coeffs[j];
            let panel = if k == 0 {
                mu[0] * c[0] + mu[1] * c[1] + mu[2] * c[2] + mu[3] * c[3]
            } else {
                // (y_j + h t)^k as a polynomial in t
                let yj = self.node(j);
                let mut q = [0.0; 5];
                for (i, qi) in q.iter_mut().enumerate().take(k + 1) {
                    *qi = binom(k, i) * yj.powi((k - i) as i32) * h.powi(i as i32);
                }
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, qi) in q.iter().enumerate().take(k + 1) {
                    for (d, cd) in c.iter().enumerate() {
                        acc += mu[i + d] * (qi * cd);
                    }
                }
                acc * sign
            };
            total += e * panel;
        }
        total *= h;
        if let Some(r) = self.right_rate {
            let l = self.end();
            let v = self.values[n - 1];
            let denom = Complex64::new(r, 0.0) + z;
            let mut s = Complex64::new(0.0, 0.0);
            let mut p = denom;
            for i in 0..=k {
                s += binom(k, i) * l.powi((k - i) as i32) * factorial(i) / p;
                p *= denom;
            }
            total += (-z * l).exp() * s * (v * sign);
        }
        if let Some(r) = self.left_rate {
            let a = self.start;
            let v = self.values[0];
            let denom = Complex64::new(r, 0.0) - z;
            let mut s = Complex64::new(0.0, 0.0);
            let mut p = denom;
            for i in 0..=k {
                let alt = if i % 2 == 0 { 1.0 } else { -1.0 };
                s += binom(k, i) * a.powi((k - i) as i32) * factorial(i) * alt / p;
                p *= denom;
            }
            total += (-z * a).exp() * s * (v * sign);
        }
        total
    }

    /// Raw moments int y^k p(y) dy for k = 0..=kmax.
    pub fn raw_moments(&self, kmax: usize) -> Vec<f64> {
        let rule = gauss_legendre(((kmax + 4) / 2 + 1).max(4));
        let n = self.values.len();
        let mut m = vec![0.0; kmax + 1];
        let mut pw = vec![0.0; kmax + 1];
        for j in 0..n - 1 {
            let a = self.node(j);
            let c = &self.coeffs[j];
            for (x, wgt) in rule.0.iter().zip(rule.1.iter()) {
                let t = 0.5 * (x + 1.0);
                let y = a + self.step * t;
                let p = ((c[3] * t + c[2]) * t + c[1]) * t + c[0];
                let base = 0.5 * wgt * self.step * p;
                let mut yk = 1.0;
                for pk in pw.iter_mut() {
                    *pk = base * yk;
                    yk *= y;
                }
                for (mk, pk) in m.iter_mut().zip(pw.iter()) {
                    *mk += pk;
                }
            }
        }
        if let Some(r) = self.right_rate {
            let l = self.end();
            let v = self.values[n - 1];
            for (k, mk) in m.iter_mut().enumerate() {
                let mut s = 0.0;
                for i in 0..=k {
                    s += binom(k, i) * l.powi((k - i) as i32) * factorial(i) / r.powi(i as i32 + 1);
                }
                *mk += v * s;
            }
        }
        if let Some(r) = self.left_rate {
            let a = self.start;
            let v = self.values[0];
            for (k, mk) in m.iter_mut().enumerate() {
                let mut s = 0.0;
                for i in 0..=k {
                    let alt = if i % 2 == 0 { 1.0 } else { -1.0 };
                    s += binom(k, i) * a.powi((k - i) as i32) * factorial(i) * alt / r.powi(i as i32 + 1);
                }
                *mk += v * s;
            }
        }
        m
    }

    /// int g(y) p(y) dy with `nodes` Gauss-Legendre points per panel and
    /// adaptive quadrature over the tails (truncated where the tail mass is
    /// below 1e-17 of the total).
    pub fn integrate<T: QuadValue, F: Fn(f64) -> T + Sync>(&self, g: F, nodes: usize) -> T {
        let rule = gauss_legendre(nodes);
        let n = self.values.len();
        let mut total = T::default();
        for j in 0..n - 1 {
            let a = self.node(j);
            let c = self.coeffs[j];
            let h = self.step;
            let f = |y: f64| {
                let t = (y - a) / h;
                g(y) * (((c[3] * t + c[2]) * t + c[1]) * t + c[0])
            };
            total = total + gl_fixed(&f, a, a + h, &rule);
        }
        let opts = crate::quad::QuadOptions::new(1e-17, 1e-13);
        if let Some(r) = self.right_rate {
            let l = self.end();
            let v = self.values[n - 1];
            let len = (v.max(1e-300) / 1e-18).ln().max(1.0) / r;
            let res = crate::quad::integrate(|y: f64| g(y) * (v * (-r * (y - l)).exp()), l, l + len, opts);
            total = total + res.value;
        }
        if let Some(r) = self.left_rate {
            let a0 = self.start;
            let v = self.values[0];
            let len = (v.max(1e-300) / 1e-18).ln().max(1.0) / r;
            let res = crate::quad::integrate(|y: f64| g(y) * (v * (-r * (a0 - y)).exp()), a0 - len, a0, opts);
            total = total + res.value;
        }
        total
    }

    /// int_a^b g(y) p(y) dy; panels clipped to [a, b], tails by adaptive quadrature.
    pub fn integrate_range<T: QuadValue, F: Fn(f64) -> T>(&self, g: F, a: f64, b: f64, nodes: usize) -> T {
        let mut total = T::default();
        if !(b > a) {
            return total;
        }
        let rule = gauss_legendre(nodes);
        let n = self.values.len();
        let h = self.step;
        let (start, end) = (self.start, self.end());
        if b > start && a < end {
            let j0 = (((a.max(start) - start) / h).floor() as usize).min(n - 2);
            let j1 = (((b.min(end) - start) / h).ceil() as usize).clamp(j0 + 1, n - 1);
            for j in j0..j1 {
                let p = self.node(j);
                let lo = p.max(a);
                let hi = (p + h).min(b);
                if hi <= lo {
                    continue;
                }
                let c = self.coeffs[j];
                let f = |y: f64| {
                    let t = (y - p) / h;
                    g(y) * (((c[3] * t + c[2]) * t + c[1]) * t + c[0])
                };
                total = total + gl_fixed(&f, lo, hi, &rule);
            }
        }
        let opts = crate::quad::QuadOptions::new(1e-17, 1e-13);
        if let (Some(r), true) = (self.right_rate, b > end) {
            let v = self.values[n - 1];
            let len = (v.max(1e-300) / 1e-18).ln().max(1.0) / r;
            let (lo, hi) = (a.max(end), b.min(end + len));
            if hi > lo {
                total = total + crate::quad::integrate(|y: f64| g(y) * (v * (-r * (y - end)).exp()), lo, hi, opts).value;
            }
        }
        if let (Some(r), true) = (self.left_rate, a < start) {
            let v = self.values[0];
            let len = (v.max(1e-300) / 1e-18).ln().max(1.0) / r;
            let (lo, hi) = (a.max(start - len), b.min(start));
            if hi > lo {
                total = total + crate::quad::integrate(|y: f64| g(y) * (v * (-r * (start - y)).exp()), lo, hi, opts).value;
            }
        }
        total
    }

    pub fn reflect(&self) -> GridDensity {
        let mut values = self.values.clone();
        values.reverse();
        GridDensity::new(-self.end(), self.step, values, self.right_rate, self.left_rate).expect("reflection keeps validity")
    }

    /// Multiply by e^{-a y}. Tail rates shift by +a (right) and -a (left).
    pub fn tilt(&self, a: f64) -> Result<GridDensity> {
        let values = (0..self.values.len()).map(|j| self.values[j] * (-a * self.node(j)).exp()).collect();
        let left = self.left_rate.map(|r| r - a);
        let right = self.right_rate.map(|r| r + a);
        if left.is_some_and(|r| r <= 0.0) || right.is_some_and(|r| r <= 0.0) {
            return Err(LabError::StripViolation { re_abs: a.abs(), eta: self.min_tail_rate() });
        }
        GridDensity::new(self.start, self.step, values, left, right)
    }

    /// Samples on the grid extended by the tails until they drop below
    /// `rel_cut` times the largest sample. Returns (start, samples).
    pub fn extended_samples(&self, rel_cut: f64) -> (f64, Vec<f64>) {
        let vmax = self.values.iter().cloned().fold(0.0, f64::max);
        let n = self.values.len();
        let mut left = Vec::new();
        if let Some(r) = self.left_rate {
            let v = self.values[0];
            let mut i = 1;
            loop {
                let x = v * (-r * self.step * i as f64).exp();
                if x <= rel_cut * vmax || i > 10_000_000 {
                    break;
                }
                left.push(x);
                i += 1;
            }
            left.reverse();
        }
        let start = self.start - self.step * left.len() as f64;
        let mut out = left;
        out.extend_from_slice(&self.values);
        if let Some(r) = self.right_rate {
            let v = self.values[n - 1];
            let mut i = 1;
            loop {
                let x = v * (-r * self.step * i as f64).exp();
                if x <= rel_cut * vmax || i > 10_000_000 {
                    break;
                }
                out.push(x);
                i += 1;
            }
        }
        (start, out)
    }

    pub fn convolve(&self, other: &GridDensity) -> Result<GridDensity> {
        if ((self.step - other.step) / self.step).abs() > 1e-12 {
            return Err(LabError::IncompatibleRepresentation(format!(
                "density grids have different steps {} and {}",
                self.step, other.step
            )));
        }
        let (s1, a) = self.extended_samples(1e-18);
        let (s2, b) = other.extended_samples(1e-18);
        let c = gregory_convolve(&a, &b, self.step);
        let target = self.mass() * other.mass();
        let out = GridDensity::new(s1 + s2, self.step, c.into_iter().map(|v| v.max(0.0)).collect(), None, None)?;
        let m = out.mass();
        Ok(out.scaled(target / m))
    }
}

fn newton_cotes(n: usize) -> &'static [f64] {
    match n {
        1 => &[0.0],
        2 => &[0.5, 0.5],
        3 => &[1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0],
        4 => &[3.0 / 8.0, 9.0 / 8.0, 9.0 / 8.0, 3.0 / 8.0],
        5 => &[14.0 / 45.0, 64.0 / 45.0, 24.0 / 45.0, 64.0 / 45.0, 14.0 / 45.0],
        _ => unreachable!(),
    }
}

/// c_k ~ int a(x) b(t_k - x) dx for samples on a common step h: FFT products
/// with fourth-order Gregory end corrections on each overlap.
pub fn gregory_convolve(a: &[f64], b: &[f64], h: f64) -> Vec<f64> {
    let n1 = a.len();
    let n2 = b.len();
    let len = n1 + n2 - 1;
    let raw = fft_convolve(a, b);
    const CORR: [f64; 3] = [3.0 / 8.0 - 1.0, 7.0 / 6.0 - 1.0, 23.0 / 24.0 - 1.0];
    let mut out = vec![0.0; len];
    for k in 0..len {
        let lo = k.saturating_sub(n2 - 1);
        let hi = k.min(n1 - 1);
        let count = hi - lo + 1;
        let v = if count >= 6 {
            let mut s = raw[k];
            for (d, cw) in CORR.iter().enumerate() {
                s += cw * a[lo + d] * b[k - lo - d];
                s += cw * a[hi - d] * b[k - hi + d];
            }
            s
        } else {
            let w = newton_cotes(count);
            (0..count).map(|d| w[d] * a[lo + d] * b[k - lo - d]).sum()
        };
        out[k] = v * h;
    }
    out
}

pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 {
        let mut out = vec![0.0; len];
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                out[i + j] += ai * bj;
            }
        }
        return out;
    }
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fa.resize(size, Complex64::new(0.0, 0.0));
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fb.resize(size, Complex64::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(fb.iter()) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..len].iter().map(|c| c.re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_grid(step: f64) -> GridDensity {
        let n = (16.0 / step).round() as usize + 1;
        let v = (0..n).map(|j| (-(j as f64) * step).exp()).collect();
        GridDensity::new(0.0, step, v, None, Some(1.0)).unwrap()
    }

    #[test]
    fn exp_moments_match_quadrature() {
        for w in [Complex64::new(0.0, 0.0), Complex64::new(0.3, 2.0), Complex64::new(-1.0, 7.5), Complex64::new(2.0, 40.0)] {
            let mu = exp_moments(w);
            for (m, v) in mu.iter().enumerate() {
                let r = crate::quad::integrate(|u: f64| (-w * u).exp() * u.powi(m as i32), 0.0, 1.0, Default::default());
                assert!((r.value - v).norm() < 1e-13 * (1.0 + v.norm()), "m={m} w={w}");
            }
        }
    }

    #[test]
    fn interpolant_reproduces_cubics() {
        let v: Vec<f64> = (0..10).map(|j| 1.0 + (j as f64 * 0.1).powi(3)).collect();
        let g = GridDensity::new(0.0, 0.1, v, None, None).unwrap();
        for y in [0.03, 0.47, 0.88] {
            assert!((g.value(y) - (1.0 + y.powi(3))).abs() < 1e-13);
        }
    }

    #[test]
    fn exp_grid_transform_and_mass() {
        let g = exp_grid(1.0 / 256.0);
        assert!((g.mass() - 1.0).abs() < 1e-10);
        for z in [Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0), Complex64::new(-0.4, 3.0), Complex64::new(0.2, 120.0)] {
            let exact = 1.0 / (1.0 + z);
            assert!((g.transform(z, 0) - exact).norm() < 1e-10, "{z}");
            let d1 = -1.0 / ((1.0 + z) * (1.0 + z));
            assert!((g.transform(z, 1) - d1).norm() < 1e-9);
        }
        let m = g.raw_moments(6);
        for (k, mk) in m.iter().enumerate() {
            assert!((mk / factorial(k) - 1.0).abs() < 1e-9, "k={k}");
        }
        assert!((g.cdf(2.0) - (1.0 - (-2.0f64).exp())).abs() < 1e-10);
        assert!((g.cdf(20.0) - (1.0 - (-20.0f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn gregory_convolution_of_exponentials() {
        let g = exp_grid(1.0 / 128.0);
        let c = g.convolve(&g).unwrap();
        for y in [0.5, 2.0, 7.0] {
            assert!((c.value(y) - y * (-y).exp()).abs() < 1e-8, "y={y}");
        }
        let z = Complex64::new(0.3, 2.0);
        let exact = 1.0 / ((1.0 + z) * (1.0 + z));
        assert!((c.transform(z, 0) - exact).norm() < 1e-8);
    }
}
