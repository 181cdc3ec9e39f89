//! Smooth test functions f with values, derivatives, tail integrals and
//! Fourier transforms f_hat(xi) = int f(t) e^{-i xi t} dt.

use crate::error::{LabError, Result};
use crate::quad::{gauss_legendre, gl_fixed, integrate, QuadOptions};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use libm::erfc;
use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

/// int_{-1}^{1} exp(-1 / (1 - u^2)) du
pub const BUMP_INTEGRAL: f64 = 0.443_993_816_168_079_437_8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    Zero,
    /// Normal density with the given center and standard deviation.
    Gaussian { center: f64, width: f64 },
    /// C_c^infinity bump exp(-1/(1-u^2)), u = (t - center)/radius, unit integral.
    Bump { center: f64, radius: f64 },
    /// p(u) e^{-u^2/2} / (width sqrt(2 pi)), u = (t - center)/width, p in the monomial basis.
    PolyGaussian { center: f64, width: f64, coeffs: Vec<f64> },
    Sum { terms: Vec<TestFunction> },
}

fn gaussian_kernel(u: f64, width: f64) -> f64 {
    (-0.5 * u * u).exp() / (width * (2.0 * PI).sqrt())
}

fn poly(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * u + a)
}

fn poly_deriv(c: &[f64], u: f64) -> f64 {
    c.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &a)| acc * u + k as f64 * a)
}

/// Probabilists' Hermite polynomials He_0..He_n at a complex point.
fn hermite(n: usize, x: Complex64) -> Vec<Complex64> {
    let mut h = vec![Complex64::new(1.0, 0.0); n + 1];
    if n >= 1 {
        h[1] = x;
    }
    for k in 1..n {
        h[k + 1] = x * h[k] - h[k - 1] * k as f64;
    }
    h
}

fn bump_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(24))
}

fn bump_shape(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// int_{-1}^{1} exp(-1/(1-u^2)) e^{-i w u} du / BUMP_INTEGRAL, composite Gauss-Legendre.
fn bump_fourier(w: Complex64) -> Complex64 {
    let panels = ((w.norm() / 2.0).ceil() as usize).max(8);
    let rule = bump_rule();
    let mut s = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let a = -1.0 + 2.0 * p as f64 / panels as f64;
        let b = -1.0 + 2.0 * (p + 1) as f64 / panels as f64;
        s += gl_fixed(&|u: f64| (Complex64::new(0.0, -1.0) * w * u).exp() * bump_shape(u), a, b, rule);
    }
    s / BUMP_INTEGRAL
}

impl TestFunction {
    pub fn gaussian(center: f64, width: f64) -> Self {
        TestFunction::Gaussian { center, width }
    }
    pub fn bump(center: f64, radius: f64) -> Self {
        TestFunction::Bump { center, radius }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TestFunction::Gaussian { width, .. } | TestFunction::PolyGaussian { width, .. } if !(*width > 0.0) => {
                Err(LabError::InvalidArgument("width must be positive".into()))
            }
            TestFunction::Bump { radius, .. } if !(*radius > 0.0) => Err(LabError::InvalidArgument("radius must be positive".into())),
            TestFunction::Sum { terms } => terms.iter().try_for_each(|t| t.validate()),
            _ => Ok(()),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            TestFunction::Zero => 0.0,
            TestFunction::Gaussian { center, width } => gaussian_kernel((t - center) / width, *width),
            TestFunction::Bump { center, radius } => bump_shape((t - center) / radius) / (BUMP_INTEGRAL * radius),
            TestFunction::PolyGaussian { center, width, coeffs } => {
                let u = (t - center) / width;
                poly(coeffs, u) * gaussian_kernel(u, *width)
            }
            TestFunction::Sum { terms } => terms.iter().map(|f| f.value(t)).sum(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            TestFunction::Zero => 0.0,
            TestFunction::Gaussian { center, width } => {
                let u = (t - center) / width;
                -u / width * gaussian_kernel(u, *width)
            }
            TestFunction::Bump { center, radius } => {
                let u = (t - center) / radius;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    let d = 1.0 - u * u;
                    self.value(t) * (-2.0 * u / (d * d)) / radius
                }
            }
            TestFunction::PolyGaussian { center, width, coeffs } => {
                let u = (t - center) / width;
                (poly_deriv(coeffs, u) - u * poly(coeffs, u)) * gaussian_kernel(u, *width) / width
            }
            TestFunction::Sum { terms } => terms.iter().map(|f| f.derivative(t)).sum(),
        }
    }

    /// f_hat(xi) = int f(t) e^{-i xi t} dt; entire in xi for every kind.
    pub fn fourier(&self, xi: Complex64) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        match self {
            TestFunction::Zero => Complex64::new(0.0, 0.0),
            TestFunction::Gaussian { center, width } => (-i * xi * *center - 0.5 * width * width * xi * xi).exp(),
            TestFunction::Bump { center, radius } => (-i * xi * *center).exp() * bump_fourier(xi * *radius),
            TestFunction::PolyGaussian { center, width, coeffs } => {
                let w = xi * *width;
                let he = hermite(coeffs.len().saturating_sub(1), w);
                let mut s = Complex64::new(0.0, 0.0);
                let mut mi = Complex64::new(1.0, 0.0);
                for (k, c) in coeffs.iter().enumerate() {
                    s += mi * he[k] * *c;
                    mi *= -i;
                }
                (-i * xi * *center - 0.5 * w * w).exp() * s
            }
            TestFunction::Sum { terms } => terms.iter().map(|f| f.fourier(xi)).sum(),
        }
    }

    /// int_x^infinity f(t) dt.
    pub fn tail_integral(&self, x: f64) -> f64 {
        match self {
            TestFunction::Zero => 0.0,
            TestFunction::Gaussian { center, width } => 0.5 * erfc((x - center) / (width * SQRT_2)),
            TestFunction::Bump { center, radius } => {
                let lo = x.max(center - radius);
                let hi = center + radius;
                if lo >= hi {
                    return 0.0;
                }
                if x <= center - radius {
                    return 1.0;
                }
                integrate(|t| self.value(t), lo, hi, QuadOptions::new(1e-15, 1e-13)).value
            }
            TestFunction::PolyGaussian { center, width, coeffs } => {
                let a = (x - center) / width;
                let e = (-0.5 * a * a).exp();
                let mut j = vec![0.0; coeffs.len().max(2)];
                j[0] = (PI / 2.0).sqrt() * erfc(a / SQRT_2);
                j[1] = e;
                for k in 2..j.len() {
                    j[k] = a.powi(k as i32 - 1) * e + (k - 1) as f64 * j[k - 2];
                }
                coeffs.iter().zip(j.iter()).map(|(c, jk)| c * jk).sum::<f64>() / (2.0 * PI).sqrt()
            }
            TestFunction::Sum { terms } => terms.iter().map(|f| f.tail_integral(x)).sum(),
        }
    }

    pub fn total_integral(&self) -> f64 {
        self.tail_integral(self.effective_support(1e-30).0 - 1.0)
    }

    /// Interval outside which |f| and |f'| are below eps * sup|f| (exact for bumps).
    pub fn effective_support(&self, eps: f64) -> (f64, f64) {
        let gauss_reach = (2.0 * (1.0 / eps).ln()).sqrt() + 1.0;
        match self {
            TestFunction::Zero => (0.0, 0.0),
            TestFunction::Gaussian { center, width } => (center - width * gauss_reach, center + width * gauss_reach),
            TestFunction::Bump { center, radius } => (center - radius, center + radius),
            TestFunction::PolyGaussian { center, width, coeffs } => {
                let s: f64 = coeffs.iter().map(|c| c.abs()).sum::<f64>().max(1.0);
                let reach = (2.0 * (s / eps).ln()).sqrt() + coeffs.len() as f64 + 1.0;
                (center - width * reach, center + width * reach)
            }
            TestFunction::Sum { terms } => terms.iter().map(|f| f.effective_support(eps)).fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(a, b), (c, d)| (a.min(c), b.max(d)),
            ),
        }
    }

    /// Upper bound for sup |f|.
    pub fn sup_norm(&self) -> f64 {
        match self {
            TestFunction::Zero => 0.0,
            TestFunction::Gaussian { width, .. } => 1.0 / (width * (2.0 * PI).sqrt()),
            TestFunction::Bump { radius, .. } => (-1.0f64).exp() / (BUMP_INTEGRAL * radius),
            _ => {
                // dense sampling plus a derivative margin
                let (a, b) = self.effective_support(1e-17);
                let n = 20_000;
                let h = (b - a) / n as f64;
                let mut m: f64 = 0.0;
                let mut d: f64 = 0.0;
                for k in 0..=n {
                    let t = a + k as f64 * h;
                    m = m.max(self.value(t).abs());
                    d = d.max(self.derivative(t).abs());
                }
                m + 0.5 * h * d * 1.5
            }
        }
    }

    /// Smallest Xi with |f_hat(xi)| <= eps for all |xi| >= Xi (sampled).
    pub fn fourier_cutoff(&self, eps: f64) -> f64 {
        match self {
            TestFunction::Zero => 0.0,
            TestFunction::Gaussian { width, .. } => (2.0 * (1.0 / eps).ln()).sqrt() / width,
            _ => {
                let mut xi = 1.0;
                loop {
                    let ok = (0..=64).all(|k| {
                        let t = xi * (1.0 + k as f64 / 64.0);
                        self.fourier(Complex64::new(t, 0.0)).norm() <= eps && self.fourier(Complex64::new(-t, 0.0)).norm() <= eps
                    });
                    if ok || xi > 1e6 {
                        return xi;
                    }
                    xi *= 1.5;
                }
            }
        }
    }
}

/// (1/lambda) int_x^infinity f.
pub fn t_lambda_apply(f: &TestFunction, x: f64, lambda: f64) -> Result<f64> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(LabError::InvalidArgument("lambda must be nonzero".into()));
    }
    Ok(f.tail_integral(x) / lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_fourier(f: &TestFunction, xi: f64) -> Complex64 {
        let (a, b) = f.effective_support(1e-18);
        integrate(
            |t: f64| Complex64::new(0.0, -xi * t).exp() * f.value(t),
            a,
            b,
            QuadOptions::new(1e-14, 1e-12).with_max_intervals(20000),
        )
        .value
    }

    #[test]
    fn unit_integrals() {
        assert!((TestFunction::bump(0.3, 0.7).total_integral() - 1.0).abs() < 1e-12);
        assert!((TestFunction::gaussian(1.0, 2.0).total_integral() - 1.0).abs() < 1e-14);
        let pg = TestFunction::PolyGaussian { center: 0.0, width: 1.0, coeffs: vec![1.0, 0.0, 1.0] };
        assert!((pg.total_integral() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn fourier_matches_quadrature() {
        let fs = [
            TestFunction::gaussian(0.5, 0.8),
            TestFunction::bump(-0.2, 1.3),
            TestFunction::PolyGaussian { center: 0.4, width: 0.7, coeffs: vec![0.5, -1.0, 0.3, 0.2] },
        ];
        for f in &fs {
            for xi in [0.0, 0.7, -2.5, 9.0] {
                let a = f.fourier(Complex64::new(xi, 0.0));
                let b = numeric_fourier(f, xi);
                assert!((a - b).norm() < 1e-10, "{f:?} xi={xi}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn tails_and_derivatives() {
        let f = TestFunction::gaussian(0.0, 1.0);
        assert!((t_lambda_apply(&f, -10.0, 1.0).unwrap() - 0.5 * erfc(-10.0 / SQRT_2)).abs() < 1e-15);
        let b = TestFunction::bump(2.0, 0.5);
        assert_eq!(t_lambda_apply(&b, 3.0, 1.0).unwrap(), 0.0);
        assert!((t_lambda_apply(&b, -5.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
        let pg = TestFunction::PolyGaussian { center: 0.4, width: 0.7, coeffs: vec![0.5, -1.0, 0.3, 0.2] };
        for f in [f, b, pg] {
            for t in [-0.3, 0.1, 0.45, 2.1] {
                let h = 1e-5;
                let fd = (f.value(t + h) - f.value(t - h)) / (2.0 * h);
                assert!((fd - f.derivative(t)).abs() < 1e-7 * (1.0 + fd.abs()));
                let hi = f.effective_support(1e-20).1;
                let num = crate::quad::integrate_points(|s| f.value(s), &[t, t.max(hi - 1.0), hi.max(t)], QuadOptions::new(1e-15, 1e-13)).value;
                assert!((num - f.tail_integral(t)).abs() < 1e-11, "{f:?} {t} {num} {}", f.tail_integral(t));
            }
        }
    }
}
