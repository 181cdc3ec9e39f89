//! How fast can |1 - rho_hat(ib)| approach zero? Criterion values, dyadic
//! window minima, exponent fits and the symmetrization inequalities.

use crate::error::{LabError, Result};
use crate::measure::ProbabilityMeasure;
use crate::quad::golden_min;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Minima below this are treated as exact zeros (lattice points).
pub const LATTICE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criteria {
    pub b: f64,
    /// |1 - rho_hat(ib)|
    pub c1: f64,
    /// int d(by / 2pi, Z)^2 drho
    pub c2: f64,
    /// int |e^{-iby} - 1|^2 drho = 2 - 2 Re rho_hat(ib)
    pub c3: f64,
    /// 1 - |rho_hat(ib)|, reported but never used for classification
    pub aux: f64,
}

fn dist_z(t: f64) -> f64 {
    (t - t.round()).abs()
}

fn c1_at(mu: &ProbabilityMeasure, b: f64) -> f64 {
    (Complex64::new(1.0, 0.0) - mu.transform_unchecked(Complex64::new(0.0, b), 0)).norm()
}

pub fn criterion_values(mu: &ProbabilityMeasure, b: f64) -> Result<Criteria> {
    if b == 0.0 || !b.is_finite() {
        return Err(LabError::InvalidArgument("b must be nonzero and finite".into()));
    }
    let r = mu.transform_unchecked(Complex64::new(0.0, b), 0);
    let c1 = (Complex64::new(1.0, 0.0) - r).norm();
    let c2 = mu.integrate(|y| dist_z(b * y / (2.0 * PI)).powi(2));
    let c3 = match mu.atoms() {
        Some(atoms) => atoms.iter().map(|a| a.weight * (Complex64::new(0.0, -b * a.location).exp() - 1.0).norm_sqr()).sum(),
        None => 2.0 * mu.mass() - 2.0 * r.re,
    };
    Ok(Criteria { b, c1, c2, c3, aux: 1.0 - r.norm() })
}

/// Grid step resolving the oscillation of rho_hat(ib).
pub fn grid_step(mu: &ProbabilityMeasure) -> f64 {
    0.25 / mu.spread().max(1e-3)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalMin {
    pub b: f64,
    pub c1: f64,
}

/// Local minima of c1 on [lo, hi], each refined by golden-section search.
fn local_minima(mu: &ProbabilityMeasure, lo: f64, hi: f64, step: f64) -> (Vec<LocalMin>, Vec<(f64, f64)>) {
    let n = ((hi - lo) / step).ceil().max(2.0) as usize;
    let h = (hi - lo) / n as f64;
    let vals: Vec<(f64, f64)> = (0..=n)
        .into_par_iter()
        .map(|k| {
            let b = lo + k as f64 * h;
            (b, c1_at(mu, b))
        })
        .collect();
    let mins: Vec<LocalMin> = (1..n)
        .into_par_iter()
        .filter(|&k| vals[k].1 <= vals[k - 1].1 && vals[k].1 < vals[k + 1].1)
        .map(|k| {
            let (b, v) = golden_min(|b| c1_at(mu, b), vals[k - 1].0, vals[k + 1].0, 1e-13);
            if v < vals[k].1 {
                LocalMin { b, c1: v }
            } else {
                LocalMin { b: vals[k].0, c1: vals[k].1 }
            }
        })
        .collect();
    (mins, vals)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowMin {
    pub lo: f64,
    pub hi: f64,
    pub b: f64,
    /// min of |b|^l c1(b) over the window
    pub value: f64,
}

/// Minimum of |b|^l |1 - rho_hat(ib)| over each dyadic window [2^k, 2^{k+1}]
/// up to B.
pub fn window_minima(mu: &ProbabilityMeasure, l: f64, big_b: f64) -> Result<Vec<WindowMin>> {
    if big_b < 2.0 || l < 0.0 {
        return Err(LabError::InvalidArgument("window_minima needs B >= 2 and l >= 0".into()));
    }
    let step = grid_step(mu);
    let mut out = Vec::new();
    let mut lo = 1.0;
    while lo < big_b {
        let hi = (2.0 * lo).min(big_b);
        let g = |b: f64| b.powf(l) * c1_at(mu, b);
        let (mins, vals) = local_minima(mu, lo, hi, step);
        let mut best = WindowMin { lo, hi, b: lo, value: f64::INFINITY };
        for (b, v) in vals.iter().map(|&(b, v)| (b, b.powf(l) * v)) {
            if v < best.value {
                best.b = b;
                best.value = v;
            }
        }
        for m in mins {
            // descend the weighted objective from each local minimum of c1
            let (b, v) = golden_min(g, (m.b - step).max(lo), (m.b + step).min(hi), 1e-13);
            let cands = [(m.b, g(m.b)), (b, v)];
            for (b, v) in cands {
                if v < best.value {
                    best.b = b;
                    best.value = v;
                }
            }
        }
        out.push(best);
        lo = hi;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    /// Estimated weak-diophantine exponent; None for lattice measures or
    /// super-polynomial decay within the window.
    pub l_star: Option<f64>,
    pub diagnostic: String,
    pub big_b: f64,
    pub grid_step: f64,
    pub local_minima: usize,
    pub records: Vec<LocalMin>,
    pub slope: Option<f64>,
    pub r_squared: Option<f64>,
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    (slope, intercept, r2)
}

/// Estimate l such that liminf |b|^l |1 - rho_hat(ib)| > 0, from the record
/// minima of |1 - rho_hat(ib)| on [2, B].
pub fn fit_exponent(mu: &ProbabilityMeasure, big_b: f64) -> Result<ExponentFit> {
    if big_b < 256.0 {
        return Err(LabError::InvalidArgument("fit_exponent needs B >= 2^8".into()));
    }
    let step = grid_step(mu);
    let (mins, vals) = local_minima(mu, 2.0, big_b, step);
    let base = ExponentFit {
        l_star: None,
        diagnostic: String::new(),
        big_b,
        grid_step: step,
        local_minima: mins.len(),
        records: vec![],
        slope: None,
        r_squared: None,
    };
    if let Some(m) = mins.iter().find(|m| m.c1 < LATTICE_TOL) {
        return Ok(ExponentFit {
            diagnostic: format!("exact zeros found (b = {:.12})", m.b),
            ..base
        });
    }
    let mut records: Vec<LocalMin> = Vec::new();
    for m in &mins {
        if records.last().is_none_or(|r| m.c1 < r.c1) {
            records.push(*m);
        }
    }
    if records.len() < 4 {
        // bounded below: the minimum over the upper half of the range is not
        // much smaller than over the lower half
        let split = (2.0 * big_b).sqrt();
        let low = vals.iter().filter(|v| v.0 < split).map(|v| v.1).fold(f64::INFINITY, f64::min);
        let high = vals.iter().filter(|v| v.0 >= split).map(|v| v.1).fold(f64::INFINITY, f64::min);
        let low = mins.iter().filter(|m| m.b < split).map(|m| m.c1).fold(low, f64::min);
        let high = mins.iter().filter(|m| m.b >= split).map(|m| m.c1).fold(high, f64::min);
        if high >= 0.1 * low {
            return Ok(ExponentFit {
                l_star: Some(0.0),
                diagnostic: format!("minima bounded below by {high:.3e} up to B"),
                records,
                ..base
            });
        }
        return Err(LabError::InsufficientData(format!("{} record minima below B = {big_b}", records.len())));
    }
    let x: Vec<f64> = records.iter().map(|r| r.b.ln()).collect();
    let y: Vec<f64> = records.iter().map(|r| r.c1.ln()).collect();
    let (slope, _, r2) = linear_fit(&x, &y);
    let half = records.len() / 2;
    let tail_slope = if records.len() - half >= 3 { linear_fit(&x[half..], &y[half..]).0 } else { slope };
    let (l_star, diagnostic) = if -slope < 0.1 {
        (Some(0.0), format!("record minima flat (slope {slope:.3})"))
    } else if tail_slope < 2.0 * slope - 1.0 {
        (None, format!("super-polynomial decay within window (slopes {slope:.3}, {tail_slope:.3})"))
    } else {
        (Some(-slope), format!("record-minimum regression over {} records", records.len()))
    };
    Ok(ExponentFit { l_star, diagnostic, records, slope: Some(slope), r_squared: Some(r2), ..base })
}

pub fn make_two_atom(x: f64, y: f64, p: f64) -> Result<ProbabilityMeasure> {
    ProbabilityMeasure::two_atom(x, y, p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizationReport {
    pub fit_mu: std::result::Result<ExponentFit, String>,
    pub fit_nu: std::result::Result<ExponentFit, String>,
    pub grid_points: usize,
    /// 2|1 + nu_hat(it)| >= int |e^{-ity} + 1|^2 dnu on the whole grid
    pub first_holds: bool,
    /// int |e^{-2ity} - 1|^2 dnu <= 4 int |e^{-ity} + 1|^2 dnu on the whole grid
    pub second_holds: bool,
    /// max over the grid of the ratio in the second inequality (at most 4)
    pub second_max_ratio: f64,
    /// grid points where the ratio exceeds 2
    pub ratio_above_two: usize,
}

/// Builds nu = mu * reflect(mu), fits both exponents and checks the
/// pointwise inequalities used to pass from weak to strong exponents.
pub fn symmetrization_check(mu: &ProbabilityMeasure, big_b: f64) -> Result<SymmetrizationReport> {
    let nu = mu.convolve(&mu.reflect())?;
    let fit_mu = fit_exponent(mu, big_b).map_err(|e| e.to_string());
    let fit_nu = fit_exponent(&nu, big_b).map_err(|e| e.to_string());
    let n = 4000;
    let mut first = true;
    let mut second = true;
    let mut max_ratio: f64 = 0.0;
    let mut above_two = 0;
    for k in 1..=n {
        let t = big_b * k as f64 / n as f64;
        let r1 = nu.transform_unchecked(Complex64::new(0.0, t), 0);
        let r2 = nu.transform_unchecked(Complex64::new(0.0, 2.0 * t), 0);
        let plus = 2.0 * nu.mass() + 2.0 * r1.re;
        let lhs2 = 2.0 * nu.mass() - 2.0 * r2.re;
        if 2.0 * (Complex64::new(nu.mass(), 0.0) + r1).norm() < plus - 1e-12 {
            first = false;
        }
        if lhs2 > 4.0 * plus + 1e-12 {
            second = false;
        }
        if plus > 1e-12 {
            let ratio = lhs2 / plus;
            max_ratio = max_ratio.max(ratio);
            if ratio > 2.0 + 1e-12 {
                above_two += 1;
            }
        }
    }
    Ok(SymmetrizationReport {
        fit_mu,
        fit_nu,
        grid_points: n,
        first_holds: first,
        second_holds: second,
        second_max_ratio: max_ratio,
        ratio_above_two: above_two,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiophantineScan {
    pub rows: Vec<Criteria>,
    pub windows: Vec<(f64, Vec<WindowMin>)>,
    pub fit: Option<ExponentFit>,
    pub big_b: f64,
    pub grid_step: f64,
}

/// Criterion table on `n` points of [1, B], window minima for each l in
/// `ls`, and the exponent fit.
pub fn diophantine_scan(mu: &ProbabilityMeasure, big_b: f64, n: usize, ls: &[f64]) -> Result<DiophantineScan> {
    let rows = (1..=n)
        .into_par_iter()
        .map(|k| criterion_values(mu, 1.0 + (big_b - 1.0) * k as f64 / n as f64))
        .collect::<Result<Vec<_>>>()?;
    let mut windows = Vec::new();
    for &l in ls {
        windows.push((l, window_minima(mu, l, big_b)?));
    }
    let fit = if big_b >= 256.0 { Some(fit_exponent(mu, big_b)?) } else { None };
    Ok(DiophantineScan { rows, windows, fit, big_b, grid_step: grid_step(mu) })
}

impl DiophantineScan {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["b", "c1", "c2", "c3", "one_minus_abs"]).expect("in-memory write");
        for r in &self.rows {
            w.write_record(&[r.b.to_string(), r.c1.to_string(), r.c2.to_string(), r.c3.to_string(), r.aux.to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// Continued-fraction convergents p/q of x (at most `n`).
pub fn convergents(x: f64, n: usize) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0i64, x.floor() as i64, 1i64);
    out.push((p1, q1));
    let mut r = x - x.floor();
    while out.len() < n && r > 1e-12 {
        let y = 1.0 / r;
        let a = y.floor() as i64;
        r = y - y.floor();
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        out.push((p2, q2));
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GOLDEN;

    #[test]
    fn criterion_examples() {
        let d = ProbabilityMeasure::dirac(1.0);
        let c = criterion_values(&d, 2.0 * PI).unwrap();
        assert!(c.c1 < 1e-15 && c.c2 < 1e-30 && c.c3 < 1e-30);
        let c = criterion_values(&d, PI).unwrap();
        assert!((c.c1 - 2.0).abs() < 1e-15 && (c.c2 - 0.25).abs() < 1e-15 && (c.c3 - 4.0).abs() < 1e-15);
        let g = make_two_atom(1.0, GOLDEN, 0.5).unwrap();
        let c = criterion_values(&g, 100.0).unwrap();
        let r = 0.5 * Complex64::new(0.0, -100.0).exp() + 0.5 * Complex64::new(0.0, -100.0 * GOLDEN).exp();
        assert!((c.c1 - (1.0 - r).norm()).abs() < 1e-14);
        let d2 = 0.5 * dist_z(100.0 / (2.0 * PI)).powi(2) + 0.5 * dist_z(100.0 * GOLDEN / (2.0 * PI)).powi(2);
        assert!((c.c2 - d2).abs() < 1e-15);
        assert!((c.c3 - (2.0 - 2.0 * r.re)).abs() < 1e-13);
    }

    #[test]
    fn exponential_windows_bounded() {
        let e = ProbabilityMeasure::exponential_with(1.0, 64);
        let w = window_minima(&e, 0.0, 1024.0).unwrap();
        for win in &w {
            let oracle = win.lo / (1.0 + win.lo * win.lo).sqrt();
            assert!((win.value - oracle).abs() < 1e-6, "{win:?}");
        }
    }

    #[test]
    fn dirac_window_hits_zero() {
        let w = window_minima(&ProbabilityMeasure::dirac(1.0), 0.0, 64.0).unwrap();
        let win = w.iter().find(|w| w.lo <= 2.0 * PI && 2.0 * PI <= w.hi).unwrap();
        assert!(win.value < 1e-9);
    }

    #[test]
    fn exponents() {
        let f = fit_exponent(&ProbabilityMeasure::dirac(1.0), 256.0).unwrap();
        assert!(f.l_star.is_none() && f.diagnostic.contains("exact zeros"));
        let e = fit_exponent(&ProbabilityMeasure::exponential_with(1.0, 64), 256.0).unwrap();
        assert_eq!(e.l_star, Some(0.0));
        let g = fit_exponent(&make_two_atom(1.0, GOLDEN, 0.5).unwrap(), 65536.0).unwrap();
        let l = g.l_star.unwrap();
        assert!((l - 2.0).abs() < 0.3, "l* = {l}");
    }

    #[test]
    fn symmetrization_examples() {
        let r = symmetrization_check(&make_two_atom(1.0, 2.0, 0.5).unwrap(), 256.0).unwrap();
        assert!(r.first_holds && r.second_holds);
        assert!(r.second_max_ratio <= 4.0 + 1e-9);
        let r = symmetrization_check(&ProbabilityMeasure::dirac(1.0), 256.0).unwrap();
        assert!(r.first_holds && r.second_holds);
    }

    #[test]
    fn golden_convergents() {
        let c = convergents(GOLDEN, 8);
        assert_eq!(c[..6], [(1, 1), (2, 1), (3, 2), (5, 3), (8, 5), (13, 8)]);
    }
}
