//! Renewal function H, remainder R, Green operator G*f and the limit operator
//! T_lambda*f. Series use truncated convolution ladders with Chernoff tail
//! bounds; the Fourier route inverts the damped symbol 1/(1 - rho_hat(s - i xi)).

use crate::error::{LabError, Result};
use crate::measure::{gregory_convolve, merge_atoms, Atom, GridDensity, MomentData, ProbabilityMeasure};
use crate::quad::{golden_min, integrate_points, QuadOptions};
use crate::testfn::TestFunction;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Hard cap on the number of convolution powers.
pub const MAX_TERMS: usize = 20_000;
/// f is treated as zero outside its effective support at this level.
pub const SUPPORT_EPS: f64 = 1e-30;
/// Floor for |1 - rho_hat(s - i xi)| in the Fourier route.
pub const DENOM_FLOOR: f64 = 1e-10;
/// |1 - rho_hat(z)| below this (away from 0) counts as a pole of the symbol.
pub const POLE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Series,
    Fourier,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenewalResult {
    pub value: f64,
    pub truncation_bound: f64,
    pub terms_used: usize,
    pub method: Method,
    /// Estimated discretization and rounding error (not certified).
    #[serde(default)]
    pub discretization: f64,
}

impl RenewalResult {
    fn exact(value: f64, method: Method) -> Self {
        RenewalResult { value, truncation_bound: 0.0, terms_used: 0, method, discretization: 0.0 }
    }

    /// truncation_bound + discretization.
    pub fn error_bound(&self) -> f64 {
        self.truncation_bound + self.discretization
    }
}

fn log_chernoff(mu: &ProbabilityMeasure, x: f64, n: usize, s: f64) -> f64 {
    let r = mu.transform_unchecked(Complex64::new(s, 0.0), 0).re;
    if !(r < 1.0) || r <= 0.0 {
        return f64::INFINITY;
    }
    s * x + (n + 1) as f64 * r.ln() - (-r).ln_1p()
}

/// min over s in (0, eta) of e^{sx} rho_hat(s)^{N+1} / (1 - rho_hat(s)), an
/// upper bound for sum_{n > N} rho^{*n}((-inf, x]).
pub fn chernoff_tail(mu: &ProbabilityMeasure, x: f64, n: usize) -> Result<f64> {
    let hi = 0.999 * mu.eta();
    let k = 200;
    let ls: Vec<f64> = (0..=k).map(|i| hi.ln() + (i as f64 / k as f64 - 1.0) * 8.0 * std::f64::consts::LN_10).collect();
    let vals: Vec<f64> = ls.iter().map(|&l| log_chernoff(mu, x, n, l.exp())).collect();
    let (ib, best) = vals
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    if !best.is_finite() {
        return Err(LabError::NoDrift);
    }
    let a = ls[ib.saturating_sub(1)];
    let b = ls[(ib + 1).min(k)];
    let (_, refined) = golden_min(|l| log_chernoff(mu, x, n, l.exp()), a, b, 1e-10);
    Ok(best.min(refined).exp())
}

/// Smallest N with chernoff_tail(mu, x, N) <= tol, with that bound.
pub fn terms_for(mu: &ProbabilityMeasure, x: f64, tol: f64) -> Result<(usize, f64)> {
    if !(tol > 0.0) {
        return Err(LabError::InvalidArgument("tolerance must be positive".into()));
    }
    let mut hi = 1;
    let mut bound = chernoff_tail(mu, x, hi)?;
    while bound > tol {
        if hi >= MAX_TERMS {
            return Err(LabError::NonConvergent(format!("more than {MAX_TERMS} convolution powers needed at x = {x}")));
        }
        hi = (hi * 2).min(MAX_TERMS);
        bound = chernoff_tail(mu, x, hi)?;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        let b = chernoff_tail(mu, x, mid)?;
        if b <= tol {
            hi = mid;
            bound = b;
        } else {
            lo = mid;
        }
    }
    Ok((hi, bound))
}

#[derive(Clone, Debug)]
enum Ladder {
    /// Atoms of sum_{n <= N} rho^{*n}, sorted, with running sums.
    Atomic { locs: Vec<f64>, weights: Vec<f64>, cum: Vec<f64> },
    /// rho itself plus the gridded density of sum_{2 <= n <= N} rho^{*n},
    /// once on the grid step and once on twice the step.
    Density { first: GridDensity, rest: Option<GridDensity>, coarse: Option<GridDensity> },
}

/// Truncated renewal measure sum_{n <= N} rho^{*n} restricted to (-inf, y_max],
/// built once and queried at many points.
#[derive(Clone, Debug)]
pub struct RenewalEngine {
    mu: ProbabilityMeasure,
    moments: MomentData,
    y_max: f64,
    terms: usize,
    tail: f64,
    pruned: f64,
    ladder: Ladder,
}

impl RenewalEngine {
    /// Engine valid for arguments y <= y_max, truncated at tail bound `tol`.
    pub fn new(mu: &ProbabilityMeasure, y_max: f64, tol: f64) -> Result<Self> {
        let moments = mu.moments();
        moments.require_drift()?;
        let (terms, tail) = terms_for(mu, y_max, tol)?;
        let (ladder, pruned) = if let Some(atoms) = mu.atoms() {
            atomic_ladder(atoms, y_max, terms, tol)
        } else {
            let g = mu.grid().expect("density representation");
            let rest = density_ladder(g, g.step(), y_max, terms)?;
            let coarse = density_ladder(g, 2.0 * g.step(), y_max, terms)?;
            (Ladder::Density { first: g.clone(), rest, coarse }, 0.0)
        };
        Ok(RenewalEngine { mu: mu.clone(), moments, y_max, terms, tail, pruned, ladder })
    }

    pub fn measure(&self) -> &ProbabilityMeasure {
        &self.mu
    }
    pub fn moments(&self) -> MomentData {
        self.moments
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }
    pub fn terms(&self) -> usize {
        self.terms
    }
    /// Chernoff bound at y_max plus the mass dropped by atom pruning.
    pub fn tail_bound(&self) -> f64 {
        self.tail + self.pruned
    }

    /// Jump locations of H inside [a, b] (atomic measures only).
    pub fn jumps_in(&self, a: f64, b: f64) -> Vec<f64> {
        match &self.ladder {
            Ladder::Atomic { locs, .. } => {
                let i = locs.partition_point(|&l| l < a);
                let j = locs.partition_point(|&l| l <= b);
                locs[i..j].to_vec()
            }
            Ladder::Density { .. } => Vec::new(),
        }
    }

    fn check_window(&self, y: f64) -> Result<()> {
        if y > self.y_max + 1e-9 * (1.0 + self.y_max.abs()) {
            return Err(LabError::InvalidArgument(format!("{y} lies beyond the engine window {}", self.y_max)));
        }
        Ok(())
    }

    fn h_value(&self, x: f64) -> f64 {
        self.h_with_error(x).0
    }

    fn h_with_error(&self, x: f64) -> (f64, f64) {
        match &self.ladder {
            Ladder::Atomic { locs, cum, .. } => {
                let i = locs.partition_point(|&l| l <= x);
                if i == 0 {
                    (0.0, 0.0)
                } else {
                    (cum[i - 1], 4.0 * f64::EPSILON * cum[i - 1])
                }
            }
            Ladder::Density { first, rest, coarse } => {
                let zero = if x >= 0.0 { 1.0 } else { 0.0 };
                let fine = rest.as_ref().map_or(0.0, |r| r.cdf(x));
                let rough = coarse.as_ref().map_or(0.0, |r| r.cdf(x));
                // fourth-order scheme: the step-h error is about 1/15 of the difference;
                // 1/8 leaves a margin for the interpolation error
                (zero + first.cdf(x) + fine, (fine - rough).abs() / 8.0)
            }
        }
    }

    /// H(x) = sum_n rho^{*n}((-inf, x]).
    pub fn h(&self, x: f64) -> Result<RenewalResult> {
        self.check_window(x)?;
        let bound = if x < self.y_max { chernoff_tail(&self.mu, x, self.terms)? } else { self.tail };
        let (value, discretization) = self.h_with_error(x);
        Ok(RenewalResult {
            value,
            truncation_bound: bound + self.pruned,
            terms_used: self.terms,
            method: Method::Series,
            discretization,
        })
    }

    /// R(x) = H(x) - (x / lambda + lambda_2 / (2 lambda^2)) 1_{x >= 0}.
    pub fn r(&self, x: f64) -> Result<f64> {
        self.check_window(x)?;
        Ok(self.h_value(x) - self.asymptote(x))
    }

    fn asymptote(&self, x: f64) -> f64 {
        if x >= 0.0 {
            x / self.moments.lambda + self.moments.smith_constant()
        } else {
            0.0
        }
    }

    /// sum_{n <= N} P^n f(x) with P f(x) = int f(x + y) drho(y).
    pub fn green(&self, f: &TestFunction, x: f64) -> Result<RenewalResult> {
        if matches!(f, TestFunction::Zero) {
            return Ok(RenewalResult::exact(0.0, Method::Series));
        }
        let (lo, hi) = f.effective_support(SUPPORT_EPS);
        let (a, b) = (lo - x, hi - x);
        self.check_window(b)?;
        let (value, discretization) = match &self.ladder {
            Ladder::Atomic { locs, weights, .. } => {
                let i = locs.partition_point(|&l| l < a);
                let j = locs.partition_point(|&l| l <= b);
                let (mut v, mut abs) = (0.0, 0.0);
                for k in i..j {
                    let t = weights[k] * f.value(x + locs[k]);
                    v += t;
                    abs += t.abs();
                }
                (v, 4.0 * f64::EPSILON * abs * ((j - i) as f64).sqrt().max(1.0))
            }
            Ladder::Density { first, rest, coarse } => {
                let g = |y: f64| f.value(x + y);
                let v = f.value(x) + first.integrate_range(g, a, b, 8);
                let fine = rest.as_ref().map_or(0.0, |r| r.integrate_range(g, a, b, 8));
                let rough = coarse.as_ref().map_or(0.0, |r| r.integrate_range(g, a, b, 8));
                (v + fine, (fine - rough).abs() / 8.0)
            }
        };
        Ok(RenewalResult {
            value,
            truncation_bound: f.sup_norm() * self.tail_bound(),
            terms_used: self.terms,
            method: Method::Series,
            discretization,
        })
    }
}

fn atomic_ladder(atoms: &[Atom], y_max: f64, terms: usize, tol: f64) -> (Ladder, f64) {
    let drop = (-atoms[0].location).max(0.0);
    let prune = 1e-6 * tol / ((terms + 1) as f64).powi(2);
    let mut level = vec![Atom { location: 0.0, weight: 1.0 }];
    let mut all = level.clone();
    let mut pruned = 0.0;
    let slack = 1e-12 * (1.0 + y_max.abs());
    for n in 1..=terms {
        let cap = y_max + (terms - n) as f64 * drop + slack;
        let mut next = Vec::with_capacity(level.len() * atoms.len());
        for x in &level {
            for y in atoms {
                let loc = x.location + y.location;
                if loc <= cap {
                    next.push(Atom { location: loc, weight: x.weight * y.weight });
                }
            }
        }
        let mut next = merge_atoms(next);
        // a pruned atom at level n carries at most its weight into each later level
        next.retain(|a| {
            if a.weight < prune {
                pruned += a.weight * (terms - n + 1) as f64;
                false
            } else {
                true
            }
        });
        all.extend_from_slice(&next);
        level = next;
        if level.is_empty() {
            break;
        }
    }
    let all = merge_atoms(all);
    let locs: Vec<f64> = all.iter().map(|a| a.location).collect();
    let weights: Vec<f64> = all.iter().map(|a| a.weight).collect();
    let mut acc = 0.0;
    let cum = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    (Ladder::Atomic { locs, weights, cum }, pruned)
}

// Sum of the powers rho^{*n}, 2 <= n <= N, on the lattice h Z; each power is
// truncated to the part that can still reach (-inf, y_max] within the
// remaining steps.
fn density_ladder(g: &GridDensity, h: f64, y_max: f64, terms: usize) -> Result<Option<GridDensity>> {
    let (es, ev) = g.extended_samples(1e-18);
    let j_lo = (es / h).floor() as i64;
    let j_top = ((es + h * (ev.len() - 1) as f64) / h).ceil() as i64;
    let drop = (-(j_lo as f64) * h).max(0.0);
    let top = y_max + 4.0 * h;
    let top_idx = (top / h).ceil() as i64;
    let cap_b = j_top.min(((top + terms as f64 * drop) / h).ceil() as i64 + 1);
    if terms < 2 || cap_b < j_lo + 3 {
        return Ok(None);
    }
    let b: Vec<f64> = (j_lo..=cap_b).map(|j| g.value(j as f64 * h)).collect();

    let acc_lo = (2 * j_lo).min(terms as i64 * j_lo);
    if top_idx < acc_lo + 4 {
        return Ok(None);
    }
    let mut acc = vec![0.0; (top_idx - acc_lo + 1) as usize];
    let mut cur = b.clone();
    let mut cur_lo = j_lo;
    for n in 2..=terms {
        let mut next = gregory_convolve(&cur, &b, h);
        let mut next_lo = cur_lo + j_lo;
        let keep_hi = ((top + (terms - n) as f64 * drop) / h).ceil() as i64;
        let len = (keep_hi - next_lo + 1).clamp(0, next.len() as i64) as usize;
        next.truncate(len);
        let vmax = next.iter().cloned().fold(0.0, f64::max);
        // keep the last negligible sample as the new left endpoint
        let skip = next.iter().take_while(|v| v.abs() < 1e-30 * vmax).count().saturating_sub(1);
        let skip = skip.min(next.len().saturating_sub(4));
        next.drain(..skip);
        next_lo += skip as i64;
        for (k, v) in next.iter().enumerate() {
            let idx = next_lo + k as i64;
            if idx > top_idx {
                break;
            }
            if idx >= acc_lo {
                acc[(idx - acc_lo) as usize] += v;
            }
        }
        if next.len() < 4 || vmax == 0.0 {
            break;
        }
        cur = next;
        cur_lo = next_lo;
    }
    let acc: Vec<f64> = acc.into_iter().map(|v| v.max(0.0)).collect();
    Ok(Some(GridDensity::new(acc_lo as f64 * h, h, acc, None, None)?))
}

pub fn renewal_h(mu: &ProbabilityMeasure, x: f64, tol: f64) -> Result<RenewalResult> {
    RenewalEngine::new(mu, x, tol)?.h(x)
}

pub fn renewal_r(mu: &ProbabilityMeasure, x: f64, tol: f64) -> Result<f64> {
    RenewalEngine::new(mu, x, tol)?.r(x)
}

/// Window needed by the Green series of f at the points xs.
pub fn green_window(f: &TestFunction, xs: &[f64]) -> f64 {
    let hi = f.effective_support(SUPPORT_EPS).1;
    let xmin = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - xmin
}

/// Engine for G*f at all of xs with absolute truncation error below tol.
pub fn green_engine(mu: &ProbabilityMeasure, f: &TestFunction, xs: &[f64], tol: f64) -> Result<RenewalEngine> {
    let sup = f.sup_norm().max(1e-300);
    RenewalEngine::new(mu, green_window(f, xs).max(0.0), tol / sup)
}

pub fn green_series(mu: &ProbabilityMeasure, f: &TestFunction, x: f64, tol: f64) -> Result<RenewalResult> {
    if matches!(f, TestFunction::Zero) {
        return Ok(RenewalResult::exact(0.0, Method::Series));
    }
    green_engine(mu, f, &[x], tol)?.green(f, x)
}

pub use crate::testfn::t_lambda_apply;

/// (1/2pi) int f_hat(xi) e^{i xi x} / (1 - rho_hat(s - i xi)) dxi, the damped
/// Green operator sum_n int e^{-sy} f(x + y) drho^{*n}(y).
pub fn green_fourier(mu: &ProbabilityMeasure, f: &TestFunction, x: f64, s: f64, tol: f64) -> Result<RenewalResult> {
    if matches!(f, TestFunction::Zero) {
        return Ok(RenewalResult::exact(0.0, Method::Fourier));
    }
    if !(s > 0.0 && s < mu.eta()) || !(tol > 0.0) {
        return Err(LabError::InvalidArgument(format!("need 0 < s < eta and tol > 0, got s = {s}")));
    }
    let rs = mu.transform_unchecked(Complex64::new(s, 0.0), 0).re;
    if !(rs < 1.0) {
        return Err(LabError::InvalidArgument(format!("rho_hat({s}) = {rs} is not below 1")));
    }
    // |rho_hat(s - i xi)| <= rho_hat(s), so 1 - rho_hat(s) bounds the denominator below
    let lower = 1.0 - rs;
    let xi_max = f.fourier_cutoff(1e-2 * tol * lower).max(1.0);
    let denom = |xi: f64| Complex64::new(1.0, 0.0) - mu.transform_unchecked(Complex64::new(s, -xi), 0);

    let dxi = 0.1 / mu.spread().max(1e-3);
    let n = ((xi_max / dxi).ceil() as usize).max(16);
    let dxi = xi_max / n as f64;
    let d: Vec<f64> = (0..=n).into_par_iter().map(|k| denom(k as f64 * dxi).norm()).collect();
    let mut points = vec![0.0, xi_max];
    let mut minima = vec![(0.0, d[0])];
    for k in 1..n {
        if d[k] <= d[k - 1] && d[k] <= d[k + 1] && d[k] < 0.5 {
            let (xm, vm) = golden_min(|t| denom(t).norm(), (k - 1) as f64 * dxi, (k + 1) as f64 * dxi, 1e-12);
            minima.push((xm, vm));
        }
    }
    for &(xm, vm) in &minima {
        if vm < DENOM_FLOOR {
            return Err(LabError::DenominatorTooSmall { xi: xm, value: vm });
        }
        let slope = mu.transform_unchecked(Complex64::new(s, -xm), 1).norm().max(1e-3);
        let w = vm / slope;
        points.push(xm);
        for j in 0..8 {
            let off = w * 4f64.powi(j);
            if off > dxi {
                break;
            }
            points.push(xm + off);
            if xm - off > 0.0 {
                points.push(xm - off);
            }
        }
    }
    points.retain(|p| *p >= 0.0 && *p <= xi_max);
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let integrand = |xi: f64| {
        let v = f.fourier(Complex64::new(xi, 0.0)) * Complex64::new(0.0, xi * x).exp() / denom(xi);
        v.re
    };
    let res = integrate_points(integrand, &points, QuadOptions::new(0.1 * tol, 1e-12).with_max_intervals(200_000));
    if !res.converged && res.error > tol {
        return Err(LabError::QuadratureFailure(format!("Fourier inversion error estimate {:.3e}", res.error)));
    }
    Ok(RenewalResult {
        value: res.value / PI,
        truncation_bound: 0.0,
        terms_used: 0,
        method: Method::Fourier,
        discretization: res.error / PI,
    })
}

/// Radius below which the symbol uses the cancellation-free form.
pub fn switch_radius(m: &MomentData) -> f64 {
    0.05 * m.lambda.abs() / m.lambda2
}

/// Q(z) = int y^2 psi(-zy) drho, psi(w) = (e^w - 1 - w)/w^2, from the Taylor
/// coefficients sum_k (-z)^k m_{k+2} / (k+2)!.
fn q_taylor(mu: &ProbabilityMeasure, z: Complex64) -> Option<Complex64> {
    let m = mu.raw_moments();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut zk = Complex64::new(1.0, 0.0);
    let mut fact = 2.0;
    for k in 0..m.len() - 2 {
        let term = zk * (m[k + 2] / fact);
        sum += term;
        if k >= 2 && term.norm() < 1e-17 * sum.norm() {
            return Some(sum);
        }
        zk *= -z;
        fact *= (k + 3) as f64;
    }
    None
}

fn psi(w: Complex64) -> Complex64 {
    if w.norm() < 0.1 {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(0.5, 0.0);
        for j in 0..14 {
            sum += term;
            term = term * w / (j + 3) as f64;
        }
        sum
    } else {
        (w.exp() - 1.0 - w) / (w * w)
    }
}

fn q_direct(mu: &ProbabilityMeasure, z: Complex64) -> Complex64 {
    match mu.atoms() {
        Some(atoms) => atoms.iter().map(|a| psi(-z * a.location) * (a.weight * a.location * a.location)).sum(),
        None => mu.grid().expect("density").integrate(|y: f64| psi(-z * y) * (y * y), 8),
    }
}

/// U near 0 as Q / (lambda (lambda - z Q)), finite at z = 0.
pub fn symbol_u_near(mu: &ProbabilityMeasure, z: Complex64) -> Result<Complex64> {
    let m = mu.moments();
    if m.lambda == 0.0 {
        return Err(LabError::NoDrift);
    }
    let q = q_taylor(mu, z).unwrap_or_else(|| q_direct(mu, z));
    let den = m.lambda - z * q;
    if den.norm() < POLE_TOL {
        return Err(LabError::NearPole(z));
    }
    Ok(q / (m.lambda * den))
}

/// U = 1/(1 - rho_hat(z)) - 1/(lambda z), evaluated literally.
pub fn symbol_u_direct(mu: &ProbabilityMeasure, z: Complex64) -> Result<Complex64> {
    let m = mu.moments();
    if m.lambda == 0.0 {
        return Err(LabError::NoDrift);
    }
    let d = Complex64::new(1.0, 0.0) - mu.eval_transform(z, 0)?;
    if d.norm() < POLE_TOL {
        return Err(LabError::NearPole(z));
    }
    Ok(1.0 / d - 1.0 / (m.lambda * z))
}

/// The regularized symbol U(z) = 1/(1 - rho_hat(z)) - 1/(lambda z).
pub fn symbol_u(mu: &ProbabilityMeasure, z: Complex64) -> Result<Complex64> {
    if z.re.abs() >= mu.eta() {
        return Err(LabError::StripViolation { re_abs: z.re.abs(), eta: mu.eta() });
    }
    if z.norm() <= switch_radius(&mu.moments()) {
        symbol_u_near(mu, z)
    } else {
        symbol_u_direct(mu, z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StieltjesCheck {
    pub x: f64,
    pub series: f64,
    pub tail_term: f64,
    pub jump_term: f64,
    pub remainder_term: f64,
    pub residual: f64,
}

/// Compare G*f(x) with (1/lambda) int_x^inf f + c f(x) - int f'(x+s) R(s) ds.
pub fn stieltjes_with(engine: &RenewalEngine, f: &TestFunction, x: f64, tol: f64) -> Result<StieltjesCheck> {
    if matches!(f, TestFunction::Zero) {
        return Ok(StieltjesCheck { x, series: 0.0, tail_term: 0.0, jump_term: 0.0, remainder_term: 0.0, residual: 0.0 });
    }
    let m = engine.moments();
    let series = engine.green(f, x)?.value;
    let tail_term = f.tail_integral(x) / m.lambda;
    let jump_term = m.smith_constant() * f.value(x);
    let (lo, hi) = f.effective_support(SUPPORT_EPS);
    let (a, b) = (lo - x, hi - x);
    let mut pts = vec![a, b];
    if a < 0.0 && b > 0.0 {
        pts.push(0.0);
    }
    pts.extend(engine.jumps_in(a, b));
    pts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    pts.dedup_by(|p, q| (*p - *q).abs() < 1e-14);
    let integrand = |s: f64| f.derivative(x + s) * engine.r(s).unwrap_or(f64::NAN);
    let res = integrate_points(integrand, &pts, QuadOptions::new(0.01 * tol, 1e-12).with_max_intervals(100_000));
    if !res.value.is_finite() {
        return Err(LabError::QuadratureFailure("remainder integral is not finite".into()));
    }
    let remainder_term = -res.value;
    let residual = (series - (tail_term + jump_term + remainder_term)).abs();
    Ok(StieltjesCheck { x, series, tail_term, jump_term, remainder_term, residual })
}

pub fn stieltjes_residual(mu: &ProbabilityMeasure, f: &TestFunction, x: f64, tol: f64) -> Result<StieltjesCheck> {
    if matches!(f, TestFunction::Zero) {
        return stieltjes_with(&RenewalEngine::new(mu, 0.0, tol)?, f, x, tol);
    }
    stieltjes_with(&green_engine(mu, f, &[x], tol)?, f, x, tol)
}

/// max over xs of |int g(x - y) drho(y) - g(x)| for g = Re e^{zx}, evaluated
/// by direct summation or quadrature. Requires |1 - rho_hat(z)| <= tol.
pub fn harmonic_check(mu: &ProbabilityMeasure, z: Complex64, xs: &[f64], tol: f64) -> Result<f64> {
    let gap = (Complex64::new(1.0, 0.0) - mu.eval_transform(z, 0)?).norm();
    if gap > tol {
        return Err(LabError::NotAZero(gap));
    }
    let g = |t: f64| (z * t).exp().re;
    let dev = xs
        .par_iter()
        .map(|&x| {
            // e^{z(x-y)} = e^{zx} e^{-zy}: the rounding of the phase Im(z) x is then
            // shared by both sides instead of growing with |x|
            let ex = (z * x).exp();
            let pg = match mu.atoms() {
                Some(atoms) => atoms.iter().map(|a| (ex * (-z * a.location).exp()).re * a.weight).sum::<f64>(),
                None => mu.integrate(|y| g(x - y)),
            };
            (pg - ex.re).abs()
        })
        .reduce(|| 0.0, f64::max);
    Ok(dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GOLDEN;

    #[test]
    fn chernoff_examples() {
        let e = ProbabilityMeasure::exponential(1.0);
        assert!(chernoff_tail(&e, 5.0, 40).unwrap() < 1e-8);
        let d = ProbabilityMeasure::dirac(1.0);
        assert!(chernoff_tail(&d, 3.0, 10).unwrap() >= 0.0);
        let two = ProbabilityMeasure::two_atom(1.0, 2.0, 0.5).unwrap();
        assert!(chernoff_tail(&two, 10.0, 60).unwrap() < 1e-6);
        let neg = ProbabilityMeasure::dirac(-1.0);
        assert_eq!(chernoff_tail(&neg, 0.0, 3), Err(LabError::NoDrift));
    }

    #[test]
    fn staircase_and_exponential() {
        let d = ProbabilityMeasure::dirac(1.0);
        assert_eq!(renewal_h(&d, 2.5, 1e-10).unwrap().value, 3.0);
        assert_eq!(renewal_h(&d, -0.5, 1e-10).unwrap().value, 0.0);
        let e = ProbabilityMeasure::exponential(1.0);
        let h = renewal_h(&e, 3.0, 1e-9).unwrap();
        assert!((h.value - 4.0).abs() < 1e-6, "{h:?}");
        assert_eq!(renewal_r(&e, -1.0, 1e-9).unwrap(), 0.0);
        let eng = RenewalEngine::new(&e, 20.0, 1e-9).unwrap();
        for k in 0..=40 {
            let x = k as f64 * 0.5;
            assert!(eng.r(x).unwrap().abs() < 1e-6, "{x} {}", eng.r(x).unwrap());
        }
    }

    #[test]
    fn atomic_series_matches_direct_sum() {
        let d = ProbabilityMeasure::dirac(1.0);
        let f = TestFunction::bump(0.5, 0.4);
        assert_eq!(green_series(&d, &f, 0.0, 1e-10).unwrap().value, 0.0);
        let f = TestFunction::bump(0.3, 0.5);
        let direct: f64 = (0..10).map(|n| f.value(-2.0 + n as f64)).sum();
        let g = green_series(&d, &f, -2.0, 1e-10).unwrap().value;
        assert!((g - direct).abs() < 1e-14);
    }

    #[test]
    fn symbol_exponential() {
        let e = ProbabilityMeasure::exponential(1.0);
        for z in [Complex64::new(0.0, 0.0), Complex64::new(1e-4, 0.0), Complex64::new(0.3, 2.0), Complex64::new(-0.5, -7.0)] {
            let u = symbol_u(&e, z).unwrap();
            assert!((u - 1.0).norm() < 1e-9, "{z} {u}");
        }
        let m = ProbabilityMeasure::two_atom(1.0, GOLDEN, 0.5).unwrap();
        let r = switch_radius(&m.moments());
        for k in 0..16 {
            let z = Complex64::from_polar(r, k as f64 * PI / 8.0);
            let a = symbol_u_near(&m, z).unwrap();
            let b = symbol_u_direct(&m, z).unwrap();
            assert!((a - b).norm() < 1e-8, "{z} {a} {b}");
        }
    }

    #[test]
    fn harmonic_lattice() {
        let d = ProbabilityMeasure::dirac(1.0);
        let xs: Vec<f64> = (0..50).map(|k| -3.0 + 0.13 * k as f64).collect();
        let dev = harmonic_check(&d, Complex64::new(0.0, 2.0 * PI), &xs, 1e-9).unwrap();
        assert!(dev < 1e-12);
        assert!(matches!(harmonic_check(&d, Complex64::new(0.0, 1.0), &xs, 1e-9), Err(LabError::NotAZero(_))));
    }

    #[test]
    fn fourier_agrees_with_series() {
        let e = ProbabilityMeasure::exponential(1.0);
        let f = TestFunction::gaussian(0.0, 1.0);
        for x in [-5.0, 0.0, 5.0] {
            let a = green_series(&e, &f, x, 1e-10).unwrap().value;
            let b = green_fourier(&e, &f, x, 1e-3, 1e-8).unwrap().value;
            assert!((a - b).abs() < 5e-3);
        }
        let two = ProbabilityMeasure::two_atom(1.0, 2.0, 0.5).unwrap();
        let f = TestFunction::bump(1.5, 0.6);
        let a = green_series(&two, &f, 1.0, 1e-10).unwrap().value;
        let b = green_fourier(&two, &f, 1.0, 1e-2, 1e-5).unwrap().value;
        assert!(a > 0.05);
        assert!((a - b).abs() < 1e-2, "{a} {b}");
    }

    #[test]
    fn stieltjes_identity() {
        let e = ProbabilityMeasure::exponential(1.0);
        let phi = ProbabilityMeasure::two_atom(1.0, GOLDEN, 0.5).unwrap();
        for mu in [&e, &phi] {
            for f in [TestFunction::gaussian(0.0, 1.0), TestFunction::bump(0.0, 1.0)] {
                for x in [-8.0, -3.0, 0.0, 3.0, 8.0] {
                    let c = stieltjes_residual(mu, &f, x, 1e-9).unwrap();
                    assert!(c.residual < 1e-4, "{c:?}");
                }
            }
        }
    }
}
