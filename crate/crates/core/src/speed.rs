//! Empirical decay of D(x) = (G - T_lambda)*f(x): profiles, model fits and the
//! comparison with the diophantine class of the measure.

use crate::diophantine::{fit_exponent, ExponentFit};
use crate::error::{LabError, Result};
use crate::measure::ProbabilityMeasure;
use crate::quad::{integrate, integrate_points, QuadOptions};
use crate::renewal::{green_engine, t_lambda_apply};
use crate::testfn::TestFunction;
use crate::weights::{laplace_quadrature, theta_omega, ThetaSampler, WeightFn};
use crate::zeros::lattice_period;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub x: f64,
    pub d: f64,
    /// Error bound on d (truncation plus discretization).
    pub bound: f64,
}

/// D(x) = G*f(x) - T_lambda f(x) at each x, sharing one Green engine.
pub fn decay_profile(mu: &ProbabilityMeasure, f: &TestFunction, xs: &[f64], tol: f64) -> Result<Vec<ProfilePoint>> {
    if xs.is_empty() {
        return Ok(vec![]);
    }
    let lambda = mu.moments().lambda;
    mu.moments().require_drift()?;
    if matches!(f, TestFunction::Zero) {
        return Ok(xs.iter().map(|&x| ProfilePoint { x, d: 0.0, bound: 0.0 }).collect());
    }
    let engine = green_engine(mu, f, xs, tol)?;
    xs.par_iter()
        .map(|&x| {
            let g = engine.green(f, x)?;
            let t = t_lambda_apply(f, x, lambda)?;
            Ok(ProfilePoint { x, d: g.value - t, bound: g.error_bound() + 4.0 * f64::EPSILON * t.abs() })
        })
        .collect()
}

/// Symmetric grid of n geometric points per tail on x_min <= |x| <= x_max.
pub fn tail_grid(x_min: f64, x_max: f64, n: usize) -> Vec<f64> {
    let mut xs = Vec::with_capacity(2 * n);
    for i in 0..n {
        let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let r = x_min * (x_max / x_min).powf(t);
        xs.push(-r);
        xs.push(r);
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs
}

pub fn profile_to_csv(profile: &[ProfilePoint]) -> String {
    let mut s = String::from("x,d,bound\n");
    for p in profile {
        s.push_str(&format!("{:.17e},{:.17e},{:.6e}\n", p.x, p.d, p.bound));
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DecayModel {
    /// |D| ~ C |x|^{-power}
    Polynomial { power: f64 },
    /// |D| ~ C e^{-rate |x|}
    Exponential { rate: f64 },
    /// |D| ~ C e^{-a |x|^alpha}
    Stretched { a: f64, alpha: f64 },
    Inconclusive,
}

impl DecayModel {
    pub fn name(&self) -> &'static str {
        match self {
            DecayModel::Polynomial { .. } => "polynomial",
            DecayModel::Exponential { .. } => "exponential",
            DecayModel::Stretched { .. } => "stretched",
            DecayModel::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub model: DecayModel,
    pub aicc: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub r_squared: f64,
    /// (x, |D(x)|) used in the fit.
    pub samples: Vec<(f64, f64)>,
    /// -1 or +1: the tail reported (the slower-decaying one).
    pub tail: i8,
    pub candidates: Vec<Candidate>,
    pub noise_floor: f64,
    /// Every (x, |D(x)|) of the reported tail, before the floor and cutoff.
    pub tail_profile: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub cutoff: f64,
    pub min_samples: usize,
    /// Values below floor_factor times the error bound are dropped.
    pub floor_factor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { cutoff: 1.0, min_samples: 8, floor_factor: 10.0 }
    }
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rss = (syy - slope * sxy).max(0.0);
    let r2 = if syy > 0.0 { (1.0 - rss / syy).clamp(0.0, 1.0) } else { 1.0 };
    (slope, my - slope * mx, rss, r2)
}

fn aicc(rss: f64, n: usize, k: usize) -> f64 {
    let nf = n as f64;
    let kf = k as f64;
    // floor keeps exact synthetic fits finite
    nf * (rss / nf).max(1e-30).ln() + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0)
}

struct TailFit {
    model: DecayModel,
    r_squared: f64,
    candidates: Vec<Candidate>,
    samples: Vec<(f64, f64)>,
    raw: Vec<(f64, f64)>,
}

// Upper monotone envelope: max |D| over |x'| >= |x|.
fn envelope(raw: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = raw.to_vec();
    let mut run: f64 = 0.0;
    for p in out.iter_mut().rev() {
        run = run.max(p.1);
        p.1 = run;
    }
    out
}

fn fit_envelope(samples: &[(f64, f64)]) -> (DecayModel, f64, Vec<Candidate>) {
    let n = samples.len();
    let r: Vec<f64> = samples.iter().map(|s| s.0.abs()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let lr: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let mut cands = Vec::new();
    let (s, _, rss, r2) = least_squares(&lr, &y);
    cands.push(Candidate { model: DecayModel::Polynomial { power: -s }, aicc: aicc(rss, n, 2), r_squared: r2 });
    let (s, _, rss, r2) = least_squares(&r, &y);
    cands.push(Candidate { model: DecayModel::Exponential { rate: -s }, aicc: aicc(rss, n, 2), r_squared: r2 });
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for j in 1..=19 {
        let alpha = 0.05 * j as f64;
        let ra: Vec<f64> = r.iter().map(|v| v.powf(alpha)).collect();
        let (s, _, rss, r2) = least_squares(&ra, &y);
        if best.is_none_or(|b| rss < b.1) {
            best = Some((alpha, rss, r2, -s));
        }
    }
    let (alpha, rss, r2, a) = best.unwrap();
    cands.push(Candidate { model: DecayModel::Stretched { a, alpha }, aicc: aicc(rss, n, 3), r_squared: r2 });
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&i, &j| cands[i].aicc.partial_cmp(&cands[j].aicc).unwrap());
    let top = cands[order[0]];
    if cands[order[1]].aicc - top.aicc < 2.0 {
        (DecayModel::Inconclusive, top.r_squared, cands)
    } else {
        (top.model, top.r_squared, cands)
    }
}

fn fit_tail(points: &[&ProfilePoint], opts: &FitOptions, floor: f64) -> Result<TailFit> {
    let mut raw: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.d.abs())).collect();
    raw.sort_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).unwrap());
    let env = envelope(&raw);
    let samples: Vec<(f64, f64)> = env.into_iter().filter(|s| s.0.abs() >= opts.cutoff && s.1 > floor).collect();
    if samples.len() < opts.min_samples {
        return Err(LabError::InsufficientSamples(format!(
            "{} samples above the noise floor {floor:.3e}, need {}",
            samples.len(),
            opts.min_samples
        )));
    }
    let (model, r_squared, candidates) = fit_envelope(&samples);
    Ok(TailFit { model, r_squared, candidates, samples, raw })
}

pub fn fit_decay(profile: &[ProfilePoint]) -> Result<DecayFit> {
    fit_decay_with(profile, &FitOptions::default())
}

/// Fits each tail on |x| >= cutoff and reports the slower-decaying one.
pub fn fit_decay_with(profile: &[ProfilePoint], opts: &FitOptions) -> Result<DecayFit> {
    let floor = opts.floor_factor * profile.iter().map(|p| p.bound).fold(0.0, f64::max);
    if profile.iter().all(|p| p.d.abs() <= floor) {
        return Err(LabError::NoiseFloor(floor));
    }
    let neg: Vec<&ProfilePoint> = profile.iter().filter(|p| p.x < 0.0).collect();
    let pos: Vec<&ProfilePoint> = profile.iter().filter(|p| p.x > 0.0).collect();
    let fits: Vec<(i8, Result<TailFit>)> = vec![(-1, fit_tail(&neg, opts, floor)), (1, fit_tail(&pos, opts, floor))];
    let mut ok: Vec<(i8, TailFit)> = Vec::new();
    let mut last_err = None;
    for (t, r) in fits {
        match r {
            Ok(f) => ok.push((t, f)),
            // a tail with nonzero samples all under the floor decays faster than the other
            Err(e) => last_err = Some(e),
        }
    }
    let (tail, chosen) = match ok.len() {
        0 => return Err(last_err.unwrap()),
        1 => ok.pop().unwrap(),
        _ => {
            let reach = ok.iter().map(|(_, f)| f.samples.last().unwrap().0.abs()).fold(f64::INFINITY, f64::min);
            let level = |f: &TailFit| {
                f.samples.iter().filter(|s| s.0.abs() >= reach * (1.0 - 1e-12)).map(|s| s.1).fold(0.0, f64::max)
            };
            let b = ok.pop().unwrap();
            let a = ok.pop().unwrap();
            if level(&a.1) >= level(&b.1) {
                a
            } else {
                b
            }
        }
    };
    Ok(DecayFit {
        model: chosen.model,
        r_squared: chosen.r_squared,
        samples: chosen.samples,
        tail,
        candidates: chosen.candidates,
        noise_floor: floor,
        tail_profile: chosen.raw,
    })
}

/// Non-decay test: the envelope over the outer third of the tail stays at
/// least a tenth of the envelope over the inner third.
pub fn non_decaying(tail_profile: &[(f64, f64)]) -> bool {
    let n = tail_profile.len();
    if n < 3 {
        return false;
    }
    let mut v = tail_profile.to_vec();
    v.sort_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).unwrap());
    let third = n / 3;
    let inner = v[..third].iter().map(|p| p.1).fold(0.0, f64::max);
    let outer = v[n - third..].iter().map(|p| p.1).fold(0.0, f64::max);
    outer >= 0.1 * inner && inner > 0.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum DiophantineClass {
    /// `zero_period` is the spacing of the zeros on the imaginary axis.
    Lattice { zero_period: Option<f64> },
    ZeroWeak,
    Weak { l: f64 },
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    pub prediction: String,
    pub observed: String,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub model: DecayModel,
    pub r2: f64,
    pub tail: i8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedReport {
    pub measure: String,
    pub diophantine_class: DiophantineClass,
    pub exponent_diagnostic: String,
    /// None when no fit was attempted (lattice measures).
    pub fit: Option<FitSummary>,
    pub consistency: Vec<Consistency>,
}

impl SpeedReport {
    /// Consistent when every prediction is.
    pub fn verdict(&self) -> Verdict {
        if self.consistency.iter().any(|c| c.verdict == Verdict::Inconsistent) {
            Verdict::Inconsistent
        } else if self.consistency.iter().all(|c| c.verdict == Verdict::Consistent) {
            Verdict::Consistent
        } else {
            Verdict::Inconclusive
        }
    }
}

/// Diophantine class from the record minima of |1 - rho_hat(ib)| on [2, B].
pub fn diophantine_class(mu: &ProbabilityMeasure, big_b: f64) -> (DiophantineClass, String) {
    match fit_exponent(mu, big_b) {
        Ok(fit) => (class_from_fit(mu, &fit, big_b), fit.diagnostic),
        Err(e) => (DiophantineClass::Undetermined, e.to_string()),
    }
}

pub fn class_from_fit(mu: &ProbabilityMeasure, fit: &ExponentFit, big_b: f64) -> DiophantineClass {
    let period = lattice_period(mu, big_b);
    if fit.diagnostic.starts_with("exact zeros") || period.is_some() {
        return DiophantineClass::Lattice { zero_period: period };
    }
    match fit.l_star {
        Some(l) if l == 0.0 => DiophantineClass::ZeroWeak,
        Some(l) => DiophantineClass::Weak { l },
        None => DiophantineClass::Undetermined,
    }
}

/// Confronts the diophantine class with the observed decay: 0-weak measures
/// should decay exponentially, l-weak ones (l > 0) faster than any power but
/// not exponentially, lattice ones not at all.
pub fn classify_speed(mu: &ProbabilityMeasure, big_b: f64, fit: &DecayFit, label: &str) -> SpeedReport {
    let (class, diag) = diophantine_class(mu, big_b);
    build_report(label, class, diag, Some(fit), &fit.tail_profile)
}

fn build_report(
    label: &str,
    class: DiophantineClass,
    diag: String,
    fit: Option<&DecayFit>,
    tail_profile: &[(f64, f64)],
) -> SpeedReport {
    let stays = non_decaying(tail_profile);
    let observed = fit.map_or("no fit".to_string(), |f| format!("{} fit, r2 = {:.4}", f.model.name(), f.r_squared));
    let model = fit.map_or(DecayModel::Inconclusive, |f| f.model);
    let mut consistency = Vec::new();
    let decay_entry = |expect_decay: bool| Consistency {
        prediction: if expect_decay { "D(x) -> 0" } else { "no convergence to 0" }.to_string(),
        observed: if stays { "outer envelope >= 0.1 inner envelope" } else { "envelope decays" }.to_string(),
        verdict: if stays != expect_decay { Verdict::Consistent } else { Verdict::Inconsistent },
    };
    match class {
        DiophantineClass::Lattice { .. } => consistency.push(decay_entry(false)),
        DiophantineClass::ZeroWeak => {
            consistency.push(decay_entry(true));
            let verdict = match model {
                DecayModel::Exponential { .. } => Verdict::Consistent,
                DecayModel::Inconclusive => Verdict::Inconclusive,
                _ => Verdict::Inconsistent,
            };
            consistency.push(Consistency { prediction: "exponential decay".into(), observed, verdict });
        }
        DiophantineClass::Weak { .. } => {
            consistency.push(decay_entry(true));
            let verdict = match model {
                DecayModel::Stretched { alpha, .. } if alpha > 0.0 && alpha < 1.0 => Verdict::Consistent,
                DecayModel::Inconclusive => Verdict::Inconclusive,
                _ => Verdict::Inconsistent,
            };
            consistency.push(Consistency {
                prediction: "super-polynomial, sub-exponential decay".into(),
                observed,
                verdict,
            });
        }
        DiophantineClass::Undetermined => consistency.push(Consistency {
            prediction: "none (class undetermined)".into(),
            observed,
            verdict: Verdict::Inconclusive,
        }),
    }
    SpeedReport {
        measure: label.to_string(),
        diophantine_class: class,
        exponent_diagnostic: diag,
        fit: fit.map(|f| FitSummary { model: f.model, r2: f.r_squared, tail: f.tail }),
        consistency,
    }
}

/// Profile, fit and classification in one pass. Lattice measures get the
/// non-decay test only; no decay model is fitted for them.
pub fn speed_analysis(
    mu: &ProbabilityMeasure,
    f: &TestFunction,
    xs: &[f64],
    tol: f64,
    big_b: f64,
    label: &str,
) -> Result<(Vec<ProfilePoint>, Option<DecayFit>, SpeedReport)> {
    let (class, diag) = diophantine_class(mu, big_b);
    let profile = decay_profile(mu, f, xs, tol)?;
    if let DiophantineClass::Lattice { .. } = class {
        // the tail with the larger outer envelope
        let tail = |sign: f64| -> Vec<(f64, f64)> {
            let mut t: Vec<(f64, f64)> = profile.iter().filter(|p| p.x * sign > 0.0).map(|p| (p.x, p.d.abs())).collect();
            t.sort_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).unwrap());
            t
        };
        let outer = |t: &[(f64, f64)]| t[t.len() - t.len() / 3..].iter().map(|p| p.1).fold(0.0, f64::max);
        let (neg, pos) = (tail(-1.0), tail(1.0));
        let chosen = if pos.is_empty() || (!neg.is_empty() && outer(&neg) >= outer(&pos)) { neg } else { pos };
        let report = build_report(label, class, diag, None, &chosen);
        return Ok((profile, None, report));
    }
    let fit = fit_decay(&profile)?;
    let report = build_report(label, class, diag, Some(&fit), &fit.tail_profile);
    Ok((profile, Some(fit), report))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlTheta {
    pub lhs: f64,
    pub rhs: f64,
    /// int_0^x_max omega |sum u_a e^{ax}|^2
    pub quadrature_term: f64,
    /// Theta_omega(delta - eta) used on the right.
    pub theta: f64,
    /// Bound on the cross terms beyond x_max.
    pub remainder: f64,
    pub holds: bool,
}

// int_x^inf omega(t) e^{-sigma t} dt for sigma > 0.
fn weighted_tail(omega: &WeightFn, sigma: f64, x: f64) -> Result<f64> {
    let panel = 2.0 / sigma;
    let f = |t: f64| (omega.ln_value(t) - sigma * t).exp();
    let mut total = 0.0;
    let mut a = x;
    loop {
        let b = a + panel;
        total += integrate(f, a, b, QuadOptions::new(1e-300, 1e-12)).value;
        let g = omega.log_derivative(b);
        if g < 0.5 * sigma {
            let tail = f(b) / (sigma - g);
            if tail <= 1e-12 * total || tail < 1e-300 {
                return Ok(total + tail);
            }
        }
        if b > crate::weights::MAX_CUTOFF {
            return Err(LabError::SlowDecay(format!("omega e^(-{sigma} x) beyond {b:.3e}")));
        }
        a = b;
    }
}

/// Checks sum |u_a|^2 int e^{2 Re(a) x} omega <= int omega |sum u_a e^{ax}|^2
/// + Theta_omega(delta - eta) (sum |u_a|)^2 on [0, x_max], the cross terms
/// beyond x_max being added to the right as a remainder.
pub fn control_theta_check(
    a: &[Complex64],
    u: &[Complex64],
    omega: &WeightFn,
    eta: f64,
    delta: f64,
    x_max: f64,
    sampler: &ThetaSampler,
) -> Result<ControlTheta> {
    if a.len() != u.len() || a.is_empty() {
        return Err(LabError::InvalidArgument("A and u must be nonempty and of equal length".into()));
    }
    if !(delta > eta) {
        return Err(LabError::SeparationViolated { delta, eta });
    }
    if let Some(p) = a.iter().find(|p| !(p.re > -eta && p.re < 0.0)) {
        return Err(LabError::InvalidArgument(format!("Re a = {} outside (-{eta}, 0)", p.re)));
    }
    for i in 0..a.len() {
        for j in 0..i {
            if (a[i] - a[j]).norm() < delta * (1.0 - 1e-12) {
                return Err(LabError::InvalidArgument(format!("|a_{i} - a_{j}| < delta = {delta}")));
            }
        }
    }
    if !(x_max > 0.0) {
        return Err(LabError::InvalidArgument("x_max must be positive".into()));
    }
    omega.validate()?;
    let opts = QuadOptions::new(1e-300, 1e-12).with_max_intervals(100_000);

    let mut lhs = 0.0;
    for (ai, ui) in a.iter().zip(u) {
        let w = ui.norm_sqr();
        if w > 0.0 {
            lhs += w * integrate(|x| (omega.ln_value(x) + 2.0 * ai.re * x).exp(), 0.0, x_max, opts).value;
        }
    }

    // panels of one wavelength of the fastest cross oscillation
    let mut freq: f64 = 0.0;
    for ai in a {
        for aj in a {
            freq = freq.max((ai.im - aj.im).abs());
        }
    }
    let n_panels = if freq > 0.0 { ((x_max * freq / (2.0 * PI)).ceil() as usize).max(1) } else { 1 };
    let points: Vec<f64> = (0..=n_panels).map(|i| x_max * i as f64 / n_panels as f64).collect();
    let quadrature_term = integrate_points(
        |x: f64| {
            let s: Complex64 = a.iter().zip(u).map(|(ai, ui)| ui * (ai * x).exp()).sum();
            omega.value(x) * s.norm_sqr()
        },
        &points,
        opts,
    )
    .value;

    // the cross-term points -(a_i + conj a_j) lie in U_{delta - eta}
    let mut theta = theta_omega(omega, delta - eta, sampler)?.sup_value;
    let mut remainder = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            if i == j {
                continue;
            }
            let z = -(a[i] + a[j].conj());
            theta = theta.max(laplace_quadrature(omega, z, 1e-10)?.value.norm());
            remainder += u[i].norm() * u[j].norm() * weighted_tail(omega, z.re, x_max)?;
        }
    }
    let l1: f64 = u.iter().map(|v| v.norm()).sum();
    let rhs = quadrature_term + theta * l1 * l1 + remainder;
    Ok(ControlTheta { lhs, rhs, quadrature_term, theta, remainder, holds: lhs <= rhs * (1.0 + 1e-6) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(g: impl Fn(f64) -> f64) -> Vec<ProfilePoint> {
        tail_grid(1.0, 30.0, 40).into_iter().map(|x| ProfilePoint { x, d: g(x.abs()), bound: 0.0 }).collect()
    }

    #[test]
    fn synthetic_models() {
        let fit = fit_decay(&synthetic(|r| (-2.0 * r).exp())).unwrap();
        match fit.model {
            DecayModel::Exponential { rate } => assert!((rate - 2.0).abs() < 1e-9),
            m => panic!("{m:?}"),
        }
        assert!(fit.r_squared > 0.999);
        let fit = fit_decay(&synthetic(|r| r.powi(-3))).unwrap();
        match fit.model {
            DecayModel::Polynomial { power } => assert!((power - 3.0).abs() < 1e-9),
            m => panic!("{m:?}"),
        }
        let fit = fit_decay(&synthetic(|r| (-1.5 * r.sqrt()).exp())).unwrap();
        assert!(matches!(fit.model, DecayModel::Stretched { alpha, .. } if (alpha - 0.5).abs() < 1e-9));
    }

    #[test]
    fn exponential_measure_profile() {
        let mu = ProbabilityMeasure::exponential(1.0);
        let f = TestFunction::gaussian(0.0, 1.0);
        let xs: Vec<f64> = (2..=10).flat_map(|k| [-(k as f64), k as f64]).collect();
        let prof = decay_profile(&mu, &f, &xs, 1e-12).unwrap();
        for p in &prof {
            assert!((p.d - f.value(p.x)).abs() < 1e-6, "{p:?}");
            if p.x.abs() >= 10.0 {
                assert!(p.d.abs() < 1e-6);
            }
        }
        let zero = decay_profile(&mu, &TestFunction::Zero, &xs, 1e-12).unwrap();
        assert!(zero.iter().all(|p| p.d == 0.0));
    }

    #[test]
    fn control_theta_examples() {
        let s = ThetaSampler::default();
        let one = WeightFn::Constant;
        let a = [Complex64::new(-0.1, 10.0), Complex64::new(-0.1, 20.0)];
        let u = [Complex64::new(1.0, 0.0); 2];
        let r = control_theta_check(&a, &u, &one, 0.2, 10.0, 200.0, &s).unwrap();
        // closed forms: int_0^X e^{(a_i + conj a_j) x} = (e^{wX} - 1) / w
        let x = 200.0;
        let mut exact = Complex64::new(0.0, 0.0);
        for ai in &a {
            for aj in &a {
                let w = ai + aj.conj();
                exact += ((w * x).exp() - 1.0) / w;
            }
        }
        assert!((r.quadrature_term - exact.re).abs() < 1e-9 * exact.re);
        let diag = 2.0 * (1.0 - (-0.2f64 * x).exp()) / 0.2;
        assert!((r.lhs - diag).abs() < 1e-10 * diag);
        assert!(r.holds);
        let single = control_theta_check(&a[..1], &u[..1], &one, 0.2, 10.0, 200.0, &s).unwrap();
        assert!((single.lhs - single.quadrature_term).abs() < 1e-10 * single.lhs);
        assert!(matches!(
            control_theta_check(&a, &u, &one, 0.2, 0.1, 200.0, &s),
            Err(LabError::SeparationViolated { .. })
        ));
    }
}
