//! Measure description files (JSON or TOML). Exactly one of `atoms`,
//! `density` or `preset` must be given; `kind`, when present, must agree.
//!
//! ```toml
//! kind = "atomic"
//! eta = 8.0
//! atoms = [{ location = 1.0, weight = 0.5 }, { location = 1.618, weight = 0.5 }]
//! ```
//!
//! ```toml
//! kind = "density"
//! eta = 0.9
//! [density]
//! start = 0.0
//! step = 0.00390625
//! values = [1.0, 0.996, ...]
//! right_tail_rate = 1.0
//! ```
//!
//! Presets: `exponential {rate}`, `normal {mean, sd}`, `uniform {a, b}`,
//! `two_atom {x, y, p}`, `golden` (1/2 delta_1 + 1/2 delta_phi), `dirac {at}`.

use super::{GridDensity, ProbabilityMeasure, Representation};
use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub location: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_tail_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_tail_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PresetSpec {
    Exponential { rate: f64 },
    Normal { mean: f64, sd: f64 },
    Uniform { a: f64, b: f64 },
    TwoAtom { x: f64, y: f64, p: f64 },
    Golden,
    Dirac { at: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<PresetSpec>,
}

impl MeasureSpec {
    /// All schema violations, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let given: Vec<&str> = [
            self.atoms.as_ref().map(|_| "atomic"),
            self.density.as_ref().map(|_| "density"),
            self.preset.as_ref().map(|_| "preset"),
        ]
        .into_iter()
        .flatten()
        .collect();
        match given.len() {
            0 => v.push("measure needs one of atoms, density or preset".to_string()),
            1 => {
                if let Some(k) = &self.kind {
                    if k != given[0] {
                        v.push(format!("kind = {k:?} but a {} block is given", given[0]));
                    }
                }
            }
            _ => v.push(format!("measure has more than one kind: {}", given.join(", "))),
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) {
                v.push(format!("eta = {eta} must be positive"));
            }
        }
        v
    }

    pub fn build(&self) -> Result<ProbabilityMeasure> {
        let errs = self.violations();
        if !errs.is_empty() {
            return Err(LabError::InvalidMeasure(errs.join("; ")));
        }
        if let Some(atoms) = &self.atoms {
            let a: Vec<(f64, f64)> = atoms.iter().map(|a| (a.location, a.weight)).collect();
            return ProbabilityMeasure::atomic_with_eta(&a, self.eta.unwrap_or(super::ATOMIC_ETA));
        }
        if let Some(d) = &self.density {
            let grid = GridDensity::new(d.start, d.step, d.values.clone(), d.left_tail_rate, d.right_tail_rate)?;
            let eta = match self.eta {
                Some(e) => e,
                None => {
                    let r = grid.min_tail_rate();
                    if r.is_finite() {
                        0.9 * r
                    } else {
                        super::ATOMIC_ETA
                    }
                }
            };
            return ProbabilityMeasure::density(grid, eta);
        }
        let m = match self.preset.as_ref().expect("checked above") {
            PresetSpec::Exponential { rate } => {
                if !(*rate > 0.0) {
                    return Err(LabError::InvalidMeasure("rate must be positive".into()));
                }
                ProbabilityMeasure::exponential(*rate)
            }
            PresetSpec::Normal { mean, sd } => ProbabilityMeasure::normal(*mean, *sd)?,
            PresetSpec::Uniform { a, b } => ProbabilityMeasure::uniform(*a, *b)?,
            PresetSpec::TwoAtom { x, y, p } => ProbabilityMeasure::two_atom(*x, *y, *p)?,
            PresetSpec::Golden => ProbabilityMeasure::two_atom(1.0, crate::GOLDEN, 0.5)?,
            PresetSpec::Dirac { at } => ProbabilityMeasure::dirac(*at),
        };
        Ok(m)
    }

    /// Explicit description of a measure (presets are materialized).
    pub fn from_measure(mu: &ProbabilityMeasure) -> MeasureSpec {
        match mu.representation() {
            Representation::Atomic(a) => MeasureSpec {
                kind: Some("atomic".into()),
                eta: Some(mu.eta()),
                atoms: Some(a.iter().map(|x| AtomSpec { location: x.location, weight: x.weight }).collect()),
                ..Default::default()
            },
            Representation::Density(g) => MeasureSpec {
                kind: Some("density".into()),
                eta: Some(mu.eta()),
                density: Some(DensitySpec {
                    start: g.start(),
                    step: g.step(),
                    values: g.values().to_vec(),
                    left_tail_rate: g.left_rate(),
                    right_tail_rate: g.right_rate(),
                }),
                ..Default::default()
            },
        }
    }

    pub fn from_json(text: &str) -> Result<MeasureSpec> {
        serde_json::from_str(text).map_err(|e| LabError::InvalidMeasure(format!("line {}: {e}", e.line())))
    }

    pub fn from_toml(text: &str) -> Result<MeasureSpec> {
        toml::from_str(text).map_err(|e| LabError::InvalidMeasure(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

impl ProbabilityMeasure {
    /// Load a measure file; `.toml` files are parsed as TOML, anything else as JSON.
    pub fn load(path: &std::path::Path) -> Result<ProbabilityMeasure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::InvalidMeasure(format!("{}: {e}", path.display())))?;
        let spec = if path.extension().is_some_and(|e| e == "toml") {
            MeasureSpec::from_toml(&text)?
        } else {
            MeasureSpec::from_json(&text)?
        };
        spec.build()
    }

    pub fn to_json(&self) -> String {
        MeasureSpec::from_measure(self).to_json()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_deterministic() {
        let mu = ProbabilityMeasure::two_atom(1.0, crate::GOLDEN, 0.5).unwrap();
        let s = mu.to_json();
        let back = MeasureSpec::from_json(&s).unwrap().build().unwrap();
        assert!(back.to_json() == s);
        let e = ProbabilityMeasure::exponential_with(1.0, 16);
        let s = e.to_json();
        let back = MeasureSpec::from_json(&s).unwrap().build().unwrap();
        assert!(back.to_json() == s);
    }

    #[test]
    fn exactly_one_kind() {
        let spec = MeasureSpec {
            atoms: Some(vec![AtomSpec { location: 0.0, weight: 1.0 }]),
            preset: Some(PresetSpec::Golden),
            ..Default::default()
        };
        assert_eq!(spec.violations().len(), 1);
        assert!(MeasureSpec::default().build().is_err());
    }

    #[test]
    fn toml_preset() {
        let spec = MeasureSpec::from_toml("preset = { name = \"exponential\", rate = 2.0 }").unwrap();
        let m = spec.build().unwrap();
        assert!((m.moments().lambda - 0.5).abs() < 1e-10);
        assert!(MeasureSpec::from_toml("bogus = 1").is_err());
    }
}
