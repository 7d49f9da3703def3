//! Synthetic platform and separate trials, shared-control resampling and a seeded Monte Carlo
//! harness.
//!
//! Scenarios are JSON documents (schema version [`SCENARIO_VERSION`]):
//!
//! ```json
//! {
//!   "version": 1,
//!   "name": "example",
//!   "design": {"k": 2, "q": 1, "tau": 12, "window_sets": {"1": [1], "2": [1]},
//!              "calendar_bounds": [[0, 3]]},
//!   "coarsening": {"z1": "all", "z2": "all"},
//!   "enrollment_per_arm": [500],
//!   "enrollment_mode": "fixed",
//!   "covariate_law": [{"z1": 0.5, "z2": 0.5}],
//!   "outcome": {
//!     "type": "survival",
//!     "control_hazard": {"z1": [{"start": 0, "end": null, "attack_rate": 0.12, "horizon": 6}],
//!                        "z2": [{"start": 0, "end": null, "hazard": 0.05}]},
//!     "ve": {"1": 0.5, "2": 0.3},
//!     "loss_to_followup_max": 120,
//!     "admin_censor": 18
//!   }
//! }
//! ```
//!
//! A binary outcome (`{"type": "binary", "control_risk": {...}, "relative_risks": {...}}`)
//! realizes each participant as an event at time 0 or censoring at `tau`.

mod analysis;
mod generate;
mod monte_carlo;
mod presets;
mod resample;
mod sampling;
mod truth;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Arm, CoarseningMap, TrialDesign};
use crate::error::SimulationError;

pub use analysis::{analyze_replication, Analysis, AnalysisSpec, NISpec};
pub use generate::{
    simulate_platform, simulate_separate, simulate_separate_arms, SimulationReport, Simulated,
};
pub use monte_carlo::{
    monte_carlo, replication_seed, run_replications, DEGENERATE, MCSummary, MetricSummary, ProportionSummary,
    ReplicationMetrics, RNG_ALGORITHM,
};
pub use presets::{preset, PRESET_NAMES};
pub use resample::{resample_shared_controls, ResampleOutcome, ResampleTarget, WindowType};
pub use sampling::{
    attack_rate_to_hazard, cumulative_hazard, invert_cumulative_hazard,
    sample_piecewise_exponential, Segment,
};
pub use truth::{true_relative_risk, true_survival, TruthKind};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnrollmentMode {
    /// Exactly the expected count per arm in every window.
    #[default]
    Fixed,
    /// Window totals fixed; arms assigned by equal-probability randomization.
    Multinomial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rate {
    Hazard { hazard: f64 },
    AttackRate { attack_rate: f64, horizon: f64 },
}

impl Rate {
    pub fn hazard(&self) -> f64 {
        match *self {
            Rate::Hazard { hazard } => hazard,
            Rate::AttackRate {
                attack_rate,
                horizon,
            } => attack_rate_to_hazard(attack_rate, horizon),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HazardSegment {
    pub start: f64,
    pub end: Option<f64>,
    #[serde(flatten)]
    pub rate: Rate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outcome {
    Survival {
        /// Control-arm hazard in calendar time, per covariate level.
        control_hazard: BTreeMap<String, Vec<HazardSegment>>,
        /// Hazard-ratio vaccine efficacy per active arm.
        ve: BTreeMap<String, f64>,
        /// Loss to follow-up is uniform on `[0, max]` months after enrollment.
        loss_to_followup_max: Option<f64>,
        /// Calendar time of administrative censoring.
        admin_censor: f64,
    },
    Binary {
        /// Event probability on control, per covariate level.
        control_risk: BTreeMap<String, f64>,
        relative_risks: BTreeMap<String, f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub design: TrialDesign,
    pub coarsening: CoarseningMap,
    /// Expected enrollment per arm (each active arm and control) in each window.
    pub enrollment_per_arm: Vec<u32>,
    #[serde(default)]
    pub enrollment_mode: EnrollmentMode,
    /// `P(Z = z | W = w)` for each window.
    pub covariate_law: Vec<BTreeMap<String, f64>>,
    pub outcome: Outcome,
}

/// Scenario with labels resolved to indices and hazards to numbers.
#[derive(Clone, Debug)]
pub(crate) struct Compiled {
    /// Per window: cumulative covariate probabilities over z indices.
    pub z_law: Vec<Vec<f64>>,
    pub kind: CompiledOutcome,
}

#[derive(Clone, Debug)]
pub(crate) enum CompiledOutcome {
    Survival {
        /// Per z: control segments.
        segments: Vec<Vec<Segment>>,
        /// Per arm (index = arm label, 0 = control): hazard multiplier `1 - VE`.
        multiplier: Vec<f64>,
        loss_max: Option<f64>,
        admin: f64,
    },
    Binary {
        /// Per z.
        control_risk: Vec<f64>,
        /// Per arm (0 = control).
        rr: Vec<f64>,
    },
}

fn invalid(msg: impl Into<String>) -> SimulationError {
    SimulationError::InvalidScenario(msg.into())
}

fn per_arm(map: &BTreeMap<String, f64>, k: u32, what: &str) -> Result<Vec<f64>, SimulationError> {
    let mut out = vec![f64::NAN; k as usize + 1];
    for (key, &value) in map {
        let arm: Arm = key
            .trim()
            .parse()
            .map_err(|_| invalid(format!("{what} key '{key}' is not an arm label")))?;
        if arm == 0 || arm > k {
            return Err(invalid(format!("{what} given for unknown arm {arm}")));
        }
        out[arm as usize] = value;
    }
    if let Some(a) = (1..=k as usize).find(|&a| out[a].is_nan()) {
        return Err(invalid(format!("{what} missing for arm {a}")));
    }
    Ok(out)
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimulationError> {
        let s: Scenario = serde_json::from_str(text)
            .map_err(|e| invalid(format!("scenario JSON: {e}")))?;
        s.compile()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Enrollment per arm multiplied by `factor` and rounded.
    pub fn scaled(&self, factor: f64) -> Scenario {
        let mut s = self.clone();
        s.enrollment_per_arm = self
            .enrollment_per_arm
            .iter()
            .map(|&n| (n as f64 * factor).round() as u32)
            .collect();
        s
    }

    /// Expected platform size.
    pub fn platform_size(&self) -> u64 {
        (1..=self.design.q)
            .map(|w| {
                let arms = self.design.arms_in_window(w).len() as u64;
                if arms == 0 {
                    0
                } else {
                    self.enrollment_per_arm[w as usize - 1] as u64 * (arms + 1)
                }
            })
            .sum()
    }

    /// Expected size of the separate trial for `arm`.
    pub fn separate_size(&self, arm: Arm) -> u64 {
        self.design
            .windows(arm)
            .iter()
            .map(|w| 2 * self.enrollment_per_arm[w as usize - 1] as u64)
            .sum()
    }

    pub(crate) fn compile(&self) -> Result<Compiled, SimulationError> {
        if self.version != SCENARIO_VERSION {
            return Err(invalid(format!(
                "unsupported scenario version {} (expected {SCENARIO_VERSION})",
                self.version
            )));
        }
        let d = &self.design;
        let q = d.q as usize;
        if self.enrollment_per_arm.len() != q {
            return Err(invalid(format!("enrollment_per_arm needs {q} entries")));
        }
        if self.covariate_law.len() != q {
            return Err(invalid(format!("covariate_law needs {q} entries")));
        }
        let map = &self.coarsening;
        let mut z_law = Vec::with_capacity(q);
        for (w, law) in self.covariate_law.iter().enumerate() {
            let mut probs = vec![0.0; map.z_count()];
            for (label, &p) in law {
                let z = map
                    .z_index(label)
                    .ok_or_else(|| invalid(format!("window {}: unknown covariate '{label}'", w + 1)))?;
                if !(p >= 0.0 && p.is_finite()) {
                    return Err(invalid(format!("window {}: negative probability", w + 1)));
                }
                probs[z] = p;
            }
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(invalid(format!(
                    "window {}: covariate probabilities sum to {total}",
                    w + 1
                )));
            }
            let mut acc = 0.0;
            z_law.push(
                probs
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect(),
            );
        }
        let kind = match &self.outcome {
            Outcome::Survival {
                control_hazard,
                ve,
                loss_to_followup_max,
                admin_censor,
            } => {
                if d.calendar_bounds.is_empty() {
                    return Err(invalid("survival scenarios need calendar_bounds"));
                }
                let mut segments = vec![Vec::new(); map.z_count()];
                for (z, label) in map.z_labels().iter().enumerate() {
                    let segs = control_hazard
                        .get(label)
                        .ok_or_else(|| invalid(format!("no control hazard for '{label}'")))?;
                    let mut prev_end = f64::NEG_INFINITY;
                    for s in segs {
                        let h = s.rate.hazard();
                        if !(h >= 0.0 && h.is_finite()) {
                            return Err(invalid(format!("hazard for '{label}' must be >= 0")));
                        }
                        if s.start < prev_end || s.end.is_some_and(|e| e <= s.start) {
                            return Err(invalid(format!(
                                "hazard segments for '{label}' must be sorted and non-overlapping"
                            )));
                        }
                        prev_end = s.end.unwrap_or(f64::INFINITY);
                        segments[z].push(Segment { start: s.start, end: s.end, hazard: h });
                    }
                }
                let mut multiplier = per_arm(ve, d.k, "ve")?;
                for m in multiplier.iter_mut().skip(1) {
                    if !(0.0..1.0).contains(m) {
                        return Err(invalid("ve must lie in [0, 1)"));
                    }
                    *m = 1.0 - *m;
                }
                multiplier[0] = 1.0;
                if let Some(l) = loss_to_followup_max {
                    if !(*l > 0.0) {
                        return Err(invalid("loss_to_followup_max must be positive"));
                    }
                }
                if !admin_censor.is_finite() {
                    return Err(invalid("admin_censor must be finite"));
                }
                CompiledOutcome::Survival {
                    segments,
                    multiplier,
                    loss_max: *loss_to_followup_max,
                    admin: *admin_censor,
                }
            }
            Outcome::Binary {
                control_risk,
                relative_risks,
            } => {
                let mut risk = vec![0.0; map.z_count()];
                for (z, label) in map.z_labels().iter().enumerate() {
                    risk[z] = *control_risk
                        .get(label)
                        .ok_or_else(|| invalid(format!("no control risk for '{label}'")))?;
                }
                let mut rr = per_arm(relative_risks, d.k, "relative_risks")?;
                rr[0] = 1.0;
                for (z, &p) in risk.iter().enumerate() {
                    for &r in &rr {
                        if !(0.0..=1.0).contains(&(p * r)) || r < 0.0 {
                            return Err(invalid(format!(
                                "event probability outside [0, 1] for '{}'",
                                map.z_label(z)
                            )));
                        }
                    }
                }
                CompiledOutcome::Binary { control_risk: risk, rr }
            }
        };
        Ok(Compiled { z_law, kind })
    }
}
