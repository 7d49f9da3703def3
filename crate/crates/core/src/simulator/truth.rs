use super::sampling::{cumulative_hazard, Segment};
use super::{CompiledOutcome, Scenario};
use crate::data::{Arm, WindowSet, CONTROL};
use crate::error::SimulationError;

/// Which population the covariate weights `P(z | w_a, v)` come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruthKind {
    /// The platform trial: every enrolled participant in `w_a`.
    Platform,
    /// The separate trial of the arm: its own 1:1 population over `w_a`.
    Separate,
}

const SIMPSON_PANELS: usize = 64;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let h = (b - a) / (2 * SIMPSON_PANELS) as f64;
    let mut acc = f(a) + f(b);
    for i in 1..2 * SIMPSON_PANELS {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Mean of `exp(-m H(e, e + t))` for `e` uniform on `[lo, hi]`. The integrand is smooth
/// between the points where `e` or `e + t` crosses a segment boundary.
fn mean_survival(segments: &[Segment], multiplier: f64, lo: f64, hi: f64, t: f64) -> f64 {
    let mut cuts = vec![lo, hi];
    for s in segments {
        for b in std::iter::once(s.start).chain(s.end) {
            for c in [b, b - t] {
                if c > lo && c < hi {
                    cuts.push(c);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let f = |e: f64| (-multiplier * cumulative_hazard(segments, e, e + t)).exp();
    cuts.windows(2).map(|p| simpson(f, p[0], p[1])).sum::<f64>() / (hi - lo)
}

fn arm_index(scenario: &Scenario, arm: Arm) -> Result<usize, SimulationError> {
    if arm > scenario.design.k {
        return Err(SimulationError::InvalidScenario(format!("unknown arm {arm}")));
    }
    Ok(arm as usize)
}

/// `S(t | a, W in windows, Z = z)` implied by the scenario, mixing windows by their expected
/// enrollment on the arm.
pub fn true_survival(
    scenario: &Scenario,
    arm: Arm,
    windows: WindowSet,
    z: usize,
    t: f64,
) -> Result<f64, SimulationError> {
    let compiled = scenario.compile()?;
    let a = arm_index(scenario, arm)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for w in windows.iter().filter(|&w| w <= scenario.design.q) {
        let i = w as usize - 1;
        let pz = compiled.z_law[i][z] - if z == 0 { 0.0 } else { compiled.z_law[i][z - 1] };
        let weight = scenario.enrollment_per_arm[i] as f64 * pz;
        if weight <= 0.0 {
            continue;
        }
        let s = match &compiled.kind {
            CompiledOutcome::Survival { segments, multiplier, .. } => {
                let (lo, hi) = scenario.design.calendar_bounds[i];
                mean_survival(&segments[z], multiplier[a], lo, hi, t)
            }
            CompiledOutcome::Binary { control_risk, rr } => {
                if t >= 0.0 {
                    1.0 - control_risk[z] * rr[a]
                } else {
                    1.0
                }
            }
        };
        num += weight * s;
        den += weight;
    }
    if den <= 0.0 {
        return Err(SimulationError::InvalidScenario(format!(
            "no expected enrollment for arm {arm} at covariate level {z} in the given windows"
        )));
    }
    Ok(num / den)
}

/// Population value of the covariate-adjusted relative risk `gamma(t | a, v)`.
pub fn true_relative_risk(
    scenario: &Scenario,
    arm: Arm,
    v: &str,
    t: f64,
    kind: TruthKind,
) -> Result<f64, SimulationError> {
    if arm == CONTROL {
        return Err(SimulationError::InvalidScenario("relative risk needs an active arm".into()));
    }
    let compiled = scenario.compile()?;
    arm_index(scenario, arm)?;
    let design = &scenario.design;
    let map = &scenario.coarsening;
    let v = map.require_v(v)?;
    let windows = design.windows(arm);
    let members = map.members(v);
    let mut pz = vec![0.0; members.len()];
    for w in windows.iter() {
        let i = w as usize - 1;
        let per_arm = scenario.enrollment_per_arm[i] as f64;
        let people = match kind {
            TruthKind::Platform => per_arm * (design.arms_in_window(w).len() + 1) as f64,
            TruthKind::Separate => 2.0 * per_arm,
        };
        for (j, &z) in members.iter().enumerate() {
            let p = compiled.z_law[i][z] - if z == 0 { 0.0 } else { compiled.z_law[i][z - 1] };
            pz[j] += people * p;
        }
    }
    let total: f64 = pz.iter().sum();
    if total <= 0.0 {
        return Err(SimulationError::InvalidScenario(format!(
            "stratum '{}' has no expected enrollment in the windows of arm {arm}",
            map.v_label(v)
        )));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (j, &z) in members.iter().enumerate() {
        if pz[j] <= 0.0 {
            continue;
        }
        let p = pz[j] / total;
        num += p * (1.0 - true_survival(scenario, arm, windows, z, t)?);
        den += p * (1.0 - true_survival(scenario, CONTROL, windows, z, t)?);
    }
    if den <= 0.0 {
        return Err(SimulationError::InvalidScenario(format!(
            "no control risk by t={t} for arm {arm}"
        )));
    }
    Ok(num / den)
}
