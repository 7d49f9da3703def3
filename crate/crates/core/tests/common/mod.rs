#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use platform_trial::data::Arm;
use platform_trial::influence::{JointRREstimate, PluginContext};
use platform_trial::noninferiority::{run_test, NITestConfig, TestMethod};
use platform_trial::simulator::{simulate_platform, Scenario};
use platform_trial::SurvivalMethod;

/// Three arms, three windows; arms 1 and 3 share window 2 with arm 2.
pub const OVERLAPPING: &str = r#"{
  "version": 1, "name": "overlapping",
  "design": {"k": 3, "q": 3, "tau": 6,
             "window_sets": {"1": [1, 2], "2": [2, 3], "3": [1, 2, 3]},
             "calendar_bounds": [[0, 2], [2, 4], [4, 6]]},
  "coarsening": {"lo": "all", "hi": "all"},
  "enrollment_per_arm": [120, 120, 120],
  "covariate_law": [{"lo": 0.6, "hi": 0.4}, {"lo": 0.5, "hi": 0.5}, {"lo": 0.3, "hi": 0.7}],
  "outcome": {"type": "survival",
              "control_hazard": {"lo": [{"start": 0, "end": null, "hazard": 0.06}],
                                 "hi": [{"start": 0, "end": null, "hazard": 0.12}]},
              "ve": {"1": 0.5, "2": 0.3, "3": 0.6},
              "loss_to_followup_max": 60, "admin_censor": 14}
}"#;

/// Two arms that never share a window.
pub const DISJOINT: &str = r#"{
  "version": 1, "name": "disjoint",
  "design": {"k": 2, "q": 2, "tau": 6,
             "window_sets": {"1": [1], "2": [2]},
             "calendar_bounds": [[0, 3], [3, 6]]},
  "coarsening": {"lo": "all", "hi": "all"},
  "enrollment_per_arm": [150, 150],
  "covariate_law": [{"lo": 0.5, "hi": 0.5}, {"lo": 0.4, "hi": 0.6}],
  "outcome": {"type": "survival",
              "control_hazard": {"lo": [{"start": 0, "end": null, "hazard": 0.08}],
                                 "hi": [{"start": 0, "end": null, "hazard": 0.15}]},
              "ve": {"1": 0.5, "2": 0.2},
              "loss_to_followup_max": 60, "admin_censor": 14}
}"#;

/// Two arms randomized together in every window, one covariate level.
pub const CONCURRENT: &str = r#"{
  "version": 1, "name": "concurrent",
  "design": {"k": 2, "q": 1, "tau": 6, "window_sets": {"1": [1], "2": [1]},
             "calendar_bounds": [[0, 4]]},
  "coarsening": {"0": "all"},
  "enrollment_per_arm": [200],
  "covariate_law": [{"0": 1.0}],
  "outcome": {"type": "survival",
              "control_hazard": {"0": [{"start": 0, "end": null, "hazard": 0.1}]},
              "ve": {"1": 0.4, "2": 0.6},
              "loss_to_followup_max": 60, "admin_censor": 14}
}"#;

pub fn scenario(json: &str) -> Scenario {
    Scenario::from_json(json).expect("test scenario parses")
}

/// Joint platform estimate on one simulated dataset; `None` when the draw leaves a relative
/// risk undefined.
pub fn platform_estimate(sc: &Scenario, seed: u64, t: f64) -> Option<JointRREstimate> {
    let ds = simulate_platform(sc, seed).ok()?.dataset;
    let arms: Vec<Arm> = ds.design.active_arms().collect();
    let v = ds.coarsening.v_index("all")?;
    PluginContext::with_method(&ds, &arms, v, t, SurvivalMethod::NelsonAalen)
        .ok()?
        .joint_estimate(&ds)
        .ok()
}

pub fn check_symmetric_psd(est: &JointRREstimate) -> Result<(), String> {
    let k = est.arms.len();
    let m = DMatrix::from_fn(k, k, |i, j| est.sigma_gamma[i][j]);
    for i in 0..k {
        for j in 0..k {
            if m[(i, j)] != m[(j, i)] {
                return Err(format!("asymmetric at ({i},{j}): {} vs {}", m[(i, j)], m[(j, i)]));
            }
        }
    }
    let scale = m.trace().abs().max(1e-300);
    let min = SymmetricEigen::new(m).eigenvalues.min();
    if min < -1e-10 * scale {
        return Err(format!("negative eigenvalue {min}"));
    }
    Ok(())
}

/// Intersection test rejects exactly when every marginal does.
pub fn check_conjunction(est: &JointRREstimate, cfg: &NITestConfig) -> Result<(), String> {
    let out = run_test(est, cfg, TestMethod::Intersection).map_err(|e| e.to_string())?;
    let all = out.marginals.iter().all(|m| m.reject);
    if out.reject != all {
        return Err(format!("reject {} but marginals {:?}", out.reject, out.marginals));
    }
    Ok(())
}

/// Rejection is nondecreasing in the margin for both tests.
pub fn check_epsilon_monotone(est: &JointRREstimate, ref_arm: Arm, delta: f64) -> Result<(), String> {
    for method in [TestMethod::Intersection, TestMethod::Lrt] {
        let mut prev = false;
        let mut prev_stat = f64::NEG_INFINITY;
        for i in 1..=40 {
            let eps = i as f64 * 0.05;
            let cfg = NITestConfig::new(ref_arm, delta, eps, 0.025).map_err(|e| e.to_string())?;
            let out = run_test(est, &cfg, method).map_err(|e| e.to_string())?;
            if prev && !out.reject {
                return Err(format!("{method:?} stops rejecting at epsilon {eps}"));
            }
            if let Some(l) = &out.lrt {
                if l.statistic < prev_stat - 1e-8 * prev_stat.abs().max(1.0) {
                    return Err(format!("LRT statistic drops at epsilon {eps}"));
                }
                prev_stat = l.statistic;
            }
            prev = out.reject;
        }
    }
    Ok(())
}

/// Sorted distinct values of `xs`.
pub fn distinct(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Nelson-Aalen and Kaplan-Meier at `t` by direct counting over `(x, delta)` pairs.
pub fn brute_force_curves(obs: &[(f64, bool)], t: f64) -> (f64, f64) {
    let times = distinct(obs.iter().filter(|o| o.1).map(|o| o.0).collect());
    let mut chf = 0.0;
    let mut surv = 1.0;
    for s in times.into_iter().filter(|&s| s <= t) {
        let d = obs.iter().filter(|o| o.1 && o.0 == s).count() as f64;
        let y = obs.iter().filter(|o| o.0 >= s).count() as f64;
        chf += d / y;
        surv *= 1.0 - d / y;
    }
    (chf, surv)
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
