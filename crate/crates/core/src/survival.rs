//! Stratified counting processes, Nelson-Aalen and Kaplan-Meier curves, empirical covariate
//! laws and the plug-in relative risk.
//!
//! A stratum is a triple (arm, window set, covariate level). All counting-process quantities
//! are normalised by the total dataset size `n`, so `Y_n(0)` of a stratum is its share of the
//! sample. Tied event and censoring times are resolved with events first: a record censored
//! at `s` is still at risk at `s`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{Arm, Dataset, DatasetKind, WindowSet, CONTROL};
use crate::error::EstimationError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurvivalMethod {
    /// `S = exp(-Lambda)` with the Nelson-Aalen cumulative hazard.
    NelsonAalen,
    /// Product-limit estimator.
    KaplanMeier,
}

impl SurvivalMethod {
    /// Default for a dataset kind: Nelson-Aalen on platform data, Kaplan-Meier on
    /// separate-trial data.
    pub fn default_for(kind: DatasetKind) -> Self {
        match kind {
            DatasetKind::Platform => SurvivalMethod::NelsonAalen,
            DatasetKind::Separate(_) => SurvivalMethod::KaplanMeier,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StratumKey {
    pub arm: Arm,
    pub windows: WindowSet,
    pub z: usize,
}

/// Value of a curve at a time point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepValue {
    pub chf: f64,
    pub survival: f64,
    /// `t` lies beyond the last observed time of the stratum.
    pub truncated: bool,
}

/// Right-continuous step functions for one stratum, stored at its distinct event times.
#[derive(Clone, Debug)]
pub struct StratifiedCurve {
    key: StratumKey,
    method: SurvivalMethod,
    n_total: usize,
    times: Vec<f64>,
    events: Vec<usize>,
    at_risk: Vec<usize>,
    chf: Vec<f64>,
    survival: Vec<f64>,
    /// Prefix sums of `d / Y^2` (Nelson-Aalen influence compensator).
    cum_na_var: Vec<f64>,
    /// Prefix sums of `d / (Y (Y - d))` (Kaplan-Meier influence compensator).
    cum_km_var: Vec<f64>,
    sorted_x: Vec<f64>,
}

impl StratifiedCurve {
    /// Builds the curve from the `(x, delta)` pairs of the stratum members.
    pub fn from_observations(
        key: StratumKey,
        method: SurvivalMethod,
        mut obs: Vec<(f64, bool)>,
        n_total: usize,
    ) -> Self {
        obs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let size = obs.len();
        let mut curve = StratifiedCurve {
            key,
            method,
            n_total,
            times: Vec::new(),
            events: Vec::new(),
            at_risk: Vec::new(),
            chf: Vec::new(),
            survival: Vec::new(),
            cum_na_var: Vec::new(),
            cum_km_var: Vec::new(),
            sorted_x: obs.iter().map(|o| o.0).collect(),
        };
        let (mut lambda, mut km, mut na_var, mut km_var) = (0.0, 1.0, 0.0, 0.0);
        let mut i = 0;
        while i < size {
            let x = obs[i].0;
            let mut j = i;
            let mut d = 0;
            while j < size && obs[j].0 == x {
                d += usize::from(obs[j].1);
                j += 1;
            }
            if d > 0 {
                let y = size - i;
                let (df, yf) = (d as f64, y as f64);
                lambda += df / yf;
                km *= 1.0 - df / yf;
                na_var += df / (yf * yf);
                km_var += if d == y {
                    f64::INFINITY
                } else {
                    df / (yf * (yf - df))
                };
                curve.times.push(x);
                curve.events.push(d);
                curve.at_risk.push(y);
                curve.chf.push(lambda);
                curve.survival.push(match method {
                    SurvivalMethod::NelsonAalen => (-lambda).exp(),
                    SurvivalMethod::KaplanMeier => km,
                });
                curve.cum_na_var.push(na_var);
                curve.cum_km_var.push(km_var);
            }
            i = j;
        }
        curve
    }

    pub fn key(&self) -> StratumKey {
        self.key
    }

    pub fn method(&self) -> SurvivalMethod {
        self.method
    }

    /// Number of records in the stratum.
    pub fn size(&self) -> usize {
        self.sorted_x.len()
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn event_times(&self) -> &[f64] {
        &self.times
    }

    pub fn chf_values(&self) -> &[f64] {
        &self.chf
    }

    pub fn survival_values(&self) -> &[f64] {
        &self.survival
    }

    /// Increments `dN_n / Y_n` at each event time.
    pub fn jumps(&self) -> Vec<f64> {
        self.events
            .iter()
            .zip(&self.at_risk)
            .map(|(&d, &y)| d as f64 / y as f64)
            .collect()
    }

    /// Largest observed time in the stratum (0 if empty).
    pub fn last_time(&self) -> f64 {
        self.sorted_x.last().copied().unwrap_or(0.0)
    }

    /// Number of event times `<= t`.
    #[inline]
    fn index(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    pub fn eval(&self, t: f64) -> StepValue {
        let i = self.index(t);
        let truncated = t > self.last_time();
        if i == 0 {
            StepValue {
                chf: 0.0,
                survival: 1.0,
                truncated,
            }
        } else {
            StepValue {
                chf: self.chf[i - 1],
                survival: self.survival[i - 1],
                truncated,
            }
        }
    }

    pub fn chf_at(&self, t: f64) -> f64 {
        self.eval(t).chf
    }

    pub fn survival_at(&self, t: f64) -> f64 {
        self.eval(t).survival
    }

    /// Count of stratum members with `x >= t`.
    pub fn at_risk_count(&self, t: f64) -> usize {
        self.sorted_x.len() - self.sorted_x.partition_point(|&x| x < t)
    }

    /// `Y_n(t)`.
    pub fn risk_at(&self, t: f64) -> f64 {
        self.at_risk_count(t) as f64 / self.n_total as f64
    }

    /// `N_n(t)`.
    pub fn counting_at(&self, t: f64) -> f64 {
        let i = self.index(t);
        self.events[..i].iter().sum::<usize>() as f64 / self.n_total as f64
    }

    /// Influence of one stratum member on `Lambda_n(t)`; zero for non-members is the
    /// caller's responsibility.
    pub fn influence_chf(&self, x: f64, delta: bool, t: f64) -> f64 {
        let n = self.n_total as f64;
        let mut value = 0.0;
        if delta && x <= t {
            let k = self.times.partition_point(|&s| s < x);
            debug_assert!(self.times.get(k) == Some(&x), "event time not on grid");
            value += 1.0 / self.at_risk[k] as f64;
        }
        let i = self.index(x.min(t));
        if i > 0 {
            value -= self.cum_na_var[i - 1];
        }
        n * value
    }

    /// Influence of one stratum member on `S_n(t)` under the curve's method.
    pub fn influence_survival(&self, x: f64, delta: bool, t: f64) -> f64 {
        match self.method {
            SurvivalMethod::NelsonAalen => -self.survival_at(t) * self.influence_chf(x, delta, t),
            SurvivalMethod::KaplanMeier => {
                let s = self.survival_at(t);
                if s == 0.0 {
                    return 0.0;
                }
                let n = self.n_total as f64;
                let mut value = 0.0;
                if delta && x <= t {
                    let k = self.times.partition_point(|&s| s < x);
                    let (d, y) = (self.events[k] as f64, self.at_risk[k] as f64);
                    value += 1.0 / (y - d);
                }
                let i = self.index(x.min(t));
                if i > 0 {
                    value -= self.cum_km_var[i - 1];
                }
                -s * n * value
            }
        }
    }

    /// CSV with columns `t,chf,survival,risk`, one row per event time.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,chf,survival,risk\n");
        for (i, &t) in self.times.iter().enumerate() {
            let risk = self.at_risk[i] as f64 / self.n_total as f64;
            let _ = writeln!(out, "{t},{},{},{risk}", self.chf[i], self.survival[i]);
        }
        out
    }
}

/// `N_n` and `Y_n` for one stratum.
#[derive(Clone, Debug)]
pub struct CountingProcesses {
    n_total: usize,
    event_x: Vec<f64>,
    all_x: Vec<f64>,
}

impl CountingProcesses {
    pub fn n_at(&self, t: f64) -> f64 {
        self.event_x.partition_point(|&x| x <= t) as f64 / self.n_total as f64
    }

    pub fn y_at(&self, t: f64) -> f64 {
        (self.all_x.len() - self.all_x.partition_point(|&x| x < t)) as f64 / self.n_total as f64
    }
}

fn stratum_obs(dataset: &Dataset, key: StratumKey) -> Vec<(f64, bool)> {
    dataset
        .records
        .iter()
        .filter(|r| r.arm == key.arm && r.z == key.z && key.windows.contains(r.window))
        .map(|r| (r.x, r.delta))
        .collect()
}

fn empty_stratum(dataset: &Dataset, key: StratumKey) -> EstimationError {
    EstimationError::EmptyStratum {
        arm: key.arm,
        z: dataset.coarsening.z_label(key.z).to_string(),
    }
}

pub fn counting_processes(
    dataset: &Dataset,
    arm: Arm,
    windows: WindowSet,
    z: usize,
) -> Result<CountingProcesses, EstimationError> {
    let key = StratumKey { arm, windows, z };
    let mut obs = stratum_obs(dataset, key);
    if obs.is_empty() {
        return Err(empty_stratum(dataset, key));
    }
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(CountingProcesses {
        n_total: dataset.n(),
        event_x: obs.iter().filter(|o| o.1).map(|o| o.0).collect(),
        all_x: obs.iter().map(|o| o.0).collect(),
    })
}

/// Curve for an arbitrary stratum and method.
pub fn curve(
    dataset: &Dataset,
    key: StratumKey,
    method: SurvivalMethod,
) -> Result<StratifiedCurve, EstimationError> {
    let obs = stratum_obs(dataset, key);
    if obs.is_empty() {
        return Err(empty_stratum(dataset, key));
    }
    Ok(StratifiedCurve::from_observations(
        key,
        method,
        obs,
        dataset.n(),
    ))
}

pub fn nelson_aalen(
    dataset: &Dataset,
    arm: Arm,
    windows: WindowSet,
    z: usize,
) -> Result<StratifiedCurve, EstimationError> {
    curve(
        dataset,
        StratumKey { arm, windows, z },
        SurvivalMethod::NelsonAalen,
    )
}

/// Product-limit curve within `(arm, z)` using every window of the dataset.
pub fn kaplan_meier(
    dataset: &Dataset,
    arm: Arm,
    z: usize,
) -> Result<StratifiedCurve, EstimationError> {
    curve(
        dataset,
        StratumKey {
            arm,
            windows: WindowSet::all(),
            z,
        },
        SurvivalMethod::KaplanMeier,
    )
}

/// Empirical law `P_n(z | W in w, V = v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovariateDist {
    pub windows: WindowSet,
    pub v: usize,
    /// `(z, P_n(z | w, v))` for levels present in the context, ascending in `z`.
    pub weights: Vec<(usize, f64)>,
    /// Records in the context.
    pub count: usize,
    /// `P_n(W in w, V = v)`.
    pub mass: f64,
}

impl CovariateDist {
    pub fn weight(&self, z: usize) -> f64 {
        self.weights
            .iter()
            .find(|w| w.0 == z)
            .map_or(0.0, |w| w.1)
    }
}

fn dist_from_counts(windows: WindowSet, v: usize, counts: &[usize], n: usize) -> CovariateDist {
    let count: usize = counts.iter().sum();
    let weights = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(z, &c)| (z, c as f64 / count as f64))
        .collect();
    CovariateDist {
        windows,
        v,
        weights,
        count,
        mass: count as f64 / n as f64,
    }
}

pub fn covariate_dist(
    dataset: &Dataset,
    windows: WindowSet,
    v: usize,
) -> Result<CovariateDist, EstimationError> {
    let mut counts = vec![0usize; dataset.coarsening.z_count()];
    for r in &dataset.records {
        if r.v == v && windows.contains(r.window) {
            counts[r.z] += 1;
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(EstimationError::EmptyContext {
            arm: CONTROL,
            v: dataset.coarsening.v_label(v).to_string(),
        });
    }
    Ok(dist_from_counts(windows, v, &counts, dataset.n()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RREstimate {
    pub value: f64,
    pub t: f64,
    pub arm: Arm,
    pub v: String,
    /// Intervention cumulative incidence `1 - sum_z S_n(t|a,w_a,z) P_n(z|w_a,v)`.
    pub numerator: f64,
    /// Control cumulative incidence over the same context.
    pub denominator: f64,
    /// Some curve was evaluated beyond its last observed time.
    pub truncated: bool,
}

/// One covariate level of an arm's context.
#[derive(Clone, Debug)]
pub(crate) struct Cell {
    pub z: usize,
    pub weight: f64,
    pub arm_curve: StratifiedCurve,
    pub control_curve: StratifiedCurve,
    pub s_arm: f64,
    pub s_control: f64,
}

/// Everything the plug-in relative risk of one arm is built from.
#[derive(Clone, Debug)]
pub(crate) struct ArmComponents {
    pub arm: Arm,
    pub windows: WindowSet,
    pub dist: CovariateDist,
    pub cells: Vec<Cell>,
    pub numerator: f64,
    pub denominator: f64,
    pub truncated: bool,
}

impl ArmComponents {
    pub fn build(
        dataset: &Dataset,
        arm: Arm,
        v: usize,
        t: f64,
        method: SurvivalMethod,
    ) -> Result<Self, EstimationError> {
        if arm == CONTROL {
            return Err(EstimationError::InvalidInput(
                "relative risk requested for the control arm".into(),
            ));
        }
        let map = &dataset.coarsening;
        if v >= map.v_count() {
            return Err(EstimationError::InvalidInput(format!("stratum index {v}")));
        }
        let windows = dataset.estimation_windows(arm);
        let zc = map.z_count();
        let mut counts = vec![0usize; zc];
        let mut arm_obs = vec![Vec::new(); zc];
        let mut control_obs = vec![Vec::new(); zc];
        for r in &dataset.records {
            if r.v != v || !windows.contains(r.window) {
                continue;
            }
            counts[r.z] += 1;
            if r.arm == arm {
                arm_obs[r.z].push((r.x, r.delta));
            } else if r.arm == CONTROL {
                control_obs[r.z].push((r.x, r.delta));
            }
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(EstimationError::EmptyContext {
                arm,
                v: map.v_label(v).to_string(),
            });
        }
        let dist = dist_from_counts(windows, v, &counts, dataset.n());
        let n = dataset.n();
        let mut cells = Vec::with_capacity(dist.weights.len());
        let (mut mix_arm, mut mix_control, mut truncated) = (0.0, 0.0, false);
        for &(z, weight) in &dist.weights {
            let z_label = || map.z_label(z).to_string();
            let a_obs = std::mem::take(&mut arm_obs[z]);
            let c_obs = std::mem::take(&mut control_obs[z]);
            if a_obs.is_empty() {
                return Err(EstimationError::MissingCell { arm, z: z_label() });
            }
            if c_obs.is_empty() {
                return Err(EstimationError::MissingCell {
                    arm: CONTROL,
                    z: z_label(),
                });
            }
            let arm_curve =
                StratifiedCurve::from_observations(StratumKey { arm, windows, z }, method, a_obs, n);
            let control_curve = StratifiedCurve::from_observations(
                StratumKey {
                    arm: CONTROL,
                    windows,
                    z,
                },
                method,
                c_obs,
                n,
            );
            let (va, vc) = (arm_curve.eval(t), control_curve.eval(t));
            truncated |= va.truncated || vc.truncated;
            mix_arm += va.survival * weight;
            mix_control += vc.survival * weight;
            cells.push(Cell {
                z,
                weight,
                arm_curve,
                control_curve,
                s_arm: va.survival,
                s_control: vc.survival,
            });
        }
        let numerator = (1.0 - mix_arm).clamp(0.0, 1.0);
        let denominator = (1.0 - mix_control).clamp(0.0, 1.0);
        if denominator <= 0.0 {
            return Err(EstimationError::NoControlEvents { arm, t });
        }
        Ok(ArmComponents {
            arm,
            windows,
            dist,
            cells,
            numerator,
            denominator,
            truncated,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.numerator / self.denominator
    }
}

/// Plug-in relative risk with the default survival method for the dataset kind.
pub fn relative_risk(
    dataset: &Dataset,
    arm: Arm,
    v: usize,
    t: f64,
) -> Result<RREstimate, EstimationError> {
    relative_risk_with(dataset, arm, v, t, SurvivalMethod::default_for(dataset.kind))
}

pub fn relative_risk_with(
    dataset: &Dataset,
    arm: Arm,
    v: usize,
    t: f64,
    method: SurvivalMethod,
) -> Result<RREstimate, EstimationError> {
    let c = ArmComponents::build(dataset, arm, v, t, method)?;
    Ok(RREstimate {
        value: c.gamma(),
        t,
        arm,
        v: dataset.coarsening.v_label(v).to_string(),
        numerator: c.numerator,
        denominator: c.denominator,
        truncated: c.truncated,
    })
}

/// `Lambda_n(t|a,w_a,z) / Lambda_n(t|0,w_a,z)`.
pub fn chf_ratio(dataset: &Dataset, arm: Arm, z: usize, t: f64) -> Result<f64, EstimationError> {
    let windows = dataset.estimation_windows(arm);
    let num = nelson_aalen(dataset, arm, windows, z)?.chf_at(t);
    let den = nelson_aalen(dataset, CONTROL, windows, z)?.chf_at(t);
    if den <= 0.0 {
        return Err(EstimationError::ZeroControlHazard {
            arm,
            z: dataset.coarsening.z_label(z).to_string(),
            t,
        });
    }
    Ok(num / den)
}
