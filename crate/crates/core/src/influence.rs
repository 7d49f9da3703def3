//! Per-record influence functions with plug-in nuisances and the empirical covariance of the
//! relative-risk vector.
//!
//! For an arm `a`, the influence of record `u` on `gamma_n(t|a,v)` is nonzero only when `u`
//! falls in the context `W in w_a, V = v`. Two arms with disjoint window sets therefore have
//! an exactly zero empirical cross-covariance.

use serde::{Deserialize, Serialize};

use crate::data::{Arm, Dataset, DatasetKind, ParticipantRecord, WindowSet, CONTROL};
use crate::error::EstimationError;
use crate::survival::{self, ArmComponents, StratifiedCurve, StratumKey, SurvivalMethod};

/// Plug-in nuisances for a set of arms at one `(t, v)`.
#[derive(Clone, Debug)]
pub struct PluginContext {
    t: f64,
    v: usize,
    v_label: String,
    n: usize,
    method: SurvivalMethod,
    components: Vec<ArmComponents>,
    /// `sum_z eta_z P_n(z|w_a,v)` per arm; zero up to rounding.
    eta_bar: Vec<f64>,
}

impl PluginContext {
    pub fn new(dataset: &Dataset, arms: &[Arm], v: usize, t: f64) -> Result<Self, EstimationError> {
        Self::with_method(dataset, arms, v, t, SurvivalMethod::default_for(dataset.kind))
    }

    pub fn with_method(
        dataset: &Dataset,
        arms: &[Arm],
        v: usize,
        t: f64,
        method: SurvivalMethod,
    ) -> Result<Self, EstimationError> {
        if arms.is_empty() {
            return Err(EstimationError::InvalidInput("no arms requested".into()));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(EstimationError::InvalidInput(format!("invalid time {t}")));
        }
        let mut components = Vec::with_capacity(arms.len());
        for (i, &a) in arms.iter().enumerate() {
            if arms[..i].contains(&a) {
                return Err(EstimationError::InvalidInput(format!("arm {a} listed twice")));
            }
            let c = ArmComponents::build(dataset, a, v, t, method).map_err(|e| match e {
                EstimationError::InvalidInput(_) => e,
                other => EstimationError::UndefinedRelativeRisk {
                    arm: a,
                    reason: other.to_string(),
                },
            })?;
            components.push(c);
        }
        let eta_bar = components
            .iter()
            .map(|c| {
                let g = c.gamma();
                c.cells
                    .iter()
                    .map(|cell| cell.weight * eta(cell.s_arm, cell.s_control, g))
                    .sum()
            })
            .collect();
        Ok(PluginContext {
            t,
            v,
            v_label: dataset.coarsening.v_label(v).to_string(),
            n: dataset.n(),
            method,
            components,
            eta_bar,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn method(&self) -> SurvivalMethod {
        self.method
    }

    pub fn arms(&self) -> Vec<Arm> {
        self.components.iter().map(|c| c.arm).collect()
    }

    fn component(&self, arm: Arm) -> Result<(usize, &ArmComponents), EstimationError> {
        self.components
            .iter()
            .enumerate()
            .find(|(_, c)| c.arm == arm)
            .ok_or(EstimationError::ArmNotInEstimate(arm))
    }

    pub fn gamma(&self, arm: Arm) -> Result<f64, EstimationError> {
        Ok(self.component(arm)?.1.gamma())
    }

    /// `Q_n(t|0,w_a,v) = 1 / (1 - control mixture survival)`.
    pub fn q_control(&self, arm: Arm) -> Result<f64, EstimationError> {
        Ok(1.0 / self.component(arm)?.1.denominator)
    }

    /// `eta_n(t|a,w_a,z,v)`; zero for levels absent from the context.
    pub fn eta(&self, arm: Arm, z: usize) -> Result<f64, EstimationError> {
        let c = self.component(arm)?.1;
        Ok(c.cells
            .iter()
            .find(|cell| cell.z == z)
            .map_or(0.0, |cell| eta(cell.s_arm, cell.s_control, c.gamma())))
    }

    fn find_curve(&self, key: StratumKey) -> Result<&StratifiedCurve, EstimationError> {
        for c in self.components.iter().filter(|c| c.windows == key.windows) {
            if let Some(cell) = c.cells.iter().find(|cell| cell.z == key.z) {
                if key.arm == c.arm {
                    return Ok(&cell.arm_curve);
                }
                if key.arm == CONTROL {
                    return Ok(&cell.control_curve);
                }
            }
        }
        Err(EstimationError::InvalidInput(format!(
            "stratum (arm {}, windows {:?}, z {}) is not part of this context",
            key.arm, key.windows, key.z
        )))
    }

    /// `f_Lambda(u | t, a, w, z)`.
    pub fn eval_f_lambda(
        &self,
        record: &ParticipantRecord,
        key: StratumKey,
    ) -> Result<f64, EstimationError> {
        let curve = self.find_curve(key)?;
        Ok(if in_stratum(record, key) {
            curve.influence_chf(record.x, record.delta, self.t)
        } else {
            0.0
        })
    }

    /// `xi(u | t, a, w, z)`; the Kaplan-Meier variant is used when the context was built with it.
    pub fn eval_xi(&self, record: &ParticipantRecord, key: StratumKey) -> Result<f64, EstimationError> {
        let curve = self.find_curve(key)?;
        Ok(if in_stratum(record, key) {
            curve.influence_survival(record.x, record.delta, self.t)
        } else {
            0.0
        })
    }

    /// `h(u | w, z, v)` for the covariate law of an arm's context.
    pub fn eval_h(&self, record: &ParticipantRecord, arm: Arm, z: usize) -> Result<f64, EstimationError> {
        let c = self.component(arm)?.1;
        Ok(h_value(record, c.windows, self.v, z, c.dist.weight(z), c.dist.mass))
    }

    pub fn eval_f_gamma(&self, record: &ParticipantRecord, arm: Arm) -> Result<f64, EstimationError> {
        let (i, c) = self.component(arm)?;
        Ok(self.f_gamma_at(i, c, record))
    }

    pub fn eval_f_phi(&self, record: &ParticipantRecord, arm: Arm) -> Result<f64, EstimationError> {
        let (i, c) = self.component(arm)?;
        Ok(self.f_gamma_at(i, c, record) / c.gamma())
    }

    fn f_gamma_at(&self, i: usize, c: &ArmComponents, r: &ParticipantRecord) -> f64 {
        if r.v != self.v || !c.windows.contains(r.window) {
            return 0.0;
        }
        let Some(cell) = c.cells.iter().find(|cell| cell.z == r.z) else {
            return 0.0;
        };
        let gamma = c.gamma();
        let mut value = (eta(cell.s_arm, cell.s_control, gamma) - self.eta_bar[i]) / c.dist.mass;
        if r.arm == c.arm {
            value -= cell.weight * cell.arm_curve.influence_survival(r.x, r.delta, self.t);
        } else if r.arm == CONTROL {
            value += gamma * cell.weight * cell.control_curve.influence_survival(r.x, r.delta, self.t);
        }
        value / c.denominator
    }

    /// Influence values `f_gamma(U_i)` for every record, one column per arm.
    pub fn f_gamma_columns(&self, dataset: &Dataset) -> Vec<Vec<f64>> {
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| dataset.records.iter().map(|r| self.f_gamma_at(i, c, r)).collect())
            .collect()
    }

    /// Joint estimate with covariance `(1/n) sum f f^T`.
    pub fn joint_estimate(&self, dataset: &Dataset) -> Result<JointRREstimate, EstimationError> {
        let gamma: Vec<f64> = self.components.iter().map(ArmComponents::gamma).collect();
        if let Some(c) = self.components.iter().find(|c| c.gamma() <= 0.0) {
            return Err(EstimationError::UndefinedRelativeRisk {
                arm: c.arm,
                reason: format!("estimated relative risk is 0 at t={} (no intervention events)", self.t),
            });
        }
        let columns = self.f_gamma_columns(dataset);
        let sigma_gamma = second_moment(&columns, self.n);
        Ok(JointRREstimate::from_sigma_gamma(
            self.t,
            self.v_label.clone(),
            self.arms(),
            gamma,
            sigma_gamma,
            self.n,
        ))
    }
}

#[inline]
fn eta(s_arm: f64, s_control: f64, gamma: f64) -> f64 {
    1.0 - s_arm - gamma * (1.0 - s_control)
}

#[inline]
fn in_stratum(r: &ParticipantRecord, key: StratumKey) -> bool {
    r.arm == key.arm && r.z == key.z && key.windows.contains(r.window)
}

fn h_value(r: &ParticipantRecord, windows: WindowSet, v: usize, z: usize, weight: f64, mass: f64) -> f64 {
    if r.v != v || !windows.contains(r.window) {
        return 0.0;
    }
    (f64::from(u8::from(r.z == z)) - weight) / mass
}

/// `(1/n) sum_i c_a[i] c_b[i]`, upper triangle mirrored.
fn second_moment(columns: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let k = columns.len();
    let mut out = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in a..k {
            let s: f64 = columns[a].iter().zip(&columns[b]).map(|(x, y)| x * y).sum();
            out[a][b] = s / n as f64;
            out[b][a] = out[a][b];
        }
    }
    out
}

/// Relative-risk vector at `(t, v)` with its estimated covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointRREstimate {
    pub t: f64,
    pub v: String,
    pub arms: Vec<Arm>,
    pub gamma: Vec<f64>,
    pub sigma_gamma: Vec<Vec<f64>>,
    pub sigma_phi: Vec<Vec<f64>>,
    pub n: usize,
}

impl JointRREstimate {
    pub fn from_sigma_gamma(
        t: f64,
        v: String,
        arms: Vec<Arm>,
        gamma: Vec<f64>,
        sigma_gamma: Vec<Vec<f64>>,
        n: usize,
    ) -> Self {
        let sigma_phi = sigma_gamma
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, s)| s / (gamma[i] * gamma[j]))
                    .collect()
            })
            .collect();
        JointRREstimate {
            t,
            v,
            arms,
            gamma,
            sigma_gamma,
            sigma_phi,
            n,
        }
    }

    pub fn index_of(&self, arm: Arm) -> Result<usize, EstimationError> {
        self.arms
            .iter()
            .position(|&a| a == arm)
            .ok_or(EstimationError::ArmNotInEstimate(arm))
    }

    pub fn gamma_of(&self, arm: Arm) -> Result<f64, EstimationError> {
        Ok(self.gamma[self.index_of(arm)?])
    }

    /// `Sigma_gamma[a][b]`.
    pub fn cov(&self, a: Arm, b: Arm) -> Result<f64, EstimationError> {
        Ok(self.sigma_gamma[self.index_of(a)?][self.index_of(b)?])
    }

    /// Standard error of `gamma_n(t|a,v)`: `sqrt(Sigma_gamma[a][a] / n)`.
    pub fn se(&self, arm: Arm) -> Result<f64, EstimationError> {
        Ok((self.cov(arm, arm)? / self.n as f64).sqrt())
    }

    /// Checks shape, finiteness and exact symmetry of the covariance matrices.
    pub fn check(&self) -> Result<(), EstimationError> {
        let k = self.arms.len();
        let square = |m: &Vec<Vec<f64>>| m.len() == k && m.iter().all(|r| r.len() == k);
        if self.gamma.len() != k || !square(&self.sigma_gamma) || !square(&self.sigma_phi) {
            return Err(EstimationError::InvalidInput(
                "estimate dimensions do not match the arm list".into(),
            ));
        }
        if self.n == 0 {
            return Err(EstimationError::InvalidInput("sample size is zero".into()));
        }
        for i in 0..k {
            for j in 0..k {
                let s = self.sigma_gamma[i][j];
                if !s.is_finite() || s != self.sigma_gamma[j][i] {
                    return Err(EstimationError::InvalidInput(
                        "sigma_gamma must be finite and symmetric".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Joint estimate for `arms` on platform data with the dataset's default survival method.
pub fn covariance_rr(
    dataset: &Dataset,
    arms: &[Arm],
    v: usize,
    t: f64,
) -> Result<JointRREstimate, EstimationError> {
    PluginContext::new(dataset, arms, v, t)?.joint_estimate(dataset)
}

pub fn covariance_rr_with(
    dataset: &Dataset,
    arms: &[Arm],
    v: usize,
    t: f64,
    method: SurvivalMethod,
) -> Result<JointRREstimate, EstimationError> {
    PluginContext::with_method(dataset, arms, v, t, method)?.joint_estimate(dataset)
}

/// Pools independent separate-trial datasets into one joint estimate.
///
/// Trials are independent, so the covariance is diagonal. With `m` the pooled size and `m_a`
/// the size of trial `a`, the diagonal entry is `(m / m_a) Var_a`, so that `Sigma / m`
/// reproduces the per-trial variances and any contrast computed from the result uses the
/// separate-trial variance.
pub fn joint_estimate_separate(
    datasets: &[Dataset],
    v_label: &str,
    t: f64,
    method: Option<SurvivalMethod>,
) -> Result<JointRREstimate, EstimationError> {
    if datasets.is_empty() {
        return Err(EstimationError::InvalidInput("no separate-trial datasets".into()));
    }
    let m: usize = datasets.iter().map(Dataset::n).sum();
    let (mut arms, mut gamma, mut var) = (Vec::new(), Vec::new(), Vec::new());
    for ds in datasets {
        let DatasetKind::Separate(a) = ds.kind else {
            return Err(EstimationError::InvalidInput(
                "joint_estimate_separate requires separate-trial datasets".into(),
            ));
        };
        if arms.contains(&a) {
            return Err(EstimationError::InvalidInput(format!("two trials for arm {a}")));
        }
        let v = ds
            .coarsening
            .v_index(v_label)
            .ok_or_else(|| EstimationError::InvalidInput(format!("unknown stratum '{v_label}'")))?;
        let method = method.unwrap_or(SurvivalMethod::KaplanMeier);
        let est = PluginContext::with_method(ds, &[a], v, t, method)?.joint_estimate(ds)?;
        arms.push(a);
        gamma.push(est.gamma[0]);
        var.push(est.sigma_gamma[0][0] * m as f64 / ds.n() as f64);
    }
    let k = arms.len();
    let mut sigma = vec![vec![0.0; k]; k];
    for i in 0..k {
        sigma[i][i] = var[i];
    }
    Ok(JointRREstimate::from_sigma_gamma(
        t,
        v_label.to_string(),
        arms,
        gamma,
        sigma,
        m,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveFunctional {
    Chf,
    Survival,
}

/// Empirical covariance `(1/n) sum IF_i IF_j` of several stratum curves at `t`
/// (`Sigma_Lambda` or `Sigma_S`).
pub fn covariance_curves(
    dataset: &Dataset,
    keys: &[StratumKey],
    t: f64,
    method: SurvivalMethod,
    functional: CurveFunctional,
) -> Result<Vec<Vec<f64>>, EstimationError> {
    let curves = keys
        .iter()
        .map(|&k| survival::curve(dataset, k, method))
        .collect::<Result<Vec<_>, _>>()?;
    let columns: Vec<Vec<f64>> = curves
        .iter()
        .map(|c| {
            dataset
                .records
                .iter()
                .map(|r| {
                    if !in_stratum(r, c.key()) {
                        0.0
                    } else {
                        match functional {
                            CurveFunctional::Chf => c.influence_chf(r.x, r.delta, t),
                            CurveFunctional::Survival => c.influence_survival(r.x, r.delta, t),
                        }
                    }
                })
                .collect()
        })
        .collect();
    Ok(second_moment(&columns, dataset.n()))
}

pub fn covariance_chf(dataset: &Dataset, keys: &[StratumKey], t: f64) -> Result<Vec<Vec<f64>>, EstimationError> {
    covariance_curves(dataset, keys, t, SurvivalMethod::NelsonAalen, CurveFunctional::Chf)
}

pub fn covariance_survival(
    dataset: &Dataset,
    keys: &[StratumKey],
    t: f64,
    method: SurvivalMethod,
) -> Result<Vec<Vec<f64>>, EstimationError> {
    covariance_curves(dataset, keys, t, method, CurveFunctional::Survival)
}

/// Cumulative hazard ratio with an influence-function variance (experimental).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChfRatioEstimate {
    pub ratio: f64,
    /// Asymptotic variance; the standard error is `sqrt(sigma2 / n)`.
    pub sigma2: f64,
    pub n: usize,
}

/// Variance of `Lambda_n(t|a,w_a,z) / Lambda_n(t|0,w_a,z)` by the delta method on the
/// two cumulative-hazard influence functions. Experimental: not used by any test or contrast.
pub fn chf_ratio_variance(
    dataset: &Dataset,
    arm: Arm,
    z: usize,
    t: f64,
) -> Result<ChfRatioEstimate, EstimationError> {
    let ratio = survival::chf_ratio(dataset, arm, z, t)?;
    let windows = dataset.estimation_windows(arm);
    let arm_key = StratumKey { arm, windows, z };
    let ctl_key = StratumKey { arm: CONTROL, windows, z };
    let arm_curve = survival::nelson_aalen(dataset, arm, windows, z)?;
    let ctl_curve = survival::nelson_aalen(dataset, CONTROL, windows, z)?;
    let den = ctl_curve.chf_at(t);
    let n = dataset.n();
    let sigma2 = dataset
        .records
        .iter()
        .map(|r| {
            let fa = if in_stratum(r, arm_key) { arm_curve.influence_chf(r.x, r.delta, t) } else { 0.0 };
            let f0 = if in_stratum(r, ctl_key) { ctl_curve.influence_chf(r.x, r.delta, t) } else { 0.0 };
            let f = (fa - ratio * f0) / den;
            f * f
        })
        .sum::<f64>()
        / n as f64;
    Ok(ChfRatioEstimate { ratio, sigma2, n })
}

/// `(1/n) sum f_gamma(U_i | t1, a) f_gamma(U_i | t2, a')` for paired evaluation times.
pub fn cross_time_covariance(
    dataset: &Dataset,
    arms: &[Arm],
    v: usize,
    t1: f64,
    t2: f64,
    method: SurvivalMethod,
) -> Result<Vec<Vec<f64>>, EstimationError> {
    let c1 = PluginContext::with_method(dataset, arms, v, t1, method)?.f_gamma_columns(dataset);
    let c2 = PluginContext::with_method(dataset, arms, v, t2, method)?.f_gamma_columns(dataset);
    let n = dataset.n() as f64;
    Ok(c1
        .iter()
        .map(|a| c2.iter().map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / n).collect())
        .collect())
}
