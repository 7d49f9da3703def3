use std::collections::BTreeMap;

use super::generate::{simulate_platform, simulate_separate_arms};
use super::monte_carlo::ReplicationMetrics;
use super::truth::{true_relative_risk, TruthKind};
use super::Scenario;
use crate::contrast::{contrast_estimate_platform, width_ratio, CIResult, Contrast};
use crate::data::Arm;
use crate::error::{EstimationError, Error};
use crate::influence::{joint_estimate_separate, JointRREstimate, PluginContext};
use crate::noninferiority::{run_test, NITestConfig, TestMethod};
use crate::survival::SurvivalMethod;

#[derive(Clone, Debug, PartialEq)]
pub struct NISpec {
    pub config: NITestConfig,
    pub methods: Vec<TestMethod>,
}

/// What to compute on each simulated replication.
#[derive(Clone, Debug)]
pub struct AnalysisSpec {
    pub t: f64,
    pub v: String,
    pub alpha: f64,
    /// Overrides the platform default (Nelson-Aalen).
    pub platform_method: Option<SurvivalMethod>,
    /// Overrides the separate-trial default (Kaplan-Meier).
    pub separate_method: Option<SurvivalMethod>,
    /// Arms in the joint estimate; empty means every active arm.
    pub arms: Vec<Arm>,
    /// Also simulate and analyze the matched separate trials.
    pub separate: bool,
    /// Intervention pairs whose contrast intervals are compared.
    pub pairs: Vec<(Arm, Arm)>,
    pub contrast: Contrast,
    /// Record whether intervals cover the analytic truth.
    pub coverage: bool,
    pub ni: Option<NISpec>,
}

impl AnalysisSpec {
    pub fn new(t: f64, v: impl Into<String>) -> Self {
        AnalysisSpec {
            t,
            v: v.into(),
            alpha: 0.05,
            platform_method: None,
            separate_method: None,
            arms: Vec::new(),
            separate: false,
            pairs: Vec::new(),
            contrast: Contrast::Additive,
            coverage: false,
            ni: None,
        }
    }
}

/// A spec bound to a scenario with the analytic truths precomputed.
pub struct Analysis<'a> {
    scenario: &'a Scenario,
    spec: &'a AnalysisSpec,
    arms: Vec<Arm>,
    truth_platform: BTreeMap<Arm, f64>,
    truth_separate: BTreeMap<Arm, f64>,
}

impl<'a> Analysis<'a> {
    pub fn new(scenario: &'a Scenario, spec: &'a AnalysisSpec) -> Result<Self, Error> {
        let mut arms = if spec.arms.is_empty() {
            scenario.design.active_arms().collect()
        } else {
            spec.arms.clone()
        };
        for &(a, b) in &spec.pairs {
            for x in [a, b] {
                if !arms.contains(&x) {
                    arms.push(x);
                }
            }
        }
        let mut truth_platform = BTreeMap::new();
        let mut truth_separate = BTreeMap::new();
        if spec.coverage {
            for &a in &arms {
                truth_platform.insert(a, true_relative_risk(scenario, a, &spec.v, spec.t, TruthKind::Platform)?);
                if spec.separate {
                    truth_separate
                        .insert(a, true_relative_risk(scenario, a, &spec.v, spec.t, TruthKind::Separate)?);
                }
            }
        }
        Ok(Analysis { scenario, spec, arms, truth_platform, truth_separate })
    }

    fn per_arm(
        &self,
        m: &mut ReplicationMetrics,
        prefix: &str,
        est: &JointRREstimate,
        truth: &BTreeMap<Arm, f64>,
    ) {
        for (i, &a) in est.arms.iter().enumerate() {
            let ci = CIResult::wald(est.gamma[i], est.sigma_gamma[i][i], est.n, self.spec.alpha);
            m.value(format!("{prefix}gamma[{a}]"), est.gamma[i]);
            m.value(format!("{prefix}se[{a}]"), ci.se);
            m.value(format!("{prefix}width[{a}]"), ci.width());
            if let Some(&g) = truth.get(&a) {
                m.flag(format!("{prefix}cover[{a}]"), ci.contains(g));
            }
        }
    }

    fn tests(&self, m: &mut ReplicationMetrics, prefix: &str, est: &JointRREstimate) -> Result<(), Error> {
        if let Some(ni) = &self.spec.ni {
            for &method in &ni.methods {
                let out = run_test(est, &ni.config, method)?;
                let name = match method {
                    TestMethod::Intersection => "intersection",
                    TestMethod::Lrt => "lrt",
                };
                m.flag(format!("{prefix}reject_{name}"), out.reject);
            }
        }
        Ok(())
    }

    /// Simulates and analyzes one replication.
    pub fn run(&self, seed: u64) -> Result<ReplicationMetrics, Error> {
        let spec = self.spec;
        let mut m = ReplicationMetrics::default();
        let plat = simulate_platform(self.scenario, seed)?.dataset;
        let v = plat.coarsening.v_index(&spec.v).ok_or_else(|| {
            EstimationError::InvalidInput(format!("unknown stratum '{}'", spec.v))
        })?;
        let method = spec.platform_method.unwrap_or(SurvivalMethod::NelsonAalen);
        let est = PluginContext::with_method(&plat, &self.arms, v, spec.t, method)?.joint_estimate(&plat)?;
        self.per_arm(&mut m, "", &est, &self.truth_platform);
        self.tests(&mut m, "", &est)?;

        let sep = if spec.separate {
            let trials: Vec<_> = simulate_separate_arms(self.scenario, seed, &self.arms)?
                .into_iter()
                .map(|s| s.dataset)
                .collect();
            let joint = joint_estimate_separate(&trials, &spec.v, spec.t, spec.separate_method)?;
            self.per_arm(&mut m, "sep_", &joint, &self.truth_separate);
            self.tests(&mut m, "sep_", &joint)?;
            Some(joint)
        } else {
            None
        };

        for &(a, b) in &spec.pairs {
            let p = contrast_estimate_platform(&est, a, b, &spec.contrast, spec.alpha)?;
            m.value(format!("theta[{a},{b}]"), p.theta);
            m.value(format!("width[{a},{b}]"), p.ci.width());
            if let (Some(&ga), Some(&gb)) = (self.truth_platform.get(&a), self.truth_platform.get(&b)) {
                m.flag(format!("cover[{a},{b}]"), p.ci.contains(spec.contrast.eval(ga, gb)));
            }
            if let Some(joint) = &sep {
                let s = contrast_estimate_platform(joint, a, b, &spec.contrast, spec.alpha)?;
                m.value(format!("sep_theta[{a},{b}]"), s.theta);
                m.value(format!("sep_width[{a},{b}]"), s.ci.width());
                m.value(format!("width_ratio[{a},{b}]"), width_ratio(&p.ci, &s.ci));
            }
        }
        Ok(m)
    }
}

/// One replication of `spec` on `scenario` with the given seed.
pub fn analyze_replication(
    scenario: &Scenario,
    spec: &AnalysisSpec,
    seed: u64,
) -> Result<ReplicationMetrics, Error> {
    Analysis::new(scenario, spec)?.run(seed)
}
