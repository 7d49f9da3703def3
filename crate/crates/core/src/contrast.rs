//! Relative-efficacy contrasts of two relative risks, delta-method variances and Wald
//! intervals for platform and separate-trial data.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Arm, Dataset, DatasetKind};
use crate::error::EstimationError;
use crate::influence::{joint_estimate_separate, JointRREstimate};
use crate::quantile::normal_quantile;
use crate::survival::SurvivalMethod;

pub type ContrastFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

/// User-supplied contrast. Without an analytic gradient a central difference is used.
#[derive(Clone)]
pub struct CustomContrast {
    pub name: String,
    pub eval: ContrastFn,
    pub grad: Option<GradientFn>,
}

#[derive(Clone)]
pub enum Contrast {
    /// `r1 - r2`
    Additive,
    /// `r1 / r2`
    Multiplicative,
    /// `ln(r1 / r2)`
    LogRatio,
    Custom(CustomContrast),
}

impl fmt::Debug for Contrast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Contrast {
    type Err = EstimationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "additive" => Ok(Contrast::Additive),
            "multiplicative" => Ok(Contrast::Multiplicative),
            "log-ratio" => Ok(Contrast::LogRatio),
            other => Err(EstimationError::InvalidInput(format!(
                "unknown contrast '{other}' (expected additive, multiplicative or log-ratio)"
            ))),
        }
    }
}

impl Contrast {
    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        grad: Option<GradientFn>,
    ) -> Self {
        Contrast::Custom(CustomContrast {
            name: name.into(),
            eval: Arc::new(eval),
            grad,
        })
    }

    pub fn name(&self) -> &str {
        match self {
            Contrast::Additive => "additive",
            Contrast::Multiplicative => "multiplicative",
            Contrast::LogRatio => "log-ratio",
            Contrast::Custom(c) => &c.name,
        }
    }

    pub fn eval(&self, r1: f64, r2: f64) -> f64 {
        match self {
            Contrast::Additive => r1 - r2,
            Contrast::Multiplicative => r1 / r2,
            Contrast::LogRatio => (r1 / r2).ln(),
            Contrast::Custom(c) => (c.eval)(r1, r2),
        }
    }

    /// `(d Theta / d r1, d Theta / d r2)`.
    pub fn grad(&self, r1: f64, r2: f64) -> (f64, f64) {
        match self {
            Contrast::Additive => (1.0, -1.0),
            Contrast::Multiplicative => (1.0 / r2, -r1 / (r2 * r2)),
            Contrast::LogRatio => (1.0 / r1, -1.0 / r2),
            Contrast::Custom(c) => match &c.grad {
                Some(g) => g(r1, r2),
                None => self.finite_difference_grad(r1, r2),
            },
        }
    }

    /// Central finite difference with a step scaled to each argument.
    pub fn finite_difference_grad(&self, r1: f64, r2: f64) -> (f64, f64) {
        let h1 = 1e-6 * r1.abs().max(1e-3);
        let h2 = 1e-6 * r2.abs().max(1e-3);
        (
            (self.eval(r1 + h1, r2) - self.eval(r1 - h1, r2)) / (2.0 * h1),
            (self.eval(r1, r2 + h2) - self.eval(r1, r2 - h2)) / (2.0 * h2),
        )
    }

    /// Sign condition `Theta_1 Theta_2 < 0` at one point.
    pub fn a4_holds_at(&self, r1: f64, r2: f64) -> bool {
        let (g1, g2) = self.grad(r1, r2);
        g1 * g2 < 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct A4Report {
    pub passed: bool,
    /// First grid point violating the sign condition.
    pub witness: Option<(f64, f64)>,
    pub points_checked: usize,
}

/// The 10 x 10 grid `{0.2, 0.4, ..., 2.0}^2`.
pub fn default_grid() -> Vec<(f64, f64)> {
    let vals: Vec<f64> = (1..=10).map(|i| i as f64 * 0.2).collect();
    vals.iter()
        .flat_map(|&a| vals.iter().map(move |&b| (a, b)))
        .collect()
}

pub fn validate_contrast(contrast: &Contrast, grid: &[(f64, f64)]) -> A4Report {
    let witness = grid
        .iter()
        .copied()
        .find(|&(r1, r2)| !contrast.a4_holds_at(r1, r2));
    A4Report {
        passed: witness.is_none(),
        witness,
        points_checked: grid.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CIResult {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub se: f64,
    #[serde(skip)]
    pub n_effective: usize,
}

impl CIResult {
    /// `estimate +- z_{1-alpha/2} sqrt(sigma2 / n)`.
    pub fn wald(estimate: f64, sigma2: f64, n: usize, alpha: f64) -> Self {
        let se = (sigma2 / n as f64).sqrt();
        let half = normal_quantile(1.0 - alpha / 2.0) * se;
        CIResult {
            estimate,
            lower: estimate - half,
            upper: estimate + half,
            alpha,
            se,
            n_effective: n,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContrastEstimate {
    pub theta: f64,
    pub sigma2: f64,
    pub n: usize,
    pub gradient: (f64, f64),
    pub ci: CIResult,
    /// Sign condition at the estimated relative risks. A failure is a warning only.
    pub a4_satisfied: bool,
}

fn check_alpha(alpha: f64) -> Result<(), EstimationError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(EstimationError::InvalidInput(format!("alpha {alpha} outside (0, 1)")))
    }
}

/// `theta_n = Theta(gamma_n(a1), gamma_n(a2))` with `sigma^2 = grad' Sigma_gamma grad`.
pub fn contrast_estimate_platform(
    est: &JointRREstimate,
    a1: Arm,
    a2: Arm,
    contrast: &Contrast,
    alpha: f64,
) -> Result<ContrastEstimate, EstimationError> {
    check_alpha(alpha)?;
    if a1 == a2 {
        return Err(EstimationError::InvalidInput("contrast arms must differ".into()));
    }
    let (i, j) = (est.index_of(a1)?, est.index_of(a2)?);
    let (r1, r2) = (est.gamma[i], est.gamma[j]);
    let theta = contrast.eval(r1, r2);
    let (g1, g2) = contrast.grad(r1, r2);
    let s = &est.sigma_gamma;
    let sigma2 = g1 * g1 * s[i][i] + 2.0 * g1 * g2 * s[i][j] + g2 * g2 * s[j][j];
    if !(theta.is_finite() && sigma2.is_finite()) {
        return Err(EstimationError::InvalidInput(format!(
            "contrast {} is not finite at ({r1}, {r2})",
            contrast.name()
        )));
    }
    Ok(ContrastEstimate {
        theta,
        sigma2,
        n: est.n,
        gradient: (g1, g2),
        ci: CIResult::wald(theta, sigma2, est.n, alpha),
        a4_satisfied: g1 * g2 < 0.0,
    })
}

/// Contrast from independent separate trials, one dataset per intervention.
///
/// Uses the per-trial Kaplan-Meier relative risks unless `method` overrides it. The
/// cross-covariance between the two trials is zero.
pub fn estimate_separate(
    datasets: &[Dataset],
    a1: Arm,
    a2: Arm,
    v_label: &str,
    t: f64,
    contrast: &Contrast,
    alpha: f64,
    method: Option<SurvivalMethod>,
) -> Result<ContrastEstimate, EstimationError> {
    let pick = |a: Arm| {
        datasets
            .iter()
            .find(|d| d.kind == DatasetKind::Separate(a))
            .cloned()
            .ok_or_else(|| EstimationError::InvalidInput(format!("no separate trial for arm {a}")))
    };
    let pair = [pick(a1)?, pick(a2)?];
    let joint = joint_estimate_separate(&pair, v_label, t, method)?;
    contrast_estimate_platform(&joint, a1, a2, contrast, alpha)
}

/// `omega_n / omega_m`: platform interval width over separate-trial interval width.
pub fn width_ratio(platform: &CIResult, separate: &CIResult) -> f64 {
    platform.width() / separate.width()
}
