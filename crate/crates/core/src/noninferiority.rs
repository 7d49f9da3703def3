//! Noninferiority of a candidate intervention against the best of the others.
//!
//! The composite null is `gamma_ref >= delta` or `gamma_ref >= gamma_a + epsilon` for some
//! comparator `a`. Two tests are provided: the intersection of Wald-type marginal tests, and a
//! likelihood-ratio-type test under a working Gaussian model `gamma_n ~ N(gamma, Sigma/n)`.
//!
//! The null region is a union of convex pieces, one per marginal null, each intersected with
//! the nonnegative orthant. The Gaussian projection onto each piece is a strictly convex
//! quadratic program solved exactly by a primal active-set method.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data::Arm;
use crate::error::TestError;
use crate::influence::JointRREstimate;
use crate::quantile::normal_quantile;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NITestConfig {
    /// Candidate intervention whose noninferiority is assessed.
    pub ref_arm: Arm,
    /// Efficacy threshold on the relative-risk scale.
    pub delta: f64,
    /// Noninferiority margin on the additive relative-risk scale.
    pub epsilon: f64,
    pub alpha: f64,
}

impl NITestConfig {
    pub fn new(ref_arm: Arm, delta: f64, epsilon: f64, alpha: f64) -> Result<Self, TestError> {
        let cfg = NITestConfig {
            ref_arm,
            delta,
            epsilon,
            alpha,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TestError> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(TestError::InvalidConfig(format!("delta {} must be positive", self.delta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(TestError::InvalidConfig(format!(
                "epsilon {} must be positive",
                self.epsilon
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(TestError::InvalidConfig(format!(
                "alpha {} must lie in (0, 0.5)",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    Intersection,
    Lrt,
}

/// One marginal test of the intersection test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Marginal {
    /// `None` for the efficacy-threshold null, else the comparator arm.
    pub comparator: Option<Arm>,
    pub estimate: f64,
    pub se: f64,
    /// Upper bound of the two-sided `100(1 - 2 alpha)%` interval.
    pub upper: f64,
    pub threshold: f64,
    pub reject: bool,
}

/// One convex piece of the null region and the Gaussian fit inside it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PieceFit {
    pub comparator: Option<Arm>,
    pub objective: f64,
    pub gamma_star: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LrtDetail {
    pub statistic: f64,
    pub critical_value: f64,
    pub df: usize,
    pub pieces: Vec<PieceFit>,
    /// The covariance had to be regularized before inversion.
    pub regularized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestOutcome {
    pub method: TestMethod,
    pub reject: bool,
    pub config: NITestConfig,
    pub t: f64,
    pub v: String,
    pub arms: Vec<Arm>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub marginals: Vec<Marginal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lrt: Option<LrtDetail>,
}

fn check_inputs(est: &JointRREstimate, cfg: &NITestConfig) -> Result<usize, TestError> {
    cfg.validate()?;
    est.check()?;
    Ok(est.index_of(cfg.ref_arm)?)
}

/// Rejects iff every marginal Wald test rejects.
pub fn intersection_test(est: &JointRREstimate, cfg: &NITestConfig) -> Result<TestOutcome, TestError> {
    let r = check_inputs(est, cfg)?;
    let z = normal_quantile(1.0 - cfg.alpha);
    let n = est.n as f64;
    let s = &est.sigma_gamma;
    let mut marginals = Vec::with_capacity(est.arms.len());
    let se0 = (s[r][r] / n).sqrt();
    let upper0 = est.gamma[r] + z * se0;
    marginals.push(Marginal {
        comparator: None,
        estimate: est.gamma[r],
        se: se0,
        upper: upper0,
        threshold: cfg.delta,
        reject: upper0 < cfg.delta,
    });
    for (a, &arm) in est.arms.iter().enumerate().filter(|&(a, _)| a != r) {
        let diff = est.gamma[r] - est.gamma[a];
        let var = (s[r][r] + s[a][a] - 2.0 * s[r][a]).max(0.0);
        let se = (var / n).sqrt();
        let upper = diff + z * se;
        marginals.push(Marginal {
            comparator: Some(arm),
            estimate: diff,
            se,
            upper,
            threshold: cfg.epsilon,
            reject: upper < cfg.epsilon,
        });
    }
    Ok(TestOutcome {
        method: TestMethod::Intersection,
        reject: marginals.iter().all(|m| m.reject),
        config: cfg.clone(),
        t: est.t,
        v: est.v.clone(),
        arms: est.arms.clone(),
        marginals,
        lrt: None,
    })
}

/// One convex piece of the null region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HalfSpace {
    /// `x[index] >= delta`
    Threshold { index: usize, delta: f64 },
    /// `x[index] - x[other] >= epsilon`
    Margin { index: usize, other: usize, epsilon: f64 },
}

impl HalfSpace {
    fn row(&self, k: usize) -> (DVector<f64>, f64) {
        let mut a = DVector::zeros(k);
        match *self {
            HalfSpace::Threshold { index, delta } => {
                a[index] = 1.0;
                (a, delta)
            }
            HalfSpace::Margin { index, other, epsilon } => {
                a[index] = 1.0;
                a[other] = -1.0;
                (a, epsilon)
            }
        }
    }

    /// A feasible starting point close to `g`.
    fn feasible_start(&self, g: &DVector<f64>) -> DVector<f64> {
        let mut x = g.map(|v| v.max(0.0));
        match *self {
            HalfSpace::Threshold { index, delta } => x[index] = x[index].max(delta),
            HalfSpace::Margin { index, other, epsilon } => {
                x[index] = x[index].max(x[other] + epsilon)
            }
        }
        x
    }
}

/// Solution of `min (g - x)' P (g - x)` over one piece.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedFit {
    pub x: Vec<f64>,
    pub objective: f64,
    pub regularized: bool,
}

const MAX_ACTIVE_SET_ITERS: usize = 500;

/// Precision matrix `cov^{-1}`; regularizes by `1e-10 trace I` once if `cov` is not positive
/// definite.
fn precision(cov: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool), TestError> {
    if let Some(ch) = cov.clone().cholesky() {
        return Ok((ch.inverse(), false));
    }
    let k = cov.nrows();
    let trace = cov.trace();
    if !(trace > 0.0 && trace.is_finite()) {
        return Err(TestError::SingularCovariance);
    }
    let bump = 1e-10 * trace;
    let reg = cov + DMatrix::identity(k, k) * bump;
    reg.cholesky()
        .map(|ch| (ch.inverse(), true))
        .ok_or(TestError::SingularCovariance)
}

/// Gaussian projection of `g` onto `{x >= 0, piece}` in the metric `cov^{-1}`.
pub fn constrained_gaussian_mle(
    g: &[f64],
    cov: &[Vec<f64>],
    piece: HalfSpace,
) -> Result<ConstrainedFit, TestError> {
    let k = g.len();
    if cov.len() != k || cov.iter().any(|r| r.len() != k) {
        return Err(TestError::InvalidConfig("covariance shape does not match estimate".into()));
    }
    let cov = DMatrix::from_fn(k, k, |i, j| cov[i][j]);
    let (p, regularized) = precision(&cov)?;
    solve_piece(&DVector::from_column_slice(g), &p, piece, regularized)
}

fn solve_piece(
    g: &DVector<f64>,
    p: &DMatrix<f64>,
    piece: HalfSpace,
    regularized: bool,
) -> Result<ConstrainedFit, TestError> {
    let k = g.len();
    // constraint rows: 0 = piece, 1..=k = nonnegativity of each coordinate
    let (piece_row, piece_rhs) = piece.row(k);
    let row = |i: usize| -> DVector<f64> {
        if i == 0 {
            piece_row.clone()
        } else {
            let mut e = DVector::zeros(k);
            e[i - 1] = 1.0;
            e
        }
    };
    let rhs = |i: usize| if i == 0 { piece_rhs } else { 0.0 };
    let objective = |x: &DVector<f64>| {
        let d = g - x;
        (d.transpose() * p * &d)[(0, 0)]
    };
    let feasible = (0..=k).all(|i| row(i).dot(g) >= rhs(i));
    if feasible {
        return Ok(ConstrainedFit { x: g.as_slice().to_vec(), objective: 0.0, regularized });
    }

    let tol = 1e-12 * (1.0 + g.amax());
    let mut x = piece.feasible_start(g);
    let mut working: Vec<usize> = Vec::new();
    // after an unblocked full step x minimizes over the working face
    let mut stationary = false;
    for _ in 0..MAX_ACTIVE_SET_ITERS {
        // equality-constrained step: min 1/2 s'Ps + grad's  s.t.  a_i's = 0, i in W
        let grad = p * (&x - g);
        let m = working.len();
        let mut kkt = DMatrix::zeros(k + m, k + m);
        kkt.view_mut((0, 0), (k, k)).copy_from(p);
        for (j, &i) in working.iter().enumerate() {
            let a = row(i);
            for c in 0..k {
                kkt[(c, k + j)] = a[c];
                kkt[(k + j, c)] = a[c];
            }
        }
        let mut b = DVector::zeros(k + m);
        b.rows_mut(0, k).copy_from(&(-&grad));
        let sol = kkt.lu().solve(&b).ok_or(TestError::SingularCovariance)?;
        let step = sol.rows(0, k).into_owned();

        if stationary || step.amax() <= tol {
            stationary = false;
            // multipliers: grad = sum lambda_i a_i, so lambda = -mu
            let lambdas: Vec<f64> = (0..m).map(|j| -sol[k + j]).collect();
            match lambdas
                .iter()
                .enumerate()
                .filter(|(_, &l)| l < -1e-12)
                .min_by(|a, b| a.1.total_cmp(b.1))
            {
                None => {
                    return Ok(ConstrainedFit {
                        objective: objective(&x),
                        x: x.as_slice().to_vec(),
                        regularized,
                    })
                }
                Some((j, _)) => {
                    working.remove(j);
                }
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for i in (0..=k).filter(|i| !working.contains(i)) {
            let a = row(i);
            let slope = a.dot(&step);
            if slope < 0.0 {
                let ratio = ((rhs(i) - a.dot(&x)) / slope).max(0.0);
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
        }
        x += step * alpha;
        match blocking {
            Some(i) => working.push(i),
            None => stationary = true,
        }
    }
    Err(TestError::NoConvergence(MAX_ACTIVE_SET_ITERS))
}

/// Likelihood-ratio-type test referred to a `chi^2(k)` quantile, `k` the estimate dimension.
pub fn lrt_test(est: &JointRREstimate, cfg: &NITestConfig) -> Result<TestOutcome, TestError> {
    let r = check_inputs(est, cfg)?;
    let k = est.arms.len();
    let n = est.n as f64;
    let cov = DMatrix::from_fn(k, k, |i, j| est.sigma_gamma[i][j] / n);
    let (p, regularized) = precision(&cov)?;
    let g = DVector::from_column_slice(&est.gamma);

    let mut pieces = vec![(None, HalfSpace::Threshold { index: r, delta: cfg.delta })];
    for (a, &arm) in est.arms.iter().enumerate().filter(|&(a, _)| a != r) {
        pieces.push((
            Some(arm),
            HalfSpace::Margin { index: r, other: a, epsilon: cfg.epsilon },
        ));
    }
    let fits = pieces
        .into_iter()
        .map(|(comparator, piece)| {
            solve_piece(&g, &p, piece, regularized).map(|fit| PieceFit {
                comparator,
                objective: fit.objective,
                gamma_star: fit.x,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let statistic = fits
        .iter()
        .map(|f| f.objective)
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let critical_value = chi_square_quantile(k, 1.0 - cfg.alpha);
    Ok(TestOutcome {
        method: TestMethod::Lrt,
        reject: statistic > critical_value,
        config: cfg.clone(),
        t: est.t,
        v: est.v.clone(),
        arms: est.arms.clone(),
        marginals: Vec::new(),
        lrt: Some(LrtDetail {
            statistic,
            critical_value,
            df: k,
            pieces: fits,
            regularized,
        }),
    })
}

pub fn chi_square_quantile(df: usize, p: f64) -> f64 {
    ChiSquared::new(df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(p)
}

pub fn run_test(est: &JointRREstimate, cfg: &NITestConfig, method: TestMethod) -> Result<TestOutcome, TestError> {
    match method {
        TestMethod::Intersection => intersection_test(est, cfg),
        TestMethod::Lrt => lrt_test(est, cfg),
    }
}
