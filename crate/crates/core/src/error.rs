use thiserror::Error;

use crate::data::{Arm, DataError};

/// Failures of the estimators (curves, relative risks, covariances, contrasts).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("empty stratum (arm {arm}, z {z})")]
    EmptyStratum { arm: Arm, z: String },
    #[error("no records in context (arm {arm}, v {v})")]
    EmptyContext { arm: Arm, v: String },
    #[error("covariate cell z={z} present in context but empty for arm {arm}")]
    MissingCell { arm: Arm, z: String },
    #[error("no control events by t={t} for arm {arm}")]
    NoControlEvents { arm: Arm, t: f64 },
    #[error("zero control cumulative hazard at t={t} for arm {arm}, z {z}")]
    ZeroControlHazard { arm: Arm, z: String, t: f64 },
    #[error("relative risk undefined for arm {arm}: {reason}")]
    UndefinedRelativeRisk { arm: Arm, reason: String },
    #[error("arm {0} not present in estimate")]
    ArmNotInEstimate(Arm),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Failures of the noninferiority tests and the constrained Gaussian fit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TestError {
    #[error("invalid test configuration: {0}")]
    InvalidConfig(String),
    #[error("covariance matrix is singular after regularization")]
    SingularCovariance,
    #[error("active-set solver did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

/// Failures of the simulator and the Monte Carlo harness.
#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("infeasible target share {target}: feasible range is [{min:.6}, {max:.6}]")]
    InfeasibleShare { target: f64, min: f64, max: f64 },
    #[error("replication {rep} (seed {seed}) failed: {source}")]
    Replication {
        rep: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Crate-wide error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Test(#[from] TestError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
}

impl Error {
    /// `true` for problems with inputs (files, labels, configuration) as opposed to failures
    /// of a computation on valid inputs.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Data(_) => true,
            Error::Estimation(EstimationError::InvalidInput(_)) => true,
            Error::Estimation(EstimationError::ArmNotInEstimate(_)) => true,
            Error::Test(TestError::InvalidConfig(_)) => true,
            Error::Simulation(SimulationError::InvalidScenario(_)) => true,
            Error::Simulation(SimulationError::Data(_)) => true,
            Error::Simulation(SimulationError::InfeasibleShare { .. }) => true,
            Error::Simulation(SimulationError::Replication { source, .. }) => {
                source.is_input_error()
            }
            _ => false,
        }
    }
}

impl EstimationError {
    /// `true` when the estimate is undefined because of the particular sample drawn (an empty
    /// cell or no events), as opposed to a malformed request.
    pub fn is_sample_degeneracy(&self) -> bool {
        matches!(
            self,
            EstimationError::EmptyStratum { .. }
                | EstimationError::EmptyContext { .. }
                | EstimationError::MissingCell { .. }
                | EstimationError::NoControlEvents { .. }
                | EstimationError::ZeroControlHazard { .. }
                | EstimationError::UndefinedRelativeRisk { .. }
        )
    }
}

impl Error {
    pub fn is_sample_degeneracy(&self) -> bool {
        match self {
            Error::Estimation(e) | Error::Test(TestError::Estimation(e)) => e.is_sample_degeneracy(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
