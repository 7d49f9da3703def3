//! Covariate-adjusted relative risks of several interventions against a shared,
//! contemporaneous control arm in platform trials.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`]: participant records, trial designs, CSV/JSON ingestion and validation.
//! * [`survival`]: stratified counting processes, Nelson-Aalen and Kaplan-Meier curves,
//!   empirical covariate laws and the plug-in relative risk.
//! * [`influence`]: per-record influence functions and the joint covariance of the
//!   relative-risk vector induced by control sharing.
//! * [`contrast`]: relative-efficacy contrasts, delta-method variances and Wald intervals
//!   for platform and separate-trial data.
//! * [`noninferiority`]: the adaptive intersection test and the likelihood-ratio-type test.
//! * [`simulator`]: synthetic platform and separate trials, shared-control resampling and a
//!   seeded Monte Carlo harness.
//! * [`repro`]: canned Monte Carlo studies that regenerate the published operating
//!   characteristics.
//! * [`cli`]: the `platform-trial` command-line front end.

pub mod cli;
pub mod contrast;
pub mod data;
pub mod error;
pub mod influence;
pub mod noninferiority;
pub mod quantile;
pub mod repro;
pub mod simulator;
pub mod survival;

pub use contrast::{CIResult, Contrast, ContrastEstimate};
pub use data::{
    Arm, CoarseningMap, Dataset, DatasetKind, ParticipantRecord, TrialDesign, WindowSet, CONTROL,
};
pub use error::Error;
pub use influence::{JointRREstimate, PluginContext};
pub use noninferiority::{NITestConfig, TestOutcome};
pub use survival::{RREstimate, StratifiedCurve, StratumKey, SurvivalMethod};
