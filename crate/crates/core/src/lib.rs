//! Streaming accounting for differential-privacy compositions whose
//! privacy parameters are chosen adaptively.
//!
//! The crate has two halves. The accounting half is a set of pure
//! functions of an [`AccountState`]: privacy [`odometers`] (running
//! high-probability upper bounds on the realized privacy loss) and
//! privacy [`filters`] (stopping rules that keep the loss below a
//! global budget). The simulation half ([`rr`], [`game`], [`audit`])
//! plays the composition game against randomized response and
//! estimates each bound's empirical failure probability, so every
//! shipped bound can be checked against the failure probability it
//! claims.

pub mod adversary;
pub mod audit;
pub mod concentration;
pub mod filters;
pub mod game;
pub mod odometers;
pub mod rr;
pub mod state;

pub use adversary::{
    Adversary, AdversarySpec, ConstantEps, GeometricDecay, LuckyStreak, RandomizedEps,
    StoppingTime,
};
pub use audit::{AuditReport, AuditSpec, FilterTarget, OdometerTarget, Target};
pub use filters::{FilterBudget, FilterDecision, Verdict};
pub use odometers::{Branch, OdometerConfig, OdometerReading};
pub use rr::RrOutcome;
pub use state::{AccountState, ExtendedReal, PrivacyEvent};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("invalid privacy event: eps = {eps}, delta = {delta}")]
    InvalidEvent { eps: f64, delta: f64 },
    #[error("delta_g = {0} outside the required range ({1})")]
    DeltaOutOfRange(f64, &'static str),
    #[error("beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("eps_g must be positive, got {0}")]
    NonPositiveEpsBudget(f64),
    #[error("delta_split = {0} outside (0, 1)")]
    BadDeltaSplit(f64),
    #[error("granularity gamma = {0} outside (0, 1]")]
    BadGamma(f64),
    #[error("odometer dataset-size parameter n = {0} must be at least 2")]
    BadN(u64),
    #[error("audit requires at least 1000 trials, got {0}")]
    TooFewTrials(u64),
    #[error("audit spec has no {0}")]
    EmptyAudit(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
