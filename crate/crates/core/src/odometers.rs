//! Privacy odometers: running high-probability upper bounds on the
//! realized privacy loss, plus the delta-reduction wrapper that lifts
//! delta_i = 0 constructions to general delta_i streams.
//!
//! The odometer only reports; enforcement is the filter module's job.

use serde::{Deserialize, Serialize};

use crate::filters::FilterDecision;
use crate::state::{AccountState, ExtendedReal};
use crate::{Error, Result, Verdict};

/// Configuration of the advanced odometer.
///
/// The failure-probability factor is ln(4 log2(n) / delta_g): a union
/// bound over the log2(n^2) = 2 log2(n) grid values for the
/// concentration pivot, each charged delta_g / (2 log2(n^2)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdometerConfig {
    pub delta_g: f64,
    /// Extra delta budget consumed by the delta-reduction wrapper; the
    /// wrapped object fails with probability at most delta_g + delta_prime.
    pub delta_prime: f64,
    /// Dataset-size parameter; sets the default granularity 1/n^2.
    pub n: u64,
    /// Granularity: lower cutoff of the pivot grid {gamma, 2 gamma, .., 1}.
    pub gamma: f64,
}

impl OdometerConfig {
    pub fn new(delta_g: f64, n: u64) -> Result<Self> {
        let nf = n as f64;
        Self::with_gamma(delta_g, n, 1.0 / (nf * nf))
    }

    pub fn with_gamma(delta_g: f64, n: u64, gamma: f64) -> Result<Self> {
        if !(delta_g > 0.0 && delta_g < std::f64::consts::E.recip()) {
            return Err(Error::DeltaOutOfRange(delta_g, "(0, 1/e)"));
        }
        if n < 2 {
            return Err(Error::BadN(n));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::BadGamma(gamma));
        }
        Ok(OdometerConfig { delta_g, delta_prime: 0.0, n, gamma })
    }

    pub fn with_delta_prime(mut self, delta_prime: f64) -> Self {
        self.delta_prime = delta_prime;
        self
    }

    /// Union-bound count over the pivot grid: log2(1/gamma). With the
    /// default gamma = 1/n^2 this is 2 log2(n), giving the
    /// ln(4 log2(n) / delta_g) factor in the main-branch reading.
    pub fn grid_count(&self) -> f64 {
        (1.0 / self.gamma).log2()
    }
}

/// Which formula produced a reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Basic,
    Beta,
    MainRange,
    OutOfRange,
    InfiniteDelta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometerReading {
    pub bound: ExtendedReal,
    pub branch: Branch,
}

impl OdometerReading {
    fn finite(value: f64, branch: Branch) -> Self {
        OdometerReading { bound: ExtendedReal::finite(value), branch }
    }

    fn infinite() -> Self {
        OdometerReading { bound: ExtendedReal::INFINITY, branch: Branch::InfiniteDelta }
    }
}

/// Basic composition odometer: infinity once the delta mass exceeds
/// delta_g, otherwise the plain sum of the eps_i.
pub fn basic_odometer(state: &AccountState, delta_g: f64) -> OdometerReading {
    if state.sum_delta > delta_g {
        OdometerReading::infinite()
    } else {
        OdometerReading::finite(state.sum_eps, Branch::Basic)
    }
}

/// One-pivot concentration odometer, valid for delta_i = 0 streams:
///
/// sum mu_j + sqrt(2 (S + beta) (1 + ln(S/beta + 1)/2) ln(2/delta_g))
///
/// with S = sum eps_i^2, for any fixed beta > 0 chosen before the run.
pub fn beta_odometer(state: &AccountState, delta_g: f64, beta: f64) -> Result<f64> {
    if !(delta_g > 0.0 && delta_g < std::f64::consts::E.recip()) {
        return Err(Error::DeltaOutOfRange(delta_g, "(0, 1/e)"));
    }
    if !(beta > 0.0) {
        return Err(Error::NonPositiveBeta(beta));
    }
    let s = state.sum_eps_sq;
    let root = (2.0 * (s + beta) * (1.0 + 0.5 * (s / beta).ln_1p()) * (2.0 / delta_g).ln()).sqrt();
    Ok(state.sum_mu + root)
}

/// Advanced privacy odometer. Infinity once sum delta_i > delta_g / 2;
/// otherwise the grid-pivot bound, with the formula branching on
/// whether S = sum eps_i^2 lies in the covered range [gamma, 1]:
///
/// in range:  sum mu_j + 2 sqrt(S (1 + ln sqrt 3) ln(2 m / delta_g))
/// otherwise: sum mu_j + sqrt(2 (gamma + S) (1 + ln(1 + S/gamma)/2) ln(2 m / delta_g))
///
/// where m = log2(1/gamma) is the grid size.
pub fn advanced_odometer(state: &AccountState, cfg: &OdometerConfig) -> OdometerReading {
    if state.sum_delta > cfg.delta_g / 2.0 {
        return OdometerReading::infinite();
    }
    let s = state.sum_eps_sq;
    let log_factor = (2.0 * cfg.grid_count() / cfg.delta_g).ln();
    if (cfg.gamma..=1.0).contains(&s) {
        let root = 2.0 * (s * (1.0 + 3f64.sqrt().ln()) * log_factor).sqrt();
        OdometerReading::finite(state.sum_mu + root, Branch::MainRange)
    } else {
        let root =
            (2.0 * (cfg.gamma + s) * (1.0 + 0.5 * (s / cfg.gamma).ln_1p()) * log_factor).sqrt();
        OdometerReading::finite(state.sum_mu + root, Branch::OutOfRange)
    }
}

/// Delta-reduction wrapper for odometers: the wrapped odometer reports
/// infinity once sum delta_i > delta_prime and otherwise delegates to
/// the inner odometer with the delta mass zeroed. If the inner odometer
/// is valid on delta_i = 0 streams at failure probability delta_g, the
/// wrapped one is valid on general streams at delta_g + delta_prime.
pub fn wrap_delta_reduction_odometer<F>(
    inner: F,
    delta_prime: f64,
) -> impl Fn(&AccountState) -> OdometerReading
where
    F: Fn(&AccountState) -> OdometerReading,
{
    move |state| {
        if state.sum_delta > delta_prime {
            OdometerReading::infinite()
        } else {
            inner(&state.with_zero_delta())
        }
    }
}

/// Delta-reduction wrapper for filters: HALT once sum delta_i >
/// delta_prime, otherwise the inner filter on the delta-zeroed state.
pub fn wrap_delta_reduction_filter<F>(
    inner: F,
    delta_prime: f64,
) -> impl Fn(&AccountState) -> Result<FilterDecision>
where
    F: Fn(&AccountState) -> Result<FilterDecision>,
{
    move |state| {
        if state.sum_delta > delta_prime {
            Ok(FilterDecision { verdict: Verdict::Halt, bound_value: ExtendedReal::INFINITY })
        } else {
            inner(&state.with_zero_delta())
        }
    }
}
