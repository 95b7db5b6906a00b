//! Event/state data model and the scalar helpers every bound is built from.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One round's realized privacy parameters.
///
/// `eps = delta = 0` is the analyst's "stopped" signal: it contributes
/// nothing to any accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyEvent {
    pub eps: f64,
    pub delta: f64,
}

impl PrivacyEvent {
    pub fn new(eps: f64, delta: f64) -> Result<Self> {
        if !(eps >= 0.0) || !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidEvent { eps, delta });
        }
        Ok(Self { eps, delta })
    }

    /// The zero event: analyst stopped, nothing is spent.
    pub const ZERO: PrivacyEvent = PrivacyEvent { eps: 0.0, delta: 0.0 };

    pub fn is_zero(&self) -> bool {
        self.eps == 0.0 && self.delta == 0.0
    }
}

/// Streaming accumulators; every implemented bound is a function of
/// these sums only, so querying the bound mid-stream is the same as
/// querying it on the full stream with all future parameters zeroed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AccountState {
    /// Sum of eps_i.
    pub sum_eps: f64,
    /// Sum of eps_i^2.
    pub sum_eps_sq: f64,
    /// Sum of delta_i.
    pub sum_delta: f64,
    /// Sum of the per-round mean-loss bounds eps_i (e^eps_i - 1) / 2.
    pub sum_mu: f64,
    /// Number of rounds folded in.
    pub rounds: u64,
}

impl AccountState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pure functional update: returns the state with one more event
    /// folded in, leaving `self` untouched.
    #[must_use]
    pub fn update(&self, event: PrivacyEvent) -> AccountState {
        AccountState {
            sum_eps: self.sum_eps + event.eps,
            sum_eps_sq: self.sum_eps_sq + event.eps * event.eps,
            sum_delta: self.sum_delta + event.delta,
            sum_mu: self.sum_mu + mu_upper(event.eps),
            rounds: self.rounds + 1,
        }
    }

    /// Combines two independently accumulated states.
    #[must_use]
    pub fn merge(&self, other: &AccountState) -> AccountState {
        AccountState {
            sum_eps: self.sum_eps + other.sum_eps,
            sum_eps_sq: self.sum_eps_sq + other.sum_eps_sq,
            sum_delta: self.sum_delta + other.sum_delta,
            sum_mu: self.sum_mu + other.sum_mu,
            rounds: self.rounds + other.rounds,
        }
    }

    /// The same eps accumulators with the delta mass dropped. Used by
    /// the delta-reduction wrapper, which accounts for delta separately.
    #[must_use]
    pub fn with_zero_delta(&self) -> AccountState {
        AccountState { sum_delta: 0.0, ..*self }
    }
}

/// Fold a sequence of events into a fresh state.
pub fn fold_events<I: IntoIterator<Item = PrivacyEvent>>(events: I) -> AccountState {
    events
        .into_iter()
        .fold(AccountState::new(), |s, e| s.update(e))
}

/// Upper bound on the mean per-round privacy loss: eps (e^eps - 1) / 2.
///
/// Uses expm1 so the eps^2/2 behaviour near zero is not lost to
/// cancellation.
pub fn mu_upper(eps: f64) -> f64 {
    eps * f64::exp_m1(eps) / 2.0
}

/// Exact mean per-round loss of randomized response on input 0:
/// eps (e^eps - 1) / (e^eps + 1) = eps * tanh(eps / 2).
pub fn rr_mean_loss(eps: f64) -> f64 {
    eps * f64::tanh(eps / 2.0)
}

/// A real bound that may be infinite. Infinity compares greater than
/// every finite value, which is exactly f64 comparison semantics; the
/// newtype exists so "no finite bound holds" is an explicit state
/// rather than a sentinel.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ExtendedReal(f64);

impl ExtendedReal {
    pub const INFINITY: ExtendedReal = ExtendedReal(f64::INFINITY);

    pub fn finite(value: f64) -> Self {
        debug_assert!(value.is_finite());
        ExtendedReal(value)
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }
}

impl std::fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}
