//! Adversary strategies for the composition games. A strategy sees only
//! the released outcomes (never the secret bit b) and picks the next
//! round's privacy parameters; emitting (0, 0) is the "stopped" signal.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rr::RrOutcome;
use crate::state::{rr_mean_loss, PrivacyEvent};

pub trait Adversary {
    /// Parameters for the upcoming round. `round` is 0-based.
    fn next_event(&mut self, round: u64, rng: &mut ChaCha8Rng) -> PrivacyEvent;

    /// Feeds back the released outcome of the round just played.
    fn observe(&mut self, outcome: RrOutcome);

    /// True once the strategy will emit (0, 0) forever; lets game loops
    /// stop early, since zero rounds change neither state nor loss.
    fn done(&self) -> bool {
        false
    }
}

/// Declarative description of a strategy; instantiated fresh per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversarySpec {
    /// Same (eps, delta) every round for a fixed horizon.
    ConstantEps { eps: f64, delta: f64, rounds: u64 },
    /// eps_0 * ratio^i per round.
    GeometricDecay { eps0: f64, ratio: f64, rounds: u64 },
    /// eps drawn uniformly from [0, eps_max) each round.
    RandomizedEps { eps_max: f64, delta: f64, rounds: u64 },
    /// Plays RR_eps and stops once its centered loss walk crosses
    /// c * eps * sqrt(t * ln(ln(n)/delta_g)).
    StoppingTime { eps: f64, delta_g: f64, c: f64, n: u64 },
    /// Spends eps_hi whenever the loss path so far is at or below zero,
    /// eps_lo otherwise; stress-tests adaptivity.
    LuckyStreak { eps_lo: f64, eps_hi: f64, rounds: u64 },
}

impl AdversarySpec {
    pub fn instantiate(&self) -> Box<dyn Adversary + Send> {
        match *self {
            AdversarySpec::ConstantEps { eps, delta, rounds } => {
                Box::new(ConstantEps { eps, delta, rounds, played: 0 })
            }
            AdversarySpec::GeometricDecay { eps0, ratio, rounds } => {
                Box::new(GeometricDecay { ratio, rounds, current: eps0, played: 0 })
            }
            AdversarySpec::RandomizedEps { eps_max, delta, rounds } => {
                Box::new(RandomizedEps { eps_max, delta, rounds, played: 0 })
            }
            AdversarySpec::StoppingTime { eps, delta_g, c, n } => {
                Box::new(stopping_time_adversary(eps, delta_g, c, n))
            }
            AdversarySpec::LuckyStreak { eps_lo, eps_hi, rounds } => Box::new(LuckyStreak {
                eps_lo,
                eps_hi,
                rounds,
                played: 0,
                cumulative: 0.0,
                last_eps: 0.0,
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstantEps {
    eps: f64,
    delta: f64,
    rounds: u64,
    played: u64,
}

impl Adversary for ConstantEps {
    fn next_event(&mut self, _round: u64, _rng: &mut ChaCha8Rng) -> PrivacyEvent {
        if self.played >= self.rounds {
            return PrivacyEvent::ZERO;
        }
        self.played += 1;
        PrivacyEvent { eps: self.eps, delta: self.delta }
    }

    fn observe(&mut self, _outcome: RrOutcome) {}

    fn done(&self) -> bool {
        self.played >= self.rounds
    }
}

#[derive(Debug, Clone)]
pub struct GeometricDecay {
    ratio: f64,
    rounds: u64,
    current: f64,
    played: u64,
}

impl Adversary for GeometricDecay {
    fn next_event(&mut self, _round: u64, _rng: &mut ChaCha8Rng) -> PrivacyEvent {
        if self.played >= self.rounds {
            return PrivacyEvent::ZERO;
        }
        let eps = self.current;
        self.current *= self.ratio;
        self.played += 1;
        PrivacyEvent { eps, delta: 0.0 }
    }

    fn observe(&mut self, _outcome: RrOutcome) {}

    fn done(&self) -> bool {
        self.played >= self.rounds
    }
}

#[derive(Debug, Clone)]
pub struct RandomizedEps {
    eps_max: f64,
    delta: f64,
    rounds: u64,
    played: u64,
}

impl Adversary for RandomizedEps {
    fn next_event(&mut self, _round: u64, rng: &mut ChaCha8Rng) -> PrivacyEvent {
        if self.played >= self.rounds {
            return PrivacyEvent::ZERO;
        }
        self.played += 1;
        PrivacyEvent { eps: rng.random::<f64>() * self.eps_max, delta: self.delta }
    }

    fn observe(&mut self, _outcome: RrOutcome) {}

    fn done(&self) -> bool {
        self.played >= self.rounds
    }
}

/// The stopping-time strategy: fixed eps per round, tracking the walk
/// X_i = +/-eps centered by the exact per-round mean, stopping forever
/// once the walk crosses c * eps * sqrt(t * ln(ln(n)/delta_g)) or n
/// rounds have elapsed.
#[derive(Debug, Clone)]
pub struct StoppingTime {
    eps: f64,
    c: f64,
    n: u64,
    log_log_factor: f64,
    centered_walk: f64,
    played: u64,
    stopped: bool,
}

pub fn stopping_time_adversary(eps: f64, delta_g: f64, c: f64, n: u64) -> StoppingTime {
    assert!(eps > 0.0 && c > 0.0 && n >= 2);
    StoppingTime {
        eps,
        c,
        n,
        log_log_factor: ((n as f64).ln() / delta_g).ln(),
        centered_walk: 0.0,
        played: 0,
        stopped: false,
    }
}

impl StoppingTime {
    pub fn stop_round(&self) -> Option<u64> {
        self.stopped.then_some(self.played)
    }

    /// Threshold the centered walk is compared against after round t.
    pub fn threshold(&self, t: u64) -> f64 {
        self.c * self.eps * (t as f64 * self.log_log_factor).sqrt()
    }
}

impl Adversary for StoppingTime {
    fn next_event(&mut self, _round: u64, _rng: &mut ChaCha8Rng) -> PrivacyEvent {
        if self.done() {
            return PrivacyEvent::ZERO;
        }
        self.played += 1;
        PrivacyEvent { eps: self.eps, delta: 0.0 }
    }

    fn observe(&mut self, outcome: RrOutcome) {
        if self.stopped {
            return;
        }
        let x = match outcome {
            RrOutcome::Top | RrOutcome::Zero => self.eps,
            RrOutcome::Bot | RrOutcome::One => -self.eps,
        };
        self.centered_walk += x - rr_mean_loss(self.eps);
        if self.centered_walk >= self.threshold(self.played) {
            self.stopped = true;
        }
    }

    fn done(&self) -> bool {
        self.stopped || self.played >= self.n
    }
}

#[derive(Debug, Clone)]
pub struct LuckyStreak {
    eps_lo: f64,
    eps_hi: f64,
    rounds: u64,
    played: u64,
    cumulative: f64,
    last_eps: f64,
}

impl Adversary for LuckyStreak {
    fn next_event(&mut self, _round: u64, _rng: &mut ChaCha8Rng) -> PrivacyEvent {
        if self.played >= self.rounds {
            return PrivacyEvent::ZERO;
        }
        self.played += 1;
        let eps = if self.cumulative <= 0.0 { self.eps_hi } else { self.eps_lo };
        self.last_eps = eps;
        PrivacyEvent { eps, delta: 0.0 }
    }

    fn observe(&mut self, outcome: RrOutcome) {
        match outcome {
            RrOutcome::Top => self.cumulative += self.last_eps,
            RrOutcome::Bot => self.cumulative -= self.last_eps,
            RrOutcome::Zero => self.cumulative = f64::INFINITY,
            RrOutcome::One => self.cumulative = f64::NEG_INFINITY,
        }
    }

    fn done(&self) -> bool {
        self.played >= self.rounds
    }
}
