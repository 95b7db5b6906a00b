//! Randomized response over the four-outcome range {0, top, bot, 1}:
//! the canonical mechanism every (eps, delta)-DP algorithm can be
//! post-processed from, and therefore the only mechanism the
//! composition games need to simulate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RrOutcome {
    #[serde(rename = "0")]
    Zero,
    Top,
    Bot,
    #[serde(rename = "1")]
    One,
}

pub const ALL_OUTCOMES: [RrOutcome; 4] =
    [RrOutcome::Zero, RrOutcome::Top, RrOutcome::Bot, RrOutcome::One];

/// Probability table of RR_{eps,delta}(b) over [Zero, Top, Bot, One].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrDistribution {
    probs: [f64; 4],
}

impl RrDistribution {
    pub fn prob(&self, outcome: RrOutcome) -> f64 {
        self.probs[outcome as usize]
    }

    pub fn probs(&self) -> [f64; 4] {
        self.probs
    }
}

fn validate(eps: f64, delta: f64) -> Result<()> {
    if !(eps >= 0.0) || !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidEvent { eps, delta });
    }
    Ok(())
}

/// The exact outcome distribution of RR_{eps,delta}(b).
///
/// On input 0: Zero with probability delta, One never, and the
/// remaining mass split e^eps : 1 between Top and Bot. Input 1 mirrors
/// the table (Zero <-> One, Top <-> Bot).
pub fn rr_distribution(eps: f64, delta: f64, b: bool) -> Result<RrDistribution> {
    validate(eps, delta)?;
    // e^eps / (1 + e^eps) computed as the logistic function for
    // stability at large eps.
    let p_heavy = 1.0 / (1.0 + (-eps).exp());
    let p_light = 1.0 - p_heavy;
    let top = (1.0 - delta) * if b { p_light } else { p_heavy };
    let bot = (1.0 - delta) * if b { p_heavy } else { p_light };
    let (zero, one) = if b { (0.0, delta) } else { (delta, 0.0) };
    Ok(RrDistribution { probs: [zero, top, bot, one] })
}

/// One draw from RR_{eps,delta}(b).
pub fn rr_sample<R: Rng + ?Sized>(eps: f64, delta: f64, b: bool, rng: &mut R) -> Result<RrOutcome> {
    let dist = rr_distribution(eps, delta, b)?;
    Ok(sample_from(&dist, rng))
}

pub fn sample_from<R: Rng + ?Sized>(dist: &RrDistribution, rng: &mut R) -> RrOutcome {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in dist.probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return ALL_OUTCOMES[i];
        }
    }
    RrOutcome::One
}

/// Per-round privacy loss of an outcome: the log-ratio of the b = 0 and
/// b = 1 rows of the table. Top is +eps, Bot is -eps; Zero and One are
/// the one-sided outcomes and carry infinite loss (they can only occur
/// when delta > 0).
pub fn outcome_loss(eps: f64, delta: f64, outcome: RrOutcome) -> Result<f64> {
    validate(eps, delta)?;
    Ok(match outcome {
        RrOutcome::Zero => f64::INFINITY,
        RrOutcome::Top => eps,
        RrOutcome::Bot => -eps,
        RrOutcome::One => f64::NEG_INFINITY,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn table_at_eps_zero() {
        let d = rr_distribution(0.0, 0.0, false).unwrap();
        assert_eq!(d.probs(), [0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn table_at_ln2() {
        let d = rr_distribution(std::f64::consts::LN_2, 0.0, false).unwrap();
        assert!((d.prob(RrOutcome::Top) - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.prob(RrOutcome::Bot) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn table_with_delta_on_input_one() {
        let d = rr_distribution(std::f64::consts::LN_2, 0.1, true).unwrap();
        assert_eq!(d.prob(RrOutcome::Zero), 0.0);
        assert!((d.prob(RrOutcome::Top) - 0.9 / 3.0).abs() < 1e-15);
        assert!((d.prob(RrOutcome::Bot) - 0.9 * 2.0 / 3.0).abs() < 1e-15);
        assert!((d.prob(RrOutcome::One) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn tables_sum_to_one_and_mirror() {
        for eps in [0.0, 0.01, 0.3, 1.0, 5.0] {
            for delta in [0.0, 0.1, 0.5, 0.9] {
                let d0 = rr_distribution(eps, delta, false).unwrap();
                let d1 = rr_distribution(eps, delta, true).unwrap();
                let sum0: f64 = d0.probs().iter().sum();
                let sum1: f64 = d1.probs().iter().sum();
                assert!((sum0 - 1.0).abs() < 1e-12);
                assert!((sum1 - 1.0).abs() < 1e-12);
                assert_eq!(d0.prob(RrOutcome::Zero), d1.prob(RrOutcome::One));
                assert_eq!(d0.prob(RrOutcome::Top), d1.prob(RrOutcome::Bot));
                assert_eq!(d0.prob(RrOutcome::Bot), d1.prob(RrOutcome::Top));
            }
        }
    }

    #[test]
    fn delta_one_is_all_zero_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(rr_sample(0.7, 1.0, false, &mut rng).unwrap(), RrOutcome::Zero);
        }
    }

    #[test]
    fn sampling_is_deterministic_given_seed() {
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            (0..32)
                .map(|_| rr_sample(0.3, 0.05, false, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn losses_match_log_ratios() {
        assert_eq!(outcome_loss(0.3, 0.0, RrOutcome::Top).unwrap(), 0.3);
        assert_eq!(outcome_loss(0.3, 0.0, RrOutcome::Bot).unwrap(), -0.3);
        assert_eq!(outcome_loss(0.3, 0.1, RrOutcome::Zero).unwrap(), f64::INFINITY);
        assert_eq!(outcome_loss(0.3, 0.1, RrOutcome::One).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(rr_distribution(-0.1, 0.0, false).is_err());
        assert!(rr_distribution(0.1, 1.5, false).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(rr_sample(-1.0, 0.0, false, &mut rng).is_err());
    }
}
