//! The composition games: an adversary picks per-round parameters, the
//! game answers with randomized response outcomes, and the trace keeps
//! the privacy-loss bookkeeping.

use rand_chacha::ChaCha8Rng;

use crate::adversary::Adversary;
use crate::filters::FilterDecision;
use crate::rr::{outcome_loss, rr_sample, RrOutcome};
use crate::state::{AccountState, PrivacyEvent};
use crate::Result;

/// One round of a trace. `outcome` is `None` for a round the filter
/// refused to release.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub event: PrivacyEvent,
    pub outcome: Option<RrOutcome>,
    pub loss_increment: f64,
}

/// A realized run of a composition game.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rounds: Vec<RoundRecord>,
    /// Prefix sums of the loss increments. Once an infinite increment
    /// occurs the path saturates at +/- infinity.
    pub cumulative: Vec<f64>,
    /// First round (1-based) at which the adversary emitted (0, 0), if
    /// it did.
    pub stop_round: Option<u64>,
    /// True if any increment was infinite; such a trace exceeds every
    /// finite bound.
    pub saturated: bool,
}

impl Trace {
    pub fn final_loss(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    fn push(&mut self, record: RoundRecord) {
        let prev = self.cumulative.last().copied().unwrap_or(0.0);
        let next = saturating_add(prev, record.loss_increment);
        if record.loss_increment.is_infinite() {
            self.saturated = true;
        }
        self.rounds.push(record);
        self.cumulative.push(next);
    }

    /// JSON-lines export, one record per round. Infinite increments are
    /// serialized as the strings "inf" / "-inf".
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (i, (rec, cum)) in self.rounds.iter().zip(&self.cumulative).enumerate() {
            let outcome = match rec.outcome {
                Some(RrOutcome::Zero) => "0",
                Some(RrOutcome::Top) => "top",
                Some(RrOutcome::Bot) => "bot",
                Some(RrOutcome::One) => "1",
                None => "null",
            };
            out.push_str(&format!(
                "{{\"round\":{},\"eps\":{},\"delta\":{},\"outcome\":\"{}\",\"loss_increment\":{},\"loss_cumulative\":{}}}\n",
                i + 1,
                fmt_num(rec.event.eps),
                fmt_num(rec.event.delta),
                outcome,
                fmt_num(rec.loss_increment),
                fmt_num(*cum),
            ));
        }
        out
    }
}

/// Sum that pins the path at +/- infinity once an infinite increment
/// has been seen, instead of producing NaN on mixed signs.
pub fn saturating_add(acc: f64, increment: f64) -> f64 {
    if acc.is_infinite() {
        acc
    } else {
        acc + increment
    }
}

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "\"inf\"".to_string()
    } else if x == f64::NEG_INFINITY {
        "\"-inf\"".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Plays the simulated composition game: every round the adversary
/// names (eps_i, delta_i), randomized response runs on the secret bit
/// b, and the outcome (with its exact log-ratio loss) is recorded and
/// fed back. Stops early once the adversary reports it is done, since
/// zero rounds change nothing.
pub fn run_game(
    adversary: &mut dyn Adversary,
    max_rounds: u64,
    b: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Trace> {
    let mut trace = Trace::default();
    for round in 0..max_rounds {
        if adversary.done() {
            break;
        }
        let event = adversary.next_event(round, rng);
        PrivacyEvent::new(event.eps, event.delta)?;
        if event.is_zero() && trace.stop_round.is_none() {
            trace.stop_round = Some(round + 1);
        }
        let outcome = rr_sample(event.eps, event.delta, b, rng)?;
        let loss = outcome_loss(event.eps, event.delta, outcome)?;
        adversary.observe(outcome);
        trace.push(RoundRecord { event, outcome: Some(outcome), loss_increment: loss });
    }
    Ok(trace)
}

/// Plays the filtered composition game: the filter is consulted on the
/// prefix *including* the candidate round, and the round runs only on
/// CONT. The trace is truncated at the first HALT, whose round carries
/// a null outcome and zero loss.
pub fn run_filter_game<F>(
    adversary: &mut dyn Adversary,
    filter: F,
    max_rounds: u64,
    b: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Trace>
where
    F: Fn(&AccountState) -> Result<FilterDecision>,
{
    let mut trace = Trace::default();
    let mut state = AccountState::new();
    for round in 0..max_rounds {
        if adversary.done() {
            break;
        }
        let event = adversary.next_event(round, rng);
        PrivacyEvent::new(event.eps, event.delta)?;
        if event.is_zero() && trace.stop_round.is_none() {
            trace.stop_round = Some(round + 1);
        }
        let candidate = state.update(event);
        if filter(&candidate)?.is_halt() {
            trace.push(RoundRecord { event, outcome: None, loss_increment: 0.0 });
            break;
        }
        state = candidate;
        let outcome = rr_sample(event.eps, event.delta, b, rng)?;
        let loss = outcome_loss(event.eps, event.delta, outcome)?;
        adversary.observe(outcome);
        trace.push(RoundRecord { event, outcome: Some(outcome), loss_increment: loss });
    }
    Ok(trace)
}
