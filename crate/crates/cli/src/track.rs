//! `dpcomp track`: fold a JSON-lines event stream into per-round
//! odometer readings or filter decisions.
//!
//! In filter mode the filter is consulted on the state *including* the
//! candidate event; a HALT is emitted for that round, the event is not
//! committed (nor written to the ledger), and the process exits with
//! code 2.

use std::io::{BufRead, Write};

use serde::Deserialize;

use dpcomp::filters::{advanced_filter, basic_filter, FilterBudget, FilterDecision};
use dpcomp::odometers::{advanced_odometer, basic_odometer, OdometerConfig, OdometerReading};
use dpcomp::state::{AccountState, PrivacyEvent};
use dpcomp::Verdict;

use crate::fmt17::json_extended;
use crate::ledger::{self, LedgerHead};
use crate::{core_err, Failure, TrackArgs, EXIT_HALT};

enum Mode {
    OdometerBasic { delta_g: f64 },
    OdometerAdvanced { cfg: OdometerConfig },
    FilterBasic { budget: FilterBudget },
    FilterAdvanced { budget: FilterBudget },
}

impl Mode {
    fn is_filter(&self) -> bool {
        matches!(self, Mode::FilterBasic { .. } | Mode::FilterAdvanced { .. })
    }

    fn reading(&self, state: &AccountState) -> OdometerReading {
        match self {
            Mode::OdometerBasic { delta_g } => basic_odometer(state, *delta_g),
            Mode::OdometerAdvanced { cfg } => advanced_odometer(state, cfg),
            _ => unreachable!("reading only in odometer modes"),
        }
    }

    fn decide(&self, state: &AccountState) -> Result<FilterDecision, Failure> {
        match self {
            Mode::FilterBasic { budget } => Ok(basic_filter(state, budget)),
            Mode::FilterAdvanced { budget } => advanced_filter(state, budget).map_err(core_err),
            _ => unreachable!("decide only in filter modes"),
        }
    }
}

fn build_mode(args: &TrackArgs) -> Result<Mode, Failure> {
    let need_eps = || {
        args.eps_budget.ok_or_else(|| {
            Failure::Input("filter modes require --eps-budget".to_string())
        })
    };
    match args.mode.as_str() {
        "odometer:basic" => Ok(Mode::OdometerBasic { delta_g: args.delta_budget }),
        "odometer:advanced" => {
            let n = args
                .n
                .ok_or_else(|| Failure::Input("odometer:advanced requires --n".to_string()))?;
            let cfg = match args.gamma {
                Some(g) => OdometerConfig::with_gamma(args.delta_budget, n, g),
                None => OdometerConfig::new(args.delta_budget, n),
            }
            .map_err(core_err)?;
            Ok(Mode::OdometerAdvanced { cfg })
        }
        "filter:basic" => {
            Ok(Mode::FilterBasic { budget: FilterBudget::new(need_eps()?, args.delta_budget) })
        }
        "filter:advanced" => {
            let mut budget = FilterBudget::new(need_eps()?, args.delta_budget);
            if let Some(split) = args.delta_split {
                budget = budget.with_split(split);
            }
            // Surface hypothesis violations before touching the stream.
            advanced_filter(&AccountState::new(), &budget).map_err(core_err)?;
            Ok(Mode::FilterAdvanced { budget })
        }
        other => Err(Failure::Input(format!(
            "unknown mode {other:?}; expected odometer:basic, odometer:advanced, filter:basic or filter:advanced"
        ))),
    }
}

#[derive(Deserialize)]
struct EventLine {
    eps: f64,
    delta: f64,
}

pub fn run(args: &TrackArgs) -> Result<i32, Failure> {
    let mode = build_mode(args)?;
    let mut head = match &args.ledger {
        Some(path) => ledger::replay(path)?,
        None => LedgerHead::default(),
    };

    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (lineno, line) in stdin.lock().lines().enumerate() {
        let line = line.map_err(|e| Failure::Input(format!("cannot read stdin: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: EventLine = serde_json::from_str(&line).map_err(|e| {
            Failure::Input(format!("malformed event on line {}: {e}", lineno + 1))
        })?;
        let event = PrivacyEvent::new(parsed.eps, parsed.delta).map_err(|e| {
            Failure::Input(format!("invalid event on line {}: {e}", lineno + 1))
        })?;
        let round = head.seq + 1;
        let candidate = head.state.update(event);

        if mode.is_filter() {
            let decision = mode.decide(&candidate)?;
            let verdict = match decision.verdict {
                Verdict::Cont => "CONT",
                Verdict::Halt => "HALT",
            };
            writeln!(
                out,
                "{{\"round\":{round},\"decision\":\"{verdict}\",\"bound\":{}}}",
                json_extended(decision.bound_value.value()),
            )
            .map_err(|e| Failure::Input(format!("cannot write stdout: {e}")))?;
            if decision.is_halt() {
                out.flush().ok();
                return Ok(EXIT_HALT);
            }
            commit(args, &mut head, event, candidate)?;
        } else {
            commit(args, &mut head, event, candidate)?;
            let reading = mode.reading(&head.state);
            writeln!(
                out,
                "{{\"round\":{round},\"reading\":{}}}",
                json_extended(reading.bound.value()),
            )
            .map_err(|e| Failure::Input(format!("cannot write stdout: {e}")))?;
        }
    }
    Ok(0)
}

fn commit(
    args: &TrackArgs,
    head: &mut LedgerHead,
    event: PrivacyEvent,
    candidate: AccountState,
) -> Result<(), Failure> {
    match &args.ledger {
        Some(path) => ledger::append(path, head, event),
        None => {
            head.seq += 1;
            head.state = candidate;
            Ok(())
        }
    }
}
