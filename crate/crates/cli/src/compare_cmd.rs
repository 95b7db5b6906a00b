//! `dpcomp compare`: evaluate every implemented bound on one schedule
//! read from stdin, printing a small aligned table and optionally
//! writing per-round bound curves as CSV.

use std::io::BufRead;

use serde::Deserialize;

use dpcomp::audit::{bound_curves, compare_bounds};
use dpcomp::state::PrivacyEvent;

use crate::fmt17::f64_17;
use crate::{core_err, CompareArgs, Failure};

#[derive(Deserialize)]
struct EventLine {
    eps: f64,
    #[serde(default)]
    delta: f64,
}

pub fn run(args: &CompareArgs) -> Result<i32, Failure> {
    let mut schedule = Vec::new();
    for (lineno, line) in std::io::stdin().lock().lines().enumerate() {
        let line = line.map_err(|e| Failure::Input(format!("cannot read stdin: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: EventLine = serde_json::from_str(&line).map_err(|e| {
            Failure::Input(format!("malformed event on line {}: {e}", lineno + 1))
        })?;
        schedule.push(PrivacyEvent::new(parsed.eps, parsed.delta).map_err(|e| {
            Failure::Input(format!("invalid event on line {}: {e}", lineno + 1))
        })?);
    }

    let cmp = compare_bounds(&schedule, args.delta_budget, args.n, args.eps_budget)
        .map_err(core_err)?;
    println!("rounds               {}", cmp.rounds);
    println!("sum_eps              {}", f64_17(cmp.sum_eps));
    println!("sum_eps_sq           {}", f64_17(cmp.sum_eps_sq));
    println!("basic                {}", f64_17(cmp.basic));
    println!("quadratic_reference  {}", f64_17(cmp.quadratic_reference));
    println!("filter_bound(eps_g={}) {}", f64_17(cmp.eps_g), f64_17(cmp.filter_bound));
    println!("advanced_odometer    {}", f64_17(cmp.odometer));

    if let Some(path) = &args.curves {
        let csv = bound_curves(&schedule, args.delta_budget, args.n, args.eps_budget)
            .map_err(core_err)?;
        std::fs::write(path, csv)
            .map_err(|e| Failure::Input(format!("cannot write {path:?}: {e}")))?;
    }
    Ok(0)
}
