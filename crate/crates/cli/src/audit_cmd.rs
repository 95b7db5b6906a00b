//! `dpcomp audit`: run a Monte-Carlo audit suite described by a TOML
//! file, write report.json / report.txt, and exit 0 only if every
//! verdict matches the expectation declared in the suite (negative
//! controls are declared `expect = "fail"`).

use std::path::Path;

use serde::Deserialize;

use dpcomp::adversary::AdversarySpec;
use dpcomp::audit::{audit, AuditSpec, Target, TargetKind, DEFAULT_PASS_SLACK};

use crate::{core_err, AuditArgs, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Expect {
    Pass,
    Fail,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetEntry {
    name: String,
    expect: Expect,
    kind: TargetKind,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AdversaryEntry {
    name: String,
    spec: AdversarySpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    trials: u64,
    master_seed: u64,
    max_rounds: u64,
    #[serde(default = "default_slack")]
    pass_slack: f64,
    targets: Vec<TargetEntry>,
    adversaries: Vec<AdversaryEntry>,
}

fn default_slack() -> f64 {
    DEFAULT_PASS_SLACK
}

fn load_suite(path: &Path) -> Result<SuiteFile, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read suite {path:?}: {e}")))?;
    toml::from_str(&text).map_err(|e| Failure::Input(format!("malformed suite {path:?}: {e}")))
}

pub fn run(args: &AuditArgs) -> Result<i32, Failure> {
    let suite = load_suite(&args.suite)?;
    let expectations: Vec<(String, Expect)> =
        suite.targets.iter().map(|t| (t.name.clone(), t.expect)).collect();
    let spec = AuditSpec {
        targets: suite
            .targets
            .into_iter()
            .map(|t| Target { name: t.name, kind: t.kind })
            .collect(),
        adversaries: suite.adversaries.into_iter().map(|a| (a.name, a.spec)).collect(),
        trials: args.trials.unwrap_or(suite.trials),
        master_seed: args.seed.unwrap_or(suite.master_seed),
        max_rounds: suite.max_rounds,
        pass_slack: suite.pass_slack,
    };
    let report = audit(&spec).map_err(core_err)?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::Input(format!("cannot create {:?}: {e}", args.out)))?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::Input(format!("cannot serialize report: {e}")))?;
    std::fs::write(args.out.join("report.json"), json)
        .map_err(|e| Failure::Input(format!("cannot write report.json: {e}")))?;
    let table = report.text_table();
    std::fs::write(args.out.join("report.txt"), &table)
        .map_err(|e| Failure::Input(format!("cannot write report.txt: {e}")))?;
    print!("{table}");

    let mismatches: Vec<String> = report
        .verdicts
        .iter()
        .zip(&expectations)
        .filter_map(|(v, (name, expect))| {
            debug_assert_eq!(&v.target, name);
            let expected_pass = *expect == Expect::Pass;
            (v.pass != expected_pass).then(|| {
                format!(
                    "{}: expected {}, got {}",
                    v.target,
                    if expected_pass { "PASS" } else { "FAIL" },
                    if v.pass { "PASS" } else { "FAIL" },
                )
            })
        })
        .collect();
    if mismatches.is_empty() {
        Ok(0)
    } else {
        Err(Failure::Expectation(mismatches.join("; ")))
    }
}
