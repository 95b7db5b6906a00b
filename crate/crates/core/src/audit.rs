//! Monte-Carlo audit harness: estimates the empirical failure
//! probability of each odometer/filter against an adversary suite and
//! compares it to the failure probability the bound claims.
//!
//! A trial *violates* an odometer if at any round the absolute realized
//! loss exceeds the running reading; it violates a filter if any
//! released prefix has absolute loss above eps_g. Per-round assessment
//! is deliberately stricter than checking the final round only.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::AdversarySpec;
use crate::filters::{advanced_filter, basic_filter, FilterBudget, FilterDecision, Verdict};
use crate::game::{run_filter_game, run_game, saturating_add};
use crate::odometers::{
    advanced_odometer, basic_odometer, wrap_delta_reduction_filter,
    wrap_delta_reduction_odometer, OdometerConfig,
};
use crate::state::{AccountState, ExtendedReal, PrivacyEvent};
use crate::{Error, Result};

/// An odometer under audit, including the deliberately invalid
/// baseline used as a negative control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "odometer", rename_all = "kebab-case")]
pub enum OdometerTarget {
    Basic { delta_g: f64 },
    Advanced { cfg: OdometerConfig },
    /// Advanced odometer behind the delta-reduction wrapper; claims
    /// failure probability delta_g + delta_prime.
    WrappedAdvanced { cfg: OdometerConfig },
    /// The quadratic advanced-composition value with the *realized*
    /// parameters plugged in. Valid only for schedules fixed in
    /// advance; as an odometer it is an invalid baseline and audits
    /// against adaptive stopping are expected to FAIL.
    NaiveQuadratic { delta_hat: f64 },
}

impl OdometerTarget {
    /// The running bound after the rounds folded into `state`.
    pub fn reading(&self, state: &AccountState) -> f64 {
        match self {
            OdometerTarget::Basic { delta_g } => basic_odometer(state, *delta_g).bound.value(),
            OdometerTarget::Advanced { cfg } => advanced_odometer(state, cfg).bound.value(),
            OdometerTarget::WrappedAdvanced { cfg } => {
                let inner_cfg = *cfg;
                let wrapped = wrap_delta_reduction_odometer(
                    move |s| advanced_odometer(s, &inner_cfg),
                    cfg.delta_prime,
                );
                wrapped(state).bound.value()
            }
            OdometerTarget::NaiveQuadratic { delta_hat } => naive_quadratic(state, *delta_hat),
        }
    }

    /// Failure probability the target claims.
    pub fn claimed_delta(&self) -> f64 {
        match self {
            OdometerTarget::Basic { delta_g } => *delta_g,
            OdometerTarget::Advanced { cfg } => cfg.delta_g,
            OdometerTarget::WrappedAdvanced { cfg } => cfg.delta_g + cfg.delta_prime,
            OdometerTarget::NaiveQuadratic { delta_hat } => *delta_hat,
        }
    }
}

/// The quadratic composition value on the realized schedule:
/// sum eps_i (e^eps_i - 1) + sqrt(2 sum eps_i^2 ln(1/delta_hat)).
pub fn naive_quadratic(state: &AccountState, delta_hat: f64) -> f64 {
    2.0 * state.sum_mu + (2.0 * state.sum_eps_sq * (1.0 / delta_hat).ln()).sqrt()
}

/// A filter under audit, including the always-continue negative
/// control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "filter", rename_all = "kebab-case")]
pub enum FilterTarget {
    Basic { budget: FilterBudget },
    Advanced { budget: FilterBudget },
    /// Advanced filter behind the delta-reduction wrapper; claims
    /// failure probability delta_g + delta_prime.
    WrappedAdvanced { budget: FilterBudget, delta_prime: f64 },
    /// Negative control: never halts, so any adversary with
    /// sum eps well past eps_g drives the violation rate toward 1.
    AlwaysCont { eps_g: f64, delta_claimed: f64 },
}

impl FilterTarget {
    pub fn eps_g(&self) -> f64 {
        match self {
            FilterTarget::Basic { budget }
            | FilterTarget::Advanced { budget }
            | FilterTarget::WrappedAdvanced { budget, .. } => budget.eps_g,
            FilterTarget::AlwaysCont { eps_g, .. } => *eps_g,
        }
    }

    pub fn claimed_delta(&self) -> f64 {
        match self {
            FilterTarget::Basic { budget } | FilterTarget::Advanced { budget } => budget.delta_g,
            FilterTarget::WrappedAdvanced { budget, delta_prime } => {
                budget.delta_g + delta_prime
            }
            FilterTarget::AlwaysCont { delta_claimed, .. } => *delta_claimed,
        }
    }

    pub fn decide(&self, state: &AccountState) -> Result<FilterDecision> {
        match self {
            FilterTarget::Basic { budget } => Ok(basic_filter(state, budget)),
            FilterTarget::Advanced { budget } => advanced_filter(state, budget),
            FilterTarget::WrappedAdvanced { budget, delta_prime } => {
                let b = *budget;
                wrap_delta_reduction_filter(move |s| advanced_filter(s, &b), *delta_prime)(state)
            }
            FilterTarget::AlwaysCont { .. } => Ok(FilterDecision {
                verdict: Verdict::Cont,
                bound_value: ExtendedReal::INFINITY,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetKind {
    Odometer(OdometerTarget),
    Filter(FilterTarget),
}

/// A named bound under audit, with the failure probability it claims
/// (defaulting to the target's own delta_g budget).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub name: String,
    pub kind: TargetKind,
}

impl Target {
    pub fn odometer(name: &str, t: OdometerTarget) -> Self {
        Target { name: name.to_string(), kind: TargetKind::Odometer(t) }
    }

    pub fn filter(name: &str, t: FilterTarget) -> Self {
        Target { name: name.to_string(), kind: TargetKind::Filter(t) }
    }

    pub fn claimed_delta(&self) -> f64 {
        match &self.kind {
            TargetKind::Odometer(t) => t.claimed_delta(),
            TargetKind::Filter(t) => t.claimed_delta(),
        }
    }
}

/// Default PASS slack: upper Wilson endpoint at most 1.5x the claimed
/// failure probability. The bounds are conservative, so true rates sit
/// well below their claims; the slack absorbs sampling noise without
/// masking invalid baselines, which overshoot by large factors.
pub const DEFAULT_PASS_SLACK: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSpec {
    pub targets: Vec<Target>,
    pub adversaries: Vec<(String, AdversarySpec)>,
    /// Trials per adversary; at least 1000 for a reportable estimate.
    pub trials: u64,
    pub master_seed: u64,
    pub max_rounds: u64,
    pub pass_slack: f64,
}

impl AuditSpec {
    pub fn new(
        targets: Vec<Target>,
        adversaries: Vec<(String, AdversarySpec)>,
        trials: u64,
        master_seed: u64,
        max_rounds: u64,
    ) -> Self {
        AuditSpec {
            targets,
            adversaries,
            trials,
            master_seed,
            max_rounds,
            pass_slack: DEFAULT_PASS_SLACK,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::EmptyAudit("targets"));
        }
        if self.adversaries.is_empty() {
            return Err(Error::EmptyAudit("adversaries"));
        }
        if self.trials < 1000 {
            return Err(Error::TooFewTrials(self.trials));
        }
        Ok(())
    }
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryBreakdown {
    pub adversary: String,
    pub trials: u64,
    pub violations: u64,
    pub estimate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetVerdict {
    pub target: String,
    /// PASS threshold: slack times the claimed failure probability.
    pub threshold: f64,
    /// Counts for the worst adversary, which is the one the definition
    /// quantifies over.
    pub worst_adversary: String,
    pub trials: u64,
    pub violations: u64,
    pub estimate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// PASS iff every adversary's upper Wilson endpoint is at most the
    /// threshold.
    pub pass: bool,
    pub per_adversary: Vec<AdversaryBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub verdicts: Vec<TargetVerdict>,
    pub trials_per_adversary: u64,
    pub master_seed: u64,
    pub pass_slack: f64,
    pub runtime_secs: f64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    /// Aligned-column text rendering, one line per (target, adversary)
    /// plus a verdict line per target.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<28} {:<18} {:>8} {:>6} {:>10} {:>10} {:>10}  {}\n",
            "target", "adversary", "trials", "viol", "estimate", "wilson-hi", "threshold", "verdict"
        ));
        for v in &self.verdicts {
            for b in &v.per_adversary {
                out.push_str(&format!(
                    "{:<28} {:<18} {:>8} {:>6} {:>10.6} {:>10.6} {:>10.6}\n",
                    v.target, b.adversary, b.trials, b.violations, b.estimate, b.wilson_high,
                    v.threshold,
                ));
            }
            out.push_str(&format!(
                "{:<28} {:<18} {:>8} {:>6} {:>10.6} {:>10.6} {:>10.6}  {}\n",
                v.target,
                format!("worst:{}", v.worst_adversary),
                v.trials,
                v.violations,
                v.estimate,
                v.wilson_high,
                v.threshold,
                if v.pass { "PASS" } else { "FAIL" },
            ));
        }
        out
    }
}

fn trial_rng(master_seed: u64, adversary_idx: usize, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((adversary_idx as u64) << 40) | trial);
    rng
}

/// One trial against one adversary, returning a per-target violation
/// bitmask. All odometer targets share a single game trace; each filter
/// target replays the same randomness through its own filtered game.
fn run_trial(spec: &AuditSpec, adversary_idx: usize, trial: u64) -> u64 {
    let (_, adv_spec) = &spec.adversaries[adversary_idx];
    let mut mask = 0u64;

    let any_odometer =
        spec.targets.iter().any(|t| matches!(t.kind, TargetKind::Odometer(_)));
    if any_odometer {
        let mut adv = adv_spec.instantiate();
        let mut rng = trial_rng(spec.master_seed, adversary_idx, trial);
        let trace = run_game(adv.as_mut(), spec.max_rounds, false, &mut rng)
            .expect("adversary emitted an invalid event");
        let mut state = AccountState::new();
        let mut loss = 0.0;
        for rec in &trace.rounds {
            state = state.update(rec.event);
            loss = saturating_add(loss, rec.loss_increment);
            for (i, target) in spec.targets.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    continue;
                }
                if let TargetKind::Odometer(t) = &target.kind {
                    if loss.abs() > t.reading(&state) {
                        mask |= 1 << i;
                    }
                }
            }
        }
    }

    for (i, target) in spec.targets.iter().enumerate() {
        let TargetKind::Filter(t) = &target.kind else { continue };
        let mut adv = adv_spec.instantiate();
        let mut rng = trial_rng(spec.master_seed, adversary_idx, trial);
        let trace = run_filter_game(
            adv.as_mut(),
            |s| t.decide(s),
            spec.max_rounds,
            false,
            &mut rng,
        )
        .expect("adversary emitted an invalid event");
        let mut loss = 0.0;
        for rec in &trace.rounds {
            if rec.outcome.is_none() {
                break; // the HALT round was never released
            }
            loss = saturating_add(loss, rec.loss_increment);
            if loss.abs() > t.eps_g() {
                mask |= 1 << i;
                break;
            }
        }
    }

    mask
}

fn violation_counts(spec: &AuditSpec, adversary_idx: usize, parallel: bool) -> Vec<u64> {
    let fold_mask = |counts: &mut Vec<u64>, mask: u64| {
        for (i, c) in counts.iter_mut().enumerate() {
            *c += (mask >> i) & 1;
        }
    };
    let zero = vec![0u64; spec.targets.len()];

    #[cfg(feature = "parallel")]
    if parallel {
        return (0..spec.trials)
            .into_par_iter()
            .fold(
                || zero.clone(),
                |mut counts, t| {
                    fold_mask(&mut counts, run_trial(spec, adversary_idx, t));
                    counts
                },
            )
            .reduce(
                || zero.clone(),
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(&b) {
                        *x += y;
                    }
                    a
                },
            );
    }
    let _ = parallel;

    let mut counts = zero;
    for t in 0..spec.trials {
        fold_mask(&mut counts, run_trial(spec, adversary_idx, t));
    }
    counts
}

fn audit_impl(spec: &AuditSpec, parallel: bool) -> Result<AuditReport> {
    spec.validate()?;
    assert!(spec.targets.len() <= 64, "violation bitmask holds at most 64 targets");
    let start = Instant::now();

    // counts[target][adversary]
    let mut counts = vec![vec![0u64; spec.adversaries.len()]; spec.targets.len()];
    for a in 0..spec.adversaries.len() {
        for (i, c) in violation_counts(spec, a, parallel).into_iter().enumerate() {
            counts[i][a] = c;
        }
    }

    let verdicts = spec
        .targets
        .iter()
        .enumerate()
        .map(|(i, target)| {
            let threshold = spec.pass_slack * target.claimed_delta();
            let per_adversary: Vec<AdversaryBreakdown> = spec
                .adversaries
                .iter()
                .enumerate()
                .map(|(a, (name, _))| {
                    let violations = counts[i][a];
                    let (lo, hi) = wilson_interval(violations, spec.trials);
                    AdversaryBreakdown {
                        adversary: name.clone(),
                        trials: spec.trials,
                        violations,
                        estimate: violations as f64 / spec.trials as f64,
                        wilson_low: lo,
                        wilson_high: hi,
                    }
                })
                .collect();
            let worst = per_adversary
                .iter()
                .max_by(|x, y| x.wilson_high.total_cmp(&y.wilson_high))
                .expect("validated: at least one adversary");
            TargetVerdict {
                target: target.name.clone(),
                threshold,
                worst_adversary: worst.adversary.clone(),
                trials: worst.trials,
                violations: worst.violations,
                estimate: worst.estimate,
                wilson_low: worst.wilson_low,
                wilson_high: worst.wilson_high,
                pass: per_adversary.iter().all(|b| b.wilson_high <= threshold),
                per_adversary,
            }
        })
        .collect();

    Ok(AuditReport {
        verdicts,
        trials_per_adversary: spec.trials,
        master_seed: spec.master_seed,
        pass_slack: spec.pass_slack,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// Runs the audit, distributing trials across worker threads when the
/// `parallel` feature is enabled. Verdicts are reproducible bit-for-bit
/// from (spec, master seed) regardless of worker count.
pub fn audit(spec: &AuditSpec) -> Result<AuditReport> {
    audit_impl(spec, cfg!(feature = "parallel"))
}

/// Single-threaded reference path; produces the same verdicts as
/// [`audit`].
pub fn audit_sequential(spec: &AuditSpec) -> Result<AuditReport> {
    audit_impl(spec, false)
}

/// Audits a single odometer against an adversary suite.
pub fn audit_odometer(
    name: &str,
    target: OdometerTarget,
    adversaries: Vec<(String, AdversarySpec)>,
    trials: u64,
    master_seed: u64,
    max_rounds: u64,
) -> Result<AuditReport> {
    audit(&AuditSpec::new(
        vec![Target::odometer(name, target)],
        adversaries,
        trials,
        master_seed,
        max_rounds,
    ))
}

/// Audits a single filter against an adversary suite.
pub fn audit_filter(
    name: &str,
    target: FilterTarget,
    adversaries: Vec<(String, AdversarySpec)>,
    trials: u64,
    master_seed: u64,
    max_rounds: u64,
) -> Result<AuditReport> {
    audit(&AuditSpec::new(
        vec![Target::filter(name, target)],
        adversaries,
        trials,
        master_seed,
        max_rounds,
    ))
}

/// One realized schedule, four bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundComparison {
    pub rounds: u64,
    pub sum_eps: f64,
    pub sum_eps_sq: f64,
    /// Plain sum of the eps_i.
    pub basic: f64,
    /// Quadratic composition value on the realized parameters.
    /// Reference only: not valid under adaptive stopping.
    pub quadratic_reference: f64,
    /// Advanced filter bound K at the given global budget.
    pub eps_g: f64,
    pub filter_bound: f64,
    /// Advanced odometer reading.
    pub odometer: f64,
}

/// Evaluates every bound on the same realized schedule. `eps_g`
/// defaults to the quadratic reference value, so the filter is budgeted
/// exactly at the bound it competes with.
pub fn compare_bounds(
    schedule: &[PrivacyEvent],
    delta_g: f64,
    n: u64,
    eps_g: Option<f64>,
) -> Result<BoundComparison> {
    let state = crate::state::fold_events(schedule.iter().copied());
    let quadratic = naive_quadratic(&state, delta_g);
    let eps_g = eps_g.unwrap_or(if quadratic > 0.0 { quadratic } else { 1.0 });
    let budget = FilterBudget::new(eps_g, delta_g);
    let cfg = OdometerConfig::new(delta_g, n)?;
    Ok(BoundComparison {
        rounds: schedule.len() as u64,
        sum_eps: state.sum_eps,
        sum_eps_sq: state.sum_eps_sq,
        basic: basic_odometer(&state, delta_g).bound.value(),
        quadratic_reference: quadratic,
        eps_g,
        filter_bound: crate::filters::advanced_filter_bound(&state, &budget)?,
        odometer: advanced_odometer(&state, &cfg).bound.value(),
    })
}

/// Per-round curves of the four bounds along a schedule, as CSV with
/// header `round,basic,quadratic,filter_k,odometer`.
pub fn bound_curves(
    schedule: &[PrivacyEvent],
    delta_g: f64,
    n: u64,
    eps_g: Option<f64>,
) -> Result<String> {
    let full = compare_bounds(schedule, delta_g, n, eps_g)?;
    let budget = FilterBudget::new(full.eps_g, delta_g);
    let cfg = OdometerConfig::new(delta_g, n)?;
    let mut state = AccountState::new();
    let mut out = String::from("round,basic,quadratic,filter_k,odometer\n");
    for (t, ev) in schedule.iter().enumerate() {
        state = state.update(*ev);
        out.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            t + 1,
            basic_odometer(&state, delta_g).bound.value(),
            naive_quadratic(&state, delta_g),
            crate::filters::advanced_filter_bound(&state, &budget)?,
            advanced_odometer(&state, &cfg).bound.value(),
        ));
    }
    Ok(out)
}

/// Configuration of the separation experiment: the stopping-time
/// adversary at eps = 1/n against (a) the quadratic reference treated
/// as an odometer and (b) the advanced odometer, with the stopping
/// constant C swept over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationConfig {
    /// Horizon, dataset size, and 1/eps all at once.
    pub n: u64,
    pub delta_g: f64,
    pub trials: u64,
    pub c_grid: Vec<f64>,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationEntry {
    pub c: f64,
    /// Fraction of trials whose stopped trace crossed the quadratic
    /// reference at some round.
    pub naive_rate: f64,
    /// Same for the advanced odometer reading.
    pub odometer_rate: f64,
    /// Fraction of trials in which the adversary stopped before the
    /// horizon.
    pub stop_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub n: u64,
    pub eps: f64,
    pub delta_g: f64,
    pub trials: u64,
    pub entries: Vec<SeparationEntry>,
    pub runtime_secs: f64,
}

impl SeparationReport {
    /// First grid constant at which the quadratic reference is crossed
    /// at frequency >= delta_g while the odometer stays within slack.
    pub fn separating_c(&self, slack: f64) -> Option<&SeparationEntry> {
        self.entries
            .iter()
            .find(|e| e.naive_rate >= self.delta_g && e.odometer_rate <= slack * self.delta_g)
    }
}

/// Internal per-trial accumulator for the separation experiment.
#[derive(Clone)]
struct SepCounts {
    naive: Vec<u64>,
    odometer: Vec<u64>,
    stopped: Vec<u64>,
}

impl SepCounts {
    fn zero(k: usize) -> Self {
        SepCounts { naive: vec![0; k], odometer: vec![0; k], stopped: vec![0; k] }
    }

    #[cfg_attr(not(feature = "parallel"), allow(dead_code))]
    fn merge(mut self, other: SepCounts) -> SepCounts {
        for (a, b) in self.naive.iter_mut().zip(&other.naive) {
            *a += b;
        }
        for (a, b) in self.odometer.iter_mut().zip(&other.odometer) {
            *a += b;
        }
        for (a, b) in self.stopped.iter_mut().zip(&other.stopped) {
            *a += b;
        }
        self
    }
}

/// Precomputed per-round thresholds, in units of eps so the walk can be
/// tracked as an integer.
struct SepTables {
    /// naive[t] = quadratic reference after t rounds, / eps.
    naive: Vec<f64>,
    /// odometer[t] = advanced reading after t rounds, / eps.
    odometer: Vec<f64>,
    /// stop_sqrt[t] = sqrt(t * ln(ln n / delta_g)); the adversary stops
    /// once (centered walk / eps) >= C * stop_sqrt[t].
    stop_sqrt: Vec<f64>,
}

fn sep_tables(cfg: &SeparationConfig) -> Result<SepTables> {
    let n = cfg.n as usize;
    let eps = 1.0 / cfg.n as f64;
    let odom_cfg = OdometerConfig::new(cfg.delta_g, cfg.n)?;
    let log_log = ((cfg.n as f64).ln() / cfg.delta_g).ln();
    let ev = PrivacyEvent::new(eps, 0.0)?;

    let mut naive = vec![f64::INFINITY; n + 1];
    let mut odometer = vec![f64::INFINITY; n + 1];
    let mut stop_sqrt = vec![f64::INFINITY; n + 1];
    let mut state = AccountState::new();
    for t in 1..=n {
        state = state.update(ev);
        naive[t] = naive_quadratic(&state, cfg.delta_g) / eps;
        odometer[t] = advanced_odometer(&state, &odom_cfg).bound.value() / eps;
        stop_sqrt[t] = (t as f64 * log_log).sqrt();
    }
    Ok(SepTables { naive, odometer, stop_sqrt })
}

fn geometric_countdown(q: f64, rng: &mut ChaCha8Rng) -> u64 {
    let u: f64 = rand::Rng::random(rng);
    let g = (u.ln() / (1.0 - q).ln()).floor();
    if g.is_finite() && g < u64::MAX as f64 {
        g as u64 + 1
    } else {
        u64::MAX
    }
}

/// One trial: a single +/-1 walk of up to n steps, scanned once.
/// Returns (first naive violation round, first odometer violation
/// round, stop round per C), with u64::MAX meaning "never".
///
/// The walk takes one fair bit per round from 64-bit blocks, with a
/// geometric countdown injecting the extra forced +1 steps that tilt
/// the step distribution to P(+1) = (1 + tanh(eps/2)) / 2, the exact
/// +eps probability of RR_eps. Blocks in which no threshold can
/// possibly fire are folded in by popcount alone.
fn sep_trial(
    cfg: &SeparationConfig,
    tables: &SepTables,
    c_grid: &[f64],
    trial: u64,
) -> (u64, u64, Vec<u64>) {
    let n = cfg.n;
    let eps = 1.0 / n as f64;
    let q = (eps / 2.0).tanh();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
    rng.set_stream(trial);

    let mut s: i64 = 0; // walk value in units of eps
    let mut t: u64 = 0;
    let mut countdown = geometric_countdown(q, &mut rng);
    let mut first_naive = u64::MAX;
    let mut first_odom = u64::MAX;
    let mut stops = vec![u64::MAX; c_grid.len()];
    // c_grid is sorted ascending, so the un-stopped constants always
    // form a suffix.
    let mut pending_c = 0usize;

    while t < n {
        // Once every constant has stopped, any later first violation
        // would exceed all stop times and cannot count.
        if pending_c == c_grid.len() {
            break;
        }
        let block_len = 64.min(n - t);
        let t0 = (t + 1) as usize;
        let reach = (s + block_len as i64) as f64;
        let reach_abs = (s.abs() + block_len as i64) as f64;
        let naive_can_fire = first_naive == u64::MAX && reach > tables.naive[t0];
        let odom_can_fire = first_odom == u64::MAX && reach_abs > tables.odometer[t0];
        let stop_can_fire = pending_c < c_grid.len()
            && reach - t0 as f64 * q >= c_grid[pending_c] * tables.stop_sqrt[t0];
        let word: u64 = rand::Rng::random(&mut rng);

        if !(naive_can_fire || odom_can_fire || stop_can_fire) && countdown > block_len {
            // Nothing can fire in this block: fold it in wholesale.
            let masked = if block_len == 64 { word } else { word & ((1u64 << block_len) - 1) };
            s += 2 * masked.count_ones() as i64 - block_len as i64;
            countdown -= block_len;
            t += block_len;
            continue;
        }

        for j in 0..block_len {
            t += 1;
            countdown -= 1;
            let up = countdown == 0 || (word >> j) & 1 == 1;
            if countdown == 0 {
                countdown = geometric_countdown(q, &mut rng);
            }
            s += if up { 1 } else { -1 };
            let tu = t as usize;
            if first_naive == u64::MAX && s as f64 > tables.naive[tu] {
                first_naive = t;
            }
            if first_odom == u64::MAX && s.abs() as f64 > tables.odometer[tu] {
                first_odom = t;
            }
            while pending_c < c_grid.len()
                && s as f64 - t as f64 * q >= c_grid[pending_c] * tables.stop_sqrt[tu]
            {
                stops[pending_c] = t;
                pending_c += 1;
            }
            if pending_c == c_grid.len() {
                return (first_naive, first_odom, stops);
            }
        }
    }

    (first_naive, first_odom, stops)
}

/// Runs the separation experiment: for each C, the violation frequency
/// of the quadratic reference and of the advanced odometer over the
/// stopping-time adversary's stopped traces. A trial's stopped trace
/// violates a bound iff the first per-round violation happens no later
/// than the stop (a never-stopping trial runs the full horizon).
pub fn separation_experiment(cfg: &SeparationConfig) -> Result<SeparationReport> {
    if cfg.trials < 1000 {
        return Err(Error::TooFewTrials(cfg.trials));
    }
    if cfg.c_grid.is_empty() {
        return Err(Error::EmptyAudit("stopping constants"));
    }
    let start = Instant::now();
    let mut c_grid = cfg.c_grid.clone();
    c_grid.sort_by(f64::total_cmp);
    let tables = sep_tables(cfg)?;

    let tally = |counts: SepCounts, trial: u64| -> SepCounts {
        let (first_naive, first_odom, stops) = sep_trial(cfg, &tables, &c_grid, trial);
        let mut counts = counts;
        for (i, &stop) in stops.iter().enumerate() {
            let horizon = stop.min(cfg.n);
            counts.naive[i] += (first_naive <= horizon) as u64;
            counts.odometer[i] += (first_odom <= horizon) as u64;
            counts.stopped[i] += (stop != u64::MAX) as u64;
        }
        counts
    };

    #[cfg(feature = "parallel")]
    let counts = (0..cfg.trials)
        .into_par_iter()
        .fold(|| SepCounts::zero(c_grid.len()), tally)
        .reduce(|| SepCounts::zero(c_grid.len()), SepCounts::merge);
    #[cfg(not(feature = "parallel"))]
    let counts = (0..cfg.trials).fold(SepCounts::zero(c_grid.len()), tally);

    let trials = cfg.trials as f64;
    let entries = c_grid
        .iter()
        .enumerate()
        .map(|(i, &c)| SeparationEntry {
            c,
            naive_rate: counts.naive[i] as f64 / trials,
            odometer_rate: counts.odometer[i] as f64 / trials,
            stop_rate: counts.stopped[i] as f64 / trials,
        })
        .collect();

    Ok(SeparationReport {
        n: cfg.n,
        eps: 1.0 / cfg.n as f64,
        delta_g: cfg.delta_g,
        trials: cfg.trials,
        entries,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}
