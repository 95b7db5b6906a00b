//! Append-only privacy ledger: one JSON line per accepted event, each
//! carrying the post-update accounting snapshot and a SHA-256 checksum
//! chained to the previous record. Replay re-folds the events from
//! genesis and verifies both the snapshots and the chain, so a resumed
//! session provably continues the exact state an earlier one left.
//!
//! Timestamps are recorded for humans but excluded from checksums, so
//! byte-level determinism of everything that matters survives re-runs.

use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dpcomp::state::{AccountState, PrivacyEvent};

use crate::fmt17::f64_17;
use crate::Failure;

pub const GENESIS: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LedgerRecord {
    pub seq: u64,
    /// Unix seconds at append time; informational only, not checksummed.
    pub ts: u64,
    pub eps: f64,
    pub delta: f64,
    pub sum_eps: f64,
    pub sum_eps_sq: f64,
    pub sum_delta: f64,
    pub sum_mu: f64,
    pub rounds: u64,
    pub prev: String,
    pub checksum: String,
}

impl LedgerRecord {
    pub fn state(&self) -> AccountState {
        AccountState {
            sum_eps: self.sum_eps,
            sum_eps_sq: self.sum_eps_sq,
            sum_delta: self.sum_delta,
            sum_mu: self.sum_mu,
            rounds: self.rounds,
        }
    }

    /// The checksummed canonical form: every field except the
    /// timestamp, floats at 17 significant digits so the digest is a
    /// function of the exact binary64 values.
    fn canonical(&self) -> String {
        let mut s = String::new();
        write!(
            s,
            "{}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.seq,
            f64_17(self.eps),
            f64_17(self.delta),
            f64_17(self.sum_eps),
            f64_17(self.sum_eps_sq),
            f64_17(self.sum_delta),
            f64_17(self.sum_mu),
            self.rounds,
            self.prev,
        )
        .unwrap();
        s
    }

    fn compute_checksum(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        let mut hex = String::with_capacity(64);
        for b in digest {
            write!(hex, "{b:02x}").unwrap();
        }
        hex
    }
}

/// Ledger head: everything needed to continue appending.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerHead {
    pub seq: u64,
    pub state: AccountState,
    pub tip: String,
}

impl Default for LedgerHead {
    fn default() -> Self {
        LedgerHead { seq: 0, state: AccountState::new(), tip: GENESIS.to_string() }
    }
}

fn corrupt(seq: u64, what: &str) -> Failure {
    Failure::Input(format!("ledger corruption at record {seq}: {what}; refusing partial state"))
}

/// Replays a ledger file from genesis: re-folds every event, verifies
/// each stored snapshot and the checksum chain, and returns the head.
/// A missing file is an empty ledger.
pub fn replay(path: &Path) -> Result<LedgerHead, Failure> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(LedgerHead::default()),
        Err(e) => return Err(Failure::Input(format!("cannot open ledger {path:?}: {e}"))),
    };
    let mut head = LedgerHead::default();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let seq = lineno as u64 + 1;
        let line = line.map_err(|e| Failure::Input(format!("cannot read ledger: {e}")))?;
        let rec: LedgerRecord =
            serde_json::from_str(&line).map_err(|_| corrupt(seq, "unparseable record"))?;
        if rec.seq != seq {
            return Err(corrupt(seq, "sequence number out of order"));
        }
        if rec.prev != head.tip {
            return Err(corrupt(seq, "checksum chain broken"));
        }
        if rec.compute_checksum() != rec.checksum {
            return Err(corrupt(seq, "checksum mismatch"));
        }
        let event = PrivacyEvent::new(rec.eps, rec.delta)
            .map_err(|_| corrupt(seq, "invalid stored event"))?;
        let expected = head.state.update(event);
        if expected != rec.state() {
            return Err(corrupt(seq, "snapshot does not match replayed state"));
        }
        head = LedgerHead { seq, state: expected, tip: rec.checksum };
    }
    Ok(head)
}

/// Appends one event to the ledger, advancing the head. The record is
/// written with a single write call so a crash leaves either the whole
/// line or nothing parseable past the previous tip.
pub fn append(path: &Path, head: &mut LedgerHead, event: PrivacyEvent) -> Result<(), Failure> {
    let state = head.state.update(event);
    let mut rec = LedgerRecord {
        seq: head.seq + 1,
        ts: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        eps: event.eps,
        delta: event.delta,
        sum_eps: state.sum_eps,
        sum_eps_sq: state.sum_eps_sq,
        sum_delta: state.sum_delta,
        sum_mu: state.sum_mu,
        rounds: state.rounds,
        prev: head.tip.clone(),
        checksum: String::new(),
    };
    rec.checksum = rec.compute_checksum();
    let mut line = serde_json::to_string(&rec)
        .map_err(|e| Failure::Input(format!("cannot serialize ledger record: {e}")))?;
    line.push('\n');
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Failure::Input(format!("cannot open ledger {path:?}: {e}")))?;
    file.write_all(line.as_bytes())
        .and_then(|_| file.flush())
        .map_err(|e| Failure::Input(format!("cannot append to ledger: {e}")))?;
    *head = LedgerHead { seq: rec.seq, state, tip: rec.checksum };
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use dpcomp::state::fold_events;

    fn ev(eps: f64, delta: f64) -> PrivacyEvent {
        PrivacyEvent::new(eps, delta).unwrap()
    }

    #[test]
    fn replay_reproduces_in_memory_fold() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        let events = [ev(0.1, 0.0), ev(0.2, 1e-6), ev(0.05, 0.0)];
        let mut head = LedgerHead::default();
        for e in events {
            append(&path, &mut head, e).unwrap();
        }
        let replayed = replay(&path).unwrap();
        assert_eq!(replayed.seq, 3);
        assert_eq!(replayed.state, fold_events(events));
        assert_eq!(replayed.tip, head.tip);
    }

    #[test]
    fn missing_file_is_empty_ledger() {
        let dir = tempfile::tempdir().unwrap();
        let head = replay(&dir.path().join("absent.jsonl")).unwrap();
        assert_eq!(head, LedgerHead::default());
    }

    #[test]
    fn truncation_is_detected_at_the_right_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        let mut head = LedgerHead::default();
        for i in 0..3 {
            append(&path, &mut head, ev(0.1 * (i + 1) as f64, 0.0)).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let cut = text.len() - 10; // chop the tail of record 3
        std::fs::write(&path, &text[..cut]).unwrap();
        let err = replay(&path).unwrap_err();
        assert!(format!("{err:?}").contains("record 3"), "{err:?}");
    }

    #[test]
    fn tampered_snapshot_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        let mut head = LedgerHead::default();
        append(&path, &mut head, ev(0.1, 0.0)).unwrap();
        append(&path, &mut head, ev(0.2, 0.0)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        // Flip a digit inside record 2's stored sums.
        let tampered = text.replacen("\"sum_eps\":0.3", "\"sum_eps\":0.4", 1);
        assert_ne!(text, tampered);
        std::fs::write(&path, tampered).unwrap();
        let err = replay(&path).unwrap_err();
        assert!(format!("{err:?}").contains("record 2"), "{err:?}");
    }

    #[test]
    fn timestamp_does_not_affect_the_chain() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        let mut head = LedgerHead::default();
        append(&path, &mut head, ev(0.1, 0.0)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut rec: LedgerRecord = serde_json::from_str(text.trim()).unwrap();
        rec.ts += 10_000;
        std::fs::write(&path, format!("{}\n", serde_json::to_string(&rec).unwrap())).unwrap();
        assert!(replay(&path).is_ok());
    }
}
