//! Self-normalized martingale concentration, kept as a standalone
//! scalar function so its coverage can be falsified independently of
//! the accounting layer built on top of it.

use crate::{Error, Result};

/// Squared-range accumulator for a martingale with predictable bounds
/// C_i <= X_i <= D_i: tracks U_k^2 = sum (D_i - C_i)^2.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MartingaleEnvelope {
    pub u_sq: f64,
    pub rounds: u64,
}

impl MartingaleEnvelope {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, lower: f64, upper: f64) {
        debug_assert!(lower <= upper);
        let range = upper - lower;
        self.u_sq += range * range;
        self.rounds += 1;
    }
}

/// Tail threshold for a self-normalized martingale: with probability at
/// least 1 - delta,
///
/// |M_k| < sqrt((U_k^2/4 + beta) (2 + ln(U_k^2/(4 beta) + 1)) ln(1/delta))
///
/// for any fixed k, any beta > 0 and delta in (0, 1/e].
pub fn self_normalized_bound(u_sq: f64, beta: f64, delta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::NonPositiveBeta(beta));
    }
    if !(delta > 0.0 && delta <= std::f64::consts::E.recip()) {
        return Err(Error::DeltaOutOfRange(delta, "(0, 1/e]"));
    }
    debug_assert!(u_sq >= 0.0);
    let q = u_sq / 4.0;
    Ok(((q + beta) * (2.0 + (q / beta).ln_1p()) * (1.0 / delta).ln()).sqrt())
}
