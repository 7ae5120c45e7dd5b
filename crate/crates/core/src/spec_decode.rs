//! Statistical model of speculative decoding.
//!
//! Draft/target inference is collapsed to a single marginal per-token
//! acceptance rate: each of the K drafted tokens survives verification
//! independently with that probability, acceptance stops at the first
//! rejection, and the target model contributes one bonus token per
//! verification step. Per-step network payloads are token IDs plus the
//! draft's probability rows, which are vocabulary-sized.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardware::ModelSpec;

/// Default number of speculative tokens proposed per step.
pub const DEFAULT_DRAFT_K: u32 = 4;
/// Default marginal acceptance rate for a ~1B-parameter draft model.
pub const DEFAULT_ACCEPTANCE_1B: f64 = 0.8;
/// Default marginal acceptance rate for a ~300M-parameter draft model.
pub const DEFAULT_ACCEPTANCE_300M: f64 = 0.7;

/// Bytes of a 32-bit token id on the wire.
pub const TOKEN_ID_BYTES: u64 = 4;

/// Speculation window: K drafted tokens per step and the marginal
/// probability that each one survives verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DraftWindow {
    pub k: u32,
    pub acceptance_rate: f64,
}

impl DraftWindow {
    pub fn new(k: u32, acceptance_rate: f64) -> Result<Self> {
        let w = DraftWindow { k, acceptance_rate };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Contract("draft window k must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.acceptance_rate) || !self.acceptance_rate.is_finite() {
            return Err(Error::Contract(format!(
                "acceptance rate must be in [0, 1], got {}",
                self.acceptance_rate
            )));
        }
        Ok(())
    }
}

/// Per-step wire payload sizes for one sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepPayload {
    pub token_ids_bytes: u64,
    pub probs_bytes: u64,
}

impl StepPayload {
    pub fn total_bytes(&self) -> u64 {
        self.token_ids_bytes + self.probs_bytes
    }
}

/// Rejection-sampling acceptance probability of one draft token:
/// `min(1, q / p)` where `q` is the target's probability for the token and
/// `p` is the draft's.
pub fn acceptance_probability(q: f64, p: f64) -> Result<f64> {
    if p <= 0.0 || !p.is_finite() {
        return Err(Error::Domain(format!(
            "draft probability must be > 0, got {p}"
        )));
    }
    if q < 0.0 || !q.is_finite() {
        return Err(Error::Domain(format!(
            "target probability must be finite and >= 0, got {q}"
        )));
    }
    Ok((q / p).min(1.0))
}

/// Expected tokens emitted per verification step, bonus token included:
/// sum over i of alpha^i for i = 0..=k, i.e. (1 - alpha^(k+1)) / (1 - alpha).
pub fn expected_accepted(window: &DraftWindow) -> f64 {
    let a = window.acceptance_rate;
    let k = window.k;
    if a >= 1.0 {
        return (k + 1) as f64;
    }
    (1.0 - a.powi(k as i32 + 1)) / (1.0 - a)
}

/// Draw the number of tokens emitted by one verification step: i.i.d.
/// Bernoulli(acceptance_rate) per drafted position, stop at the first
/// rejection, plus the bonus token. Result is in 1..=k+1.
pub fn sample_accept_count<R: Rng + ?Sized>(window: &DraftWindow, rng: &mut R) -> u64 {
    let mut accepted = 0u64;
    for _ in 0..window.k {
        let u: f64 = rng.gen();
        if u < window.acceptance_rate {
            accepted += 1;
        } else {
            break;
        }
    }
    accepted + 1
}

/// Per-sequence payload sizes for one speculation step: `k` 32-bit token ids
/// and `k` probability rows of `vocab_size * bytes_per_prob` each.
pub fn payload_sizes(model: &ModelSpec, k: u32, bytes_per_prob: u64) -> Result<StepPayload> {
    if k < 1 {
        return Err(Error::Contract("k must be >= 1".into()));
    }
    Ok(StepPayload {
        token_ids_bytes: k as u64 * TOKEN_ID_BYTES,
        probs_bytes: k as u64 * model.vocab_size as u64 * bytes_per_prob,
    })
}
