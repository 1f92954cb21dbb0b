//! The deterministic read schedule.
//!
//! A schedule is a pure function of the policy and the source length:
//! `g(t) = min(k + (t-1)*s, |X|)`. There is no adaptive read/write decision
//! anywhere in this crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::PolicyConfig;

/// A policy applied to a concrete source length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub policy: PolicyConfig,
    /// Source length `|X|` in frames.
    pub src_len: usize,
}

impl Schedule {
    pub fn new(policy: PolicyConfig, src_len: usize) -> Result<Self> {
        policy.validate()?;
        if src_len < 1 {
            return Err(Error::Argument("src_len must be >= 1".into()));
        }
        Ok(Self { policy, src_len })
    }

    /// Frames read at step `t` (1-based): `min(k + (t-1)*s, |X|)`.
    pub fn frames_at_step(&self, t: usize) -> Result<usize> {
        if t < 1 {
            return Err(Error::Argument("step index t must be >= 1".into()));
        }
        Ok(self.frames_at_step_unchecked(t))
    }

    fn frames_at_step_unchecked(&self, t: usize) -> usize {
        self.policy
            .wait_k
            .saturating_add((t - 1).saturating_mul(self.policy.stride))
            .min(self.src_len)
    }

    /// Smallest step at which the whole source has been read. Always exists
    /// because `g` saturates at `|X|`.
    pub fn cutoff_step(&self) -> usize {
        if self.policy.wait_k >= self.src_len {
            return 1;
        }
        // First t with k + (t-1)*s >= |X|.
        let deficit = self.src_len - self.policy.wait_k;
        deficit.div_ceil(self.policy.stride) + 1
    }
}
