//! Monte-Carlo run-length engine.
//!
//! Every replication owns the random stream `SeedPlan { master_seed, r }`,
//! replications are processed in fixed chunks and reduced with exact
//! integer sums, so estimates are bit-identical for any worker count.

mod engine;
mod rng;

use serde::{Deserialize, Serialize};

pub use engine::{
    ced, ced_profile, conditional_delay_given_x1, sample_run_length, steady_state_arl, zero_state_arl,
    ConditionalDelay, RUN_LENGTH_CAP,
};
pub use rng::{inverse_normal, NormalStream, SeedPlan};
pub(crate) use engine::{chunks, Acc, CHUNK};

/// Observations are `N(0, 1)` before the change point `tau` and `N(delta, 1)` from `tau` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangePointModel {
    /// `None` means the process stays in control.
    pub tau: Option<u64>,
    pub delta: f64,
}

impl ChangePointModel {
    pub fn new(tau: u64, delta: f64) -> Self {
        ChangePointModel { tau: Some(tau), delta }
    }

    /// Shift present from the first observation on.
    pub fn immediate(delta: f64) -> Self {
        Self::new(1, delta)
    }

    pub fn in_control() -> Self {
        ChangePointModel { tau: None, delta: 0.0 }
    }

    #[inline]
    pub fn mean_at(&self, t: u64) -> f64 {
        match self.tau {
            Some(tau) if t >= tau => self.delta,
            _ => 0.0,
        }
    }
}

/// Point estimate of an expected run length or delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunLengthEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replications: u64,
    /// Share of simulated paths that survived to the change point (1 for zero-state runs).
    pub conditioned_fraction: f64,
    /// Paths stopped at the run-length cap; they enter the mean at the cap.
    pub censored: u64,
}

impl RunLengthEstimate {
    pub fn is_valid(&self) -> bool {
        self.censored == 0
    }
}
