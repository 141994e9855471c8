//! Chart designs as deterministic state machines.
//!
//! A [`ChartSpec`] is the algebraic description of one design. It is compiled
//! into a [`Chart`], which owns the precomputed time-indexed scales, and each
//! simulated path keeps its own [`ChartState`].

mod chart;
mod spec;
mod weights;

pub use chart::{AlarmRegion, Chart, ChartState, Thresholds};
pub use spec::{ChartSpec, Family, LimitPolicy, RunsRule, SpecBuilder};
pub use weights::{dma_weights, weight_vector};
