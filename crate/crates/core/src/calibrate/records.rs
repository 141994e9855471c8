//! Sample paths summarised for every candidate factor at once.
//!
//! The chart states never depend on the calibrated factor, only the alarm
//! decision does. For a path, `L(theta)` is the first time `t` at which
//! `theta < max_{s<=t} below_s` or `theta >= min_{s<=t} at_or_above_s`, so
//! the record values of those running extremes determine `L` on a whole
//! bracket of factors. The sample mean is then an exact step function of
//! `theta` and can be root-found without simulation noise between steps.

use rayon::prelude::*;

use crate::charts::Chart;
use crate::mc::{chunks, Acc, SeedPlan, RUN_LENGTH_CAP};

#[derive(Debug, Default)]
struct Block {
    below: Vec<(f64, u64)>,
    above: Vec<(f64, u64)>,
    below_end: Vec<u32>,
    above_end: Vec<u32>,
}

#[derive(Debug)]
pub(crate) struct Records {
    blocks: Vec<Block>,
    cap: u64,
    pub(crate) lo: f64,
    pub(crate) hi: f64,
}

impl Records {
    /// In-control paths `0..n` of `plan`, each followed until every factor in
    /// `[lo, hi]` has signalled or `cap` observations have been seen.
    pub(crate) fn simulate(chart: &Chart, plan: SeedPlan, n: u64, lo: f64, hi: f64, cap: u64) -> Records {
        let blocks = chunks(n)
            .map(|(a, b)| {
                let mut blk = Block::default();
                let mut state = chart.init_state();
                for r in a..b {
                    let mut stream = plan.at(r).stream();
                    chart.reset(&mut state);
                    let mut mx = f64::NEG_INFINITY;
                    let mut mn = f64::INFINITY;
                    let mut t = 0;
                    loop {
                        t += 1;
                        chart.update(&mut state, stream.next_normal());
                        let reg = chart.region(&state);
                        if reg.below > mx {
                            mx = reg.below;
                            if mx > lo {
                                blk.below.push((mx, t));
                            }
                        }
                        if reg.at_or_above < mn {
                            mn = reg.at_or_above;
                            if mn <= hi {
                                blk.above.push((mn, t));
                            }
                        }
                        if mx > hi || mn <= lo || mn <= mx {
                            break;
                        }
                        if t >= cap {
                            blk.below.push((f64::INFINITY, t));
                            break;
                        }
                    }
                    blk.below_end.push(blk.below.len() as u32);
                    blk.above_end.push(blk.above.len() as u32);
                }
                blk
            })
            .collect();
        Records { blocks, cap, lo, hi }
    }

    pub(crate) fn replications(&self) -> u64 {
        self.blocks.iter().map(|b| b.below_end.len() as u64).sum()
    }

    /// Run-length statistics of the factor `theta`, which must lie in `[lo, hi]`.
    pub(crate) fn eval(&self, theta: f64) -> Acc {
        debug_assert!(theta >= self.lo && theta <= self.hi);
        let censor_at = if self.cap >= RUN_LENGTH_CAP { self.cap } else { u64::MAX };
        self.blocks
            .par_iter()
            .map(|blk| {
                let mut acc = Acc::default();
                let (mut b0, mut a0) = (0usize, 0usize);
                for (&b1, &a1) in blk.below_end.iter().zip(&blk.above_end) {
                    let (b1, a1) = (b1 as usize, a1 as usize);
                    let tb = blk.below[b0..b1].iter().find(|r| r.0 > theta).map_or(u64::MAX, |r| r.1);
                    let ta = blk.above[a0..a1].iter().find(|r| r.0 <= theta).map_or(u64::MAX, |r| r.1);
                    let l = tb.min(ta);
                    acc.push(l, l >= censor_at);
                    b0 = b1;
                    a0 = a1;
                }
                acc
            })
            .reduce(Acc::default, Acc::merge)
    }

    pub(crate) fn mean(&self, theta: f64) -> f64 {
        let acc = self.eval(theta);
        acc.sum as f64 / acc.n as f64
    }

    /// A factor in `[lo, hi]` where the sample mean crosses `level`, or `None`
    /// when the bracket does not straddle it.
    pub(crate) fn solve(&self, level: f64, lo: f64, hi: f64) -> Option<f64> {
        if !(self.mean(lo) < level && self.mean(hi) >= level) {
            return None;
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.mean(mid) < level {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= 1e-12 * b {
                break;
            }
        }
        Some(0.5 * (a + b))
    }
}
