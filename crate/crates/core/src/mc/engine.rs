use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ChangePointModel, NormalStream, RunLengthEstimate, SeedPlan};
use crate::charts::{Chart, ChartSpec, ChartState};
use crate::{Error, Result};

/// Longest path simulated before a replication is reported as censored.
pub const RUN_LENGTH_CAP: u64 = 10_000_000;

pub(crate) const CHUNK: u64 = 1024;
const MIN_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Acc {
    pub(crate) n: u64,
    pub(crate) sum: u128,
    pub(crate) sumsq: u128,
    pub(crate) censored: u64,
}

impl Acc {
    #[inline]
    pub(crate) fn push(&mut self, v: u64, censored: bool) {
        self.n += 1;
        self.sum += v as u128;
        self.sumsq += (v as u128) * (v as u128);
        self.censored += censored as u64;
    }

    pub(crate) fn merge(mut self, o: Acc) -> Acc {
        self.n += o.n;
        self.sum += o.sum;
        self.sumsq += o.sumsq;
        self.censored += o.censored;
        self
    }

    pub(crate) fn estimate(&self, fraction: f64) -> RunLengthEstimate {
        let n = self.n as f64;
        let mean = self.sum as f64 / n;
        let stderr = if self.n > 1 {
            let num = self.n as u128 * self.sumsq - self.sum * self.sum;
            (num as f64 / (n * (n - 1.0)) / n).sqrt()
        } else {
            f64::NAN
        };
        RunLengthEstimate { mean, stderr, replications: self.n, conditioned_fraction: fraction, censored: self.censored }
    }
}

// Lazily drawn noise shared by several continuations of one replication.
struct Tape {
    stream: NormalStream,
    z: Vec<f64>,
}

impl Tape {
    fn new(stream: NormalStream) -> Self {
        Tape { stream, z: Vec::with_capacity(256) }
    }

    #[inline]
    fn get(&mut self, t: u64) -> f64 {
        let t = t as usize;
        while self.z.len() < t {
            self.z.push(self.stream.next_normal());
        }
        self.z[t - 1]
    }
}

fn compile(spec: &ChartSpec) -> Result<Chart> {
    if !spec.is_calibrated() {
        return Err(Error::spec(format!("{spec} has no limit; calibrate it first")));
    }
    Chart::new(spec)
}

pub(crate) fn chunks(n: u64) -> impl IndexedParallelIterator<Item = (u64, u64)> {
    let count = n.div_ceil(CHUNK) as usize;
    (0..count).into_par_iter().map(move |c| {
        let c = c as u64;
        (c * CHUNK, ((c + 1) * CHUNK).min(n))
    })
}

// Continue a path from `state` (at time `t0`) until the chart signals.
// Returns the alarm time or `None` at the cap.
#[inline]
fn run_on(chart: &Chart, state: &mut ChartState, t0: u64, mut obs: impl FnMut(u64) -> f64) -> Option<u64> {
    let mut t = t0;
    while t < RUN_LENGTH_CAP {
        t += 1;
        chart.update(state, obs(t));
        if chart.check_alarm(state) {
            return Some(t);
        }
    }
    None
}

/// One run length `L` under `model`, drawing observations from `stream`.
pub fn sample_run_length(chart: &Chart, model: &ChangePointModel, stream: &mut NormalStream) -> Result<u64> {
    let mut state = chart.init_state();
    run_on(chart, &mut state, 0, |t| stream.next_normal() + model.mean_at(t)).ok_or(Error::Censored {
        count: 1,
        replications: 1,
        cap: RUN_LENGTH_CAP,
    })
}

/// Zero-state ARL `E_1(L)` for a shift `delta` present from the start.
pub fn zero_state_arl(spec: &ChartSpec, delta: f64, n_reps: u64, seed: u64) -> Result<RunLengthEstimate> {
    if n_reps < 1000 {
        return Err(Error::arg(format!("zero-state ARL needs at least 1000 replications, got {n_reps}")));
    }
    let chart = compile(spec)?;
    Ok(zero_state_acc(&chart, delta, n_reps, SeedPlan::new(seed)).estimate(1.0))
}

fn zero_state_acc(chart: &Chart, delta: f64, n_reps: u64, plan: SeedPlan) -> Acc {
    chunks(n_reps)
        .map(|(lo, hi)| {
            let mut acc = Acc::default();
            let mut state = chart.init_state();
            for r in lo..hi {
                let mut stream = plan.at(r).stream();
                chart.reset(&mut state);
                match run_on(chart, &mut state, 0, |_| stream.next_normal() + delta) {
                    Some(t) => acc.push(t, false),
                    None => acc.push(RUN_LENGTH_CAP, true),
                }
            }
            acc
        })
        .reduce(Acc::default, Acc::merge)
}

/// Conditional expected delay `E_tau(L - tau + 1 | L >= tau)` from `n_target`
/// paths that survive to the change point; paths signalling earlier are discarded.
pub fn ced(spec: &ChartSpec, model: &ChangePointModel, n_target: u64, seed: u64) -> Result<RunLengthEstimate> {
    let tau = model.tau.ok_or_else(|| Error::arg("conditional expected delay needs a finite change point"))?;
    if tau == 0 {
        return Err(Error::arg("change point must be >= 1"));
    }
    if n_target < 2 {
        return Err(Error::arg("need at least 2 surviving replications"));
    }
    let chart = compile(spec)?;
    let plan = SeedPlan::new(seed);
    if tau == 1 {
        return Ok(zero_state_acc(&chart, model.delta, n_target, plan).estimate(1.0));
    }
    let delta = model.delta;
    let mut acc = Acc::default();
    let mut processed = 0u64;
    let mut survived = 0u64;
    while acc.n < n_target {
        let need = n_target - acc.n;
        let fraction = if processed == 0 { 1.0 } else { (survived as f64 / processed as f64).max(MIN_FRACTION) };
        let batch = (((need as f64 / fraction) * 1.05).ceil() as u64).max(CHUNK).div_ceil(CHUNK) * CHUNK;
        let start = processed;
        let parts: Vec<Vec<(u64, bool)>> = chunks(batch)
            .map(|(lo, hi)| {
                let mut out = Vec::new();
                let mut state = chart.init_state();
                for r in (start + lo)..(start + hi) {
                    let mut stream = plan.at(r).stream();
                    chart.reset(&mut state);
                    let obs = |t: u64| stream.next_normal() + if t >= tau { delta } else { 0.0 };
                    match run_on(&chart, &mut state, 0, obs) {
                        Some(t) if t < tau => {}
                        Some(t) => out.push((t - tau + 1, false)),
                        None => out.push((RUN_LENGTH_CAP - tau + 1, true)),
                    }
                }
                out
            })
            .collect();
        processed += batch;
        for part in parts {
            survived += part.len() as u64;
            for (v, c) in part {
                if acc.n < n_target {
                    acc.push(v, c);
                }
            }
        }
        let frac = survived as f64 / processed as f64;
        if processed >= 10_000 && frac < MIN_FRACTION {
            return Err(Error::UnreachableChangePoint { tau, fraction: frac });
        }
    }
    Ok(acc.estimate(survived as f64 / processed as f64))
}

/// `D_100`, the proxy for the conditional steady-state ARL.
pub fn steady_state_arl(spec: &ChartSpec, delta: f64, n_target: u64, seed: u64) -> Result<RunLengthEstimate> {
    ced(spec, &ChangePointModel::new(100, delta), n_target, seed)
}

/// `D_tau` for `tau = 1..=tau_max` from `n_reps` paths with common random numbers:
/// every change point reuses the same in-control prefix and the same noise.
/// Each entry is averaged over the paths that survive to its change point.
pub fn ced_profile(
    spec: &ChartSpec,
    delta: f64,
    tau_max: u64,
    n_reps: u64,
    seed: u64,
) -> Result<Vec<RunLengthEstimate>> {
    if tau_max == 0 {
        return Err(Error::arg("tau_max must be >= 1"));
    }
    if n_reps < 2 {
        return Err(Error::arg("need at least 2 replications"));
    }
    let chart = compile(spec)?;
    let plan = SeedPlan::new(seed);
    let m = tau_max as usize;
    let accs = chunks(n_reps)
        .map(|(lo, hi)| {
            let mut accs = vec![Acc::default(); m];
            let mut ic = chart.init_state();
            let mut shifted = chart.init_state();
            for r in lo..hi {
                let mut tape = Tape::new(plan.at(r).stream());
                chart.reset(&mut ic);
                for tau in 1..=tau_max {
                    shifted.clone_from(&ic);
                    let res = run_on(&chart, &mut shifted, tau - 1, |t| tape.get(t) + delta);
                    match res {
                        Some(t) => accs[tau as usize - 1].push(t - tau + 1, false),
                        None => accs[tau as usize - 1].push(RUN_LENGTH_CAP - tau + 1, true),
                    }
                    if tau == tau_max {
                        break;
                    }
                    chart.update(&mut ic, tape.get(tau));
                    if chart.check_alarm(&ic) {
                        break;
                    }
                }
            }
            accs
        })
        .reduce(
            || vec![Acc::default(); m],
            |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
        );
    accs.iter()
        .enumerate()
        .map(|(k, acc)| {
            let frac = acc.n as f64 / n_reps as f64;
            if acc.n < 2 || frac < MIN_FRACTION {
                return Err(Error::UnreachableChangePoint { tau: k as u64 + 1, fraction: frac });
            }
            Ok(acc.estimate(frac))
        })
        .collect()
}

/// One point of the profile `l(x1) = E_2(L - 1 | X_1 = x1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDelay {
    pub x1: f64,
    /// `None` when `x1` alone triggers an alarm at the first observation.
    pub estimate: Option<RunLengthEstimate>,
}

/// Expected delay after a first in-control observation fixed at `x1`, with
/// the shift present from the second observation on. Grid points share noise.
pub fn conditional_delay_given_x1(
    spec: &ChartSpec,
    delta: f64,
    x1_grid: &[f64],
    n_reps: u64,
    seed: u64,
) -> Result<Vec<ConditionalDelay>> {
    if n_reps < 2 {
        return Err(Error::arg("need at least 2 replications"));
    }
    let chart = compile(spec)?;
    let plan = SeedPlan::new(seed);
    let admissible: Vec<bool> = x1_grid
        .iter()
        .map(|&x1| {
            let mut s = chart.init_state();
            chart.update(&mut s, x1);
            !chart.check_alarm(&s)
        })
        .collect();
    let m = x1_grid.len();
    let accs = chunks(n_reps)
        .map(|(lo, hi)| {
            let mut accs = vec![Acc::default(); m];
            let mut state = chart.init_state();
            for r in lo..hi {
                let mut tape = Tape::new(plan.at(r).stream());
                for (g, &x1) in x1_grid.iter().enumerate() {
                    if !admissible[g] {
                        continue;
                    }
                    chart.reset(&mut state);
                    chart.update(&mut state, x1);
                    match run_on(&chart, &mut state, 1, |t| tape.get(t) + delta) {
                        Some(t) => accs[g].push(t - 1, false),
                        None => accs[g].push(RUN_LENGTH_CAP - 1, true),
                    }
                }
            }
            accs
        })
        .reduce(
            || vec![Acc::default(); m],
            |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
        );
    Ok(x1_grid
        .iter()
        .zip(accs)
        .zip(admissible)
        .map(|((&x1, acc), ok)| ConditionalDelay { x1, estimate: ok.then(|| acc.estimate(1.0)) })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::shewhart_arl;

    #[test]
    fn shewhart_oracle() {
        let spec = ChartSpec::ewma(1.0, 3.0).unwrap();
        for delta in [0.0, 1.0, 2.0] {
            let est = zero_state_arl(&spec, delta, 100_000, 11).unwrap();
            let truth = shewhart_arl(3.0, delta);
            assert!((est.mean - truth).abs() < 3.5 * est.stderr, "delta={delta} est={est:?} truth={truth}");
        }
    }

    #[test]
    fn tiny_limit_alarms_at_once() {
        let spec = ChartSpec::ewma(1.0, 1e-12).unwrap();
        let est = zero_state_arl(&spec, 0.0, 1000, 1).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn ced_at_one_is_zero_state() {
        let spec = ChartSpec::cusum(0.5, 3.0).unwrap();
        let a = zero_state_arl(&spec, 0.5, 2000, 5).unwrap();
        let b = ced(&spec, &ChangePointModel::new(1, 0.5), 2000, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ced_reports_survival() {
        let spec = ChartSpec::ewma(0.1, 2.0).unwrap();
        let est = ced(&spec, &ChangePointModel::new(30, 1.0), 3000, 2).unwrap();
        assert_eq!(est.replications, 3000);
        assert!(est.conditioned_fraction > 0.3 && est.conditioned_fraction < 1.0);
        assert!(est.mean >= 1.0);
    }

    #[test]
    fn unreachable_change_point() {
        let spec = ChartSpec::ewma(1.0, 0.5).unwrap();
        let err = ced(&spec, &ChangePointModel::new(50, 1.0), 100, 2).unwrap_err();
        assert!(matches!(err, Error::UnreachableChangePoint { tau: 50, .. }));
    }

    #[test]
    fn profile_first_entry_is_zero_state() {
        let spec = ChartSpec::cusum(0.5, 4.0).unwrap();
        let prof = ced_profile(&spec, 1.0, 5, 3000, 8).unwrap();
        let zs = zero_state_arl(&spec, 1.0, 3000, 8).unwrap();
        assert_eq!(prof[0].mean, zs.mean);
        assert_eq!(prof.len(), 5);
    }

    #[test]
    fn immediate_alarm_point_is_rejected() {
        let spec = ChartSpec::cusum(0.5, 4.0).unwrap();
        let out = conditional_delay_given_x1(&spec, 1.0, &[0.0, 5.0], 200, 3).unwrap();
        assert!(out[0].estimate.is_some());
        assert!(out[1].estimate.is_none());
    }

    #[test]
    fn uncalibrated_spec_is_rejected() {
        let spec = ChartSpec::builder(crate::Family::Cusum).k(0.5).build().unwrap();
        assert!(zero_state_arl(&spec, 0.0, 1000, 1).unwrap_err().is_validation());
    }

    #[test]
    fn too_few_replications() {
        let spec = ChartSpec::cusum(0.5, 4.0).unwrap();
        assert!(zero_state_arl(&spec, 0.0, 10, 1).is_err());
    }
}
