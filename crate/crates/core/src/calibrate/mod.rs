//! Design matching rules and Monte-Carlo calibration of limit factors.

mod records;

use serde::{Deserialize, Serialize};

use crate::analytic::{dma_var_closed, ewma_arl_numeric, sigma_q};
use crate::charts::{Chart, ChartSpec, Family, LimitPolicy};
use crate::mc::{self, RunLengthEstimate, SeedPlan, CHUNK};
use crate::{Error, Result};
use records::Records;

/// CUSUM reference value that matches a MEC design: `k = a* sigma_Q,inf`.
pub fn k_from_lambda(lambda_q: f64, a_star: f64) -> f64 {
    a_star * sigma_q(lambda_q, None)
}

/// MA and EWMA designs with the same final variance as DMA(`w2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaMatch {
    pub sigma_d2: f64,
    pub w1: usize,
    pub lambda: f64,
}

pub fn match_ma_from_dma(w2: usize) -> Result<MaMatch> {
    if w2 == 0 {
        return Err(Error::arg("window size must be >= 1"));
    }
    let sigma_d2 = dma_var_closed(w2 as u64);
    // f64::round rounds half away from zero
    let w1 = (1.0 / sigma_d2).round() as usize;
    let lambda = match_lambda_by_asymptotic_variance(sigma_d2)?;
    Ok(MaMatch { sigma_d2, w1, lambda })
}

/// EWMA smoothing constant whose asymptotic variance `lambda / (2 - lambda)` equals `v`.
pub fn match_lambda_by_asymptotic_variance(v: f64) -> Result<f64> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::arg(format!("target variance must lie in (0, 1], got {v}")));
    }
    Ok(2.0 * v / (1.0 + v))
}

/// In-control ARL to hit and how hard to try.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub in_control_arl: f64,
    /// Relative half-width allowed for twice the standard error of the achieved ARL.
    pub tolerance: f64,
    /// Replication escalations before giving up.
    pub max_iterations: usize,
    /// Minimum number of replications of the final stage.
    pub n_reps: u64,
}

impl CalibrationTarget {
    pub fn new(in_control_arl: f64) -> Self {
        CalibrationTarget { in_control_arl, tolerance: 0.0025, max_iterations: 4, n_reps: 100_000 }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_reps(mut self, n_reps: u64) -> Self {
        self.n_reps = n_reps;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.in_control_arl > 1.0) || !self.in_control_arl.is_finite() {
            return Err(Error::arg(format!("in-control ARL must exceed 1, got {}", self.in_control_arl)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::arg("tolerance must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::arg("max_iterations must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub spec: ChartSpec,
    pub factor: f64,
    /// Delta-method standard error of `factor`, from the slope of the ARL curve.
    pub factor_stderr: Option<f64>,
    pub achieved: RunLengthEstimate,
    pub iterations: usize,
}

const PILOT_REPS: u64 = 4 * CHUNK;
const WIDEN: f64 = 1.6;
const BAND: f64 = 1.25;

/// Find the limit factor (the alarm limit for runs-rule CUSUM charts) whose
/// in-control zero-state ARL equals the target.
///
/// A pilot sample brackets the factor between the designs with ARL `A/1.25`
/// and `1.25 A` (or the largest factor tried when the ARL saturates below
/// that, as for runs-rule CUSUM charts); the final sample is then root-found exactly on that bracket.
/// The final sample grows until twice its standard error at the root falls
/// within `tolerance * A`.
pub fn calibrate_limit(spec: &ChartSpec, target: &CalibrationTarget, seed: u64) -> Result<Calibration> {
    target.validate()?;
    let base = spec.without_calibrated_factor();
    let chart = Chart::new(&base)?;
    let a = target.in_control_arl;
    let plan = SeedPlan::new(seed);
    let pilot_plan = plan.derive("pilot");
    let floor = match base.family() {
        Family::RrCusum => base.warning().unwrap_or(0.0),
        _ => 0.0,
    };
    let shrink = |lo: f64| floor + (lo - floor) / WIDEN;
    let (mut lo, mut hi) = match base.family() {
        Family::RrCusum => (floor + 0.25, floor + 3.0),
        _ => (0.5, 6.0),
    };
    let pilot_cap = (10.0 * a).ceil() as u64;
    let mut pilot = None;
    let mut plateau = f64::NAN;
    for _ in 0..40 {
        let rec = Records::simulate(&chart, pilot_plan, PILOT_REPS, lo, hi, pilot_cap);
        let top = rec.mean(hi);
        let bottom = rec.mean(lo);
        let at_floor = lo - floor < 1e-3;
        if bottom >= a || (bottom >= a / BAND && !at_floor) {
            if at_floor {
                break;
            }
            lo = shrink(lo);
        } else if top < a {
            // A mean that no longer grows with the factor has saturated (runs
            // rules alone); the final sample decides whether it reaches `a`.
            if (top - plateau).abs() < 3.0 * top / (PILOT_REPS as f64).sqrt() {
                pilot = Some(rec);
                break;
            }
            plateau = top;
            lo = hi;
            hi = floor + (hi - floor) * WIDEN;
        } else {
            pilot = Some(rec);
            break;
        }
    }
    let pilot = pilot.ok_or_else(|| {
        Error::BracketNotFound(format!("{base}: no factor in [{lo}, {hi}] reaches in-control ARL {a}"))
    })?;
    let lo2 = pilot.solve(a / BAND, lo, hi).unwrap_or(lo);
    let hi2 = pilot.solve(a * BAND, lo, hi).unwrap_or(hi);
    let mid = pilot.solve(a, lo, hi).unwrap_or(0.5 * (lo + hi));
    let sd = {
        let acc = pilot.eval(mid);
        let est = acc.estimate(1.0);
        est.stderr * (acc.n as f64).sqrt()
    };
    let mut n = needed(sd, a, target.tolerance).max(target.n_reps);
    let (mut lo2, mut hi2) = (lo2, hi2);
    let final_plan = plan.derive("final");
    let mut last = String::new();
    for iteration in 1..=target.max_iterations {
        let rec = Records::simulate(&chart, final_plan, n, lo2, hi2, mc::RUN_LENGTH_CAP);
        let Some(theta) = rec.solve(a, lo2, hi2) else {
            if (lo2, hi2) == (lo, hi) {
                return Err(Error::BracketNotFound(format!(
                    "{base}: in-control ARL of {n} paths does not cross {a} on [{lo}, {hi}]"
                )));
            }
            last = format!("final sample of {n} paths does not cross {a} on [{lo2}, {hi2}]");
            lo2 = lo;
            hi2 = hi;
            continue;
        };
        let achieved = rec.eval(theta).estimate(1.0);
        if achieved.censored > 0 {
            return Err(Error::Censored { count: achieved.censored, replications: rec.replications(), cap: mc::RUN_LENGTH_CAP });
        }
        if 2.0 * achieved.stderr <= target.tolerance * a {
            let step = 0.01 * (theta - floor).max(1e-3);
            let (t0, t1) = ((theta - step).max(rec.lo), (theta + step).min(rec.hi));
            let slope = (rec.mean(t1) - rec.mean(t0)) / (t1 - t0);
            let factor_stderr = (slope > 0.0).then(|| achieved.stderr / slope);
            return Ok(Calibration {
                spec: base.with_calibrated_factor(theta)?,
                factor: theta,
                factor_stderr,
                achieved,
                iterations: iteration,
            });
        }
        last = format!("stderr {:.4} at {n} paths", achieved.stderr);
        n = needed(achieved.stderr * (n as f64).sqrt(), a, target.tolerance).max(2 * n);
    }
    Err(Error::ToleranceNotReached { iterations: target.max_iterations, detail: last })
}

/// Limit factor of the EWMA chart with in-control zero-state ARL `a`, from the
/// numeric ARL (no simulation). Regula falsi on `log ARL`, which is close to
/// linear in the factor.
pub fn calibrate_ewma_numeric(lambda: f64, a: f64, policy: LimitPolicy) -> Result<f64> {
    if !(a > 1.0) || !a.is_finite() {
        return Err(Error::arg(format!("target ARL must exceed 1, got {a}")));
    }
    let f = |c: f64| -> Result<f64> { Ok(ewma_arl_numeric(lambda, c, 0.0, policy)?.value.ln() - a.ln()) };
    let (mut lo, mut hi) = (1.0, 3.0);
    let (mut flo, mut fhi) = (f(lo)?, f(hi)?);
    while flo > 0.0 {
        lo /= 2.0;
        flo = f(lo)?;
    }
    let mut grow = 0;
    while fhi < 0.0 {
        if grow == 8 {
            return Err(Error::BracketNotFound(format!("EWMA lambda={lambda}: in-control ARL {a} not reached")));
        }
        lo = hi;
        flo = fhi;
        hi += 1.0;
        fhi = f(hi)?;
        grow += 1;
    }
    let mut side = 0;
    for _ in 0..100 {
        let c = (lo * fhi - hi * flo) / (fhi - flo);
        let fc = f(c)?;
        if fc.abs() < 1e-11 || hi - lo < 1e-12 {
            return Ok(c);
        }
        if fc > 0.0 {
            hi = c;
            fhi = fc;
            if side == -1 {
                flo /= 2.0;
            }
            side = -1;
        } else {
            lo = c;
            flo = fc;
            if side == 1 {
                fhi /= 2.0;
            }
            side = 1;
        }
    }
    Err(Error::ToleranceNotReached { iterations: 100, detail: format!("EWMA lambda={lambda}, bracket [{lo}, {hi}]") })
}

fn needed(sd: f64, a: f64, tol: f64) -> u64 {
    let n = (2.0 * sd / (tol * a)).powi(2) * 1.1;
    if !n.is_finite() {
        return CHUNK;
    }
    ((n.ceil() as u64).div_ceil(CHUNK) * CHUNK).max(CHUNK)
}

/// One window size of a window optimisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPoint {
    pub w: usize,
    pub factor: f64,
    pub steady_state: RunLengthEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowOptimum {
    pub w_star: usize,
    pub points: Vec<WindowPoint>,
}

/// Calibrate MA or DMA charts for every window in `windows` to the target
/// and pick the one with the smallest `D_100` at shift `delta`.
/// All windows share the random numbers of the delay estimate.
pub fn optimize_window(
    family: Family,
    delta: f64,
    windows: &[usize],
    target: &CalibrationTarget,
    n_reps: u64,
    seed: u64,
) -> Result<WindowOptimum> {
    if !matches!(family, Family::Ma | Family::Dma) {
        return Err(Error::arg(format!("window optimisation applies to MA and DMA charts, not {family}")));
    }
    if windows.is_empty() {
        return Err(Error::arg("empty window range"));
    }
    let mut points = Vec::with_capacity(windows.len());
    for &w in windows {
        let spec = ChartSpec::builder(family).window(w).build()?;
        let cal = calibrate_limit(&spec, target, seed)?;
        let steady_state = mc::steady_state_arl(&cal.spec, delta, n_reps, seed)?;
        points.push(WindowPoint { w, factor: cal.factor, steady_state });
    }
    let best = points
        .iter()
        .min_by(|a, b| a.steady_state.mean.total_cmp(&b.steady_state.mean))
        .map(|p| p.w)
        .unwrap_or(windows[0]);
    Ok(WindowOptimum { w_star: best, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn table_one_reference_values() {
        let expect = [(0.1, 0.1147), (0.25, 0.1890), (0.5, 0.2887), (0.75, 0.3873), (1.0, 0.5)];
        for (l, k) in expect {
            assert_abs_diff_eq!(k_from_lambda(l, 0.5), k, epsilon = 5e-5);
        }
    }

    #[test]
    fn dma_matching() {
        let m = match_ma_from_dma(2).unwrap();
        assert_abs_diff_eq!(m.sigma_d2, 0.375, epsilon = 1e-15);
        assert_eq!(m.w1, 3);
        assert_abs_diff_eq!(m.lambda, 0.545, epsilon = 5e-4);
        let m = match_ma_from_dma(3).unwrap();
        assert_eq!(m.w1, 4);
        assert_abs_diff_eq!(m.lambda, 0.380, epsilon = 5e-4);
        assert_eq!(match_ma_from_dma(1).unwrap(), MaMatch { sigma_d2: 1.0, w1: 1, lambda: 1.0 });
        assert!(match_ma_from_dma(0).is_err());
    }

    #[test]
    fn numeric_ewma_calibration() {
        let c = calibrate_ewma_numeric(0.1, 168.0, LimitPolicy::TimeVarying).unwrap();
        assert_abs_diff_eq!(c, 2.4098, epsilon = 5e-5);
        let arl = ewma_arl_numeric(0.1, c, 0.0, LimitPolicy::TimeVarying).unwrap().value;
        assert_abs_diff_eq!(arl, 168.0, epsilon = 1e-8);
        assert!(calibrate_ewma_numeric(0.1, 0.5, LimitPolicy::TimeVarying).is_err());
    }

    #[test]
    fn variance_matching() {
        let v = crate::analytic::dewma_var_inf(0.1);
        assert_abs_diff_eq!(match_lambda_by_asymptotic_variance(v).unwrap(), 0.05142, epsilon = 5e-6);
        assert_eq!(match_lambda_by_asymptotic_variance(1.0).unwrap(), 1.0);
        assert!(match_lambda_by_asymptotic_variance(0.0).is_err());
        assert!(match_lambda_by_asymptotic_variance(1.5).is_err());
    }

    #[test]
    fn records_agree_with_direct_simulation() {
        let spec = ChartSpec::builder(Family::Ewma).lambda(0.2).build().unwrap();
        let chart = Chart::new(&spec).unwrap();
        let plan = SeedPlan::new(4);
        let rec = Records::simulate(&chart, plan, 2048, 2.0, 2.8, mc::RUN_LENGTH_CAP);
        for theta in [2.0, 2.3, 2.8] {
            let cal = spec.with_calibrated_factor(theta).unwrap();
            let direct = mc::zero_state_arl(&cal, 0.0, 2048, 4).unwrap();
            assert_eq!(rec.mean(theta), direct.mean, "theta={theta}");
        }
    }

    #[test]
    fn records_agree_for_runs_rule_cusum() {
        let spec = ChartSpec::rr_cusum(0.5, 2.0, 3.0, crate::RunsRule::TwoOfThree).unwrap();
        let chart = Chart::new(&spec.without_calibrated_factor()).unwrap();
        let plan = SeedPlan::new(9);
        let rec = Records::simulate(&chart, plan, 2048, 2.2, 4.0, mc::RUN_LENGTH_CAP);
        for theta in [2.2, 2.9, 4.0] {
            let cal = spec.with_calibrated_factor(theta).unwrap();
            let direct = mc::zero_state_arl(&cal, 0.0, 2048, 9).unwrap();
            assert_eq!(rec.mean(theta), direct.mean, "theta={theta}");
        }
    }

    #[test]
    fn calibrates_shewhart_limit() {
        let spec = ChartSpec::builder(Family::Ewma).lambda(1.0).build().unwrap();
        let target = CalibrationTarget::new(100.0).with_tolerance(0.02).with_reps(10_000);
        let cal = calibrate_limit(&spec, &target, 1).unwrap();
        // 1 / (2 Phi(-c)) = 100  =>  c = 2.5758
        assert_abs_diff_eq!(cal.factor, 2.5758, epsilon = 0.03);
        assert!(2.0 * cal.achieved.stderr <= 0.02 * 100.0);
    }

    #[test]
    fn bad_target() {
        let spec = ChartSpec::builder(Family::Cusum).k(0.5).build().unwrap();
        assert!(calibrate_limit(&spec, &CalibrationTarget::new(0.5), 1).is_err());
        assert!(calibrate_limit(&spec, &CalibrationTarget::new(100.0).with_tolerance(0.0), 1).is_err());
    }

    #[test]
    fn window_optimisation_rejects_other_families() {
        let t = CalibrationTarget::new(100.0);
        assert!(optimize_window(Family::Ewma, 1.0, &[2, 3], &t, 1000, 1).is_err());
        assert!(optimize_window(Family::Ma, 1.0, &[], &t, 1000, 1).is_err());
    }
}
