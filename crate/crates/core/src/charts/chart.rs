use super::{weights::dma_weights, ChartSpec, Family, LimitPolicy, RunsRule};
use crate::analytic::{dewma_var, dewma_var_inf, ewma_sd, harmonic_approx, tewma_var};
use crate::{Error, Result};

const MAX_TABLE: usize = 1 << 20;
const GROWING_TABLE: usize = 1 << 16;

/// The set of calibrated-factor values `theta` that signal at the current time:
/// `theta < below` or `theta >= at_or_above` (an infinite `at_or_above` never signals).
///
/// For every family except runs-rule CUSUM, `at_or_above` is infinite and
/// `below` is the current statistic expressed in units of the factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlarmRegion {
    pub below: f64,
    pub at_or_above: f64,
}

impl AlarmRegion {
    #[inline]
    pub fn alarms(&self, theta: f64) -> bool {
        theta < self.below || (theta >= self.at_or_above && self.at_or_above < f64::INFINITY)
    }
}

/// Time-indexed thresholds of a calibrated chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Thresholds {
    /// Signal when the statistic leaves `[-limit, limit]`.
    Symmetric { limit: f64 },
    /// CUSUM-type reference value and decision limit.
    Cusum { reference: f64, limit: f64 },
    /// Warning and alarm limits of a runs-rule CUSUM.
    Warning { warning: f64, alarm: f64 },
}

/// Per-path recursion state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartState {
    i: u64,
    levels: [f64; 3],
    pos: f64,
    neg: f64,
    stat: f64,
    x_ring: Vec<f64>,
    m_ring: Vec<f64>,
    x_sum: f64,
    m_sum: f64,
    head: usize,
    pm_sum: f64,
    dpm_sum: f64,
    // most recent last; only the first `runs` entries are meaningful
    up: [f64; 3],
    down: [f64; 3],
    runs: usize,
}

impl ChartState {
    pub fn time(&self) -> u64 {
        self.i
    }

    /// Stacked EWMA levels `Z^(1), Z^(2), Z^(3)` (`Q` for MEC).
    pub fn levels(&self) -> [f64; 3] {
        self.levels
    }

    pub fn cusum_pos(&self) -> f64 {
        self.pos
    }

    pub fn cusum_neg(&self) -> f64 {
        self.neg
    }

    /// The plotted statistic of a linear chart (`Q_i` for MEC, `max(C+, C-)` for CUSUMs).
    pub fn statistic(&self) -> f64 {
        self.stat
    }

    /// Running mean of the observations (`P_t` for PM/DPM).
    pub fn progressive_mean(&self) -> f64 {
        if self.i == 0 {
            0.0
        } else {
            self.pm_sum / self.i as f64
        }
    }

    fn push_runs(&mut self, up: f64, down: f64) {
        self.up = [self.up[1], self.up[2], up];
        self.down = [self.down[1], self.down[2], down];
        self.runs = (self.runs + 1).min(3);
    }
}

/// A validated spec together with its precomputed time-indexed scales.
#[derive(Debug, Clone)]
pub struct Chart {
    spec: ChartSpec,
    family: Family,
    theta: f64,
    lambda: f64,
    k: f64,
    a_star: f64,
    w: usize,
    p: f64,
    warning: f64,
    rule: RunsRule,
    // unit[i-1] is the standard deviation (or limit base) at time i
    unit: Vec<f64>,
    inv_unit: Vec<f64>,
    unit_tail: f64,
}

impl Chart {
    /// Compile a spec. Uncalibrated specs are accepted; such a chart never signals
    /// through [`Chart::check_alarm`] but its [`Chart::region`] is fully usable.
    pub fn new(spec: &ChartSpec) -> Result<Self> {
        let family = spec.family();
        let lambda = spec.lambda().unwrap_or(1.0);
        let w = spec.window().unwrap_or(1);
        let p = spec.exponent().unwrap_or(0.0);
        let asymptotic = spec.policy() == LimitPolicy::Asymptotic;
        let (unit, unit_tail) = match family {
            Family::Ewma | Family::Mec | Family::RrEwma => {
                converging(asymptotic, ewma_sd(lambda, None), |i| ewma_sd(lambda, Some(i)))
            }
            Family::Dewma => converging(asymptotic, dewma_var_inf(lambda).sqrt(), |i| dewma_var(lambda, i).sqrt()),
            Family::Tewma => {
                let tail = tewma_var(lambda, None).sqrt();
                if asymptotic {
                    (Vec::new(), tail)
                } else {
                    let l3 = lambda.powi(3);
                    let lb = 1.0 - lambda;
                    let mut var = 0.0;
                    let mut pow = 1.0;
                    converging(false, tail, |i| {
                        let m = i - 1;
                        let c = l3 * ((m + 1) * (m + 2) / 2) as f64 * pow;
                        var += c * c;
                        pow *= lb;
                        var.sqrt()
                    })
                }
            }
            Family::Ma => {
                let tail = 1.0 / (w as f64).sqrt();
                if asymptotic {
                    (Vec::new(), tail)
                } else {
                    ((1..w).map(|i| 1.0 / (i as f64).sqrt()).collect(), tail)
                }
            }
            Family::Dma => {
                let tail = crate::analytic::dma_var_closed(w as u64).sqrt();
                if asymptotic {
                    (Vec::new(), tail)
                } else {
                    let table = (1..2 * w - 1)
                        .map(|i| dma_weights(w, i).iter().map(|c| c * c).sum::<f64>().sqrt())
                        .collect();
                    (table, tail)
                }
            }
            Family::Pm => {
                let table = (1..=GROWING_TABLE).map(|t| pm_unit(t as f64, p)).collect();
                (table, f64::NAN)
            }
            Family::Dpm => {
                let mut h = 0.0;
                let table = (1..=GROWING_TABLE)
                    .map(|t| {
                        h += 1.0 / t as f64;
                        let t = t as f64;
                        ((2.0 * t - h).sqrt() / t) / t.powf(p)
                    })
                    .collect();
                (table, f64::NAN)
            }
            Family::Cusum | Family::RrCusum => (Vec::new(), 1.0),
        };
        let inv_unit = unit.iter().map(|u| 1.0 / u).collect();
        Ok(Chart {
            spec: spec.clone(),
            family,
            theta: spec.calibrated_factor().unwrap_or(f64::NAN),
            lambda,
            k: spec.k().unwrap_or(0.0),
            a_star: spec.a_star().unwrap_or(0.0),
            w,
            p,
            warning: spec.warning().unwrap_or(0.0),
            rule: spec.rule(),
            unit,
            inv_unit,
            unit_tail,
        })
    }

    pub fn spec(&self) -> &ChartSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn init_state(&self) -> ChartState {
        let ring = if matches!(self.family, Family::Ma | Family::Dma) { self.w } else { 0 };
        ChartState {
            i: 0,
            levels: [0.0; 3],
            pos: 0.0,
            neg: 0.0,
            stat: 0.0,
            x_ring: vec![0.0; ring],
            m_ring: vec![0.0; if self.family == Family::Dma { ring } else { 0 }],
            x_sum: 0.0,
            m_sum: 0.0,
            head: 0,
            pm_sum: 0.0,
            dpm_sum: 0.0,
            up: [0.0; 3],
            down: [0.0; 3],
            runs: 0,
        }
    }

    /// Return a state to time zero without releasing its buffers.
    pub fn reset(&self, s: &mut ChartState) {
        s.i = 0;
        s.levels = [0.0; 3];
        s.pos = 0.0;
        s.neg = 0.0;
        s.stat = 0.0;
        s.x_ring.fill(0.0);
        s.m_ring.fill(0.0);
        s.x_sum = 0.0;
        s.m_sum = 0.0;
        s.head = 0;
        s.pm_sum = 0.0;
        s.dpm_sum = 0.0;
        s.up = [0.0; 3];
        s.down = [0.0; 3];
        s.runs = 0;
    }

    /// Standard deviation (or limit base) of the statistic at time `i >= 1`.
    #[inline]
    pub fn unit(&self, i: u64) -> f64 {
        match self.unit.get(i as usize - 1) {
            Some(u) => *u,
            None => self.tail_unit(i),
        }
    }

    #[inline]
    fn inv_unit(&self, i: u64) -> f64 {
        match self.inv_unit.get(i as usize - 1) {
            Some(u) => *u,
            None => 1.0 / self.tail_unit(i),
        }
    }

    fn tail_unit(&self, i: u64) -> f64 {
        let t = i as f64;
        match self.family {
            Family::Pm => pm_unit(t, self.p),
            Family::Dpm => ((2.0 * t - harmonic_approx(t)).sqrt() / t) / t.powf(self.p),
            _ => self.unit_tail,
        }
    }

    /// Advance the state by one observation.
    #[inline]
    pub fn update(&self, s: &mut ChartState, x: f64) {
        s.i += 1;
        let i = s.i;
        let l = self.lambda;
        match self.family {
            Family::Ewma => {
                s.levels[0] += l * (x - s.levels[0]);
                s.stat = s.levels[0];
            }
            Family::Dewma => {
                s.levels[0] += l * (x - s.levels[0]);
                s.levels[1] += l * (s.levels[0] - s.levels[1]);
                s.stat = s.levels[1];
            }
            Family::Tewma => {
                s.levels[0] += l * (x - s.levels[0]);
                s.levels[1] += l * (s.levels[0] - s.levels[1]);
                s.levels[2] += l * (s.levels[1] - s.levels[2]);
                s.stat = s.levels[2];
            }
            Family::Mec => {
                s.levels[0] += l * (x - s.levels[0]);
                let q = s.levels[0];
                let a = self.a_star * self.unit(i);
                s.pos = (s.pos + q - a).max(0.0);
                s.neg = (s.neg - q - a).max(0.0);
                s.stat = q;
            }
            Family::Cusum | Family::RrCusum => {
                s.pos = (s.pos + x - self.k).max(0.0);
                s.neg = (s.neg - x - self.k).max(0.0);
                s.stat = s.pos.max(s.neg);
                if self.family == Family::RrCusum {
                    s.push_runs(s.pos, s.neg);
                }
            }
            Family::RrEwma => {
                s.levels[0] += l * (x - s.levels[0]);
                s.stat = s.levels[0];
                let z = s.stat * self.inv_unit(i);
                s.push_runs(z, -z);
            }
            Family::Ma => {
                let m = push_window(&mut s.x_ring, &mut s.x_sum, s.head, x, i, self.w);
                s.head = (s.head + 1) % self.w;
                s.stat = m;
            }
            Family::Dma => {
                let m = push_window(&mut s.x_ring, &mut s.x_sum, s.head, x, i, self.w);
                let d = push_window(&mut s.m_ring, &mut s.m_sum, s.head, m, i, self.w);
                s.head = (s.head + 1) % self.w;
                s.stat = d;
            }
            Family::Pm => {
                s.pm_sum += x;
                s.stat = s.pm_sum / i as f64;
            }
            Family::Dpm => {
                s.pm_sum += x;
                s.dpm_sum += s.pm_sum / i as f64;
                s.stat = s.dpm_sum / i as f64;
            }
        }
    }

    /// Values of the calibrated factor that would signal at the current time.
    #[inline]
    pub fn region(&self, s: &ChartState) -> AlarmRegion {
        let i = s.i.max(1);
        let below = match self.family {
            Family::Cusum | Family::RrCusum => s.pos.max(s.neg),
            Family::Mec => s.pos.max(s.neg) * self.inv_unit(i),
            Family::RrEwma => {
                if s.runs < 2 {
                    f64::NEG_INFINITY
                } else {
                    self.ewma_runs(&s.up, s.runs).max(self.ewma_runs(&s.down, s.runs))
                }
            }
            _ => s.stat.abs() * self.inv_unit(i),
        };
        let at_or_above = if self.family == Family::RrCusum && s.runs >= 2 {
            self.cusum_runs(&s.up, s.runs).min(self.cusum_runs(&s.down, s.runs))
        } else {
            f64::INFINITY
        };
        AlarmRegion { below, at_or_above }
    }

    // Smallest alarm limit for which the runs rule fires on this side.
    fn cusum_runs(&self, v: &[f64; 3], n: usize) -> f64 {
        let wl = self.warning;
        match self.rule {
            RunsRule::TwoOfTwo => {
                if v[1] > wl && v[2] > wl {
                    v[1].max(v[2])
                } else {
                    f64::INFINITY
                }
            }
            _ => {
                let mut lo = f64::INFINITY;
                let mut second = f64::INFINITY;
                for &x in &v[3 - n..] {
                    if x > wl {
                        if x < lo {
                            second = lo;
                            lo = x;
                        } else if x < second {
                            second = x;
                        }
                    }
                }
                second
            }
        }
    }

    // Largest warning factor for which the runs rule fires on this side.
    fn ewma_runs(&self, v: &[f64; 3], n: usize) -> f64 {
        let (a, b) = (v[1], v[2]);
        if n == 2 || self.rule == RunsRule::TwoOfTwo {
            return a.min(b);
        }
        let c = v[0];
        let second = a.max(b).min(c.max(a.min(b)));
        match self.rule {
            RunsRule::ModifiedTwoOfThree => {
                let min = a.min(b).min(c);
                if min >= 0.0 {
                    second
                } else {
                    min
                }
            }
            _ => second,
        }
    }

    /// Alarm predicate at the current time using the spec's calibrated factor.
    #[inline]
    pub fn check_alarm(&self, s: &ChartState) -> bool {
        s.i > 0 && self.region(s).alarms(self.theta)
    }

    /// The thresholds in force at time `i`.
    pub fn alarm_threshold(&self, i: u64) -> Result<Thresholds> {
        if i == 0 {
            return Err(Error::arg("thresholds are defined for i >= 1"));
        }
        if self.theta.is_nan() {
            return Err(Error::spec(format!("{} has no limit; calibrate it first", self.spec)));
        }
        let t = match self.family {
            Family::Cusum => Thresholds::Cusum { reference: self.k, limit: self.theta },
            Family::Mec => {
                let sd = self.unit(i);
                Thresholds::Cusum { reference: self.a_star * sd, limit: self.theta * sd }
            }
            Family::RrCusum => Thresholds::Warning { warning: self.warning, alarm: self.theta },
            _ => Thresholds::Symmetric { limit: self.theta * self.unit(i) },
        };
        Ok(t)
    }
}

fn pm_unit(t: f64, p: f64) -> f64 {
    t.powf(-0.5 - p)
}

// Table of a scale that converges to `tail`; stops once the two agree to
// rounding level.
fn converging(asymptotic: bool, tail: f64, mut f: impl FnMut(u64) -> f64) -> (Vec<f64>, f64) {
    if asymptotic {
        return (Vec::new(), tail);
    }
    let mut table = Vec::new();
    for i in 1..=MAX_TABLE as u64 {
        let u = f(i);
        if (u - tail).abs() <= 1e-15 * tail {
            break;
        }
        table.push(u);
    }
    (table, tail)
}

// Ring buffer of the last `w` values with a running sum; returns the
// (expanding-regime) mean after inserting `x`.
#[inline]
fn push_window(ring: &mut [f64], sum: &mut f64, head: usize, x: f64, i: u64, w: usize) -> f64 {
    let old = ring[head];
    ring[head] = x;
    if head + 1 == w {
        // resum once per lap so rounding does not accumulate
        *sum = ring.iter().sum();
    } else {
        *sum += x - old;
    }
    *sum / (i.min(w as u64)) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::dpm_sd;
    use crate::charts::weight_vector;
    use approx::assert_abs_diff_eq;

    fn run(spec: &ChartSpec, xs: &[f64]) -> (Chart, ChartState) {
        let chart = Chart::new(spec).unwrap();
        let mut s = chart.init_state();
        for &x in xs {
            chart.update(&mut s, x);
        }
        (chart, s)
    }

    #[test]
    fn start_values() {
        let (_, s) = run(&ChartSpec::ewma(0.1, 2.7).unwrap(), &[]);
        assert_eq!(s.time(), 0);
        assert_eq!(s.levels(), [0.0; 3]);
        let (_, s) = run(&ChartSpec::cusum(0.5, 4.0).unwrap(), &[]);
        assert_eq!((s.cusum_pos(), s.cusum_neg()), (0.0, 0.0));
        let (_, s) = run(&ChartSpec::dpm(0.35, 2.596).unwrap(), &[]);
        assert_eq!((s.pm_sum, s.dpm_sum), (0.0, 0.0));
    }

    #[test]
    fn ewma_lambda_one_is_identity() {
        let (_, s) = run(&ChartSpec::ewma(1.0, 3.0).unwrap(), &[2.5]);
        assert_eq!(s.statistic(), 2.5);
    }

    #[test]
    fn cusum_step() {
        let chart = Chart::new(&ChartSpec::cusum(0.5, 4.0).unwrap()).unwrap();
        let mut s = chart.init_state();
        s.pos = 1.5;
        chart.update(&mut s, -1.0);
        assert_eq!(s.cusum_pos(), 0.0);
        assert_eq!(s.cusum_neg(), 0.5);
    }

    #[test]
    fn cusum_alarm_above_h() {
        let chart = Chart::new(&ChartSpec::cusum(0.5, 4.0133).unwrap()).unwrap();
        let mut s = chart.init_state();
        chart.update(&mut s, 4.6);
        assert!(chart.check_alarm(&s));
        let mut s = chart.init_state();
        chart.update(&mut s, 4.5);
        assert!(!chart.check_alarm(&s));
    }

    #[test]
    fn dma_window_one_tracks_input() {
        let xs = [0.3, -1.2, 2.0, 0.7];
        let chart = Chart::new(&ChartSpec::dma(1, 3.0).unwrap()).unwrap();
        let mut s = chart.init_state();
        for x in xs {
            chart.update(&mut s, x);
            assert_eq!(s.statistic(), x);
        }
    }

    #[test]
    fn dpm_second_step() {
        let (_, s) = run(&ChartSpec::dpm(0.35, 2.596).unwrap(), &[1.0, 0.0]);
        assert_abs_diff_eq!(s.progressive_mean(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.statistic(), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn thresholds() {
        let chart = Chart::new(&ChartSpec::ewma(0.1, 2.4098).unwrap()).unwrap();
        let Thresholds::Symmetric { limit } = chart.alarm_threshold(100_000).unwrap() else { panic!() };
        assert_abs_diff_eq!(limit, 2.4098 * (0.1f64 / 1.9).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(limit, 0.5529, epsilon = 1e-4);
        let Thresholds::Symmetric { limit } = chart.alarm_threshold(1).unwrap() else { panic!() };
        assert_abs_diff_eq!(limit, 0.24098, epsilon = 1e-12);
        assert!(chart.alarm_threshold(0).is_err());

        let chart = Chart::new(&ChartSpec::dpm(0.35, 2.596).unwrap()).unwrap();
        let Thresholds::Symmetric { limit } = chart.alarm_threshold(1).unwrap() else { panic!() };
        assert_abs_diff_eq!(limit, 2.596, epsilon = 1e-12);
        let far = GROWING_TABLE as u64 + 10;
        let Thresholds::Symmetric { limit } = chart.alarm_threshold(far).unwrap() else { panic!() };
        assert_abs_diff_eq!(limit, 2.596 * dpm_sd(far) / (far as f64).powf(0.35), epsilon = 1e-14);

        let chart = Chart::new(&ChartSpec::mec(0.5, 0.5, 4.0).unwrap()).unwrap();
        assert_eq!(chart.alarm_threshold(1).unwrap(), Thresholds::Cusum { reference: 0.25, limit: 2.0 });

        let uncal = ChartSpec::builder(Family::Ewma).lambda(0.1).build().unwrap();
        assert!(Chart::new(&uncal).unwrap().alarm_threshold(3).is_err());
    }

    #[test]
    fn pm_threshold_bends() {
        let chart = Chart::new(&ChartSpec::pm(0.35, 6.415).unwrap()).unwrap();
        let Thresholds::Symmetric { limit } = chart.alarm_threshold(4).unwrap() else { panic!() };
        assert_abs_diff_eq!(limit, 6.415 / 2.0 / 4f64.powf(0.35), epsilon = 1e-12);
    }

    #[test]
    fn rr_cusum_runs_only() {
        let spec = ChartSpec::rr_cusum(0.5, 3.42, f64::INFINITY, RunsRule::TwoOfTwo).unwrap();
        let chart = Chart::new(&spec).unwrap();
        let mut s = chart.init_state();
        s.pos = 3.0;
        chart.update(&mut s, 1.0); // 3.5
        assert!(!chart.check_alarm(&s));
        chart.update(&mut s, 0.6); // 3.6
        assert!(chart.check_alarm(&s));
    }

    #[test]
    fn rr_cusum_sides_do_not_mix() {
        let spec = ChartSpec::rr_cusum(0.0, 1.0, 10.0, RunsRule::TwoOfTwo).unwrap();
        let chart = Chart::new(&spec).unwrap();
        let mut s = chart.init_state();
        chart.update(&mut s, 1.5);
        chart.update(&mut s, -3.0);
        assert_eq!((s.cusum_pos(), s.cusum_neg()), (0.0, 3.0));
        assert!(!chart.check_alarm(&s));
        chart.update(&mut s, 0.5);
        assert!(chart.check_alarm(&s));
    }

    #[test]
    fn rr_cusum_two_of_three_window() {
        let spec = ChartSpec::rr_cusum(0.0, 1.0, 2.0, RunsRule::TwoOfThree).unwrap();
        let chart = Chart::new(&spec).unwrap();
        let mut s = chart.init_state();
        for x in [1.5, -1.0, 0.6] {
            chart.update(&mut s, x);
        }
        // C+ = 1.5, 0.5, 1.1
        assert!(chart.check_alarm(&s));
        let r = chart.region(&s);
        assert_abs_diff_eq!(r.at_or_above, 1.5, epsilon = 1e-15);
        // a point above the alarm limit does not count toward the run
        assert!(!r.alarms(1.4));
    }

    #[test]
    fn rr_ewma_two_of_two_needs_consecutive() {
        let spec = ChartSpec::rr_ewma(1.0, 2.0, RunsRule::TwoOfTwo).unwrap();
        let chart = Chart::new(&spec).unwrap();
        let mut s = chart.init_state();
        chart.update(&mut s, 2.5);
        assert!(!chart.check_alarm(&s));
        chart.update(&mut s, -0.5);
        assert!(!chart.check_alarm(&s));
        chart.update(&mut s, 2.5);
        assert!(!chart.check_alarm(&s));
        chart.update(&mut s, 2.1);
        assert!(chart.check_alarm(&s));
    }

    #[test]
    fn rr_ewma_modified_rule_wants_non_violator_on_same_side() {
        let common = Chart::new(&ChartSpec::rr_ewma(1.0, 2.0, RunsRule::TwoOfThree).unwrap()).unwrap();
        let modified = Chart::new(&ChartSpec::rr_ewma(1.0, 2.0, RunsRule::ModifiedTwoOfThree).unwrap()).unwrap();
        for (xs, c, m) in [
            ([2.5, -0.5, 2.5], true, false),
            ([2.5, 0.5, 2.5], true, true),
            ([-2.5, -0.5, -2.5], true, true),
            ([-2.5, 0.5, -2.5], true, false),
            ([2.5, -2.5, 0.5], false, false),
        ] {
            let mut sc = common.init_state();
            let mut sm = modified.init_state();
            for x in xs {
                common.update(&mut sc, x);
                modified.update(&mut sm, x);
            }
            assert_eq!(common.check_alarm(&sc), c, "{xs:?}");
            assert_eq!(modified.check_alarm(&sm), m, "{xs:?}");
        }
    }

    #[test]
    fn region_agrees_with_direct_rule() {
        let spec = ChartSpec::builder(Family::Ewma).lambda(0.2).build().unwrap();
        let chart = Chart::new(&spec).unwrap();
        let mut s = chart.init_state();
        for x in [0.4, -1.0, 2.2] {
            chart.update(&mut s, x);
        }
        let r = chart.region(&s);
        let sd = ewma_sd(0.2, Some(3));
        assert_abs_diff_eq!(r.below, s.statistic().abs() / sd, epsilon = 1e-12);
        assert!(r.at_or_above.is_infinite());
    }

    #[test]
    fn impulse_response_matches_weights() {
        let specs = [
            ChartSpec::ewma(0.1, 1.0).unwrap(),
            ChartSpec::dewma(0.1, 1.0).unwrap(),
            ChartSpec::tewma(0.13, 1.0).unwrap(),
            ChartSpec::ma(4, 1.0).unwrap(),
            ChartSpec::dma(3, 1.0).unwrap(),
            ChartSpec::pm(0.35, 1.0).unwrap(),
            ChartSpec::dpm(0.35, 1.0).unwrap(),
        ];
        for spec in &specs {
            let chart = Chart::new(spec).unwrap();
            for i in [1usize, 2, 5, 17, 60] {
                let c = weight_vector(spec, i).unwrap();
                for j in 0..i {
                    let mut s = chart.init_state();
                    for t in 0..i {
                        chart.update(&mut s, if t == j { 1.0 } else { 0.0 });
                    }
                    assert_abs_diff_eq!(s.statistic(), c[j], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn reset_matches_fresh_state() {
        let chart = Chart::new(&ChartSpec::dma(3, 2.0).unwrap()).unwrap();
        let mut s = chart.init_state();
        for x in [1.0, 2.0, -0.5, 0.25] {
            chart.update(&mut s, x);
        }
        chart.reset(&mut s);
        assert_eq!(s, chart.init_state());
    }
}
