use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ewma,
    Cusum,
    /// Mixed EWMA-CUSUM: a CUSUM fed with EWMA-smoothed observations.
    Mec,
    RrCusum,
    RrEwma,
    Ma,
    Dma,
    Dewma,
    Tewma,
    Pm,
    Dpm,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::Ewma,
        Family::Cusum,
        Family::Mec,
        Family::RrCusum,
        Family::RrEwma,
        Family::Ma,
        Family::Dma,
        Family::Dewma,
        Family::Tewma,
        Family::Pm,
        Family::Dpm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Ewma => "ewma",
            Family::Cusum => "cusum",
            Family::Mec => "mec",
            Family::RrCusum => "rrcusum",
            Family::RrEwma => "rrewma",
            Family::Ma => "ma",
            Family::Dma => "dma",
            Family::Dewma => "dewma",
            Family::Tewma => "tewma",
            Family::Pm => "pm",
            Family::Dpm => "dpm",
        }
    }

    /// Plotted statistic is a fixed linear combination of the observations.
    pub fn is_linear(self) -> bool {
        matches!(
            self,
            Family::Ewma | Family::Dewma | Family::Tewma | Family::Ma | Family::Dma | Family::Pm | Family::Dpm
        )
    }

    fn uses(self, p: Param) -> bool {
        use Family::*;
        use Param::*;
        match p {
            Lambda => matches!(self, Ewma | Mec | RrEwma | Dewma | Tewma),
            K => matches!(self, Cusum | RrCusum),
            AStar => self == Mec,
            Window => matches!(self, Ma | Dma),
            Exponent => matches!(self, Pm | Dpm),
            Limit => self != RrCusum,
            Warning | Alarm => self == RrCusum,
            Policy => matches!(self, Ewma | Mec | RrEwma | Ma | Dma | Dewma | Tewma),
            Rule => matches!(self, RrCusum | RrEwma),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase().replace(['-', '_'], "");
        Family::ALL
            .into_iter()
            .find(|f| f.name() == lower)
            .ok_or_else(|| Error::spec(format!("unknown chart family `{s}`")))
    }
}

/// How the variance entering a limit is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitPolicy {
    /// Exact variance of the statistic at time `i`.
    #[default]
    TimeVarying,
    /// Limit of the variance as `i` grows.
    Asymptotic,
}

impl FromStr for LimitPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "time-varying" | "timevarying" | "exact" => Ok(LimitPolicy::TimeVarying),
            "asymptotic" | "fixed" => Ok(LimitPolicy::Asymptotic),
            _ => Err(Error::spec(format!("unknown limit policy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum RunsRule {
    #[default]
    #[serde(rename = "none")]
    None,
    #[serde(rename = "2of2")]
    TwoOfTwo,
    #[serde(rename = "2of3")]
    TwoOfThree,
    /// 2-of-3 where the one non-violating point must lie between the centre
    /// line and the violated warning limit.
    #[serde(rename = "modified-2of3")]
    ModifiedTwoOfThree,
}

impl FromStr for RunsRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(RunsRule::None),
            "2of2" | "2-of-2" => Ok(RunsRule::TwoOfTwo),
            "2of3" | "2-of-3" => Ok(RunsRule::TwoOfThree),
            "modified-2of3" | "modified-2-of-3" | "m2of3" => Ok(RunsRule::ModifiedTwoOfThree),
            _ => Err(Error::spec(format!("unknown runs rule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Param {
    Lambda,
    K,
    AStar,
    Window,
    Exponent,
    Limit,
    Warning,
    Alarm,
    Policy,
    Rule,
}

impl Param {
    fn name(self) -> &'static str {
        match self {
            Param::Lambda => "lambda",
            Param::K => "k",
            Param::AStar => "a_star",
            Param::Window => "w",
            Param::Exponent => "p",
            Param::Limit => "limit",
            Param::Warning => "warning",
            Param::Alarm => "alarm",
            Param::Policy => "limit_policy",
            Param::Rule => "rr_kind",
        }
    }
}

/// Algebraic description of one chart design.
///
/// The limit factor means `c_E`, `h`, `b*`, `L_S`, `L`, `L_DE`, `L_P` or
/// `L_D` depending on the family; runs-rule CUSUM charts use a warning and
/// an alarm limit instead. A spec without its limit factor is valid and
/// marks a design that still needs calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct ChartSpec {
    family: Family,
    lambda: Option<f64>,
    k: Option<f64>,
    a_star: Option<f64>,
    w: Option<usize>,
    p: Option<f64>,
    limit: Option<f64>,
    warning: Option<f64>,
    alarm: Option<f64>,
    policy: LimitPolicy,
    rule: RunsRule,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSpec {
    family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    warning: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::serde_float::option")]
    alarm: Option<f64>,
    #[serde(default)]
    limit_policy: LimitPolicy,
    #[serde(default)]
    rr_kind: RunsRule,
}

impl TryFrom<RawSpec> for ChartSpec {
    type Error = Error;

    fn try_from(r: RawSpec) -> Result<Self> {
        let spec = ChartSpec {
            family: r.family,
            lambda: r.lambda,
            k: r.k,
            a_star: r.a_star,
            w: r.w,
            p: r.p,
            limit: r.limit,
            warning: r.warning,
            alarm: r.alarm,
            policy: r.limit_policy,
            rule: r.rr_kind,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<ChartSpec> for RawSpec {
    fn from(s: ChartSpec) -> Self {
        RawSpec {
            family: s.family,
            lambda: s.lambda,
            k: s.k,
            a_star: s.a_star,
            w: s.w,
            p: s.p,
            limit: s.limit,
            warning: s.warning,
            alarm: s.alarm,
            limit_policy: s.policy,
            rr_kind: s.rule,
        }
    }
}

/// Builder for [`ChartSpec`]; `build` rejects parameters the family does not use.
#[derive(Debug, Clone)]
pub struct SpecBuilder {
    spec: ChartSpec,
    policy_set: bool,
}

impl SpecBuilder {
    pub fn lambda(mut self, v: f64) -> Self {
        self.spec.lambda = Some(v);
        self
    }

    pub fn k(mut self, v: f64) -> Self {
        self.spec.k = Some(v);
        self
    }

    pub fn a_star(mut self, v: f64) -> Self {
        self.spec.a_star = Some(v);
        self
    }

    pub fn window(mut self, w: usize) -> Self {
        self.spec.w = Some(w);
        self
    }

    pub fn exponent(mut self, p: f64) -> Self {
        self.spec.p = Some(p);
        self
    }

    pub fn limit(mut self, v: f64) -> Self {
        self.spec.limit = Some(v);
        self
    }

    pub fn warning(mut self, v: f64) -> Self {
        self.spec.warning = Some(v);
        self
    }

    pub fn alarm(mut self, v: f64) -> Self {
        self.spec.alarm = Some(v);
        self
    }

    pub fn policy(mut self, p: LimitPolicy) -> Self {
        self.spec.policy = p;
        self.policy_set = true;
        self
    }

    pub fn rule(mut self, r: RunsRule) -> Self {
        self.spec.rule = r;
        self
    }

    pub fn build(self) -> Result<ChartSpec> {
        if self.policy_set && self.spec.policy != LimitPolicy::TimeVarying && !self.spec.family.uses(Param::Policy) {
            return Err(Error::spec(format!(
                "{} does not take a limit policy",
                self.spec.family
            )));
        }
        self.spec.validate()?;
        Ok(self.spec)
    }
}

impl ChartSpec {
    pub fn builder(family: Family) -> SpecBuilder {
        SpecBuilder {
            spec: ChartSpec {
                family,
                lambda: None,
                k: None,
                a_star: None,
                w: None,
                p: None,
                limit: None,
                warning: None,
                alarm: None,
                policy: LimitPolicy::TimeVarying,
                rule: RunsRule::None,
            },
            policy_set: false,
        }
    }

    /// EWMA chart with exact (time-varying) limits.
    pub fn ewma(lambda: f64, c: f64) -> Result<Self> {
        Self::builder(Family::Ewma).lambda(lambda).limit(c).build()
    }

    pub fn cusum(k: f64, h: f64) -> Result<Self> {
        Self::builder(Family::Cusum).k(k).limit(h).build()
    }

    pub fn mec(lambda_q: f64, a_star: f64, b_star: f64) -> Result<Self> {
        Self::builder(Family::Mec).lambda(lambda_q).a_star(a_star).limit(b_star).build()
    }

    pub fn rr_cusum(k: f64, warning: f64, alarm: f64, rule: RunsRule) -> Result<Self> {
        Self::builder(Family::RrCusum).k(k).warning(warning).alarm(alarm).rule(rule).build()
    }

    pub fn rr_ewma(lambda: f64, l_s: f64, rule: RunsRule) -> Result<Self> {
        Self::builder(Family::RrEwma).lambda(lambda).limit(l_s).rule(rule).build()
    }

    pub fn ma(w: usize, l: f64) -> Result<Self> {
        Self::builder(Family::Ma).window(w).limit(l).build()
    }

    pub fn dma(w: usize, l: f64) -> Result<Self> {
        Self::builder(Family::Dma).window(w).limit(l).build()
    }

    pub fn dewma(lambda: f64, c: f64) -> Result<Self> {
        Self::builder(Family::Dewma).lambda(lambda).limit(c).build()
    }

    pub fn tewma(lambda: f64, c: f64) -> Result<Self> {
        Self::builder(Family::Tewma).lambda(lambda).limit(c).build()
    }

    pub fn pm(p: f64, l_p: f64) -> Result<Self> {
        Self::builder(Family::Pm).exponent(p).limit(l_p).build()
    }

    pub fn dpm(p: f64, l_d: f64) -> Result<Self> {
        Self::builder(Family::Dpm).exponent(p).limit(l_d).build()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn k(&self) -> Option<f64> {
        self.k
    }

    pub fn a_star(&self) -> Option<f64> {
        self.a_star
    }

    pub fn window(&self) -> Option<usize> {
        self.w
    }

    pub fn exponent(&self) -> Option<f64> {
        self.p
    }

    pub fn limit(&self) -> Option<f64> {
        self.limit
    }

    pub fn warning(&self) -> Option<f64> {
        self.warning
    }

    pub fn alarm(&self) -> Option<f64> {
        self.alarm
    }

    pub fn policy(&self) -> LimitPolicy {
        self.policy
    }

    pub fn rule(&self) -> RunsRule {
        self.rule
    }

    /// The factor found by calibration: the alarm limit for runs-rule CUSUM
    /// charts, the limit factor otherwise.
    pub fn calibrated_factor(&self) -> Option<f64> {
        if self.family == Family::RrCusum {
            self.alarm
        } else {
            self.limit
        }
    }

    pub fn is_calibrated(&self) -> bool {
        self.calibrated_factor().is_some()
    }

    /// Copy of the spec with the calibrated factor replaced.
    pub fn with_calibrated_factor(&self, v: f64) -> Result<Self> {
        let mut s = self.clone();
        if s.family == Family::RrCusum {
            s.alarm = Some(v);
        } else {
            s.limit = Some(v);
        }
        s.validate()?;
        Ok(s)
    }

    /// Copy of the spec with the calibrated factor removed.
    pub fn without_calibrated_factor(&self) -> Self {
        let mut s = self.clone();
        if s.family == Family::RrCusum {
            s.alarm = None;
        } else {
            s.limit = None;
        }
        s
    }

    /// Short human label such as `EWMA(lambda=0.1, c=2.4098)`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        let fmt = |v: f64| {
            if v.is_infinite() {
                "inf".to_string()
            } else {
                format!("{v}")
            }
        };
        if let Some(v) = self.lambda {
            parts.push(format!("lambda={}", fmt(v)));
        }
        if let Some(v) = self.k {
            parts.push(format!("k={}", fmt(v)));
        }
        if let Some(v) = self.a_star {
            parts.push(format!("a*={}", fmt(v)));
        }
        if let Some(v) = self.w {
            parts.push(format!("w={v}"));
        }
        if let Some(v) = self.p {
            parts.push(format!("p={}", fmt(v)));
        }
        if self.rule != RunsRule::None {
            let r = match self.rule {
                RunsRule::TwoOfTwo => "2of2",
                RunsRule::TwoOfThree => "2of3",
                RunsRule::ModifiedTwoOfThree => "modified-2of3",
                RunsRule::None => "",
            };
            parts.push(r.to_string());
        }
        if let Some(v) = self.warning {
            parts.push(format!("WL={}", fmt(v)));
        }
        if let Some(v) = self.alarm {
            parts.push(format!("AL={}", fmt(v)));
        }
        if let Some(v) = self.limit {
            parts.push(format!("limit={}", fmt(v)));
        }
        if self.policy == LimitPolicy::Asymptotic {
            parts.push("asymptotic".to_string());
        }
        format!("{}({})", self.family.name().to_ascii_uppercase(), parts.join(", "))
    }

    fn validate(&self) -> Result<()> {
        let fam = self.family;
        let present = [
            (Param::Lambda, self.lambda.is_some()),
            (Param::K, self.k.is_some()),
            (Param::AStar, self.a_star.is_some()),
            (Param::Window, self.w.is_some()),
            (Param::Exponent, self.p.is_some()),
            (Param::Limit, self.limit.is_some()),
            (Param::Warning, self.warning.is_some()),
            (Param::Alarm, self.alarm.is_some()),
            (Param::Rule, self.rule != RunsRule::None),
            (Param::Policy, self.policy != LimitPolicy::TimeVarying),
        ];
        for (param, set) in present {
            if set && !fam.uses(param) {
                return Err(Error::spec(format!("{fam} does not take parameter `{}`", param.name())));
            }
        }
        let required: &[Param] = match fam {
            Family::Ewma | Family::Dewma | Family::Tewma => &[Param::Lambda],
            Family::Cusum => &[Param::K],
            Family::Mec => &[Param::Lambda, Param::AStar],
            Family::RrCusum => &[Param::K, Param::Warning],
            Family::RrEwma => &[Param::Lambda],
            Family::Ma | Family::Dma => &[Param::Window],
            Family::Pm | Family::Dpm => &[Param::Exponent],
        };
        for &param in required {
            let missing = match param {
                Param::Lambda => self.lambda.is_none(),
                Param::K => self.k.is_none(),
                Param::AStar => self.a_star.is_none(),
                Param::Window => self.w.is_none(),
                Param::Exponent => self.p.is_none(),
                Param::Warning => self.warning.is_none(),
                _ => false,
            };
            if missing {
                return Err(Error::spec(format!("{fam} requires parameter `{}`", param.name())));
            }
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l <= 1.0) {
                return Err(Error::spec(format!("lambda must lie in (0, 1], got {l}")));
            }
        }
        if let Some(k) = self.k {
            if !(k >= 0.0) || !k.is_finite() {
                return Err(Error::spec(format!("k must be finite and >= 0, got {k}")));
            }
        }
        if let Some(a) = self.a_star {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::spec(format!("a_star must be finite and >= 0, got {a}")));
            }
        }
        if self.w == Some(0) {
            return Err(Error::spec("window size must be >= 1"));
        }
        if let Some(p) = self.p {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::spec(format!("exponent p must be finite and >= 0, got {p}")));
            }
        }
        if let Some(v) = self.limit {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::spec(format!("limit factor must be finite and > 0, got {v}")));
            }
        }
        if let Some(v) = self.warning {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::spec(format!("warning limit must be finite and > 0, got {v}")));
            }
        }
        if let Some(v) = self.alarm {
            if !(v > 0.0) {
                return Err(Error::spec(format!("alarm limit must be > 0, got {v}")));
            }
            if let Some(wl) = self.warning {
                if !(wl < v) {
                    return Err(Error::spec(format!("warning limit {wl} must be below alarm limit {v}")));
                }
            }
        }
        match (fam, self.rule) {
            (Family::RrCusum, RunsRule::TwoOfTwo | RunsRule::TwoOfThree) => {}
            (Family::RrCusum, r) => {
                return Err(Error::spec(format!("runs-rule CUSUM needs a 2of2 or 2of3 rule, got {r:?}")))
            }
            (Family::RrEwma, RunsRule::None) => return Err(Error::spec("runs-rule EWMA needs a runs rule")),
            _ => {}
        }
        Ok(())
    }
}

impl fmt::Display for ChartSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn irrelevant_parameter_is_rejected() {
        let err = ChartSpec::builder(Family::Ewma).lambda(0.1).k(0.5).limit(2.7).build();
        assert!(matches!(err, Err(Error::InvalidSpec(_))));
        let err = ChartSpec::builder(Family::Cusum).k(0.5).limit(4.0).policy(LimitPolicy::Asymptotic).build();
        assert!(err.is_err());
        assert!(ChartSpec::builder(Family::Ma).window(3).limit(3.0).rule(RunsRule::TwoOfTwo).build().is_err());
        assert!(ChartSpec::builder(Family::RrCusum).k(0.5).warning(3.4).alarm(4.8).limit(1.0).build().is_err());
    }

    #[test]
    fn missing_required_parameter_is_rejected() {
        assert!(ChartSpec::builder(Family::Ewma).limit(2.7).build().is_err());
        assert!(ChartSpec::builder(Family::Mec).lambda(0.25).limit(5.0).build().is_err());
        assert!(ChartSpec::builder(Family::RrEwma).lambda(0.1).limit(2.0).build().is_err());
    }

    #[test]
    fn ranges_are_checked() {
        assert!(ChartSpec::ewma(0.0, 2.0).is_err());
        assert!(ChartSpec::ewma(1.5, 2.0).is_err());
        assert!(ChartSpec::ewma(1.0, 2.0).is_ok());
        assert!(ChartSpec::ma(0, 3.0).is_err());
        assert!(ChartSpec::pm(-0.1, 3.0).is_err());
        assert!(ChartSpec::cusum(0.5, 0.0).is_err());
        assert!(ChartSpec::rr_cusum(0.5, 4.0, 3.0, RunsRule::TwoOfTwo).is_err());
        assert!(ChartSpec::rr_cusum(0.5, 3.42, f64::INFINITY, RunsRule::TwoOfTwo).is_ok());
        assert!(ChartSpec::rr_cusum(0.5, 3.42, 4.8, RunsRule::ModifiedTwoOfThree).is_err());
    }

    #[test]
    fn spec_without_limit_is_uncalibrated() {
        let s = ChartSpec::builder(Family::Cusum).k(0.5).build().unwrap();
        assert!(!s.is_calibrated());
        let s = s.with_calibrated_factor(4.0).unwrap();
        assert_eq!(s.limit(), Some(4.0));
        let rr = ChartSpec::rr_cusum(0.5, 3.44, 4.6, RunsRule::TwoOfTwo).unwrap();
        assert_eq!(rr.calibrated_factor(), Some(4.6));
        assert_eq!(rr.without_calibrated_factor().alarm(), None);
    }

    #[test]
    fn json_round_trip_with_infinite_alarm() {
        let s = ChartSpec::rr_cusum(0.5, 3.42, f64::INFINITY, RunsRule::TwoOfTwo).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"inf\""));
        let back: ChartSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn invalid_json_is_rejected() {
        let bad = r#"{"family":"ewma","lambda":0.1,"w":3,"limit":2.7}"#;
        assert!(serde_json::from_str::<ChartSpec>(bad).is_err());
    }

    #[test]
    fn family_parsing() {
        assert_eq!("RR-CUSUM".parse::<Family>().unwrap(), Family::RrCusum);
        assert_eq!("dpm".parse::<Family>().unwrap(), Family::Dpm);
        assert!("gwma".parse::<Family>().is_err());
    }
}
