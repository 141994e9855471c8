//! Numeric EWMA run-length routines: Markov chain for fixed limits and a
//! density recursion for time-varying limits.

use nalgebra::{DMatrix, DVector};

use super::markov::DEFAULT_GRID_SIZE;
use super::quadrature::GaussLegendre;
use super::{ewma_sd, norm_cdf, norm_pdf, NumericArlResult, NumericMethod};
use crate::charts::LimitPolicy;
use crate::{Error, Result};

/// Quadrature nodes used by the finite-horizon recursion.
pub const EWMA_QUADRATURE_NODES: usize = 200;

const SURVIVAL_CUTOFF: f64 = 1e-12;
const MAX_HORIZON: usize = 10_000_000;

fn check_args(lambda: f64, c: f64, delta: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::arg(format!("lambda must lie in (0, 1], got {lambda}")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::arg(format!("limit factor must be positive, got {c}")));
    }
    if !delta.is_finite() {
        return Err(Error::arg("shift must be finite"));
    }
    Ok(())
}

/// Zero-state ARL of the two-sided EWMA chart `|Z_i| > c * sd_i`.
///
/// `Asymptotic` limits use a midpoint Markov chain on the no-alarm interval;
/// `TimeVarying` limits use the survival recursion with Gauss-Legendre
/// quadrature re-mapped to each time-`i` interval.
pub fn ewma_arl_numeric(
    lambda: f64,
    c: f64,
    delta: f64,
    policy: LimitPolicy,
) -> Result<NumericArlResult> {
    check_args(lambda, c, delta)?;
    match policy {
        LimitPolicy::Asymptotic => ewma_arl_markov(lambda, c, delta, DEFAULT_GRID_SIZE),
        LimitPolicy::TimeVarying => {
            let r = SurvivalRecursion::new(lambda, c, policy, delta, 1).run()?;
            Ok(r.into_result())
        }
    }
}

/// Conditional expected delay `E(L - tau + 1 | L >= tau)` of the EWMA chart,
/// shift applied from observation `tau` on.
pub fn ewma_ced_numeric(
    lambda: f64,
    c: f64,
    delta: f64,
    tau: u64,
    policy: LimitPolicy,
) -> Result<NumericArlResult> {
    check_args(lambda, c, delta)?;
    if tau == 0 {
        return Err(Error::arg("tau must be >= 1"));
    }
    let r = SurvivalRecursion::new(lambda, c, policy, delta, tau).run()?;
    Ok(r.into_result())
}

fn ewma_arl_markov(lambda: f64, c: f64, delta: f64, n: usize) -> Result<NumericArlResult> {
    let solve = |n: usize| -> Result<f64> {
        let u = c * ewma_sd(lambda, None);
        let w = 2.0 * u / n as f64;
        let mid = |j: usize| -u + (j as f64 + 0.5) * w;
        // P(Z' < edge | Z = from) with Z' = (1 - lambda) from + lambda X.
        let cdf = |edge: f64, from: f64| norm_cdf((edge - (1.0 - lambda) * from) / lambda - delta);
        let row = |from: f64| -> Vec<f64> {
            let mut lower = cdf(-u, from);
            (0..n)
                .map(|j| {
                    let upper = cdf(-u + (j + 1) as f64 * w, from);
                    let p = upper - lower;
                    lower = upper;
                    p
                })
                .collect()
        };
        let mut a = DMatrix::<f64>::identity(n, n);
        for i in 0..n {
            for (j, p) in row(mid(i)).into_iter().enumerate() {
                a[(i, j)] -= p;
            }
        }
        let ones = DVector::<f64>::from_element(n, 1.0);
        let arl = a.lu().solve(&ones).ok_or(Error::SingularSystem("EWMA Markov chain"))?;
        // One exact step out of the start value 0, then the chain.
        let start = row(0.0);
        Ok(1.0 + start.iter().zip(arl.iter()).map(|(p, l)| p * l).sum::<f64>())
    };
    let value = solve(n)?;
    let coarse = solve((n / 2).max(50))?;
    Ok(NumericArlResult {
        value,
        method: NumericMethod::MarkovChain,
        grid_size: Some(n),
        horizon: None,
        est_truncation_error: (value - coarse).abs() / 3.0,
        approximate: false,
    })
}

struct SurvivalRecursion {
    lambda: f64,
    c: f64,
    policy: LimitPolicy,
    delta: f64,
    tau: u64,
    gl: GaussLegendre,
}

struct RecursionOutcome {
    value: f64,
    horizon: usize,
    tail: f64,
}

impl RecursionOutcome {
    fn into_result(self) -> NumericArlResult {
        NumericArlResult {
            value: self.value,
            method: NumericMethod::FiniteHorizonRecursion,
            grid_size: Some(EWMA_QUADRATURE_NODES),
            horizon: Some(self.horizon),
            est_truncation_error: self.tail,
            approximate: false,
        }
    }
}

impl SurvivalRecursion {
    fn new(lambda: f64, c: f64, policy: LimitPolicy, delta: f64, tau: u64) -> Self {
        SurvivalRecursion { lambda, c, policy, delta, tau, gl: GaussLegendre::new(EWMA_QUADRATURE_NODES) }
    }

    fn limit(&self, n: u64) -> f64 {
        match self.policy {
            LimitPolicy::TimeVarying => self.c * ewma_sd(self.lambda, Some(n)),
            LimitPolicy::Asymptotic => self.c * ewma_sd(self.lambda, None),
        }
    }

    fn mean(&self, n: u64) -> f64 {
        if n >= self.tau {
            self.delta
        } else {
            0.0
        }
    }

    /// Iterates the density of the surviving EWMA paths and sums
    /// `P(L > n)` for `n >= tau - 1`, normalised by `P(L > tau - 1)`.
    fn run(&self) -> Result<RecursionOutcome> {
        let lambda = self.lambda;
        let lb = 1.0 - lambda;
        let m = self.gl.len();
        let mut dens = vec![0.0; m];
        let mut next = vec![0.0; m];
        let mut prev_nodes = vec![0.0; m];
        let mut prev_w = vec![0.0; m];
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        // Kernel matrix reused once both the limit and the mean are constant.
        let mut frozen: Option<Vec<f64>> = None;
        let mut prev_limit = f64::NAN;

        let mut conditioning = if self.tau == 1 { 1.0 } else { f64::NAN };
        let mut total = if self.tau == 1 { 1.0 } else { 0.0 };
        let mut last_s = 1.0;
        let mut ratio = 0.0;

        for n in 1..=MAX_HORIZON as u64 {
            let u = self.limit(n);
            let mu = self.mean(n);
            let stationary = n > self.tau && (u - prev_limit).abs() <= 1e-15 * u;
            for k in 0..m {
                nodes[k] = u * self.gl.nodes[k];
                weights[k] = u * self.gl.weights[k];
            }
            if n == 1 {
                for k in 0..m {
                    dens[k] = norm_pdf(nodes[k] / lambda - mu) / lambda;
                }
            } else if stationary {
                let kernel = frozen.get_or_insert_with(|| {
                    let mut kern = vec![0.0; m * m];
                    for k in 0..m {
                        for j in 0..m {
                            kern[k * m + j] = prev_w[j]
                                * norm_pdf((nodes[k] - lb * prev_nodes[j]) / lambda - mu)
                                / lambda;
                        }
                    }
                    kern
                });
                for k in 0..m {
                    let row = &kernel[k * m..(k + 1) * m];
                    next[k] = row.iter().zip(&dens).map(|(a, b)| a * b).sum();
                }
                std::mem::swap(&mut dens, &mut next);
            } else {
                for k in 0..m {
                    let mut acc = 0.0;
                    for j in 0..m {
                        acc += prev_w[j]
                            * dens[j]
                            * norm_pdf((nodes[k] - lb * prev_nodes[j]) / lambda - mu);
                    }
                    next[k] = acc / lambda;
                }
                std::mem::swap(&mut dens, &mut next);
            }
            let s: f64 = weights.iter().zip(&dens).map(|(w, f)| w * f).sum();
            if n + 1 == self.tau {
                conditioning = s;
                if !(s > 0.0) {
                    return Err(Error::UnreachableChangePoint { tau: self.tau, fraction: s.max(0.0) });
                }
            }
            if n + 1 >= self.tau {
                total += s;
            }
            if last_s > 0.0 {
                ratio = s / last_s;
            }
            last_s = s;
            if n + 1 > self.tau && s < SURVIVAL_CUTOFF * conditioning {
                let tail = if ratio < 1.0 { s * ratio / (1.0 - ratio) } else { f64::INFINITY };
                return Ok(RecursionOutcome {
                    value: total / conditioning,
                    horizon: n as usize,
                    tail: tail / conditioning,
                });
            }
            std::mem::swap(&mut prev_nodes, &mut nodes);
            std::mem::swap(&mut prev_w, &mut weights);
            prev_limit = u;
        }
        Err(Error::HorizonExhausted { horizon: MAX_HORIZON, survival: last_s })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::shewhart_arl;
    use approx::assert_relative_eq;

    #[test]
    fn lambda_one_is_shewhart() {
        for policy in [LimitPolicy::Asymptotic, LimitPolicy::TimeVarying] {
            for delta in [0.0, 1.0] {
                let r = ewma_arl_numeric(1.0, 3.0, delta, policy).unwrap();
                assert_relative_eq!(r.value, shewhart_arl(3.0, delta), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn ced_at_tau_one_is_zero_state() {
        let a = ewma_arl_numeric(0.1, 2.4, 0.5, LimitPolicy::TimeVarying).unwrap();
        let b = ewma_ced_numeric(0.1, 2.4, 0.5, 1, LimitPolicy::TimeVarying).unwrap();
        assert_relative_eq!(a.value, b.value, max_relative = 1e-12);
    }

    #[test]
    fn fixed_limit_routes_agree() {
        // Markov chain against the quadrature recursion run with a constant limit.
        let mc = ewma_arl_numeric(0.2, 2.8, 0.5, LimitPolicy::Asymptotic).unwrap();
        let rec = ewma_ced_numeric(0.2, 2.8, 0.5, 1, LimitPolicy::Asymptotic).unwrap();
        assert_relative_eq!(mc.value, rec.value, max_relative = 1e-3);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(ewma_arl_numeric(0.0, 3.0, 0.0, LimitPolicy::TimeVarying).is_err());
        assert!(ewma_arl_numeric(0.1, -1.0, 0.0, LimitPolicy::TimeVarying).is_err());
        assert!(ewma_ced_numeric(0.1, 2.0, 0.0, 0, LimitPolicy::TimeVarying).is_err());
    }
}
