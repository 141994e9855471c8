//! Closed-form variances, harmonic numbers and deterministic ARL backends.
//!
//! Everything here is a pure function. The numeric ARL routines serve as
//! oracles for the Monte-Carlo engine in [`crate::mc`].

mod ewma;
mod markov;
pub mod quadrature;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::charts::{self, ChartSpec, Family};
use crate::{Error, Result};

pub use ewma::{ewma_arl_numeric, ewma_ced_numeric, EWMA_QUADRATURE_NODES};
pub use markov::{cusum_arl_markov, cusum_arl_one_sided, DEFAULT_GRID_SIZE};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericMethod {
    MarkovChain,
    FiniteHorizonRecursion,
    ClosedForm,
}

/// Result of a deterministic ARL computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericArlResult {
    pub value: f64,
    pub method: NumericMethod,
    /// Number of Markov states or quadrature nodes.
    pub grid_size: Option<usize>,
    /// Number of recursion steps for finite-horizon methods.
    pub horizon: Option<usize>,
    /// Estimate of the neglected mass (discretization or truncation).
    pub est_truncation_error: f64,
    /// Set when the value combines one-sided results by an approximation.
    pub approximate: bool,
}

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Exact standard deviation of the EWMA statistic started at the target.
///
/// `i = None` gives the asymptotic value.
pub fn ewma_sd(lambda: f64, i: Option<u64>) -> f64 {
    let asym = lambda / (2.0 - lambda);
    match i {
        None => asym.sqrt(),
        Some(i) => {
            let decay = pow_u64(1.0 - lambda, i).powi(2);
            ((1.0 - decay) * asym).sqrt()
        }
    }
}

/// Standard deviation of the EWMA-smoothed input of the mixed EWMA-CUSUM chart.
pub fn sigma_q(lambda_q: f64, i: Option<u64>) -> f64 {
    ewma_sd(lambda_q, i)
}

/// Exact variance of the second-stage DEWMA statistic at time `i`.
pub fn dewma_var(lambda: f64, i: u64) -> f64 {
    let lb = 1.0 - lambda;
    let lb2 = lb * lb;
    let fi = i as f64;
    let lb2i = pow_u64(lb, i).powi(2);
    // (i+1)^2 - (2i^2+2i-1) x + i^2 x^2 regrouped into positive terms, x = lb^2
    let d = 1.0 - lb2;
    let tail = fi * fi * d * d + 2.0 * fi * d + 1.0 + lb2;
    lambda.powi(4) * (1.0 + lb2 - lb2i * tail) / d.powi(3)
}

/// Limit of [`dewma_var`] as `i` grows.
pub fn dewma_var_inf(lambda: f64) -> f64 {
    let lb2 = (1.0 - lambda).powi(2);
    lambda.powi(4) * (1.0 + lb2) / (1.0 - lb2).powi(3)
}

/// Variance of the TEWMA statistic at time `i` (`None` = asymptotic), summed
/// from its squared weights.
pub fn tewma_var(lambda: f64, i: Option<u64>) -> f64 {
    let lb = 1.0 - lambda;
    let l3 = lambda.powi(3);
    let mut sum = 0.0;
    let mut pow = 1.0;
    let mut m: u64 = 0;
    loop {
        if let Some(i) = i {
            if m >= i {
                break;
            }
        }
        let c = ((m + 1) * (m + 2) / 2) as f64;
        let term = (l3 * c * pow).powi(2);
        sum += term;
        if i.is_none() && term < sum * 1e-18 && m > 10 {
            break;
        }
        pow *= lb;
        m += 1;
    }
    sum
}

/// Steady-window DMA variance from summing squared triangular weights.
pub fn dma_var_closed(w: u64) -> f64 {
    let w = w as f64;
    (1.0 + (w - 1.0) * (2.0 * w - 1.0) / (3.0 * w)) / (w * w)
}

/// Steady-window DMA variance written as a double sum over index pairs.
pub fn dma_var_pairwise(w: u64) -> f64 {
    let mut s: i64 = 0;
    let w_i = w as i64;
    for j1 in w_i..2 * w_i {
        for j2 in (j1 + 1)..2 * w_i {
            s += j1 - j2 + w_i;
        }
    }
    let wf = w as f64;
    (1.0 + 2.0 * s as f64 / (wf * wf)) / (wf * wf)
}

/// Variance of the DMA statistic with window `w` at time `i`.
///
/// The closed form holds once the window is full (`i >= 2w - 1`); earlier
/// values are summed from the exact weights.
pub fn dma_var(w: u64, i: u64) -> Result<f64> {
    if w == 0 || i == 0 {
        return Err(Error::arg("dma_var requires w >= 1 and i >= 1"));
    }
    if i + 1 >= 2 * w {
        return Ok(dma_var_closed(w));
    }
    Ok(charts::dma_weights(w as usize, i as usize).iter().map(|c| c * c).sum())
}

/// Harmonic number `H_t`.
pub fn harmonic(t: u64) -> f64 {
    // Summing smallest terms first keeps the rounding error at a few ulps.
    (1..=t).rev().map(|k| 1.0 / k as f64).sum()
}

/// Asymptotic expansion `ln t + gamma + 1/(2t) - 1/(12t^2)`.
pub fn harmonic_approx(t: f64) -> f64 {
    t.ln() + EULER_GAMMA + 1.0 / (2.0 * t) - 1.0 / (12.0 * t * t)
}

/// Standard deviation of the DPM statistic at time `t`.
pub fn dpm_sd(t: u64) -> f64 {
    let tf = t as f64;
    ((2.0 * tf - harmonic(t)) / (tf * tf)).sqrt()
}

/// Shewhart chart ARL with symmetric limits `+-c` under a mean shift `delta`.
pub fn shewhart_arl(c: f64, delta: f64) -> f64 {
    1.0 / (norm_cdf(-c - delta) + norm_cdf(-c + delta))
}

/// Variance of the plotted statistic computed from its closed form.
///
/// Only linear families are supported; this is the counterpart of summing
/// squared entries of [`charts::weight_vector`].
pub fn closed_form_var(spec: &ChartSpec, i: u64) -> Result<f64> {
    let lambda = spec.lambda().unwrap_or(1.0);
    match spec.family() {
        Family::Ewma => Ok(ewma_sd(lambda, Some(i)).powi(2)),
        Family::Dewma => Ok(dewma_var(lambda, i)),
        Family::Tewma => Ok(tewma_var(lambda, Some(i))),
        Family::Ma => {
            let w = spec.window().unwrap_or(1) as u64;
            Ok(1.0 / i.min(w) as f64)
        }
        Family::Dma => dma_var(spec.window().unwrap_or(1) as u64, i),
        Family::Pm => Ok(1.0 / i as f64),
        Family::Dpm => Ok(dpm_sd(i).powi(2)),
        f => Err(Error::arg(format!("{f} is not a linear chart"))),
    }
}

pub(crate) fn pow_u64(base: f64, e: u64) -> f64 {
    if e <= i32::MAX as u64 {
        base.powi(e as i32)
    } else {
        base.powf(e as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ewma_sd_values() {
        assert_relative_eq!(ewma_sd(0.1, None), 0.229_416, epsilon = 1e-6);
        assert_relative_eq!(ewma_sd(0.1, Some(1)), 0.1, epsilon = 1e-15);
        for i in [1, 5, 100] {
            assert_relative_eq!(ewma_sd(1.0, Some(i)), 1.0, epsilon = 1e-15);
        }
        assert_relative_eq!(sigma_q(0.75, None), 0.774_597, epsilon = 1e-6);
        assert_relative_eq!(sigma_q(0.5, Some(1)), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ewma_sd_increases_to_limit() {
        let mut prev = 0.0;
        for i in 1..500 {
            let s = ewma_sd(0.05, Some(i));
            assert!(s >= prev);
            prev = s;
        }
        assert!((prev - ewma_sd(0.05, None)).abs() < 1e-10);
    }

    #[test]
    fn dewma_variance_values() {
        // 1e-4 * 1.81 / 0.19^3
        assert_relative_eq!(dewma_var_inf(0.1), 1e-4 * 1.81 / 0.19f64.powi(3), epsilon = 1e-15);
        assert_relative_eq!(dewma_var_inf(0.1), 0.026_388_6, epsilon = 1e-7);
        assert_relative_eq!(dewma_var_inf(1.0), 1.0);
        assert_relative_eq!(dewma_var(0.1, 1), 1e-4, max_relative = 1e-12);
        let mut prev = 0.0;
        for i in 1..400 {
            let v = dewma_var(0.1, i);
            assert!(v >= prev);
            prev = v;
        }
        assert!((prev - dewma_var_inf(0.1)).abs() < 1e-12);
    }

    #[test]
    fn tewma_generating_function() {
        // sum_m C(m+2,2)^2 x^m = (1 + 4x + x^2) / (1 - x)^5
        for lambda in [0.05, 0.13, 0.5] {
            let x: f64 = (1.0 - lambda) * (1.0 - lambda);
            let gf = lambda.powi(6) * (1.0 + 4.0 * x + x * x) / (1.0 - x).powi(5);
            assert_relative_eq!(tewma_var(lambda, None), gf, max_relative = 1e-12);
        }
    }

    #[test]
    fn dma_variance_values() {
        assert_relative_eq!(dma_var(2, 3).unwrap(), 0.375);
        assert_relative_eq!(dma_var(3, 5).unwrap(), 0.234_568, epsilon = 1e-6);
        for i in 1..20 {
            assert_relative_eq!(dma_var(1, i).unwrap(), 1.0);
        }
        assert!(dma_var(0, 1).is_err());
    }

    #[test]
    fn dma_expressions_agree() {
        for w in 1..=100 {
            assert_relative_eq!(dma_var_closed(w), dma_var_pairwise(w), max_relative = 1e-12);
        }
    }

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic(1), 1.0);
        assert_relative_eq!(harmonic(4), 25.0 / 12.0, epsilon = 1e-15);
        assert!((harmonic(100) - harmonic_approx(100.0)).abs() < 1e-8);
        for t in 5..2000u64 {
            let err = (harmonic(t) - harmonic_approx(t as f64)).abs();
            // the remainder sits just below the bound; allow for rounding of the exact sum
            let bound = 1.0 / (120.0 * (t as f64).powi(4)) + 4.0 * f64::EPSILON * harmonic(t);
            assert!(err < bound, "t={t} err={err}");
        }
    }

    #[test]
    fn dpm_sd_values() {
        assert_relative_eq!(dpm_sd(1), 1.0);
        assert_relative_eq!(dpm_sd(2), 0.625f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(dpm_sd(2), 0.790_569, epsilon = 1e-6);
    }

    #[test]
    fn shewhart_values() {
        assert_relative_eq!(shewhart_arl(3.0, 0.0), 370.398, epsilon = 1e-3);
        assert_relative_eq!(shewhart_arl(3.0, 1.0), 43.89, epsilon = 5e-3);
        assert!(shewhart_arl(4.0, 0.0) > shewhart_arl(3.0, 0.0));
        assert!(shewhart_arl(8.0, 0.0) > 1e14);
    }
}
