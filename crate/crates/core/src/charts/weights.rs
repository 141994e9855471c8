use super::{ChartSpec, Family};
use crate::{Error, Result};

/// Coefficients `c_1..c_i` such that the plotted statistic at time `i`
/// equals `sum c_j X_j` (all start values at the in-control mean 0).
pub fn weight_vector(spec: &ChartSpec, i: usize) -> Result<Vec<f64>> {
    if i == 0 {
        return Err(Error::arg("weight_vector requires i >= 1"));
    }
    let lambda = spec.lambda().unwrap_or(1.0);
    let lb = 1.0 - lambda;
    let mut c = vec![0.0; i];
    match spec.family() {
        Family::Ewma => {
            let mut pow = lambda;
            for j in (0..i).rev() {
                c[j] = pow;
                pow *= lb;
            }
        }
        Family::Dewma => {
            let l2 = lambda * lambda;
            let mut pow = 1.0;
            for (m, j) in (0..i).rev().enumerate() {
                c[j] = l2 * (m + 1) as f64 * pow;
                pow *= lb;
            }
        }
        Family::Tewma => {
            let l3 = lambda * lambda * lambda;
            let mut pow = 1.0;
            for (m, j) in (0..i).rev().enumerate() {
                let binom = ((m + 1) * (m + 2) / 2) as f64;
                c[j] = l3 * binom * pow;
                pow *= lb;
            }
        }
        Family::Ma => {
            let n = i.min(spec.window().unwrap_or(1));
            for v in &mut c[i - n..] {
                *v = 1.0 / n as f64;
            }
        }
        Family::Dma => c = dma_weights(spec.window().unwrap_or(1), i),
        Family::Pm => c.fill(1.0 / i as f64),
        Family::Dpm => {
            // c_j = (1/t) * sum_{k=j}^{t} 1/k
            let t = i as f64;
            let mut tail = 0.0;
            for j in (0..i).rev() {
                tail += 1.0 / (j + 1) as f64;
                c[j] = tail / t;
            }
        }
        f => return Err(Error::arg(format!("{f} is not a linear chart"))),
    }
    Ok(c)
}

/// Weights of the double moving average `D_i` on `X_1..X_i`, including the
/// expanding start-up regime.
pub fn dma_weights(w: usize, i: usize) -> Vec<f64> {
    let w = w.max(1);
    let mut c = vec![0.0; i];
    if i == 0 {
        return c;
    }
    let nd = i.min(w);
    for m in (i + 1 - nd)..=i {
        let nm = m.min(w);
        let share = 1.0 / (nd * nm) as f64;
        for v in &mut c[m - nm..m] {
            *v += share;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dma_triangular_weights() {
        let c = dma_weights(3, 8);
        let expect = [0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 2.0, 1.0].map(|v| v / 9.0);
        for (a, b) in c.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn dma_window_one_is_identity() {
        assert_eq!(dma_weights(1, 4), vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn ewma_two_steps() {
        let spec = ChartSpec::ewma(0.3, 2.0).unwrap();
        let c = weight_vector(&spec, 2).unwrap();
        assert_abs_diff_eq!(c[0], 0.3 * 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(c[1], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn dewma_three_steps() {
        let spec = ChartSpec::dewma(0.1, 2.0).unwrap();
        let c = weight_vector(&spec, 3).unwrap();
        assert_abs_diff_eq!(c[0], 0.01 * 3.0 * 0.81, epsilon = 1e-15);
        assert_abs_diff_eq!(c[1], 0.01 * 2.0 * 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(c[2], 0.01, epsilon = 1e-15);
    }

    #[test]
    fn dpm_two_steps() {
        let spec = ChartSpec::dpm(0.35, 2.596).unwrap();
        let c = weight_vector(&spec, 2).unwrap();
        assert_abs_diff_eq!(c[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(c[1], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn nonlinear_family_is_rejected() {
        let spec = ChartSpec::cusum(0.5, 4.0).unwrap();
        assert!(weight_vector(&spec, 3).is_err());
        let spec = ChartSpec::ewma(0.3, 2.0).unwrap();
        assert!(weight_vector(&spec, 0).is_err());
    }
}
