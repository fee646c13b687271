//! Shapiro-Wilk normality test via Royston's approximation (the AS R94
//! algorithm): polynomial-corrected normal-scores coefficients and a
//! normalizing transformation of W for the p-value.

use crate::groupstats::GroupError;
use crate::stats::{normal_cdf, normal_quantile};

fn poly(coeffs: &[f64], x: f64) -> f64 {
    // coeffs[0] + coeffs[1] x + coeffs[2] x^2 + ...
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// W statistic and p-value for 3 <= n <= 5000.
pub fn shapiro_wilk(sample: &[f64]) -> Result<(f64, f64), GroupError> {
    let n = sample.len();
    if n < 3 {
        return Err(GroupError::TooShort { need: 3, got: n });
    }
    if n > 5000 {
        return Err(GroupError::TooLarge { max: 5000, got: n });
    }
    let mut x: Vec<f64> = sample.to_vec();
    x.sort_by(f64::total_cmp);
    if x[n - 1] - x[0] == 0.0 {
        return Err(GroupError::ZeroRange);
    }

    // Expected normal order statistics (Blom scores).
    let m: Vec<f64> = (1..=n)
        .map(|i| normal_quantile((i as f64 - 0.375) / (n as f64 + 0.25)))
        .collect();
    let summ2: f64 = m.iter().map(|v| v * v).sum();
    let rsn = 1.0 / (n as f64).sqrt();

    let mut a = vec![0.0; n];
    if n == 3 {
        a[2] = (0.5f64).sqrt();
        a[0] = -a[2];
    } else {
        let c_n = m[n - 1] / summ2.sqrt();
        let a_n = c_n + poly(&[0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056], rsn);
        if n <= 5 {
            let phi = (summ2 - 2.0 * m[n - 1] * m[n - 1]) / (1.0 - 2.0 * a_n * a_n);
            for i in 1..n - 1 {
                a[i] = m[i] / phi.sqrt();
            }
            a[n - 1] = a_n;
            a[0] = -a_n;
        } else {
            let c_n1 = m[n - 2] / summ2.sqrt();
            let a_n1 =
                c_n1 + poly(&[0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633], rsn);
            let phi = (summ2 - 2.0 * m[n - 1] * m[n - 1] - 2.0 * m[n - 2] * m[n - 2])
                / (1.0 - 2.0 * a_n * a_n - 2.0 * a_n1 * a_n1);
            for i in 2..n - 2 {
                a[i] = m[i] / phi.sqrt();
            }
            a[n - 1] = a_n;
            a[n - 2] = a_n1;
            a[0] = -a_n;
            a[1] = -a_n1;
        }
    }

    let mean = x.iter().sum::<f64>() / n as f64;
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let b: f64 = a.iter().zip(&x).map(|(ai, xi)| ai * xi).sum();
    let w = ((b * b) / ss).min(1.0);

    let p = if n == 3 {
        let p = 6.0 / std::f64::consts::PI
            * (w.sqrt().asin() - (0.75f64).sqrt().asin());
        p.clamp(0.0, 1.0)
    } else if 1.0 - w <= f64::MIN_POSITIVE {
        1.0
    } else if n <= 11 {
        let nf = n as f64;
        let gamma = poly(&[-2.273, 0.459], nf);
        if gamma - (1.0 - w).ln() <= 0.0 {
            // W so small that the transform degenerates; maximal evidence.
            0.0
        } else {
            let y = -(gamma - (1.0 - w).ln()).ln();
            let mu = poly(&[0.5440, -0.39978, 0.025054, -0.0006714], nf);
            let sigma = poly(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp();
            (1.0 - normal_cdf((y - mu) / sigma)).clamp(0.0, 1.0)
        }
    } else {
        let ln_n = (n as f64).ln();
        let y = (1.0 - w).ln();
        let mu = poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln_n);
        let sigma = poly(&[-0.4803, -0.082676, 0.0030302], ln_n).exp();
        (1.0 - normal_cdf((y - mu) / sigma)).clamp(0.0, 1.0)
    };

    Ok((w, p))
}
