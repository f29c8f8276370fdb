//! Small statistical helpers for checking Monte Carlo output: binomial
//! intervals and bands, and goodness-of-fit p-values for sampler checks.

use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

use crate::error::{GofError, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// Central `level` band of `Binomial(reps, p) / reps`.
pub fn binomial_band(reps: usize, p: f64, level: f64) -> Result<(f64, f64)> {
    let dist = Binomial::new(p, reps as u64)
        .map_err(|e| GofError::Parameter(format!("binomial band: {e}")))?;
    let tail = (1.0 - level) / 2.0;
    let lo = dist.inverse_cdf(tail) as f64;
    let hi = dist.inverse_cdf(1.0 - tail) as f64;
    Ok((lo / reps as f64, hi / reps as f64))
}

/// Asymptotic Kolmogorov survival function `P(K > t)`.
pub fn kolmogorov_survival(t: f64) -> f64 {
    // the series converges slowly here and the tail mass is 1 to 15 digits
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * t * t).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov statistic and p-value against a CDF.
///
/// The p-value uses Stephens' small-sample scaling of the asymptotic law.
/// For a discrete null the supremum is taken over the jump points supplied
/// in `support`; pass `None` for a continuous CDF.
pub fn ks_test<F>(values: &[f64], cdf: F, support: Option<&[f64]>) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let nf = n as f64;
    let d = match support {
        None => v
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / nf)
                    .abs()
                    .max(((i + 1) as f64 / nf - f).abs())
            })
            .fold(0.0, f64::max),
        Some(points) => points
            .iter()
            .map(|&t| {
                let below = v.partition_point(|&x| x <= t) as f64 / nf;
                (below - cdf(t)).abs()
            })
            .fold(0.0, f64::max),
    };
    let sn = nf.sqrt();
    (d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d))
}

/// Pearson chi-square test of observed counts against expected counts.
/// Returns `(statistic, p_value)` with `bins - 1` degrees of freedom.
pub fn chi_square_test(observed: &[u64], expected: &[f64]) -> Result<(f64, f64)> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(GofError::Input(
            "chi-square test needs matching count vectors with at least two bins".into(),
        ));
    }
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64)
        .map_err(|e| GofError::Internal(format!("chi-square: {e}")))?;
    Ok((stat, dist.sf(stat)))
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}
