//! Spectral filters: regularized surrogates for `x -> 1/x`.
//!
//! All three families satisfy `|g(x)| <= b/lambda` and `|g(x) x| <= b` on
//! `[0, 1]` with `b = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{GofError, Result};

/// Default relative threshold below which eigenpairs are discarded.
pub const DEFAULT_EIG_FLOOR: f64 = 1e-10;

/// Landweber inputs may exceed one by this much before being rejected.
const LANDWEBER_DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterFamily {
    Tikhonov,
    Cutoff,
    Landweber,
}

impl FilterFamily {
    pub const ALL: [FilterFamily; 3] = [
        FilterFamily::Tikhonov,
        FilterFamily::Cutoff,
        FilterFamily::Landweber,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FilterFamily::Tikhonov => "tikhonov",
            FilterFamily::Cutoff => "cutoff",
            FilterFamily::Landweber => "landweber",
        }
    }
}

impl std::fmt::Display for FilterFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FilterFamily {
    type Err = GofError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tikhonov" => Ok(FilterFamily::Tikhonov),
            "cutoff" => Ok(FilterFamily::Cutoff),
            "landweber" => Ok(FilterFamily::Landweber),
            other => Err(GofError::Parameter(format!("unknown filter '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub family: FilterFamily,
    pub lambda: f64,
    pub eig_floor: f64,
}

impl FilterSpec {
    pub fn new(family: FilterFamily, lambda: f64) -> Result<Self> {
        Self::with_floor(family, lambda, DEFAULT_EIG_FLOOR)
    }

    pub fn with_floor(family: FilterFamily, lambda: f64, eig_floor: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(GofError::Parameter(format!(
                "regularization parameter must be positive, got {lambda}"
            )));
        }
        if !(eig_floor.is_finite() && eig_floor >= 0.0) {
            return Err(GofError::Parameter(format!(
                "eigenvalue floor must be nonnegative, got {eig_floor}"
            )));
        }
        Ok(Self {
            family,
            lambda,
            eig_floor,
        })
    }

    pub fn tikhonov(lambda: f64) -> Result<Self> {
        Self::new(FilterFamily::Tikhonov, lambda)
    }

    /// Uniform filter constant `b`.
    pub fn b(&self) -> f64 {
        1.0
    }

    /// Landweber iteration count `t = max(1, floor(1/lambda))`.
    pub fn landweber_steps(&self) -> u64 {
        // the relative nudge keeps lambda = 1/t from flooring to t - 1
        ((1.0 / self.lambda * (1.0 + 1e-12)).floor() as u64).max(1)
    }

    /// Evaluates `g_lambda(x)` for `x >= 0`.
    pub fn value(&self, x: f64) -> Result<f64> {
        if x.is_nan() || x < 0.0 {
            return Err(GofError::Input(format!(
                "filter argument must be nonnegative, got {x}"
            )));
        }
        let lambda = self.lambda;
        Ok(match self.family {
            FilterFamily::Tikhonov => 1.0 / (x + lambda),
            FilterFamily::Cutoff => {
                if x >= lambda {
                    1.0 / x
                } else {
                    0.0
                }
            }
            FilterFamily::Landweber => {
                if x > 1.0 + LANDWEBER_DOMAIN_SLACK {
                    return Err(GofError::SpectrumOutOfRange(x));
                }
                let t = self.landweber_steps() as f64;
                let x = x.min(1.0);
                if x == 0.0 {
                    t
                } else {
                    // 1 - (1 - x)^t without cancellation for small x; the sum
                    // of t terms in [0, 1] never exceeds t
                    (-(t * (-x).ln_1p()).exp_m1() / x).min(t)
                }
            }
        })
    }

    /// Diagonal of `G` in the eigenbasis: `g(l_i) / l_i` for eigenvalues
    /// above `eig_floor * max`, zero otherwise.
    ///
    /// Tiny negative eigenvalues are clamped to zero first.
    pub fn g_matrix_diagonal(&self, eigenvalues: &[f64]) -> Result<Vec<f64>> {
        let max = eigenvalues
            .iter()
            .copied()
            .fold(0.0f64, |a, b| a.max(b.max(0.0)));
        if max <= 0.0 {
            return Err(GofError::DegenerateSpectrum);
        }
        let floor = self.eig_floor * max;
        eigenvalues
            .iter()
            .map(|&l| {
                let l = l.max(0.0);
                if l > floor {
                    Ok(self.value(l)? / l)
                } else {
                    Ok(0.0)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(family: FilterFamily, lambda: f64) -> FilterSpec {
        FilterSpec::new(family, lambda).unwrap()
    }

    #[test]
    fn value_examples() {
        assert_eq!(spec(FilterFamily::Tikhonov, 0.5).value(0.0).unwrap(), 2.0);
        assert_eq!(spec(FilterFamily::Cutoff, 0.1).value(0.05).unwrap(), 0.0);
        assert_eq!(spec(FilterFamily::Cutoff, 0.1).value(0.1).unwrap(), 10.0);
        let v = spec(FilterFamily::Landweber, 0.5).value(0.5).unwrap();
        assert!((v - 1.5).abs() < 1e-15);
        assert_eq!(spec(FilterFamily::Landweber, 0.3).landweber_steps(), 3);
        assert_eq!(spec(FilterFamily::Landweber, 1.0).landweber_steps(), 1);
        assert_eq!(spec(FilterFamily::Landweber, 0.5).value(0.0).unwrap(), 2.0);
    }

    #[test]
    fn landweber_domain() {
        let f = spec(FilterFamily::Landweber, 0.01);
        assert!(f.value(1.0 + 1e-13).is_ok());
        assert_eq!(f.value(1.1), Err(GofError::SpectrumOutOfRange(1.1)));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(FilterSpec::new(FilterFamily::Tikhonov, 0.0).is_err());
        assert!(FilterSpec::new(FilterFamily::Tikhonov, f64::NAN).is_err());
        assert!(FilterSpec::with_floor(FilterFamily::Tikhonov, 0.1, -1.0).is_err());
        assert!(spec(FilterFamily::Tikhonov, 0.1).value(-1.0).is_err());
    }

    #[test]
    fn g_matrix_examples() {
        let g = spec(FilterFamily::Tikhonov, 1.0)
            .g_matrix_diagonal(&[1.0])
            .unwrap();
        assert_eq!(g, vec![0.5]);
        let g = spec(FilterFamily::Cutoff, 0.5)
            .g_matrix_diagonal(&[1.0, 0.1])
            .unwrap();
        assert_eq!(g, vec![1.0, 0.0]);
        for family in FilterFamily::ALL {
            let g = spec(family, 0.1).g_matrix_diagonal(&[1e-18, 1.0]).unwrap();
            assert_eq!(g[0], 0.0);
            assert!(g[1] > 0.0);
        }
    }

    #[test]
    fn g_matrix_clamps_negative_noise() {
        let g = spec(FilterFamily::Tikhonov, 0.1)
            .g_matrix_diagonal(&[1.0, -1e-17])
            .unwrap();
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn g_matrix_degenerate() {
        let f = spec(FilterFamily::Tikhonov, 0.1);
        assert_eq!(
            f.g_matrix_diagonal(&[0.0, -1e-20]),
            Err(GofError::DegenerateSpectrum)
        );
        assert_eq!(f.g_matrix_diagonal(&[]), Err(GofError::DegenerateSpectrum));
    }

    fn grid() -> impl Iterator<Item = f64> {
        (0..10_000).map(|i| i as f64 / 9_999.0)
    }

    #[test]
    fn filter_bounds_hold_on_grid() {
        for family in FilterFamily::ALL {
            for lambda in [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 0.5, 1.0] {
                let f = spec(family, lambda);
                for x in grid() {
                    let g = f.value(x).unwrap();
                    assert!((lambda * g).abs() <= f.b(), "{family} {lambda} {x}");
                    assert!((g * x).abs() <= f.b(), "{family} {lambda} {x}");
                }
            }
        }
    }

    #[test]
    fn tikhonov_qualification_one() {
        for lambda in [1e-6, 1e-4, 1e-2, 1.0] {
            let f = spec(FilterFamily::Tikhonov, lambda);
            for x in grid() {
                let residual = (1.0 - f.value(x).unwrap() * x).abs() * x;
                assert!(residual <= lambda * (1.0 + 1e-12));
            }
        }
    }

    /// The cut-off filter vanishes at zero, so `inf g(x)(x + lambda)` is 0.
    #[test]
    fn cutoff_has_no_positive_lower_bound() {
        let f = spec(FilterFamily::Cutoff, 0.1);
        assert_eq!(f.value(0.0).unwrap() * (0.0 + 0.1), 0.0);
    }

    /// Neumaier-compensated direct summation of `sum_{l<t} (1-x)^l`.
    fn landweber_direct(x: f64, t: u64) -> f64 {
        let log_base = (-x).ln_1p();
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for l in 0..t {
            let term = if l == 0 {
                1.0
            } else {
                (l as f64 * log_base).exp()
            };
            let s = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - s) + term;
            } else {
                comp += (term - s) + sum;
            }
            sum = s;
        }
        sum + comp
    }

    #[test]
    fn landweber_closed_form_matches_summation() {
        for &t in &[1u64, 2, 7, 100, 10_000, 1_000_000] {
            let lambda = 1.0 / t as f64;
            let f = spec(FilterFamily::Landweber, lambda);
            assert_eq!(f.landweber_steps(), t);
            for &x in &[1e-8, 1e-6, 1e-3, 0.1, 0.5, 0.999, 1.0] {
                let closed = f.value(x).unwrap();
                let direct = landweber_direct(x, t);
                assert!(
                    (closed - direct).abs() <= 1e-12 * direct.max(1.0),
                    "t={t} x={x}: {closed} vs {direct}"
                );
            }
        }
    }
}
