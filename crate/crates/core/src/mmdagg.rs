//! Aggregated MMD two-sample test with uniform weights over a bandwidth
//! collection (Schrab et al.), used as a baseline.
//!
//! `B1` permutations give per-bandwidth quantile curves `q_l(u)`; `B2` fresh
//! permutations estimate the family-wise rejection probability `P(u)` of
//! the union test at adjustment `u`; `B3` bisection steps locate the
//! largest `u` with `P(u) <= alpha`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{check_alpha, quantile_rank};
use crate::error::{ensure_min_size, GofError, Result};
use crate::kernels::{gram, median_heuristic, Kernel};
use crate::outcome::{Calibration, Decision, GofOutcome, Nuisance};
use crate::rng::{random_permutations, rng_from_seed};
use crate::sample::Sample;
use crate::spectral::PooledMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdAggConfig {
    pub alpha: f64,
    /// Gaussian bandwidths on the squared-distance scale.
    pub bandwidths: Vec<f64>,
    pub b1: usize,
    pub b2: usize,
    pub b3: usize,
    /// Skip the bisection and use the Bonferroni level `alpha / L`.
    pub bonferroni: bool,
}

impl MmdAggConfig {
    pub fn new(alpha: f64, bandwidths: Vec<f64>) -> Self {
        Self {
            alpha,
            bandwidths,
            b1: 500,
            b2: 500,
            b3: 100,
            bonferroni: false,
        }
    }
}

/// `h_m * 4^l` for `l = -2..=2`, with `h_m` the median heuristic of the pool.
pub fn default_bandwidths(pool: &Sample) -> Result<Vec<f64>> {
    let h_m = median_heuristic(pool)?;
    Ok((-2..=2).map(|l| h_m * 4f64.powi(l)).collect())
}

/// Per-bandwidth permutation statistics.
struct Curves {
    original: Vec<f64>,
    /// Sorted `B1 + 1` values per bandwidth, original included.
    sorted_b1: Vec<Vec<f64>>,
    /// `b2[l][b]`.
    b2: Vec<Vec<f64>>,
}

impl Curves {
    fn quantile(&self, l: usize, level: f64) -> f64 {
        let s = &self.sorted_b1[l];
        s[quantile_rank(s.len(), level.clamp(0.0, 1.0)) - 1]
    }

    fn family_rate(&self, u: f64) -> f64 {
        let w = 1.0 / self.original.len() as f64;
        let q: Vec<f64> = (0..self.original.len())
            .map(|l| self.quantile(l, u * w))
            .collect();
        let b2 = self.b2[0].len();
        let hits = (0..b2)
            .filter(|&b| (0..q.len()).any(|l| self.b2[l][b] >= q[l]))
            .count();
        hits as f64 / b2 as f64
    }
}

pub fn mmdagg_uniform(
    x: &Sample,
    y: &Sample,
    config: &MmdAggConfig,
    seed: u64,
) -> Result<GofOutcome> {
    check_alpha(config.alpha)?;
    ensure_min_size("x sample", x.len(), 2)?;
    ensure_min_size("y sample", y.len(), 2)?;
    if config.bandwidths.is_empty() {
        return Err(GofError::Configuration(
            "aggregated MMD needs at least one bandwidth".into(),
        ));
    }
    if config.b1 == 0 || config.b2 == 0 {
        return Err(GofError::Parameter(
            "aggregated MMD needs B1 >= 1 and B2 >= 1".into(),
        ));
    }
    let pooled = x.concat(y)?;
    let size = pooled.len();
    let n = x.len();
    let mut rng = rng_from_seed(seed);
    let perms1 = random_permutations(size, config.b1, &mut rng);
    let perms2 = random_permutations(size, config.b2, &mut rng);
    let identity: Vec<u32> = (0..size as u32).collect();

    let mut curves = Curves {
        original: Vec::new(),
        sorted_b1: Vec::new(),
        b2: Vec::new(),
    };
    for &h in &config.bandwidths {
        let k = gram(&Kernel::gaussian(h)?, &pooled, &pooled)?;
        let mat = PooledMatrix::from_dmatrix(&k);
        let original = mat.u_statistic(&identity, n);
        let mut s1: Vec<f64> = perms1.par_iter().map(|p| mat.u_statistic(p, n)).collect();
        s1.push(original);
        s1.sort_by(f64::total_cmp);
        curves.original.push(original);
        curves.sorted_b1.push(s1);
        curves
            .b2
            .push(perms2.par_iter().map(|p| mat.u_statistic(p, n)).collect());
    }

    let count = config.bandwidths.len() as f64;
    let u = if config.bonferroni {
        config.alpha
    } else {
        let (mut lo, mut hi) = (0.0, count);
        for _ in 0..config.b3 {
            let mid = 0.5 * (lo + hi);
            if curves.family_rate(mid) <= config.alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let level = u / count;

    let mut best = 0;
    let mut best_gap = f64::NEG_INFINITY;
    let mut reject = false;
    for l in 0..curves.original.len() {
        let q = curves.quantile(l, level);
        let gap = curves.original[l] - q;
        reject |= gap >= 0.0;
        if gap > best_gap {
            best_gap = gap;
            best = l;
        }
    }
    Ok(GofOutcome {
        statistic: curves.original[best],
        threshold: curves.quantile(best, level),
        decision: if reject {
            Decision::Reject
        } else {
            Decision::Accept
        },
        p_value: None,
        calibration: Calibration::Aggregated,
        nuisance: Nuisance {
            bandwidth: Some(config.bandwidths[best]),
            permutations: Some(config.b1 + config.b2),
            n,
            m: y.len(),
            seed: Some(seed),
            corrected_level: Some(level),
            ..Nuisance::default()
        },
    })
}
