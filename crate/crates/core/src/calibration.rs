//! Critical values and complete tests: the effective-dimension bound,
//! permutation calibration, and the Bonferroni-aggregated adaptive test over
//! a (lambda, bandwidth) grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GofError, Result};
use crate::filters::{FilterFamily, FilterSpec};
use crate::kernels::{gram, median_heuristic, Kernel};
use crate::outcome::{Calibration, Decision, GofOutcome, Nuisance};
use crate::rng::{random_permutations, rng_from_seed};
use crate::sample::Sample;
use crate::spectral::{check_sizes, BasisKind, ContrastTable, EigenSystem, SpectralBasis};
use crate::statistic::{distance_matrix, statistic_direct};

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(GofError::Parameter(format!(
            "alpha must lie in (0,1), got {alpha}"
        )))
    }
}

fn check_permutation_count(b: usize) -> Result<()> {
    if b == 0 {
        Err(GofError::Parameter(
            "number of permutations must be at least 1".into(),
        ))
    } else {
        Ok(())
    }
}

/// `N_D(lambda) = sum_i l_i / (l_i + lambda)` over the eigenvalues of `K/N`.
pub fn empirical_effective_dimension(eig: &EigenSystem, lambda: f64) -> Result<f64> {
    eig.effective_dimension(lambda)
}

/// Inputs and result of the effective-dimension critical value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffDimCritical {
    pub alpha: f64,
    pub b: f64,
    pub kappa: f64,
    pub n: usize,
    pub m: usize,
    pub reference_size: usize,
    pub lambda: f64,
    pub effective_dimension: f64,
    pub c_hat: f64,
}

/// `30 b / alpha * (1/(n-1) + 1/(m-1)) * (1 + 8 kappa / sqrt(N lambda) * ln(24/alpha)) * sqrt(N_D)`.
#[allow(clippy::too_many_arguments)]
pub fn effdim_critical_value(
    alpha: f64,
    b: f64,
    kappa: f64,
    n: usize,
    m: usize,
    reference_size: usize,
    lambda: f64,
    effective_dimension: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    if n < 2 || m < 2 {
        return Err(GofError::SampleSize {
            what: "x or y sample",
            got: n.min(m),
            needed: 2,
        });
    }
    if !(lambda > 0.0 && reference_size > 0) {
        return Err(GofError::Parameter(
            "critical value needs lambda > 0 and N > 0".into(),
        ));
    }
    if !(effective_dimension >= 0.0) {
        return Err(GofError::Parameter(format!(
            "effective dimension must be nonnegative, got {effective_dimension}"
        )));
    }
    let sizes = 1.0 / (n as f64 - 1.0) + 1.0 / (m as f64 - 1.0);
    let concentration =
        1.0 + 8.0 * kappa / (reference_size as f64 * lambda).sqrt() * (24.0 / alpha).ln();
    Ok(30.0 * b / alpha * sizes * concentration * effective_dimension.sqrt())
}

/// Rank (1-based) of the order statistic used as the `(1 - alpha)` quantile
/// of `count` values: `ceil((1 - alpha) * count)`, clamped to `[1, count]`.
pub fn quantile_rank(count: usize, alpha: f64) -> usize {
    let target = (1.0 - alpha) * count as f64;
    // absorb rounding in products such as 0.95 * 400
    let rank = (target - 1e-9 * (count as f64).max(1.0)).ceil();
    (rank.max(1.0) as usize).min(count)
}

/// The `(1 - alpha)` empirical quantile of `values`.
pub fn permutation_quantile(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(GofError::Input("quantile of an empty vector".into()));
    }
    let k = quantile_rank(values.len(), alpha) - 1;
    let mut v = values.to_vec();
    let (_, q, _) = v.select_nth_unstable_by(k, f64::total_cmp);
    Ok(*q)
}

/// `(1 + #{b >= 1 : s_b >= s_0}) / (B + 1)` where `s_0 = values[0]`.
pub fn permutation_p_value(values: &[f64]) -> f64 {
    let s0 = values[0];
    let exceed = values[1..].iter().filter(|&&v| v >= s0).count();
    (1 + exceed) as f64 / values.len() as f64
}

/// The permutation distribution of a statistic; index 0 is unpermuted.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationCalibration {
    pub alpha: f64,
    pub statistics: Vec<f64>,
    pub q_hat: f64,
}

impl PermutationCalibration {
    pub fn new(statistics: Vec<f64>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if statistics.len() < 2 {
            return Err(GofError::Parameter(
                "number of permutations must be at least 1".into(),
            ));
        }
        let q_hat = permutation_quantile(&statistics, alpha)?;
        Ok(Self {
            alpha,
            statistics,
            q_hat,
        })
    }

    pub fn permutations(&self) -> usize {
        self.statistics.len() - 1
    }

    pub fn statistic(&self) -> f64 {
        self.statistics[0]
    }

    pub fn p_value(&self) -> f64 {
        permutation_p_value(&self.statistics)
    }

    pub fn decision(&self) -> Decision {
        Decision::from_threshold(self.statistic(), self.q_hat)
    }

    pub fn outcome(&self, nuisance: Nuisance) -> GofOutcome {
        GofOutcome {
            statistic: self.statistic(),
            threshold: self.q_hat,
            decision: self.decision(),
            p_value: Some(self.p_value()),
            calibration: Calibration::Permutation,
            nuisance,
        }
    }
}

/// Test with the effective-dimension critical value.
pub fn test_effdim(
    x: &Sample,
    y: &Sample,
    d_ref: &Sample,
    kernel: &Kernel,
    filter: &FilterSpec,
    alpha: f64,
) -> Result<GofOutcome> {
    check_alpha(alpha)?;
    let statistic = statistic_direct(x, y, d_ref, kernel, filter)?;
    let eig = EigenSystem::from_gram(&gram(kernel, d_ref, d_ref)?)?;
    let n_d = empirical_effective_dimension(&eig, filter.lambda)?;
    let c_hat = effdim_critical_value(
        alpha,
        filter.b(),
        kernel.kappa(),
        x.len(),
        y.len(),
        d_ref.len(),
        filter.lambda,
        n_d,
    )?;
    Ok(GofOutcome {
        statistic,
        threshold: c_hat,
        decision: Decision::from_threshold(statistic, c_hat),
        p_value: None,
        calibration: Calibration::EffectiveDimension,
        nuisance: Nuisance {
            lambda: Some(filter.lambda),
            bandwidth: kernel.bandwidth(),
            n: x.len(),
            m: y.len(),
            reference_size: Some(d_ref.len()),
            ..Nuisance::default()
        },
    })
}

/// Permutation test with `permutations` relabellings drawn from `seed`.
#[allow(clippy::too_many_arguments)]
pub fn test_permutation(
    x: &Sample,
    y: &Sample,
    d_ref: &Sample,
    kernel: &Kernel,
    filter: &FilterSpec,
    alpha: f64,
    permutations: usize,
    seed: u64,
) -> Result<GofOutcome> {
    check_alpha(alpha)?;
    check_permutation_count(permutations)?;
    let basis = SpectralBasis::new(x, y, d_ref, kernel, BasisKind::Integral, filter.eig_floor)?;
    let perms = random_permutations(basis.pooled_size(), permutations, &mut rng_from_seed(seed));
    let table = ContrastTable::build(&basis, &perms);
    let cal = PermutationCalibration::new(table.statistics(&basis.weights(filter)?), alpha)?;
    Ok(cal.outcome(Nuisance {
        lambda: Some(filter.lambda),
        bandwidth: kernel.bandwidth(),
        permutations: Some(permutations),
        n: x.len(),
        m: y.len(),
        reference_size: Some(d_ref.len()),
        seed: Some(seed),
        corrected_level: None,
    }))
}

/// `{lo, 2 lo, 4 lo, ...}` up to the last point not above `hi`, with `hi`
/// appended when it is not already on the grid.
pub fn doubling_grid(lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) {
        return Err(GofError::Configuration(format!(
            "grid needs 0 < lo <= hi, got {lo}:{hi}"
        )));
    }
    let tol = 1e-12;
    let mut grid = Vec::new();
    let mut v = lo;
    while v <= hi * (1.0 + tol) {
        grid.push(v);
        v *= 2.0;
    }
    let last = *grid.last().expect("lo <= hi");
    if (hi - last).abs() > tol * hi {
        grid.push(hi);
    }
    Ok(grid)
}

/// Smallest `B` with `B + 1 >= pairs / alpha`.
pub fn minimal_permutations(pairs: usize, alpha: f64) -> usize {
    let needed = pairs as f64 / alpha;
    ((needed - 1e-9 * needed).ceil() as usize)
        .saturating_sub(1)
        .max(1)
}

/// Bandwidths `h_m * w` for each multiplier, `h_m` the median heuristic.
pub fn median_bandwidth_grid(pool: &Sample, multipliers: &[f64]) -> Result<Vec<f64>> {
    let h_m = median_heuristic(pool)?;
    Ok(multipliers.iter().map(|w| h_m * w).collect())
}

/// A spectral basis and its permutation contrasts for one kernel. Tables
/// are filter-independent, so one set serves every filter and lambda.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub kernel: Kernel,
    pub basis: SpectralBasis,
    pub table: ContrastTable,
}

/// Builds the basis and contrast table for each kernel, reusing the same
/// permutations throughout.
pub fn prepare_kernel_tables(
    x: &Sample,
    y: &Sample,
    d_ref: &Sample,
    kernels: &[Kernel],
    kind: BasisKind,
    eig_floor: f64,
    permutations: &[Vec<u32>],
) -> Result<Vec<KernelTable>> {
    check_sizes(x, y, d_ref)?;
    kernels
        .iter()
        .map(|kernel| {
            let basis = SpectralBasis::new(x, y, d_ref, kernel, kind, eig_floor)?;
            let table = ContrastTable::build(&basis, permutations);
            Ok(KernelTable {
                kernel: *kernel,
                basis,
                table,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub alpha: f64,
    pub filter: FilterFamily,
    pub lambdas: Vec<f64>,
    pub eig_floor: f64,
}

/// Outcome of one (lambda, kernel) pair inside the adaptive test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub lambda: f64,
    pub bandwidth: Option<f64>,
    pub statistic: f64,
    pub threshold: f64,
    pub reject: bool,
    /// The filter removed every retained eigenpair, so the statistic is
    /// identically zero and the pair cannot reject.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveReport {
    pub outcome: GofOutcome,
    pub pairs: Vec<PairResult>,
}

/// Union of permutation tests over `lambdas x tables` at level
/// `alpha / (|lambdas| |tables|)`.
pub fn aggregate_adaptive(
    tables: &[KernelTable],
    config: &AdaptiveConfig,
    permutations: usize,
    seed: Option<u64>,
) -> Result<AdaptiveReport> {
    check_alpha(config.alpha)?;
    if tables.is_empty() || config.lambdas.is_empty() {
        return Err(GofError::Configuration(
            "adaptive test needs nonempty lambda and bandwidth grids".into(),
        ));
    }
    let pairs = tables.len() * config.lambdas.len();
    let needed = minimal_permutations(pairs, config.alpha);
    if permutations < needed {
        return Err(GofError::Configuration(format!(
            "{pairs} grid pairs at alpha = {} need at least B = {needed} permutations, got {permutations}",
            config.alpha
        )));
    }
    let level = config.alpha / pairs as f64;
    let mut results = Vec::with_capacity(pairs);
    for t in tables {
        if t.table.len() != permutations + 1 {
            return Err(GofError::Internal(format!(
                "contrast table has {} rows, expected {}",
                t.table.len(),
                permutations + 1
            )));
        }
        let per_lambda: Vec<Result<PairResult>> = config
            .lambdas
            .par_iter()
            .map(|&lambda| {
                let filter = FilterSpec::with_floor(config.filter, lambda, config.eig_floor)?;
                let w = t.basis.weights(&filter)?;
                if w.iter().all(|&v| v == 0.0) {
                    return Ok(PairResult {
                        lambda,
                        bandwidth: t.kernel.bandwidth(),
                        statistic: 0.0,
                        threshold: 0.0,
                        reject: false,
                        degenerate: true,
                    });
                }
                let stats = t.table.statistics(&w);
                let q = permutation_quantile(&stats, level)?;
                Ok(PairResult {
                    lambda,
                    bandwidth: t.kernel.bandwidth(),
                    statistic: stats[0],
                    threshold: q,
                    reject: stats[0] >= q,
                    degenerate: false,
                })
            })
            .collect();
        for r in per_lambda {
            results.push(r?);
        }
    }
    let best = results
        .iter()
        .filter(|p| !p.degenerate)
        .fold(None::<&PairResult>, |acc, p| match acc {
            Some(a) if a.statistic - a.threshold >= p.statistic - p.threshold => Some(a),
            _ => Some(p),
        })
        .ok_or(GofError::DegenerateSpectrum)?;
    let reject = results.iter().any(|p| p.reject);
    let outcome = GofOutcome {
        statistic: best.statistic,
        threshold: best.threshold,
        decision: if reject {
            Decision::Reject
        } else {
            Decision::Accept
        },
        p_value: None,
        calibration: Calibration::Aggregated,
        nuisance: Nuisance {
            lambda: Some(best.lambda),
            bandwidth: best.bandwidth,
            permutations: Some(permutations),
            n: tables[0].basis.n(),
            m: tables[0].basis.m(),
            reference_size: None,
            seed,
            corrected_level: Some(level),
        },
    };
    Ok(AdaptiveReport {
        outcome,
        pairs: results,
    })
}

/// Adaptive test over `lambdas x kernels`, drawing `permutations`
/// relabellings from `seed` and reusing them for every pair.
pub fn adaptive_test(
    x: &Sample,
    y: &Sample,
    d_ref: &Sample,
    kernels: &[Kernel],
    kind: BasisKind,
    config: &AdaptiveConfig,
    permutations: usize,
    seed: u64,
) -> Result<AdaptiveReport> {
    check_alpha(config.alpha)?;
    let pairs = kernels.len() * config.lambdas.len();
    let needed = minimal_permutations(pairs.max(1), config.alpha);
    if permutations < needed {
        return Err(GofError::Configuration(format!(
            "{pairs} grid pairs at alpha = {} need at least B = {needed} permutations, got {permutations}",
            config.alpha
        )));
    }
    let perms = random_permutations(x.len() + y.len(), permutations, &mut rng_from_seed(seed));
    let tables = prepare_kernel_tables(x, y, d_ref, kernels, kind, config.eig_floor, &perms)?;
    let mut report = aggregate_adaptive(&tables, config, permutations, Some(seed))?;
    report.outcome.nuisance.reference_size = Some(d_ref.len());
    Ok(report)
}

/// Energy-distance two-sample test calibrated by permutation.
pub fn energy_permutation_test(
    x: &Sample,
    y: &Sample,
    alpha: f64,
    permutations: usize,
    seed: u64,
) -> Result<GofOutcome> {
    check_alpha(alpha)?;
    check_permutation_count(permutations)?;
    let perms = random_permutations(x.len() + y.len(), permutations, &mut rng_from_seed(seed));
    energy_permutation_test_with(x, y, alpha, &perms, Some(seed))
}

/// As [`energy_permutation_test`] with caller-supplied permutations.
pub fn energy_permutation_test_with(
    x: &Sample,
    y: &Sample,
    alpha: f64,
    permutations: &[Vec<u32>],
    seed: Option<u64>,
) -> Result<GofOutcome> {
    crate::error::ensure_min_size("x sample", x.len(), 1)?;
    crate::error::ensure_min_size("y sample", y.len(), 1)?;
    let pooled = x.concat(y)?;
    let dist = distance_matrix(&pooled);
    let n = x.len();
    let identity: Vec<u32> = (0..pooled.len() as u32).collect();
    let stats: Vec<f64> = std::iter::once(&identity)
        .chain(permutations)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|p| dist.energy(p, n))
        .collect();
    let cal = PermutationCalibration::new(stats, alpha)?;
    Ok(cal.outcome(Nuisance {
        permutations: Some(permutations.len()),
        n,
        m: y.len(),
        seed,
        ..Nuisance::default()
    }))
}
