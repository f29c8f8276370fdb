//! Monte Carlo runners for the power, size and variance studies.
//!
//! Every replicate `r` at dimension `d` draws from seeds derived from
//! `(seed, d, r)`: `x` from stream 0 (the same stream for every theta, so
//! power curves use common random numbers along the grid), `y` from 1, the
//! reference sample from 2, permutations from 3 and the aggregated-MMD
//! permutations from 4. All methods see the same draws.

use std::time::Instant;

use gof_core::calibration::{
    aggregate_adaptive, energy_permutation_test_with, prepare_kernel_tables, test_effdim,
    AdaptiveConfig, PermutationCalibration,
};
use gof_core::mmdagg::{default_bandwidths, mmdagg_uniform, MmdAggConfig};
use gof_core::rng::{derive_seed, random_permutations, rng_from_seed};
use gof_core::{
    doubling_grid, hagrass_statistic, median_heuristic, statistic_direct, BasisKind, ContrastTable,
    DistributionSpec, FilterFamily, FilterSpec, Kernel, KernelFamily, Sample, SpectralBasis,
};
use rayon::prelude::*;

use crate::error::{HarnessError, Result};
use crate::plan::{ExperimentPlan, Method, Study};
use crate::records::{PowerRecord, VarianceRecord};

/// One column of a power study: a method with its filter and lambda.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub method: Method,
    pub filter: Option<FilterFamily>,
    /// Fixed lambda; `None` for adaptive methods and baselines.
    pub lambda: Option<f64>,
}

impl Arm {
    fn lambda_label(&self, plan: &ExperimentPlan) -> String {
        match (self.lambda, self.filter) {
            (Some(l), _) => l.to_string(),
            (None, Some(f)) => {
                let [lo, hi] = plan.lambda_grid.get(f);
                format!("{lo}:{hi}")
            }
            (None, None) => "none".to_string(),
        }
    }

    fn filter_label(&self) -> String {
        self.filter
            .map_or_else(|| "none".to_string(), |f| f.to_string())
    }
}

pub fn arms(plan: &ExperimentPlan) -> Vec<Arm> {
    let mut out = Vec::new();
    for &method in &plan.methods {
        match method {
            Method::SpectralPerm | Method::SpectralEffdim => {
                for &f in &plan.filters {
                    for &l in &plan.lambdas {
                        out.push(Arm {
                            method,
                            filter: Some(f),
                            lambda: Some(l),
                        });
                    }
                }
            }
            Method::SpectralAdaptive | Method::HagrassAdaptive => {
                for &f in &plan.filters {
                    out.push(Arm {
                        method,
                        filter: Some(f),
                        lambda: None,
                    });
                }
            }
            Method::MmdaggUniform | Method::EnergyPerm => {
                out.push(Arm {
                    method,
                    filter: None,
                    lambda: None,
                });
            }
        }
    }
    out
}

/// The plan restricted to its null parameter.
pub fn size_plan(plan: &ExperimentPlan) -> ExperimentPlan {
    let mut p = plan.clone();
    p.thetas = vec![plan.family.null_parameter()];
    p
}

/// Shared per-run state that does not depend on the replicate.
struct Setup<'a> {
    plan: &'a ExperimentPlan,
    arms: Vec<Arm>,
    multipliers: Vec<f64>,
    adaptive_grids: Vec<(FilterFamily, Vec<f64>)>,
    b_fixed: usize,
    b_adaptive: usize,
}

impl<'a> Setup<'a> {
    fn new(plan: &'a ExperimentPlan) -> Result<Self> {
        let arms = arms(plan);
        let has_adaptive = arms.iter().any(|a| a.method.is_adaptive());
        let multipliers = match plan.kernel {
            KernelFamily::Gaussian => {
                doubling_grid(plan.bandwidth_grid[0], plan.bandwidth_grid[1])?
            }
            KernelFamily::Sobolev => vec![1.0],
        };
        let adaptive_grids = plan
            .filters
            .iter()
            .map(|&f| Ok((f, plan.lambda_grid.grid(f)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            plan,
            arms,
            multipliers,
            adaptive_grids,
            b_fixed: plan.permutations,
            b_adaptive: if has_adaptive {
                plan.adaptive_permutations
            } else {
                0
            },
        })
    }

    fn kernel(&self, h_m: Option<f64>, multiplier: f64) -> Result<Kernel> {
        Ok(match h_m {
            Some(h) => Kernel::gaussian(h * multiplier)?,
            None => Kernel::Sobolev,
        })
    }

    fn replicate(&self, d: usize, r: usize) -> Result<Vec<Vec<bool>>> {
        let plan = self.plan;
        let seed_r = derive_seed(plan.seed, &[d as u64, r as u64]);
        let null = DistributionSpec::null(plan.family, d)?;
        let y = null.sample_seeded(plan.m, derive_seed(seed_r, &[1]))?;
        let d_ref = null.sample_seeded(plan.big_n, derive_seed(seed_r, &[2]))?;
        let perms = random_permutations(
            plan.n + plan.m,
            self.b_fixed.max(self.b_adaptive),
            &mut rng_from_seed(derive_seed(seed_r, &[3])),
        );
        plan.thetas
            .iter()
            .map(|&theta| {
                let x = DistributionSpec::new(plan.family, d, theta)?
                    .sample_seeded(plan.n, derive_seed(seed_r, &[0]))?;
                self.decide(&x, &y, &d_ref, &perms, derive_seed(seed_r, &[4]))
            })
            .collect()
    }

    fn decide(
        &self,
        x: &Sample,
        y: &Sample,
        d_ref: &Sample,
        perms: &[Vec<u32>],
        mmdagg_seed: u64,
    ) -> Result<Vec<bool>> {
        let plan = self.plan;
        let pool = x.concat(y)?;
        let h_m = match plan.kernel {
            KernelFamily::Gaussian => Some(median_heuristic(&pool)?),
            KernelFamily::Sobolev => None,
        };
        let fixed_kernel = self.kernel(h_m, 1.0)?;

        let fixed = if self.arms.iter().any(|a| a.method == Method::SpectralPerm) {
            let basis = SpectralBasis::new(
                x,
                y,
                d_ref,
                &fixed_kernel,
                BasisKind::Integral,
                plan.eig_floor,
            )?;
            let table = ContrastTable::build(&basis, &perms[..self.b_fixed]);
            Some((basis, table))
        } else {
            None
        };
        let mut adaptive = Vec::new();
        for (method, kind) in [
            (Method::SpectralAdaptive, BasisKind::Integral),
            (Method::HagrassAdaptive, BasisKind::CenteredCovariance),
        ] {
            if self.arms.iter().any(|a| a.method == method) {
                let kernels = self
                    .multipliers
                    .iter()
                    .map(|&w| self.kernel(h_m, w))
                    .collect::<Result<Vec<_>>>()?;
                let tables = prepare_kernel_tables(
                    x,
                    y,
                    d_ref,
                    &kernels,
                    kind,
                    plan.eig_floor,
                    &perms[..self.b_adaptive],
                )?;
                adaptive.push((method, tables));
            }
        }

        self.arms
            .iter()
            .map(|arm| -> Result<bool> {
                match arm.method {
                    Method::SpectralPerm => {
                        let (basis, table) = fixed.as_ref().expect("built above");
                        let filter = fixed_filter(arm, plan.eig_floor)?;
                        let w = basis.weights(&filter)?;
                        // all-zero weights make every statistic zero; a tie
                        // is not evidence against the null
                        if w.iter().all(|&v| v == 0.0) {
                            return Ok(false);
                        }
                        let cal = PermutationCalibration::new(table.statistics(&w), plan.alpha)?;
                        Ok(cal.decision().is_reject())
                    }
                    Method::SpectralEffdim => {
                        let filter = fixed_filter(arm, plan.eig_floor)?;
                        Ok(test_effdim(x, y, d_ref, &fixed_kernel, &filter, plan.alpha)?.rejects())
                    }
                    Method::SpectralAdaptive | Method::HagrassAdaptive => {
                        let tables = &adaptive
                            .iter()
                            .find(|(m, _)| *m == arm.method)
                            .expect("built above")
                            .1;
                        let filter = arm.filter.expect("adaptive arms carry a filter");
                        let lambdas = self
                            .adaptive_grids
                            .iter()
                            .find(|(f, _)| *f == filter)
                            .expect("grid per filter")
                            .1
                            .clone();
                        let config = AdaptiveConfig {
                            alpha: plan.alpha,
                            filter,
                            lambdas,
                            eig_floor: plan.eig_floor,
                        };
                        Ok(aggregate_adaptive(tables, &config, self.b_adaptive, None)?
                            .outcome
                            .rejects())
                    }
                    Method::EnergyPerm => Ok(energy_permutation_test_with(
                        x,
                        y,
                        plan.alpha,
                        &perms[..self.b_fixed],
                        None,
                    )?
                    .rejects()),
                    Method::MmdaggUniform => {
                        let config = MmdAggConfig {
                            alpha: plan.alpha,
                            bandwidths: default_bandwidths(&pool)?,
                            b1: plan.mmdagg.b1,
                            b2: plan.mmdagg.b2,
                            b3: plan.mmdagg.b3,
                            bonferroni: plan.mmdagg.bonferroni,
                        };
                        Ok(mmdagg_uniform(x, y, &config, mmdagg_seed)?.rejects())
                    }
                }
            })
            .collect()
    }
}

fn fixed_filter(arm: &Arm, eig_floor: f64) -> Result<FilterSpec> {
    Ok(FilterSpec::with_floor(
        arm.filter.expect("fixed arms carry a filter"),
        arm.lambda.expect("fixed arms carry a lambda"),
        eig_floor,
    )?)
}

/// Runs every arm of the plan over `reps` replicates at each `(d, theta)`.
pub fn run_power(plan: &ExperimentPlan) -> Result<Vec<PowerRecord>> {
    if plan.study == Study::VarianceComparison {
        return Err(HarnessError::Config(
            "variance_comparison plans run with the variance command".into(),
        ));
    }
    plan.validate()?;
    let setup = Setup::new(plan)?;
    log::info!(
        "{} study: {} arms x {} thetas x {} dims x {} reps, work estimate {:.3e}",
        plan.study.as_str(),
        setup.arms.len(),
        plan.thetas.len(),
        plan.d.len(),
        plan.reps,
        plan.work_estimate()
    );
    let start = Instant::now();
    let mut records = Vec::new();
    for &d in &plan.d {
        let per_rep: Vec<Vec<Vec<bool>>> = (0..plan.reps)
            .into_par_iter()
            .map(|r| setup.replicate(d, r))
            .collect::<Result<_>>()?;
        for (a, arm) in setup.arms.iter().enumerate() {
            for (t, &theta) in plan.thetas.iter().enumerate() {
                let rejections = per_rep.iter().filter(|rep| rep[t][a]).count();
                let mut rec = PowerRecord {
                    study: plan.study.as_str().to_string(),
                    method: arm.method.as_str().to_string(),
                    filter: arm.filter_label(),
                    family: plan.family.to_string(),
                    d,
                    theta,
                    n: plan.n,
                    m: plan.m,
                    big_n: plan.big_n,
                    lambda: arm.lambda_label(plan),
                    rate: 0.0,
                    lo: 0.0,
                    hi: 0.0,
                    reps: 0,
                    seed: plan.seed,
                };
                rec.set_counts(rejections, plan.reps);
                records.push(rec);
            }
        }
        log::info!("d = {d} done after {:.1} s", start.elapsed().as_secs_f64());
    }
    Ok(records)
}

/// One sweep point of the variance study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariancePoint {
    pub setting: &'static str,
    pub n: usize,
    pub d: usize,
    pub lambda: f64,
}

/// Sweep points: vary `n` (at `fixed_d`, `fixed_lambda`), vary `d` over the
/// plan's dimensions (at `fixed_n`, `fixed_lambda`), vary lambda (at
/// `fixed_n`, `fixed_d`). The two samples always have equal size.
pub fn variance_points(plan: &ExperimentPlan) -> Vec<VariancePoint> {
    let v = &plan.variance;
    let mut out = Vec::new();
    for &n in &v.sweep_n {
        out.push(VariancePoint {
            setting: "vary_n",
            n,
            d: v.fixed_d,
            lambda: v.fixed_lambda,
        });
    }
    for &d in &plan.d {
        out.push(VariancePoint {
            setting: "vary_d",
            n: v.fixed_n,
            d,
            lambda: v.fixed_lambda,
        });
    }
    for &lambda in &v.sweep_lambda {
        out.push(VariancePoint {
            setting: "vary_lambda",
            n: v.fixed_n,
            d: v.fixed_d,
            lambda,
        });
    }
    out
}

/// Both statistics on one null replicate. The reference sample serves as
/// the operator sample of both, and the bandwidth is the median heuristic
/// of the reference sample joined with `y`.
pub fn variance_replicate(
    plan: &ExperimentPlan,
    point: &VariancePoint,
    seed: u64,
) -> Result<(f64, f64)> {
    let null = DistributionSpec::null(plan.family, point.d)?;
    let x = null.sample_seeded(point.n, derive_seed(seed, &[0]))?;
    let y = null.sample_seeded(point.n, derive_seed(seed, &[1]))?;
    let d_ref = null.sample_seeded(plan.big_n, derive_seed(seed, &[2]))?;
    let kernel = Kernel::gaussian(median_heuristic(&d_ref.concat(&y)?)?)?;
    let filter = FilterSpec::with_floor(FilterFamily::Tikhonov, point.lambda, plan.eig_floor)?;
    Ok((
        statistic_direct(&x, &y, &d_ref, &kernel, &filter)?,
        hagrass_statistic(&x, &y, &d_ref, &kernel, &filter)?,
    ))
}

pub fn run_variance(plan: &ExperimentPlan) -> Result<Vec<VarianceRecord>> {
    if plan.study != Study::VarianceComparison {
        return Err(HarnessError::Config(format!(
            "the variance command needs study = \"variance_comparison\", got {:?}",
            plan.study.as_str()
        )));
    }
    plan.validate()?;
    let points = variance_points(plan);
    log::info!(
        "variance study: {} settings x {} reps",
        points.len(),
        plan.reps
    );
    let start = Instant::now();
    let mut records = Vec::with_capacity(points.len());
    for (p, point) in points.iter().enumerate() {
        let values: Vec<(f64, f64)> = (0..plan.reps)
            .into_par_iter()
            .map(|r| variance_replicate(plan, point, derive_seed(plan.seed, &[p as u64, r as u64])))
            .collect::<Result<_>>()?;
        let ours: Vec<f64> = values.iter().map(|v| v.0).collect();
        let theirs: Vec<f64> = values.iter().map(|v| v.1).collect();
        records.push(VarianceRecord {
            setting: point.setting.to_string(),
            n: point.n,
            m: point.n,
            d: point.d,
            lambda: point.lambda,
            ours_variance: gof_core::diagnostics::sample_variance(&ours),
            hagrass_variance: gof_core::diagnostics::sample_variance(&theirs),
            reps: plan.reps,
            seed: plan.seed,
        });
    }
    log::info!(
        "variance study done after {:.1} s",
        start.elapsed().as_secs_f64()
    );
    Ok(records)
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global
/// pool when `threads` is `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(HarnessError::Config("--threads must be at least 1".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| HarnessError::Internal(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
