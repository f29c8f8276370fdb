//! Experiment plans: parsing, defaults and validation.
//!
//! A plan file is TOML with `schema = 1`. Only `family` and `d` are
//! required; everything else is filled from per-study defaults by
//! [`PlanFile::resolve`], and the resolved [`ExperimentPlan`] serializes
//! back to a plan file that resolves to itself.

use gof_core::calibration::{doubling_grid, minimal_permutations};
use gof_core::{DistributionFamily, DistributionSpec, FilterFamily, KernelFamily};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    RegularizationEffect,
    MethodComparison,
    FilterGenerality,
    VarianceComparison,
}

impl Study {
    pub fn as_str(&self) -> &'static str {
        match self {
            Study::RegularizationEffect => "regularization_effect",
            Study::MethodComparison => "method_comparison",
            Study::FilterGenerality => "filter_generality",
            Study::VarianceComparison => "variance_comparison",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Fixed-lambda spectral test with permutation calibration.
    SpectralPerm,
    /// Fixed-lambda spectral test with the effective-dimension bound.
    SpectralEffdim,
    /// Spectral test aggregated over the lambda and bandwidth grids.
    SpectralAdaptive,
    /// Centered-covariance comparator aggregated the same way.
    HagrassAdaptive,
    MmdaggUniform,
    EnergyPerm,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::SpectralPerm => "spectral_perm",
            Method::SpectralEffdim => "spectral_effdim",
            Method::SpectralAdaptive => "spectral_adaptive",
            Method::HagrassAdaptive => "hagrass_adaptive",
            Method::MmdaggUniform => "mmdagg_uniform",
            Method::EnergyPerm => "energy_perm",
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, Method::SpectralAdaptive | Method::HagrassAdaptive)
    }

    pub fn uses_fixed_lambda(&self) -> bool {
        matches!(self, Method::SpectralPerm | Method::SpectralEffdim)
    }
}

/// `d = 10` or `d = [5, 10, 20]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dims {
    One(usize),
    Many(Vec<usize>),
}

impl Dims {
    fn into_vec(self) -> Vec<usize> {
        match self {
            Dims::One(d) => vec![d],
            Dims::Many(v) => v,
        }
    }
}

/// Lambda grid endpoints per filter.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaGridsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tikhonov: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landweber: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaGrids {
    pub tikhonov: [f64; 2],
    pub cutoff: [f64; 2],
    pub landweber: [f64; 2],
}

impl LambdaGrids {
    pub fn get(&self, filter: FilterFamily) -> [f64; 2] {
        match filter {
            FilterFamily::Tikhonov => self.tikhonov,
            FilterFamily::Cutoff => self.cutoff,
            FilterFamily::Landweber => self.landweber,
        }
    }

    pub fn grid(&self, filter: FilterFamily) -> Result<Vec<f64>> {
        let [lo, hi] = self.get(filter);
        Ok(doubling_grid(lo, hi)?)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmdAggFile {
    pub b1: Option<usize>,
    pub b2: Option<usize>,
    pub b3: Option<usize>,
    pub bonferroni: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmdAggPlan {
    pub b1: usize,
    pub b2: usize,
    pub b3: usize,
    pub bonferroni: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceFile {
    pub sweep_n: Option<Vec<usize>>,
    pub sweep_lambda: Option<Vec<f64>>,
    pub fixed_n: Option<usize>,
    pub fixed_d: Option<usize>,
    pub fixed_lambda: Option<f64>,
}

/// Sweeps of the variance study. The dimension sweep is the plan's `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariancePlan {
    pub sweep_n: Vec<usize>,
    pub sweep_lambda: Vec<f64>,
    pub fixed_n: usize,
    pub fixed_d: usize,
    pub fixed_lambda: f64,
}

/// A plan as written by the user; missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub schema: Option<u32>,
    pub study: Option<Study>,
    pub family: DistributionFamily,
    pub d: Dims,
    pub thetas: Option<Vec<f64>>,
    pub methods: Option<Vec<Method>>,
    pub filters: Option<Vec<FilterFamily>>,
    pub kernel: Option<KernelFamily>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    #[serde(rename = "N")]
    pub big_n: Option<usize>,
    pub alpha: Option<f64>,
    #[serde(rename = "B")]
    pub permutations: Option<usize>,
    /// Permutations for the adaptive methods; defaults to the smallest
    /// count that makes the Bonferroni-corrected quantile attainable.
    pub adaptive_permutations: Option<usize>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub lambdas: Option<Vec<f64>>,
    pub bandwidth_grid: Option<[f64; 2]>,
    pub eig_floor: Option<f64>,
    pub lambda_grid: Option<LambdaGridsFile>,
    pub mmdagg: Option<MmdAggFile>,
    pub variance: Option<VarianceFile>,
}

/// A fully resolved plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub schema: u32,
    pub study: Study,
    pub family: DistributionFamily,
    pub d: Vec<usize>,
    pub thetas: Vec<f64>,
    pub methods: Vec<Method>,
    pub filters: Vec<FilterFamily>,
    pub kernel: KernelFamily,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub permutations: usize,
    pub adaptive_permutations: usize,
    pub reps: usize,
    pub seed: u64,
    pub lambdas: Vec<f64>,
    pub bandwidth_grid: [f64; 2],
    pub eig_floor: f64,
    pub lambda_grid: LambdaGrids,
    pub mmdagg: MmdAggPlan,
    pub variance: VariancePlan,
}

fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(HarnessError::Config(msg.into()))
}

/// Evenly spaced values `start, start + step, ...` (count points), rounded
/// to remove accumulated binary noise.
fn ladder(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| ((start + step * k as f64) * 1e9).round() / 1e9)
        .collect()
}

pub fn default_thetas(family: DistributionFamily) -> Vec<f64> {
    match family {
        DistributionFamily::GaussianMean => ladder(0.0, 0.2, 7),
        DistributionFamily::GaussianVar => ladder(1.0, 0.05, 7),
        DistributionFamily::UniformScale => ladder(1.0, 0.02, 7),
        DistributionFamily::Vmf => ladder(0.0, 1.0, 7),
        DistributionFamily::SobolevDensity => ladder(0.0, 0.2, 6),
    }
}

impl PlanFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(format!("plan: {}", e.message())))
    }

    pub fn resolve(self) -> Result<ExperimentPlan> {
        let schema = self.schema.unwrap_or(SCHEMA_VERSION);
        if schema != SCHEMA_VERSION {
            return config(format!(
                "unsupported plan schema {schema}, this tool reads schema {SCHEMA_VERSION}"
            ));
        }
        let study = self.study.unwrap_or(match self.family {
            DistributionFamily::SobolevDensity => Study::RegularizationEffect,
            _ => Study::MethodComparison,
        });
        let (kernel, sizes, methods, filters) = match study {
            Study::RegularizationEffect => (
                KernelFamily::Sobolev,
                (500, 1000, 100),
                vec![Method::SpectralPerm],
                vec![FilterFamily::Tikhonov],
            ),
            Study::MethodComparison => (
                KernelFamily::Gaussian,
                (200, 400, 100),
                vec![
                    Method::SpectralAdaptive,
                    Method::HagrassAdaptive,
                    Method::MmdaggUniform,
                    Method::EnergyPerm,
                ],
                vec![FilterFamily::Tikhonov],
            ),
            Study::FilterGenerality => (
                KernelFamily::Gaussian,
                (200, 400, 100),
                vec![Method::SpectralAdaptive, Method::EnergyPerm],
                FilterFamily::ALL.to_vec(),
            ),
            Study::VarianceComparison => (
                KernelFamily::Gaussian,
                (200, 200, 200),
                Vec::new(),
                vec![FilterFamily::Tikhonov],
            ),
        };
        let thetas = match study {
            Study::VarianceComparison => vec![self.family.null_parameter()],
            _ => default_thetas(self.family),
        };
        let lambdas = match study {
            // Sobolev Gram entries in moderate d are tiny, so lambda lives
            // on the scale of the reference eigenvalues
            Study::RegularizationEffect => vec![1e-12, 1e-10, 1e-8, 1e-6],
            _ => vec![0.01],
        };
        let grids = self.lambda_grid.unwrap_or_default();
        let mm = self.mmdagg.unwrap_or_default();
        let var = self.variance.unwrap_or_default();
        let n = self.n.unwrap_or(sizes.0);

        let mut plan = ExperimentPlan {
            schema,
            study,
            family: self.family,
            d: self.d.into_vec(),
            thetas: self.thetas.unwrap_or(thetas),
            methods: self.methods.unwrap_or(methods),
            filters: self.filters.unwrap_or(filters),
            kernel: self.kernel.unwrap_or(kernel),
            n,
            m: self.m.unwrap_or(sizes.1),
            big_n: self.big_n.unwrap_or(sizes.2),
            alpha: self.alpha.unwrap_or(0.05),
            permutations: self.permutations.unwrap_or(400),
            adaptive_permutations: 0,
            reps: self.reps.unwrap_or(200),
            seed: self.seed.unwrap_or(0),
            lambdas: self.lambdas.unwrap_or(lambdas),
            bandwidth_grid: self.bandwidth_grid.unwrap_or([0.01, 100.0]),
            eig_floor: self.eig_floor.unwrap_or(gof_core::DEFAULT_EIG_FLOOR),
            lambda_grid: LambdaGrids {
                tikhonov: grids.tikhonov.unwrap_or([1e-6, 5.0]),
                cutoff: grids.cutoff.unwrap_or([1e-6, 1e-3]),
                landweber: grids.landweber.unwrap_or([1e-6, 1e-3]),
            },
            mmdagg: MmdAggPlan {
                b1: mm.b1.unwrap_or(500),
                b2: mm.b2.unwrap_or(500),
                b3: mm.b3.unwrap_or(100),
                bonferroni: mm.bonferroni.unwrap_or(false),
            },
            variance: VariancePlan {
                sweep_n: var.sweep_n.unwrap_or_else(|| vec![50, 100, 200, 400]),
                sweep_lambda: var
                    .sweep_lambda
                    .unwrap_or_else(|| vec![1e-3, 1e-2, 1e-1, 1.0]),
                fixed_n: var.fixed_n.unwrap_or(n),
                fixed_d: var.fixed_d.unwrap_or(10),
                fixed_lambda: var.fixed_lambda.unwrap_or(0.01),
            },
        };
        plan.validate_grids()?;
        let needed = plan.minimal_adaptive_permutations()?;
        plan.adaptive_permutations = match self.adaptive_permutations {
            Some(b) if b < needed => {
                return config(format!(
                    "adaptive_permutations = {b} is too small: the grids need at least {needed}"
                ))
            }
            Some(b) => b,
            None => needed,
        };
        plan.validate()?;
        Ok(plan)
    }
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        PlanFile::from_toml(text)?.resolve()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Internal(format!("plan: {e}")))
    }

    /// Number of bandwidths the adaptive methods aggregate over.
    pub fn bandwidth_count(&self) -> Result<usize> {
        Ok(match self.kernel {
            KernelFamily::Gaussian => {
                doubling_grid(self.bandwidth_grid[0], self.bandwidth_grid[1])?.len()
            }
            KernelFamily::Sobolev => 1,
        })
    }

    pub fn minimal_adaptive_permutations(&self) -> Result<usize> {
        if !self.methods.iter().any(Method::is_adaptive) {
            return Ok(self.permutations);
        }
        let h = self.bandwidth_count()?;
        let mut needed = 1;
        for &f in &self.filters {
            let pairs = self.lambda_grid.grid(f)?.len() * h;
            needed = needed.max(minimal_permutations(pairs, self.alpha));
        }
        Ok(needed)
    }

    fn validate_grids(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return config("alpha must lie in (0,1)");
        }
        let [lo, hi] = self.bandwidth_grid;
        doubling_grid(lo, hi).map_err(|_| {
            HarnessError::Config(format!(
                "bandwidth_grid needs 0 < lo <= hi, got [{lo}, {hi}]"
            ))
        })?;
        for f in FilterFamily::ALL {
            let [lo, hi] = self.lambda_grid.get(f);
            doubling_grid(lo, hi).map_err(|_| {
                HarnessError::Config(format!(
                    "lambda_grid.{f} needs 0 < lo <= hi, got [{lo}, {hi}]"
                ))
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_grids()?;
        if self.schema != SCHEMA_VERSION {
            return config(format!("unsupported plan schema {}", self.schema));
        }
        if self.reps == 0 {
            return config("reps must be at least 1");
        }
        if self.permutations == 0 {
            return config("B must be at least 1");
        }
        if self.n < 2 || self.m < 2 || self.big_n < 2 {
            return config("n, m and N must each be at least 2");
        }
        if self.d.is_empty() || self.d.contains(&0) {
            return config("d must list positive dimensions");
        }
        if self.thetas.is_empty() {
            return config("thetas must not be empty");
        }
        for &d in &self.d {
            for &theta in &self.thetas {
                DistributionSpec::new(self.family, d, theta)
                    .map_err(|e| HarnessError::Config(format!("theta = {theta}, d = {d}: {e}")))?;
            }
        }
        if !(self.eig_floor >= 0.0 && self.eig_floor < 1.0) {
            return config("eig_floor must lie in [0, 1)");
        }
        if self.kernel == KernelFamily::Sobolev {
            let in_cube = match self.family {
                DistributionFamily::SobolevDensity => true,
                DistributionFamily::UniformScale => self.thetas.iter().all(|&t| t <= 1.0),
                _ => false,
            };
            if !in_cube {
                return config(format!(
                    "the sobolev kernel needs data in [0,1]^d, which family {} does not provide",
                    self.family
                ));
            }
        }
        if self.filters.is_empty() {
            return config("filters must not be empty");
        }
        if self.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return config("lambdas must be positive");
        }
        if self.mmdagg.b1 == 0 || self.mmdagg.b2 == 0 {
            return config("mmdagg.b1 and mmdagg.b2 must be at least 1");
        }
        match self.study {
            Study::VarianceComparison => {
                if self.family != DistributionFamily::GaussianMean
                    || self.kernel != KernelFamily::Gaussian
                {
                    return config(
                        "variance_comparison runs on N(0, I_d) data with the gaussian kernel (family = \"gaussian_mean\")",
                    );
                }
                let v = &self.variance;
                if v.sweep_n.iter().chain([&v.fixed_n]).any(|&n| n < 2) {
                    return config("variance sample sizes must be at least 2");
                }
                if v.fixed_d == 0 {
                    return config("variance.fixed_d must be positive");
                }
                if v.sweep_lambda
                    .iter()
                    .chain([&v.fixed_lambda])
                    .any(|&l| !(l > 0.0))
                {
                    return config("variance lambdas must be positive");
                }
            }
            _ => {
                if self.methods.is_empty() {
                    return config("methods must not be empty");
                }
                if self.methods.iter().any(Method::uses_fixed_lambda) && self.lambdas.is_empty() {
                    return config("fixed-lambda methods need a nonempty lambdas list");
                }
                let needed = self.minimal_adaptive_permutations()?;
                if self.adaptive_permutations < needed {
                    return config(format!(
                        "adaptive_permutations = {} is too small: the grids need at least {needed}",
                        self.adaptive_permutations
                    ));
                }
            }
        }
        Ok(())
    }

    /// Reduced CI scale: 50 replicates and every other theta (the last
    /// grid point is always kept).
    pub fn quick(mut self) -> Self {
        self.reps = self.reps.min(50);
        if self.thetas.len() > 2 {
            let last = *self.thetas.last().expect("nonempty");
            let mut t: Vec<f64> = self.thetas.iter().copied().step_by(2).collect();
            if *t.last().expect("nonempty") != last {
                t.push(last);
            }
            self.thetas = t;
        }
        self
    }

    /// Rough operation count `reps x |grid| x |arms| x B x (n + m)^2`.
    pub fn work_estimate(&self) -> f64 {
        let arms = self.methods.len().max(1) * self.filters.len().max(1);
        self.reps as f64
            * (self.thetas.len() * self.d.len()) as f64
            * arms as f64
            * self.permutations.max(self.adaptive_permutations) as f64
            * ((self.n + self.m) as f64).powi(2)
    }
}
