//! Spectral-regularized kernel goodness-of-fit tests.
//!
//! Given a sample `x` from an unknown `P`, a sample `y` from the null model
//! `P0` and an independent reference sample `D` from `P0`, the statistic
//! compares kernel mean embeddings after whitening by a spectral filter of
//! the empirical integral operator built on `D`. Tests are calibrated either
//! by an effective-dimension bound or by permutations of the pooled `x ∪ y`.

pub mod calibration;
pub mod diagnostics;
pub mod error;
pub mod filters;
pub mod kernels;
pub mod mmdagg;
pub mod outcome;
pub mod rng;
pub mod sample;
pub mod samplers;
pub mod spectral;
pub mod statistic;

pub use calibration::{
    adaptive_test, aggregate_adaptive, doubling_grid, effdim_critical_value,
    empirical_effective_dimension, energy_permutation_test, minimal_permutations,
    permutation_p_value, permutation_quantile, prepare_kernel_tables, test_effdim,
    test_permutation, AdaptiveConfig, AdaptiveReport, KernelTable, PairResult,
    PermutationCalibration,
};
pub use error::{GofError, Result};
pub use filters::{FilterFamily, FilterSpec, DEFAULT_EIG_FLOOR};
pub use kernels::{gram, median_heuristic, Kernel, KernelFamily};
pub use mmdagg::{mmdagg_uniform, MmdAggConfig};
pub use outcome::{Calibration, Decision, GofOutcome, Nuisance};
pub use sample::Sample;
pub use samplers::{DistributionFamily, DistributionSpec};
pub use spectral::{BasisKind, ContrastTable, EigenSystem, PooledKernelProduct, SpectralBasis};
pub use statistic::{
    build_pooled_product, energy_statistic, hagrass_statistic, mmd_gof_unbiased, statistic_direct,
    statistic_explicit_g, statistic_from_product,
};
