//! Positive-definite kernels, Gram assembly and bandwidth selection.
//!
//! Both kernels are bounded by one on the diagonal over their domains, so
//! `kappa = sup_x sqrt(K(x, x)) = 1` for every configuration used here.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GofError, Result};
use crate::sample::{check_same_dim, squared_distance, Sample};

/// Slack allowed on the unit-cube boundary for Sobolev inputs.
pub const SOBOLEV_BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    Sobolev,
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Sobolev => "sobolev",
        })
    }
}

/// A kernel with its parameters resolved.
///
/// `Gaussian` is `exp(-|x - y|^2 / (2h))` with `h` on the squared-distance
/// scale; `Sobolev` is `prod_j min(x_j, y_j)` on `[0, 1]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Gaussian { bandwidth: f64 },
    Sobolev,
}

impl Kernel {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(Kernel::Gaussian { bandwidth })
    }

    pub fn family(&self) -> KernelFamily {
        match self {
            Kernel::Gaussian { .. } => KernelFamily::Gaussian,
            Kernel::Sobolev => KernelFamily::Sobolev,
        }
    }

    pub fn bandwidth(&self) -> Option<f64> {
        match self {
            Kernel::Gaussian { bandwidth } => Some(*bandwidth),
            Kernel::Sobolev => None,
        }
    }

    pub fn kappa(&self) -> f64 {
        1.0
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match *self {
            Kernel::Gaussian { bandwidth } => eval_gaussian(x, y, bandwidth),
            Kernel::Sobolev => eval_sobolev(x, y),
        }
    }

    /// Checks that every point of `sample` lies in the kernel's domain.
    pub fn validate(&self, sample: &Sample) -> Result<()> {
        match self {
            Kernel::Gaussian { bandwidth } => check_bandwidth(*bandwidth),
            Kernel::Sobolev => sample
                .as_slice()
                .iter()
                .try_for_each(|&v| check_unit_interval(v)),
        }
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Gaussian { bandwidth } => (-squared_distance(x, y) / (2.0 * bandwidth)).exp(),
            Kernel::Sobolev => x
                .iter()
                .zip(y)
                .map(|(a, b)| a.min(*b).clamp(0.0, 1.0))
                .product(),
        }
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(GofError::Parameter(format!(
            "gaussian bandwidth must be positive and finite, got {h}"
        )))
    }
}

fn check_unit_interval(v: f64) -> Result<()> {
    if (-SOBOLEV_BOUNDARY_TOL..=1.0 + SOBOLEV_BOUNDARY_TOL).contains(&v) {
        Ok(())
    } else {
        Err(GofError::Input(format!(
            "sobolev kernel input {v} lies outside [0, 1]"
        )))
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(GofError::Input(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

pub fn eval_gaussian(x: &[f64], y: &[f64], bandwidth: f64) -> Result<f64> {
    check_pair(x, y)?;
    check_bandwidth(bandwidth)?;
    Ok((-squared_distance(x, y) / (2.0 * bandwidth)).exp())
}

pub fn eval_sobolev(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    x.iter()
        .chain(y)
        .try_for_each(|&v| check_unit_interval(v))?;
    Ok(Kernel::Sobolev.eval_unchecked(x, y))
}

/// Dense matrix of `K(rows_i, cols_j)`.
///
/// Entries are computed independently, so the result does not depend on
/// how many threads assemble it.
pub fn gram(kernel: &Kernel, rows: &Sample, cols: &Sample) -> Result<DMatrix<f64>> {
    if rows.is_empty() || cols.is_empty() {
        return Err(GofError::Input("gram matrix of an empty sample".into()));
    }
    check_same_dim(rows, cols)?;
    kernel.validate(rows)?;
    kernel.validate(cols)?;
    let n = rows.len();
    let mut out = DMatrix::<f64>::zeros(n, cols.len());
    out.as_mut_slice()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(j, column)| {
            let c = cols.row(j);
            for (i, v) in column.iter_mut().enumerate() {
                *v = kernel.eval_unchecked(rows.row(i), c);
            }
        });
    Ok(out)
}

/// Median of squared Euclidean distances over all unordered pairs of rows.
///
/// With an even number of pairs the two central order statistics are
/// averaged. A zero median is not a usable bandwidth and is reported as a
/// degenerate pool.
pub fn median_heuristic(pool: &Sample) -> Result<f64> {
    if pool.len() < 2 {
        return Err(GofError::SampleSize {
            what: "median heuristic pool",
            got: pool.len(),
            needed: 2,
        });
    }
    let n = pool.len();
    let mut d2 = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let a = pool.row(i);
        for j in (i + 1)..n {
            d2.push(squared_distance(a, pool.row(j)));
        }
    }
    d2.sort_unstable_by(f64::total_cmp);
    let k = d2.len();
    let median = if k % 2 == 1 {
        d2[k / 2]
    } else {
        0.5 * (d2[k / 2 - 1] + d2[k / 2])
    };
    if median > 0.0 {
        Ok(median)
    } else {
        Err(GofError::DegeneratePool)
    }
}

/// Closed-form mean embedding of `N(0, I_d)` under the Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianNullEmbedding {
    bandwidth: f64,
    dim: usize,
}

impl GaussianNullEmbedding {
    pub fn new(bandwidth: f64, dim: usize) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        if dim == 0 {
            return Err(GofError::Parameter("dimension must be positive".into()));
        }
        Ok(Self { bandwidth, dim })
    }

    /// `mu_0(x) = (h/(h+1))^{d/2} exp(-|x|^2 / (2(h+1)))`.
    pub fn at(&self, x: &[f64]) -> f64 {
        let h = self.bandwidth;
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        (h / (h + 1.0)).powf(self.dim as f64 / 2.0) * (-norm2 / (2.0 * (h + 1.0))).exp()
    }

    /// `|mu_0|_K^2 = (h/(h+2))^{d/2}`.
    pub fn norm_sq(&self) -> f64 {
        let h = self.bandwidth;
        (h / (h + 2.0)).powf(self.dim as f64 / 2.0)
    }
}

/// Convenience wrapper returning `(mu_0(x), |mu_0|^2)`.
pub fn gaussian_null_embedding(bandwidth: f64, x: &[f64]) -> Result<(f64, f64)> {
    let e = GaussianNullEmbedding::new(bandwidth, x.len())?;
    Ok((e.at(x), e.norm_sq()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn gaussian_examples() {
        assert_eq!(eval_gaussian(&[0.0, 0.0], &[0.0, 0.0], 1.0).unwrap(), 1.0);
        let v = eval_gaussian(&[0.0], &[2.0], 2.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
        let v = eval_gaussian(&[1.0, 1.0], &[0.0, 0.0], 1.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_errors() {
        assert!(matches!(
            eval_gaussian(&[0.0], &[0.0, 1.0], 1.0),
            Err(GofError::Input(_))
        ));
        assert!(matches!(
            eval_gaussian(&[0.0], &[1.0], 0.0),
            Err(GofError::Parameter(_))
        ));
        assert!(matches!(
            eval_gaussian(&[0.0], &[1.0], -2.0),
            Err(GofError::Parameter(_))
        ));
    }

    #[test]
    fn sobolev_examples() {
        assert_eq!(eval_sobolev(&[0.5], &[0.75]).unwrap(), 0.5);
        assert!((eval_sobolev(&[0.2, 0.9], &[0.4, 0.3]).unwrap() - 0.06).abs() < 1e-15);
        assert_eq!(eval_sobolev(&[0.0, 0.0], &[0.3, 0.9]).unwrap(), 0.0);
        assert!(eval_sobolev(&[1.2], &[0.5]).is_err());
        assert!(eval_sobolev(&[-0.1], &[0.5]).is_err());
        // floating-point drift at the boundary is tolerated
        assert!(eval_sobolev(&[1.0 + 1e-13], &[0.5]).is_ok());
    }

    #[test]
    fn gram_examples() {
        let k = Kernel::gaussian(1.0).unwrap();
        let a = Sample::from_scalars(&[0.0]).unwrap();
        assert_eq!(gram(&k, &a, &a).unwrap()[(0, 0)], 1.0);

        let rows = Sample::from_scalars(&[0.0, 1.0]).unwrap();
        let g = gram(&k, &rows, &a).unwrap();
        assert_eq!(g.shape(), (2, 1));
        assert_eq!(g[(0, 0)], 1.0);
        assert!((g[(1, 0)] - (-0.5f64).exp()).abs() < 1e-15);

        let s = Sample::from_scalars(&[0.5, 1.0]).unwrap();
        let g = gram(&Kernel::Sobolev, &s, &s).unwrap();
        assert_eq!(g.as_slice(), &[0.5, 0.5, 0.5, 1.0]);
    }

    #[test]
    fn gram_dimension_mismatch() {
        let k = Kernel::gaussian(1.0).unwrap();
        let a = Sample::from_scalars(&[0.0]).unwrap();
        let b = Sample::from_rows(&[[0.0, 1.0]]).unwrap();
        assert!(matches!(gram(&k, &a, &b), Err(GofError::Input(_))));
    }

    #[test]
    fn median_examples() {
        let p = Sample::from_scalars(&[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(median_heuristic(&p).unwrap(), 1.0);
        let p = Sample::from_scalars(&[0.0, 1.0]).unwrap();
        assert_eq!(median_heuristic(&p).unwrap(), 1.0);
        let p = Sample::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(median_heuristic(&p).unwrap(), 25.0);
        // four points, six pairs: {1,4,9,1,4,1} -> sorted 1,1,1,4,4,9 -> (1+4)/2
        let p = Sample::from_scalars(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(median_heuristic(&p).unwrap(), 2.5);
    }

    #[test]
    fn median_degenerate_pool() {
        let p = Sample::from_scalars(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(median_heuristic(&p), Err(GofError::DegeneratePool));
    }

    #[test]
    fn null_embedding_closed_forms() {
        let (mu, _) = gaussian_null_embedding(1.0, &[0.0]).unwrap();
        assert!((mu - 0.5f64.sqrt()).abs() < 1e-15);
        let (_, norm) = gaussian_null_embedding(2.0, &[0.0, 0.0]).unwrap();
        assert!((norm - 0.5).abs() < 1e-15);
        let (mu, norm) = gaussian_null_embedding(1e12, &[0.0]).unwrap();
        assert!((mu - 1.0).abs() < 1e-9 && (norm - 1.0).abs() < 1e-9);
    }

    /// Monte Carlo check: average K(x, Y) and K(Y, Y') over Y, Y' ~ N(0, I_d).
    #[test]
    fn null_embedding_matches_monte_carlo() {
        let draws = 1_000_000;
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for &(h, x) in &[(1.0, [0.0, 0.0]), (2.0, [0.7, -0.3]), (0.5, [1.5, 0.2])] {
            let emb = GaussianNullEmbedding::new(h, 2).unwrap();
            let (mut s1, mut s1sq, mut s2, mut s2sq) = (0.0, 0.0, 0.0, 0.0);
            for _ in 0..draws {
                let y: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
                let y2: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
                let a = eval_gaussian(&x, &y, h).unwrap();
                let b = eval_gaussian(&y, &y2, h).unwrap();
                s1 += a;
                s1sq += a * a;
                s2 += b;
                s2sq += b * b;
            }
            let n = draws as f64;
            let (m1, m2) = (s1 / n, s2 / n);
            let se1 = ((s1sq / n - m1 * m1) / n).sqrt();
            let se2 = ((s2sq / n - m2 * m2) / n).sqrt();
            assert!((m1 - emb.at(&x)).abs() <= 3.0 * se1, "mu0 at h={h}");
            assert!((m2 - emb.norm_sq()).abs() <= 3.0 * se2, "norm at h={h}");
        }
    }

    fn random_sample(rng: &mut ChaCha20Rng, n: usize, d: usize, unit: bool) -> Sample {
        let data = (0..n * d)
            .map(|_| {
                if unit {
                    rng.random::<f64>()
                } else {
                    rng.sample::<f64, _>(StandardNormal)
                }
            })
            .collect();
        Sample::new(data, d).unwrap()
    }

    #[test]
    fn gram_symmetry_and_psd() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for trial in 0..50 {
            let n = 2 + trial % 9;
            let d = 1 + trial % 4;
            for kernel in [
                Kernel::gaussian(0.3 + trial as f64 * 0.1).unwrap(),
                Kernel::Sobolev,
            ] {
                let a = random_sample(&mut rng, n, d, true);
                let b = random_sample(&mut rng, n + 1, d, true);
                let ab = gram(&kernel, &a, &b).unwrap();
                let ba = gram(&kernel, &b, &a).unwrap();
                assert_eq!(ab, ba.transpose());

                let aa = gram(&kernel, &a, &a).unwrap();
                assert_eq!(aa, aa.transpose());
                for i in 0..n {
                    let expect = match kernel {
                        Kernel::Gaussian { .. } => 1.0,
                        Kernel::Sobolev => a.row(i).iter().product(),
                    };
                    assert_eq!(aa[(i, i)], expect);
                }
                let eig = SymmetricEigen::new(aa).eigenvalues;
                let max = eig.max();
                assert!(eig.min() >= -1e-10 * max);
            }
        }
    }

    proptest! {
        #[test]
        fn median_is_permutation_invariant(
            values in proptest::collection::vec(-5.0f64..5.0, 3..30),
            rot in 0usize..30,
        ) {
            let mut shuffled = values.clone();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a = median_heuristic(&Sample::from_scalars(&values).unwrap());
            let b = median_heuristic(&Sample::from_scalars(&shuffled).unwrap());
            prop_assert_eq!(a, b);
        }

        #[test]
        fn kernels_are_symmetric(
            x in proptest::collection::vec(0.0f64..1.0, 3),
            y in proptest::collection::vec(0.0f64..1.0, 3),
            h in 0.01f64..10.0,
        ) {
            prop_assert_eq!(eval_gaussian(&x, &y, h).unwrap(), eval_gaussian(&y, &x, h).unwrap());
            prop_assert_eq!(eval_sobolev(&x, &y).unwrap(), eval_sobolev(&y, &x).unwrap());
        }
    }
}
