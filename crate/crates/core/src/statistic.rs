//! Test statistics: the spectral-regularized statistic, its centered
//! covariance comparator, the closed-form MMD goodness-of-fit estimator and
//! the energy distance.

use nalgebra::DMatrix;

use crate::error::{ensure_min_size, Result};
use crate::filters::FilterSpec;
use crate::kernels::{gram, Kernel};
use crate::sample::{check_same_dim, Sample};
use crate::spectral::{check_sizes, BasisKind, EigenSystem, PooledKernelProduct, SpectralBasis};

/// The spectral-regularized statistic from the reference eigensystem.
///
/// With `G = V diag(w) V^T` and `A = K_nN V`, the within-sample terms are
/// `1^T K_nN G K_nN^T 1 = sum_k w_k (sum_i A_ik)^2` and
/// `Tr(K_nN G K_nN^T) = sum_k w_k sum_i A_ik^2`; the cross term is
/// `sum_k w_k (sum_i A_ik)(sum_j B_jk)` with `B = K_mN V`. Keeping `G`
/// factored avoids forming it explicitly, which matters when the filter
/// weights of small eigenvalues are large.
pub fn statistic_direct(
    x: &Sample,
    y: &Sample,
    d_ref: &Sample,
    kernel: &Kernel,
    filter: &FilterSpec,
) -> Result<f64> {
    check_sizes(x, y, d_ref)?;
    let eig = EigenSystem::from_gram(&gram(kernel, d_ref, d_ref)?)?;
    let w = filter.g_matrix_diagonal(eig.eigenvalues())?;
    let a = gram(kernel, x, d_ref)? * eig.eigenvectors();
    let b = gram(kernel, y, d_ref)? * eig.eigenvectors();
    let big_n = d_ref.len() as f64;
    let (n, m) = (x.len() as f64, y.len() as f64);

    let (mut within_x, mut within_y, mut cross) = (0.0, 0.0, 0.0);
    for (k, &wk) in w.iter().enumerate() {
        if wk == 0.0 {
            continue;
        }
        let (sa, qa) = sum_and_squares(a.column(k).iter());
        let (sb, qb) = sum_and_squares(b.column(k).iter());
        within_x += wk * (sa * sa - qa);
        within_y += wk * (sb * sb - qb);
        cross += wk * sa * sb;
    }
    Ok(
        within_x / (n * (n - 1.0) * big_n) + within_y / (m * (m - 1.0) * big_n)
            - 2.0 * cross / (n * m * big_n),
    )
}

fn sum_and_squares<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    values.fold((0.0, 0.0), |(s, q), &v| (s + v, q + v * v))
}

/// The same statistic assembled literally from an explicit `G` matrix.
pub fn statistic_explicit_g(
    x: &Sample,
    y: &Sample,
    d_ref: &Sample,
    kernel: &Kernel,
    filter: &FilterSpec,
) -> Result<f64> {
    check_sizes(x, y, d_ref)?;
    let eig = EigenSystem::from_gram(&gram(kernel, d_ref, d_ref)?)?;
    let g = eig.g_matrix(filter)?;
    let k_x = gram(kernel, x, d_ref)?;
    let k_y = gram(kernel, y, d_ref)?;
    let big_n = d_ref.len() as f64;
    let (n, m) = (x.len() as f64, y.len() as f64);
    let a = column_sums(&k_x);
    let b = column_sums(&k_y);
    let ga = &g * &a;
    let gb = &g * &b;
    let trace_x = (&k_x * &g).component_mul(&k_x).sum();
    let trace_y = (&k_y * &g).component_mul(&k_y).sum();
    Ok((a.dot(&ga) - trace_x) / (n * (n - 1.0) * big_n)
        + (b.dot(&gb) - trace_y) / (m * (m - 1.0) * big_n)
        - 2.0 * a.dot(&gb) / (n * m * big_n))
}

fn column_sums(k: &DMatrix<f64>) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_iterator(k.ncols(), k.column_iter().map(|c| c.sum()))
}

/// Builds `H = (1/N) K_uN G K_uN^T` for the pooled sample `x ∪ y`.
pub fn build_pooled_product(
    x: &Sample,
    y: &Sample,
    d_ref: &Sample,
    kernel: &Kernel,
    filter: &FilterSpec,
) -> Result<PooledKernelProduct> {
    SpectralBasis::new(x, y, d_ref, kernel, BasisKind::Integral, filter.eig_floor)?.product(filter)
}

/// The statistic of a relabelled pool: `perm[..n]` indexes the x-block.
pub fn statistic_from_product(product: &PooledKernelProduct, perm: &[u32]) -> Result<f64> {
    product.statistic(perm)
}

/// Comparator statistic built on the centered covariance operator of an
/// independent operator-estimation sample `d_op`.
///
/// The double sum over `(i != i', j != j')` of
/// `<g(S)^{1/2}(K_xi - K_yj), g(S)^{1/2}(K_xi' - K_yj')>` is evaluated with
/// the finite-rank expansion of `g(S)` over the eigenpairs of `C K C / N'`.
pub fn hagrass_statistic(
    x: &Sample,
    y: &Sample,
    d_op: &Sample,
    kernel: &Kernel,
    filter: &FilterSpec,
) -> Result<f64> {
    SpectralBasis::new(
        x,
        y,
        d_op,
        kernel,
        BasisKind::CenteredCovariance,
        filter.eig_floor,
    )?
    .statistic(filter)
}

/// Unbiased estimator of `MMD^2(P, P0)` when the mean embedding of `P0` is
/// known in closed form.
pub fn mmd_gof_unbiased<F>(x: &Sample, mu0_at: F, mu0_norm_sq: f64, kernel: &Kernel) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    ensure_min_size("x sample", x.len(), 2)?;
    let k = gram(kernel, x, x)?;
    let n = x.len() as f64;
    let off_diag = k.sum() - k.trace();
    let embed: f64 = x.rows().map(&mu0_at).sum();
    Ok(off_diag / (n * (n - 1.0)) - 2.0 * embed / n + mu0_norm_sq)
}

/// Energy distance in V-statistic form.
pub fn energy_statistic(x: &Sample, y: &Sample) -> Result<f64> {
    ensure_min_size("x sample", x.len(), 1)?;
    ensure_min_size("y sample", y.len(), 1)?;
    check_same_dim(x, y)?;
    let pooled = x.concat(y)?;
    let dist = distance_matrix(&pooled);
    let order: Vec<u32> = (0..pooled.len() as u32).collect();
    Ok(dist.energy(&order, x.len()))
}

/// Pairwise Euclidean distances of a pooled sample, for permutation loops
/// over the energy statistic.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    inner: crate::spectral::PooledMatrix,
}

pub fn distance_matrix(pooled: &Sample) -> DistanceMatrix {
    let u = pooled.len();
    let mut data = vec![0.0; u * u];
    for i in 0..u {
        for j in (i + 1)..u {
            let d = crate::sample::squared_distance(pooled.row(i), pooled.row(j)).sqrt();
            data[i * u + j] = d;
            data[j * u + i] = d;
        }
    }
    DistanceMatrix {
        inner: crate::spectral::PooledMatrix::new(data, u),
    }
}

impl DistanceMatrix {
    pub fn size(&self) -> usize {
        self.inner.size()
    }

    /// Energy distance of the split where `order[..n]` is the x-block.
    pub fn energy(&self, order: &[u32], n: usize) -> f64 {
        let s = self.inner.block_sums(order, n);
        let nf = n as f64;
        let mf = (self.inner.size() - n) as f64;
        2.0 * s.xy / (nf * mf) - s.xx / (nf * nf) - s.yy / (mf * mf)
    }
}
