//! Eigensystems of reference Gram matrices and the pooled spectral features
//! that make permutation recomputation cheap.
//!
//! For a pooled sample `u = x ∪ y` and reference sample `D` of size `N`,
//! let `(l_k, a_k)` be the eigenpairs of `K_NN / N`. The feature matrix
//! `F[i, k] = (K_uN a_k)_i / sqrt(N)` satisfies
//! `H = (1/N) K_uN G K_uN^T = F diag(w) F^T` with `w_k = g(l_k) / l_k`.
//! Every statistic in this crate is a weighted sum over `k` of per-eigenpair
//! contrasts that only depend on which rows of `F` belong to the x-block.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_min_size, GofError, Result};
use crate::filters::FilterSpec;
use crate::kernels::{gram, Kernel};
use crate::sample::{check_same_dim, Sample};

const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenpairs of `K / N`, eigenvalues descending and clamped at zero.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl EigenSystem {
    /// Eigendecomposition of `K_NN / N` for a symmetric Gram matrix.
    pub fn from_gram(k: &DMatrix<f64>) -> Result<Self> {
        let n = k.nrows();
        if k.ncols() != n {
            return Err(GofError::Input(format!(
                "reference Gram matrix must be square, got {}x{}",
                n,
                k.ncols()
            )));
        }
        ensure_min_size("reference sample", n, 2)?;
        let scale = k.amax().max(1.0);
        let asym = (k - k.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(GofError::Input(format!(
                "reference Gram matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let sym = (k + k.transpose()) * (0.5 / n as f64);
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors stored as columns.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn source_size(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `N_D(lambda) = sum_i l_i / (l_i + lambda)`, equal to
    /// `Tr[(K + lambda N I)^{-1} K]`.
    pub fn effective_dimension(&self, lambda: f64) -> Result<f64> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(GofError::Parameter(format!(
                "regularization parameter must be positive, got {lambda}"
            )));
        }
        Ok(self.eigenvalues.iter().map(|&l| l / (l + lambda)).sum())
    }

    /// `G = V diag(g(l)/l) V^T`.
    pub fn g_matrix(&self, filter: &FilterSpec) -> Result<DMatrix<f64>> {
        let w = filter.g_matrix_diagonal(&self.eigenvalues)?;
        let v = &self.eigenvectors;
        let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, c)] * w[c]);
        Ok(scaled * v.transpose())
    }
}

/// Which operator the spectral expansion is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// Empirical integral operator: eigenpairs of `K_NN / N`.
    Integral,
    /// Empirical centered covariance operator: eigenpairs of
    /// `C K_NN C / N` with `C = I - 11^T/N`.
    CenteredCovariance,
}

/// Eigen-features of a pooled sample against a fixed reference sample.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    kind: BasisKind,
    n: usize,
    m: usize,
    /// All eigenvalues, descending.
    eigenvalues: Vec<f64>,
    /// Leading eigenpairs above the floor; `features` has this many columns.
    rank: usize,
    /// Row-major `(n + m) x rank`.
    features: Vec<f64>,
    feature_totals: Vec<f64>,
    feature_sq_totals: Vec<f64>,
}

impl SpectralBasis {
    /// Builds the basis for pooled `x ∪ y` against reference `d_ref`.
    pub fn new(
        x: &Sample,
        y: &Sample,
        d_ref: &Sample,
        kernel: &Kernel,
        kind: BasisKind,
        eig_floor: f64,
    ) -> Result<Self> {
        check_sizes(x, y, d_ref)?;
        let pooled = x.concat(y)?;
        let k_ref = gram(kernel, d_ref, d_ref)?;
        let k_cross = gram(kernel, &pooled, d_ref)?;
        Self::from_grams(&k_ref, &k_cross, x.len(), kind, eig_floor)
    }

    /// Builds the basis from precomputed `K_NN` and `K_uN` where the first
    /// `n` rows of `k_cross` are the x-sample.
    pub fn from_grams(
        k_ref: &DMatrix<f64>,
        k_cross: &DMatrix<f64>,
        n: usize,
        kind: BasisKind,
        eig_floor: f64,
    ) -> Result<Self> {
        let big_n = k_ref.nrows();
        if k_cross.ncols() != big_n {
            return Err(GofError::Input(format!(
                "cross Gram has {} columns, reference has {big_n} points",
                k_cross.ncols()
            )));
        }
        let total = k_cross.nrows();
        if n > total {
            return Err(GofError::Input("x-block larger than pooled sample".into()));
        }
        let m = total - n;
        ensure_min_size("x sample", n, 2)?;
        ensure_min_size("y sample", m, 2)?;

        let (eig, cross) = match kind {
            BasisKind::Integral => (EigenSystem::from_gram(k_ref)?, k_cross.clone()),
            BasisKind::CenteredCovariance => {
                let centered_ref = double_center(k_ref);
                let mut cross = k_cross.clone();
                for mut row in cross.row_iter_mut() {
                    let mean = row.mean();
                    row.add_scalar_mut(-mean);
                }
                (EigenSystem::from_gram(&centered_ref)?, cross)
            }
        };

        let max = eig.eigenvalues.first().copied().unwrap_or(0.0);
        if max <= 0.0 {
            return Err(GofError::DegenerateSpectrum);
        }
        let rank = eig
            .eigenvalues
            .iter()
            .take_while(|&&l| l > eig_floor * max)
            .count();
        let kept = eig.eigenvectors.columns(0, rank);
        let projected = (&cross * kept) / (big_n as f64).sqrt();

        let mut features = Vec::with_capacity(total * rank);
        for i in 0..total {
            features.extend(projected.row(i).iter());
        }
        let mut feature_totals = vec![0.0; rank];
        let mut feature_sq_totals = vec![0.0; rank];
        for row in features.chunks_exact(rank.max(1)).take(total) {
            for k in 0..rank {
                feature_totals[k] += row[k];
                feature_sq_totals[k] += row[k] * row[k];
            }
        }
        Ok(Self {
            kind,
            n,
            m,
            eigenvalues: eig.eigenvalues,
            rank,
            features,
            feature_totals,
            feature_sq_totals,
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn pooled_size(&self) -> usize {
        self.n + self.m
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Filter weights `g(l_k)/l_k` for the retained eigenpairs.
    pub fn weights(&self, filter: &FilterSpec) -> Result<Vec<f64>> {
        let mut w = filter.g_matrix_diagonal(&self.eigenvalues)?;
        w.truncate(self.rank);
        Ok(w)
    }

    /// Per-eigenpair contrasts for the split where `order[..n]` is the
    /// x-block and `order[n..]` the y-block.
    ///
    /// With `s`, `q` the sums of features and squared features over a block,
    /// `t_k = (s_x^2 - q_x)/(n(n-1)) + (s_y^2 - q_y)/(m(m-1)) - 2 s_x s_y/(nm)`.
    pub fn contrasts_into(&self, order: &[u32], out: &mut [f64]) {
        let r = self.rank;
        let (n, m) = (self.n, self.m);
        let (small, small_is_x) = if n <= m {
            (&order[..n], true)
        } else {
            (&order[n..], false)
        };
        let mut s = vec![0.0; r];
        let mut q = vec![0.0; r];
        for &i in small {
            let row = &self.features[i as usize * r..(i as usize + 1) * r];
            for k in 0..r {
                s[k] += row[k];
                q[k] += row[k] * row[k];
            }
        }
        let nf = n as f64;
        let mf = m as f64;
        let cx = 1.0 / (nf * (nf - 1.0));
        let cy = 1.0 / (mf * (mf - 1.0));
        let cxy = 2.0 / (nf * mf);
        for k in 0..r {
            let (sx, qx, sy, qy) = if small_is_x {
                (
                    s[k],
                    q[k],
                    self.feature_totals[k] - s[k],
                    self.feature_sq_totals[k] - q[k],
                )
            } else {
                (
                    self.feature_totals[k] - s[k],
                    self.feature_sq_totals[k] - q[k],
                    s[k],
                    q[k],
                )
            };
            out[k] = (sx * sx - qx) * cx + (sy * sy - qy) * cy - sx * sy * cxy;
        }
    }

    pub fn contrasts(&self, order: &[u32]) -> Vec<f64> {
        let mut out = vec![0.0; self.rank];
        self.contrasts_into(order, &mut out);
        out
    }

    /// Contrasts of the unpermuted split.
    pub fn identity_contrasts(&self) -> Vec<f64> {
        let order: Vec<u32> = (0..self.pooled_size() as u32).collect();
        self.contrasts(&order)
    }

    /// The statistic of the unpermuted split under `filter`.
    pub fn statistic(&self, filter: &FilterSpec) -> Result<f64> {
        let w = self.weights(filter)?;
        Ok(dot(&w, &self.identity_contrasts()))
    }

    /// Materializes `H = F diag(w) F^T`.
    pub fn product(&self, filter: &FilterSpec) -> Result<PooledKernelProduct> {
        let w = self.weights(filter)?;
        let u = self.pooled_size();
        let r = self.rank;
        let mut h = vec![0.0; u * u];
        for i in 0..u {
            let fi = &self.features[i * r..(i + 1) * r];
            for j in i..u {
                let fj = &self.features[j * r..(j + 1) * r];
                let v: f64 = (0..r).map(|k| w[k] * fi[k] * fj[k]).sum();
                h[i * u + j] = v;
                h[j * u + i] = v;
            }
        }
        Ok(PooledKernelProduct {
            matrix: PooledMatrix::new(h, u),
            n: self.n,
            m: self.m,
            filter: *filter,
            kind: self.kind,
        })
    }
}

fn double_center(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).mean()).collect();
    let col_means: Vec<f64> = (0..n).map(|j| k.column(j).mean()).collect();
    let grand = k.mean();
    DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - col_means[j] + grand)
}

pub(crate) fn check_sizes(x: &Sample, y: &Sample, d_ref: &Sample) -> Result<()> {
    ensure_min_size("x sample", x.len(), 2)?;
    ensure_min_size("y sample", y.len(), 2)?;
    ensure_min_size("reference sample", d_ref.len(), 2)?;
    check_same_dim(x, y)?;
    check_same_dim(x, d_ref)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Statistics of every permutation, one contrast row per split.
///
/// Row 0 is the unpermuted split; rows `1..=B` follow the permutations.
#[derive(Debug, Clone)]
pub struct ContrastTable {
    rank: usize,
    rows: Vec<f64>,
}

impl ContrastTable {
    pub fn build(basis: &SpectralBasis, permutations: &[Vec<u32>]) -> Self {
        let r = basis.rank();
        let mut rows = vec![0.0; (permutations.len() + 1) * r];
        if r > 0 {
            let identity: Vec<u32> = (0..basis.pooled_size() as u32).collect();
            rows.par_chunks_mut(r).enumerate().for_each(|(b, out)| {
                let order = if b == 0 {
                    &identity
                } else {
                    &permutations[b - 1]
                };
                basis.contrasts_into(order, out);
            });
        }
        Self { rank: r, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len().checked_div(self.rank).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `stats[b] = <w, t_b>` for each split.
    pub fn statistics(&self, weights: &[f64]) -> Vec<f64> {
        if self.rank == 0 {
            return Vec::new();
        }
        self.rows
            .chunks_exact(self.rank)
            .map(|row| dot(weights, row))
            .collect()
    }
}

/// Symmetric `u x u` matrix over a pooled sample with cached row totals,
/// used to evaluate block sums of a two-block split in `O(u * min(n, m))`.
#[derive(Debug, Clone)]
pub struct PooledMatrix {
    data: Vec<f64>,
    size: usize,
    row_totals: Vec<f64>,
    total: f64,
    trace: f64,
}

/// Sums of a pooled matrix over the blocks of a split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSums {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
    pub diag_x: f64,
    pub diag_y: f64,
}

impl PooledMatrix {
    /// `data` is row-major and must be symmetric.
    pub fn new(data: Vec<f64>, size: usize) -> Self {
        assert_eq!(data.len(), size * size);
        let row_totals: Vec<f64> = data.chunks_exact(size).map(|r| r.iter().sum()).collect();
        let total = row_totals.iter().sum();
        let trace = (0..size).map(|i| data[i * size + i]).sum();
        Self {
            data,
            size,
            row_totals,
            total,
            trace,
        }
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let size = m.nrows();
        // column-major storage of a symmetric matrix is also its row-major form
        Self::new(m.as_slice().to_vec(), size)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn block_sums(&self, order: &[u32], n: usize) -> BlockSums {
        let u = self.size;
        let m = u - n;
        let (small, small_is_x) = if n <= m {
            (&order[..n], true)
        } else {
            (&order[n..], false)
        };
        let mut inner = 0.0;
        let mut diag = 0.0;
        let mut rows = 0.0;
        for &i in small {
            let i = i as usize;
            let row = &self.data[i * u..(i + 1) * u];
            inner += small.iter().map(|&j| row[j as usize]).sum::<f64>();
            diag += row[i];
            rows += self.row_totals[i];
        }
        let cross = rows - inner;
        let other = self.total - inner - 2.0 * cross;
        let other_diag = self.trace - diag;
        if small_is_x {
            BlockSums {
                xx: inner,
                yy: other,
                xy: cross,
                diag_x: diag,
                diag_y: other_diag,
            }
        } else {
            BlockSums {
                xx: other,
                yy: inner,
                xy: cross,
                diag_x: other_diag,
                diag_y: diag,
            }
        }
    }

    /// Two-block U-statistic
    /// `(xx - dx)/(n(n-1)) + (yy - dy)/(m(m-1)) - 2 xy/(nm)`.
    pub fn u_statistic(&self, order: &[u32], n: usize) -> f64 {
        let s = self.block_sums(order, n);
        let nf = n as f64;
        let mf = (self.size - n) as f64;
        (s.xx - s.diag_x) / (nf * (nf - 1.0)) + (s.yy - s.diag_y) / (mf * (mf - 1.0))
            - 2.0 * s.xy / (nf * mf)
    }
}

/// The pooled Gram product `H = (1/N) K_uN G K_uN^T` for one filter.
#[derive(Debug, Clone)]
pub struct PooledKernelProduct {
    matrix: PooledMatrix,
    n: usize,
    m: usize,
    filter: FilterSpec,
    kind: BasisKind,
}

impl PooledKernelProduct {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn filter(&self) -> &FilterSpec {
        &self.filter
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn matrix(&self) -> &PooledMatrix {
        &self.matrix
    }

    /// The statistic after relabelling: `perm[..n]` becomes the x-block.
    pub fn statistic(&self, perm: &[u32]) -> Result<f64> {
        check_permutation(perm, self.n + self.m)?;
        Ok(self.matrix.u_statistic(perm, self.n))
    }
}

pub(crate) fn check_permutation(perm: &[u32], size: usize) -> Result<()> {
    if perm.len() != size {
        return Err(GofError::Input(format!(
            "permutation has {} entries, expected {size}",
            perm.len()
        )));
    }
    let mut seen = vec![false; size];
    for &p in perm {
        let p = p as usize;
        if p >= size || seen[p] {
            return Err(GofError::Input(format!(
                "not a permutation of 0..{size}: index {p} repeated or out of range"
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::FilterFamily;

    #[test]
    fn eigen_examples() {
        let e = EigenSystem::from_gram(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(e.eigenvalues(), &[0.5, 0.5]);
        let e = EigenSystem::from_gram(&DMatrix::from_element(3, 3, 1.0)).unwrap();
        assert!((e.eigenvalues()[0] - 1.0).abs() < 1e-14);
        assert!(e.eigenvalues()[1].abs() < 1e-14 && e.eigenvalues()[2].abs() < 1e-14);
    }

    #[test]
    fn eigen_rejects_bad_input() {
        let mut k = DMatrix::identity(3, 3);
        k[(0, 1)] = 0.5;
        assert!(matches!(
            EigenSystem::from_gram(&k),
            Err(GofError::Input(_))
        ));
        assert!(matches!(
            EigenSystem::from_gram(&DMatrix::identity(1, 1)),
            Err(GofError::SampleSize { .. })
        ));
        assert!(EigenSystem::from_gram(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn eigen_reconstruction_and_orthonormality() {
        // B B^T is PSD
        let b = DMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4);
        let k = &b * b.transpose();
        let e = EigenSystem::from_gram(&k).unwrap();
        let v = e.eigenvectors();
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(e.eigenvalues()));
        let recon = v * lam * v.transpose();
        assert!((recon - &k / 5.0).amax() <= 1e-8);
        assert!((v.transpose() * v - DMatrix::identity(5, 5)).amax() <= 1e-10);
        assert!(e.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn effective_dimension_closed_forms() {
        let big_n = 8;
        let lambda = 0.3;
        let e = EigenSystem::from_gram(&DMatrix::identity(big_n, big_n)).unwrap();
        let expect = big_n as f64 / (1.0 + big_n as f64 * lambda);
        assert!((e.effective_dimension(lambda).unwrap() - expect).abs() < 1e-12);

        let e = EigenSystem::from_gram(&DMatrix::from_element(4, 4, 1.0)).unwrap();
        assert!((e.effective_dimension(lambda).unwrap() - 1.0 / 1.3).abs() < 1e-12);
        assert!(e.effective_dimension(1e12).unwrap() < 1e-11);
        assert!(e.effective_dimension(0.0).is_err());
    }

    #[test]
    fn permutation_validation() {
        assert!(check_permutation(&[1, 0, 2], 3).is_ok());
        assert!(check_permutation(&[1, 1, 2], 3).is_err());
        assert!(check_permutation(&[0, 1], 3).is_err());
        assert!(check_permutation(&[0, 1, 3], 3).is_err());
    }

    #[test]
    fn block_sums_match_brute_force() {
        let u = 7;
        let data: Vec<f64> = (0..u * u)
            .map(|idx| {
                let (i, j) = (idx / u, idx % u);
                ((i.min(j) * 13 + i.max(j) * 5) % 17) as f64
            })
            .collect();
        let m = PooledMatrix::new(data.clone(), u);
        let order = [4u32, 0, 6, 2, 1, 5, 3];
        for n in 2..=5 {
            let s = m.block_sums(&order, n);
            let (xs, ys) = order.split_at(n);
            let data = &data;
            let sum = |a: &[u32], b: &[u32]| -> f64 {
                a.iter()
                    .flat_map(|&i| b.iter().map(move |&j| data[i as usize * u + j as usize]))
                    .sum()
            };
            assert_eq!(s.xx, sum(xs, xs));
            assert_eq!(s.yy, sum(ys, ys));
            assert_eq!(s.xy, sum(xs, ys));
            let dx: f64 = xs.iter().map(|&i| data[i as usize * (u + 1)]).sum();
            assert_eq!(s.diag_x, dx);
        }
    }

    #[test]
    fn weights_drop_floor_pairs() {
        let k = DMatrix::from_element(3, 3, 1.0);
        let cross = DMatrix::from_element(4, 3, 0.5);
        let basis = SpectralBasis::from_grams(&k, &cross, 2, BasisKind::Integral, 1e-10).unwrap();
        assert_eq!(basis.rank(), 1);
        let w = basis
            .weights(&FilterSpec::new(FilterFamily::Tikhonov, 1.0).unwrap())
            .unwrap();
        assert_eq!(w.len(), 1);
        assert!((w[0] - 0.5).abs() < 1e-12);
    }
}
