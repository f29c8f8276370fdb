//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library's linear algebra: eigenpairs come
//! from a cyclic Jacobi sweep and statistics from explicit quadruple sums
//! over eigenfunction values.

#![allow(dead_code)]

/// Row-major dense square matrix.
pub type Mat = Vec<Vec<f64>>;

pub fn kernel_gaussian(x: &[f64], y: &[f64], h: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * h)).exp()
}

pub fn kernel_sobolev(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.min(*b)).product()
}

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations.
/// Returns `(values, vectors)` with `vectors[k]` the k-th unit eigenvector,
/// sorted by descending value.
pub fn jacobi_eigen(a: &Mat) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a = a.clone();
    let mut v: Mat = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|r| v[r][k]).collect())
        .collect();
    (values, vectors)
}

/// Which operator the eigenfunctions come from.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Operator {
    Integral,
    CenteredCovariance,
}

/// Explicit eigenfunctions of the empirical operator built on `z`.
pub struct Eigenfunctions<'a, K: Fn(&[f64], &[f64]) -> f64> {
    pub kernel: K,
    pub z: &'a [Vec<f64>],
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub op: Operator,
}

impl<'a, K: Fn(&[f64], &[f64]) -> f64> Eigenfunctions<'a, K> {
    pub fn new(kernel: K, z: &'a [Vec<f64>], op: Operator) -> Self {
        let n = z.len();
        let mut k: Mat = (0..n)
            .map(|i| (0..n).map(|j| kernel(&z[i], &z[j])).collect())
            .collect();
        if op == Operator::CenteredCovariance {
            let rm: Vec<f64> = k.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
            let g = rm.iter().sum::<f64>() / n as f64;
            for i in 0..n {
                for j in 0..n {
                    k[i][j] += g - rm[i] - rm[j];
                }
            }
        }
        for row in k.iter_mut() {
            for v in row.iter_mut() {
                *v /= n as f64;
            }
        }
        let (values, vectors) = jacobi_eigen(&k);
        Self {
            kernel,
            z,
            values,
            vectors,
            op,
        }
    }

    /// `phi_k(x) = (N l_k)^{-1/2} sum_l a_{kl} <K_{z_l} (- mean), K_x>`.
    pub fn eval(&self, k: usize, x: &[f64]) -> f64 {
        let n = self.z.len() as f64;
        let kz: Vec<f64> = self.z.iter().map(|z| (self.kernel)(z, x)).collect();
        let mean = if self.op == Operator::CenteredCovariance {
            kz.iter().sum::<f64>() / n
        } else {
            0.0
        };
        let s: f64 = self.vectors[k]
            .iter()
            .zip(&kz)
            .map(|(a, v)| a * (v - mean))
            .sum();
        s / (n * self.values[k]).sqrt()
    }

    /// Indices of eigenpairs above `floor * max`.
    pub fn kept(&self, floor: f64) -> Vec<usize> {
        let max = self.values[0].max(0.0);
        (0..self.values.len())
            .filter(|&k| self.values[k].max(0.0) > floor * max)
            .collect()
    }
}

/// `1/(n(n-1)m(m-1)) sum_{i != i'} sum_{j != j'} sum_k g(l_k)
/// (phi_k(x_i) - phi_k(y_j)) (phi_k(x_i') - phi_k(y_j'))`.
pub fn quadruple_sum_statistic<K, G>(
    ef: &Eigenfunctions<'_, K>,
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    g: G,
    floor: f64,
) -> f64
where
    K: Fn(&[f64], &[f64]) -> f64,
    G: Fn(f64) -> f64,
{
    let kept = ef.kept(floor);
    let px: Vec<Vec<f64>> = x
        .iter()
        .map(|p| kept.iter().map(|&k| ef.eval(k, p)).collect())
        .collect();
    let py: Vec<Vec<f64>> = y
        .iter()
        .map(|p| kept.iter().map(|&k| ef.eval(k, p)).collect())
        .collect();
    let gk: Vec<f64> = kept.iter().map(|&k| g(ef.values[k])).collect();
    let (n, m) = (x.len(), y.len());
    let mut total = 0.0;
    for i in 0..n {
        for ip in 0..n {
            if i == ip {
                continue;
            }
            for j in 0..m {
                for jp in 0..m {
                    if j == jp {
                        continue;
                    }
                    for (r, &w) in gk.iter().enumerate() {
                        total += w * (px[i][r] - py[j][r]) * (px[ip][r] - py[jp][r]);
                    }
                }
            }
        }
    }
    total / (n * (n - 1) * m * (m - 1)) as f64
}

/// Direct `Tr[(K + lambda N I)^{-1} K]` by Gauss-Jordan elimination.
pub fn trace_of_solve(k: &Mat, lambda: f64) -> f64 {
    let n = k.len();
    let mut a: Mat = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = k[i].clone();
            row[i] += lambda * n as f64;
            row.extend(k[i].iter().copied());
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    (0..n).map(|i| a[i][n + i]).sum()
}
