use crate::error::{GofError, Result};

/// A set of points in R^d stored row-major, one point per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: Vec<f64>,
    len: usize,
    dim: usize,
}

impl Sample {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(GofError::Input("sample dimension must be positive".into()));
        }
        if data.len() % dim != 0 {
            return Err(GofError::Input(format!(
                "{} values cannot be split into rows of dimension {dim}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(GofError::Input(format!("non-finite coordinate {bad}")));
        }
        Ok(Self {
            len: data.len() / dim,
            data,
            dim,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| GofError::Input("sample has no rows".into()))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(GofError::Input(format!(
                    "row {i} has dimension {}, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(data, dim)
    }

    /// One-dimensional sample from scalar values.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec(), 1)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Stacks `self` on top of `other`.
    pub fn concat(&self, other: &Sample) -> Result<Sample> {
        check_same_dim(self, other)?;
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Sample {
            len: self.len + other.len,
            data,
            dim: self.dim,
        })
    }
}

pub(crate) fn check_same_dim(a: &Sample, b: &Sample) -> Result<()> {
    if a.dim() != b.dim() {
        Err(GofError::Input(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )))
    } else {
        Ok(())
    }
}

#[inline]
pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}
