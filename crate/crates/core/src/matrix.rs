//! Dense row-major storage for frame collections.

use std::fmt;

/// A row-major `rows × dim` matrix of `f64`, one frame per row.
#[derive(Clone, PartialEq)]
pub struct FrameMatrix {
    data: Vec<f64>,
    dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ShapeError {
    #[error("frame dimension must be at least 1")]
    ZeroDim,
    #[error("row {row} has {found} values, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("buffer of length {len} is not a multiple of dimension {dim}")]
    BadLength { len: usize, dim: usize },
}

impl FrameMatrix {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self, ShapeError> {
        if dim == 0 {
            return Err(ShapeError::ZeroDim);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(ShapeError::BadLength { len: data.len(), dim });
        }
        Ok(Self { data, dim })
    }

    /// Builds a matrix from nested rows. An empty slice yields an error since
    /// the dimension cannot be inferred.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, ShapeError> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if dim == 0 {
            return Err(ShapeError::ZeroDim);
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (row, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(ShapeError::Ragged {
                    row,
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { data, dim })
    }

    /// An empty matrix with a fixed dimension, to be filled with [`push_row`](Self::push_row).
    pub fn with_dim(dim: usize) -> Result<Self, ShapeError> {
        Self::new(Vec::new(), dim)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<(), ShapeError> {
        if row.len() != self.dim {
            return Err(ShapeError::Ragged {
                row: self.rows(),
                expected: self.dim,
                found: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copies rows `start..end` into a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> FrameMatrix {
        FrameMatrix {
            data: self.data[start * self.dim..end * self.dim].to_vec(),
            dim: self.dim,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FrameMatrix {
        FrameMatrix {
            data: self.data.iter().map(|&v| f(v)).collect(),
            dim: self.dim,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl fmt::Debug for FrameMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter_rows()).finish()
    }
}
