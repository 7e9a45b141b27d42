//! Dense K-way tensors and column-major matrices.
//!
//! Elements are stored mode-1-fastest: index `(i_1, ..., i_K)` (0-based here)
//! lives at flat offset `i_1 + i_2 p_1 + i_3 p_1 p_2 + ...`. With this layout
//! the mode-1 unfolding is a plain reshape of the storage, and matrices are
//! column-major so that the two agree.

use crate::error::{HoseError, Result};

/// Upper bound on the number of entries a tensor may hold.
pub const MAX_ENTRIES: usize = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

fn checked_len(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(HoseError::Shape("a tensor needs at least one mode".into()));
    }
    if let Some(k) = dims.iter().position(|&d| d == 0) {
        return Err(HoseError::Shape(format!("dimension of mode {k} is zero")));
    }
    let mut len: usize = 1;
    for &d in dims {
        len = len
            .checked_mul(d)
            .filter(|&n| n <= MAX_ENTRIES)
            .ok_or(HoseError::Capacity(len.saturating_mul(d)))?;
    }
    Ok(len)
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let len = checked_len(&dims)?;
        if values.len() != len {
            return Err(HoseError::Shape(format!(
                "dims {:?} need {} values, got {}",
                dims,
                len,
                values.len()
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let len = checked_len(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            values: vec![0.0; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in storage order.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = checked_len(dims)?;
        let mut idx = vec![0usize; dims.len()];
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(f(&idx));
            for (i, &d) in idx.iter_mut().zip(dims) {
                *i += 1;
                if *i < d {
                    break;
                }
                *i = 0;
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            values,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Flat storage offset of a 0-based multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        let mut stride = 1;
        let mut off = 0;
        for (&i, &d) in index.iter().zip(&self.dims) {
            debug_assert!(i < d);
            off += i * stride;
            stride *= d;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.values[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.values[off] = value;
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(HoseError::InvalidMode {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// `(product of dims before mode, dim of mode, product of dims after mode)`.
    fn split(dims: &[usize], mode: usize) -> (usize, usize, usize) {
        let left = dims[..mode].iter().product();
        let right = dims[mode + 1..].iter().product();
        (left, dims[mode], right)
    }

    /// Mode-`mode` unfolding (0-based mode) as a `p_k x p/p_k` matrix.
    ///
    /// Columns are ordered with the remaining modes mode-1-fastest, so element
    /// `(i_1, ..., i_K)` lands in column `sum_{n != k} i_n J_n` where `J_n` is
    /// the product of the dims of the remaining modes before `n`.
    pub fn matricize(&self, mode: usize) -> Result<DenseMatrix> {
        self.check_mode(mode)?;
        let (left, pk, right) = Self::split(&self.dims, mode);
        let cols = left * right;
        let mut out = vec![0.0; pk * cols];
        for r in 0..right {
            for i in 0..pk {
                let src = left * (i + pk * r);
                let col0 = left * r;
                for l in 0..left {
                    out[i + pk * (col0 + l)] = self.values[src + l];
                }
            }
        }
        Ok(DenseMatrix {
            rows: pk,
            cols,
            values: out,
        })
    }

    /// Inverse of [`DenseTensor::matricize`].
    pub fn dematricize(m: &DenseMatrix, mode: usize, dims: &[usize]) -> Result<Self> {
        let len = checked_len(dims)?;
        if mode >= dims.len() {
            return Err(HoseError::InvalidMode {
                mode,
                order: dims.len(),
            });
        }
        let (left, pk, right) = Self::split(dims, mode);
        if m.rows != pk || m.cols != left * right {
            return Err(HoseError::Shape(format!(
                "a {}x{} matrix cannot be folded along mode {} into dims {:?}",
                m.rows, m.cols, mode, dims
            )));
        }
        let mut values = vec![0.0; len];
        for r in 0..right {
            for i in 0..pk {
                let dst = left * (i + pk * r);
                let col0 = left * r;
                for l in 0..left {
                    values[dst + l] = m.values[i + pk * (col0 + l)];
                }
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            values,
        })
    }

    /// Mode-`mode` product `t x_k a`: the result's unfolding is `a * t_(k)`.
    pub fn mode_multiply(&self, a: &DenseMatrix, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        let (left, pk, right) = Self::split(&self.dims, mode);
        if a.cols != pk {
            return Err(HoseError::Shape(format!(
                "mode-{} product needs a matrix with {} columns, got {}x{}",
                mode, pk, a.rows, a.cols
            )));
        }
        let mut dims = self.dims.clone();
        dims[mode] = a.rows;
        let len = checked_len(&dims)?;
        let mut out = vec![0.0; len];
        for r in 0..right {
            for i in 0..pk {
                let src = &self.values[left * (i + pk * r)..left * (i + pk * r) + left];
                for o in 0..a.rows {
                    let w = a.values[o + a.rows * i];
                    if w == 0.0 {
                        continue;
                    }
                    let dst = left * (o + a.rows * r);
                    for (d, s) in out[dst..dst + left].iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
        Ok(Self { dims, values: out })
    }

    /// Scales every mode-`mode` slice `i` by `weights[i]`; same as a mode
    /// product with `diag(weights)` but without the matrix.
    pub fn scale_mode(&self, weights: &[f64], mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        let (left, pk, right) = Self::split(&self.dims, mode);
        if weights.len() != pk {
            return Err(HoseError::Shape(format!(
                "mode {} has {} slices, got {} weights",
                mode,
                pk,
                weights.len()
            )));
        }
        let mut out = self.values.clone();
        for r in 0..right {
            for (i, &w) in weights.iter().enumerate() {
                let start = left * (i + pk * r);
                out[start..start + left].iter_mut().for_each(|v| *v *= w);
            }
        }
        Ok(Self {
            dims: self.dims.clone(),
            values: out,
        })
    }

    /// Tucker product `(a_1, ..., a_K) . t`.
    pub fn tucker(&self, factors: &[DenseMatrix]) -> Result<Self> {
        if factors.len() != self.order() {
            return Err(HoseError::Shape(format!(
                "{} factors for an order-{} tensor",
                factors.len(),
                self.order()
            )));
        }
        factors
            .iter()
            .enumerate()
            .try_fold(self.clone(), |acc, (k, a)| acc.mode_multiply(a, k))
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dims != other.dims {
            return Err(HoseError::Shape(format!(
                "dims {:?} and {:?} differ",
                self.dims, other.dims
            )));
        }
        Ok(Self {
            dims: self.dims.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `||self - other||^2`.
    pub fn distance_sq(&self, other: &Self) -> Result<f64> {
        if self.dims != other.dims {
            return Err(HoseError::Shape(format!(
                "dims {:?} and {:?} differ",
                self.dims, other.dims
            )));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(HoseError::Shape("matrix dimensions must be positive".into()));
        }
        if values.len() != rows * cols {
            return Err(HoseError::Shape(format!(
                "a {}x{} matrix needs {} values, got {}",
                rows,
                cols,
                rows * cols,
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i + n * i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                values.push(f(i, j));
            }
        }
        Self { rows, cols, values }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            m.values[i + n * i] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Column-major storage.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i + self.rows * j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i + self.rows * j] = v;
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[self.rows * j..self.rows * (j + 1)]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(HoseError::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for l in 0..self.cols {
                let w = other.get(l, j);
                if w == 0.0 {
                    continue;
                }
                let src = self.column(l);
                let dst = &mut out.values[self.rows * j..self.rows * (j + 1)];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_column_slice(self.rows, self.cols, &self.values)
    }

    pub(crate) fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            values: m.as_slice().to_vec(),
        }
    }
}
