//! Higher-order SVD.
//!
//! Each factor `U_k` holds the left singular vectors of the mode-k unfolding
//! and the core is `S = (U_1^T, ..., U_K^T) . X`. The decomposition is also
//! kept in the rescaled form `X = U . D . V` with `V = (D_1^-1, ..., D_K^-1) . S`,
//! which is what the spectral estimators act on.

use rayon::prelude::*;

use crate::error::{HoseError, Result};
use crate::tensor::{DenseMatrix, DenseTensor};

/// Tolerances checked when a decomposition is built.
#[derive(Debug, Clone, Copy)]
pub struct HosvdOptions {
    /// A mode is rank deficient when its smallest singular value is at most
    /// `rank_rtol * sigma_1`.
    pub rank_rtol: f64,
    /// Two singular values of a mode are tied when their squares differ by at
    /// most `tie_rtol * sigma_1^2`.
    pub tie_rtol: f64,
}

impl Default for HosvdOptions {
    fn default() -> Self {
        Self {
            rank_rtol: 1e-10,
            tie_rtol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HosvdDecomposition {
    data: DenseTensor,
    factors: Vec<DenseMatrix>,
    mode_singular_values: Vec<Vec<f64>>,
    core: DenseTensor,
    normalized_core: DenseTensor,
}

/// Singular values (descending) and, optionally, the full set of left
/// singular vectors of a `rows <= cols` matrix.
fn left_svd(m: &DenseMatrix, want_vectors: bool) -> (Vec<f64>, Option<DenseMatrix>) {
    let svd = m.to_nalgebra().svd(want_vectors, false);
    let sv = svd.singular_values.as_slice().to_vec();
    let mut order: Vec<usize> = (0..sv.len()).collect();
    // stable sort keeps the result deterministic for equal values
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| sv[i]).collect();
    let u = svd.u.map(|u| {
        let rows = u.nrows();
        let mut out = DenseMatrix::zeros(rows, order.len());
        for (j, &src) in order.iter().enumerate() {
            let col = u.column(src);
            // largest |entry| positive, ties to the lowest row
            let mut pivot = 0;
            for i in 1..rows {
                if col[i].abs() > col[pivot].abs() {
                    pivot = i;
                }
            }
            let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..rows {
                out.set(i, j, sign * col[i]);
            }
        }
        out
    });
    (sorted, u)
}

/// Singular values of the mode-`mode` unfolding, descending, padded with zeros
/// to length `p_k` when the unfolding has fewer columns than rows.
pub fn mode_spectrum(t: &DenseTensor, mode: usize) -> Result<Vec<f64>> {
    let m = t.matricize(mode)?;
    let (mut sv, _) = if m.rows() <= m.cols() {
        left_svd(&m, false)
    } else {
        left_svd(&m.transpose(), false)
    };
    sv.resize(m.rows(), 0.0);
    Ok(sv)
}

/// Number of singular values above `tol * sigma_1` in every mode.
pub fn multilinear_rank(t: &DenseTensor, tol: f64) -> Result<Vec<usize>> {
    if !(tol >= 0.0) {
        return Err(HoseError::InvalidParameter(format!("tolerance {tol} must be >= 0")));
    }
    (0..t.order())
        .map(|k| {
            let sv = mode_spectrum(t, k)?;
            let cut = tol * sv[0];
            Ok(sv.iter().filter(|&&s| s > cut).count())
        })
        .collect()
}

pub fn hosvd(t: &DenseTensor) -> Result<HosvdDecomposition> {
    hosvd_with(t, HosvdOptions::default())
}

pub fn hosvd_with(t: &DenseTensor, opts: HosvdOptions) -> Result<HosvdDecomposition> {
    let p = t.len();
    let per_mode: Vec<Result<(Vec<f64>, DenseMatrix)>> = (0..t.order())
        .into_par_iter()
        .map(|k| {
            let pk = t.dims()[k];
            if pk > p / pk {
                // the unfolding is wide enough only when p_k <= p / p_k
                return Err(HoseError::RankDeficient { mode: k, value: 0.0 });
            }
            let m = t.matricize(k)?;
            let (sv, u) = left_svd(&m, true);
            let u = u.expect("left vectors requested");
            check_spectrum(&sv, k, opts)?;
            Ok((sv, u))
        })
        .collect();
    let mut factors = Vec::with_capacity(t.order());
    let mut mode_singular_values = Vec::with_capacity(t.order());
    for r in per_mode {
        let (sv, u) = r?;
        mode_singular_values.push(sv);
        factors.push(u);
    }
    let transposed: Vec<DenseMatrix> = factors.iter().map(DenseMatrix::transpose).collect();
    let core = t.tucker(&transposed)?;
    let mut normalized_core = core.clone();
    for (k, sv) in mode_singular_values.iter().enumerate() {
        let inv: Vec<f64> = sv.iter().map(|s| 1.0 / s).collect();
        normalized_core = normalized_core.scale_mode(&inv, k)?;
    }
    Ok(HosvdDecomposition {
        data: t.clone(),
        factors,
        mode_singular_values,
        core,
        normalized_core,
    })
}

fn check_spectrum(sv: &[f64], mode: usize, opts: HosvdOptions) -> Result<()> {
    let top = sv[0];
    let last = *sv.last().expect("non-empty spectrum");
    if !(last > opts.rank_rtol * top) || top == 0.0 {
        return Err(HoseError::RankDeficient { mode, value: last });
    }
    let gap_tol = opts.tie_rtol * top * top;
    for i in 1..sv.len() {
        if sv[i - 1] * sv[i - 1] - sv[i] * sv[i] <= gap_tol {
            return Err(HoseError::DegenerateSpectrum {
                mode,
                i: i - 1,
                j: i,
            });
        }
    }
    Ok(())
}

impl HosvdDecomposition {
    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn dims(&self) -> &[usize] {
        self.core.dims()
    }

    /// Total number of entries `p`.
    pub fn len(&self) -> usize {
        self.core.len()
    }

    pub fn is_empty(&self) -> bool {
        self.core.is_empty()
    }

    /// The tensor that was decomposed.
    pub fn data(&self) -> &DenseTensor {
        &self.data
    }

    pub fn factors(&self) -> &[DenseMatrix] {
        &self.factors
    }

    pub fn factor(&self, mode: usize) -> &DenseMatrix {
        &self.factors[mode]
    }

    pub fn mode_singular_values(&self) -> &[Vec<f64>] {
        &self.mode_singular_values
    }

    pub fn singular_values(&self, mode: usize) -> &[f64] {
        &self.mode_singular_values[mode]
    }

    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    pub fn normalized_core(&self) -> &DenseTensor {
        &self.normalized_core
    }

    /// `(U_1, ..., U_K) . S`.
    pub fn reconstruct(&self) -> DenseTensor {
        self.core
            .tucker(&self.factors)
            .expect("factors match core dims")
    }

    /// `(U_1, ..., U_K) . (D_1, ..., D_K) . V`.
    pub fn reconstruct_normalized(&self) -> DenseTensor {
        let mut t = self.normalized_core.clone();
        for (k, sv) in self.mode_singular_values.iter().enumerate() {
            t = t.scale_mode(sv, k).expect("spectrum matches core dims");
        }
        t.tucker(&self.factors).expect("factors match core dims")
    }

    /// Applies the factors to a core-shaped tensor: `(U_1, ..., U_K) . a`.
    pub fn expand(&self, a: &DenseTensor) -> Result<DenseTensor> {
        a.tucker(&self.factors)
    }

    /// Rows `(mode, index, value)` with 1-based mode and index.
    pub fn spectrum_rows(&self) -> Vec<(usize, usize, f64)> {
        self.mode_singular_values
            .iter()
            .enumerate()
            .flat_map(|(k, sv)| sv.iter().enumerate().map(move |(i, &s)| (k + 1, i + 1, s)))
            .collect()
    }
}
