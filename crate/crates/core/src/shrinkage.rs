//! Higher-order spectral estimators and matrix/vector baselines.
//!
//! A spectral estimator keeps the HOSVD factors and replaces each mode's
//! singular values by `f^k(sigma^k)`:
//!
//! `t(X) = c (U_1, ..., U_K) . (f^1(D_1) D_1^-1, ..., f^K(D_K) D_K^-1) . S`
//!
//! Note that `f^k(D_k)` are not the mode singular values of `t(X)`; the shrunk
//! core is generally not all-orthogonal.

use crate::error::{HoseError, Result};
use crate::hosvd::HosvdDecomposition;
use crate::tensor::{DenseMatrix, DenseTensor};

/// Shrinkage applied to one mode's singular values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralFunction {
    Identity,
    /// Keep the `rank` largest values.
    Truncation { rank: usize },
    /// `(sigma - lambda)_+`. Negative `lambda` inflates every value.
    SoftThreshold { lambda: f64 },
    /// `sigma 1(sigma >= lambda)`.
    HardThreshold { lambda: f64 },
    /// `(1 - lambda / sum sigma^2) sigma`, using the whole spectrum.
    Stein { lambda: f64 },
    /// `sigma - lambda / sigma`.
    EfronMorris { lambda: f64 },
    /// `(1 - gamma / sum sigma^2) sigma - lambda / sigma`.
    ImprovedEfronMorris { gamma: f64, lambda: f64 },
    /// `sigma (1 - lambda^gamma / sigma^gamma)_+`, `lambda >= 0`.
    AdaptiveTrace { lambda: f64, gamma: f64 },
}

impl SpectralFunction {
    /// Whether `f_i` depends on `sigma_i` alone.
    pub fn is_elementwise(&self) -> bool {
        !matches!(
            self,
            SpectralFunction::Stein { .. } | SpectralFunction::ImprovedEfronMorris { .. }
        )
    }

    /// Threshold at which `f` is not differentiable, if any.
    pub fn kink(&self) -> Option<f64> {
        match *self {
            SpectralFunction::SoftThreshold { lambda }
            | SpectralFunction::HardThreshold { lambda } => Some(lambda),
            SpectralFunction::AdaptiveTrace { lambda, .. } if lambda > 0.0 => Some(lambda),
            _ => None,
        }
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        let bad = |msg: String| Err(HoseError::InvalidParameter(msg));
        match *self {
            SpectralFunction::Truncation { rank } if rank == 0 || rank > len => {
                Err(HoseError::InvalidRank {
                    mode: 0,
                    rank,
                    max: len,
                })
            }
            SpectralFunction::AdaptiveTrace { lambda, gamma } if !(lambda >= 0.0 && gamma > 0.0) => {
                bad(format!("adaptive shrinkage needs lambda >= 0 and gamma > 0, got ({lambda}, {gamma})"))
            }
            SpectralFunction::SoftThreshold { lambda }
            | SpectralFunction::HardThreshold { lambda }
            | SpectralFunction::Stein { lambda }
            | SpectralFunction::EfronMorris { lambda }
                if !lambda.is_finite() =>
            {
                bad(format!("non-finite lambda {lambda}"))
            }
            SpectralFunction::ImprovedEfronMorris { gamma, lambda }
                if !(gamma.is_finite() && lambda.is_finite()) =>
            {
                bad(format!("non-finite parameters ({gamma}, {lambda})"))
            }
            _ => Ok(()),
        }
    }

    /// `f` applied to a descending spectrum.
    pub fn apply(&self, sv: &[f64]) -> Vec<f64> {
        let energy: f64 = sv.iter().map(|s| s * s).sum();
        sv.iter()
            .enumerate()
            .map(|(i, &s)| match *self {
                SpectralFunction::Identity => s,
                SpectralFunction::Truncation { rank } => {
                    if i < rank {
                        s
                    } else {
                        0.0
                    }
                }
                SpectralFunction::SoftThreshold { lambda } => (s - lambda).max(0.0),
                SpectralFunction::HardThreshold { lambda } => {
                    if s >= lambda {
                        s
                    } else {
                        0.0
                    }
                }
                SpectralFunction::Stein { lambda } => (1.0 - lambda / energy) * s,
                SpectralFunction::EfronMorris { lambda } => s - lambda / s,
                SpectralFunction::ImprovedEfronMorris { gamma, lambda } => {
                    (1.0 - gamma / energy) * s - lambda / s
                }
                SpectralFunction::AdaptiveTrace { lambda, gamma } => {
                    if s > lambda {
                        s * (1.0 - (lambda / s).powf(gamma))
                    } else {
                        0.0
                    }
                }
            })
            .collect()
    }

    /// Diagonal of the Jacobian of `sigma -> f(sigma)`. For elementwise
    /// families this is just `f_i'(sigma_i)`.
    pub fn jacobian_diagonal(&self, sv: &[f64]) -> Vec<f64> {
        let energy: f64 = sv.iter().map(|s| s * s).sum();
        sv.iter()
            .enumerate()
            .map(|(i, &s)| match *self {
                SpectralFunction::Identity => 1.0,
                SpectralFunction::Truncation { rank } => {
                    if i < rank {
                        1.0
                    } else {
                        0.0
                    }
                }
                SpectralFunction::SoftThreshold { lambda } => {
                    if s > lambda {
                        1.0
                    } else {
                        0.0
                    }
                }
                SpectralFunction::HardThreshold { lambda } => {
                    if s >= lambda {
                        1.0
                    } else {
                        0.0
                    }
                }
                SpectralFunction::Stein { lambda } => {
                    1.0 - lambda / energy + 2.0 * lambda * s * s / (energy * energy)
                }
                SpectralFunction::EfronMorris { lambda } => 1.0 + lambda / (s * s),
                SpectralFunction::ImprovedEfronMorris { gamma, lambda } => {
                    1.0 - gamma / energy + 2.0 * gamma * s * s / (energy * energy) + lambda / (s * s)
                }
                SpectralFunction::AdaptiveTrace { lambda, gamma } => {
                    if s > lambda {
                        1.0 - (1.0 - gamma) * (lambda / s).powf(gamma)
                    } else {
                        0.0
                    }
                }
            })
            .collect()
    }
}

/// One spectral function per mode plus an overall scale `c > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkagePlan {
    per_mode: Vec<SpectralFunction>,
    scale: f64,
}

impl ShrinkagePlan {
    pub fn new(per_mode: Vec<SpectralFunction>, scale: f64) -> Result<Self> {
        if per_mode.is_empty() {
            return Err(HoseError::InvalidParameter("a plan needs at least one mode".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(HoseError::InvalidParameter(format!("scale must be positive, got {scale}")));
        }
        Ok(Self { per_mode, scale })
    }

    pub fn identity(order: usize) -> Self {
        Self {
            per_mode: vec![SpectralFunction::Identity; order],
            scale: 1.0,
        }
    }

    /// Mode-specific soft-thresholding with levels `lambdas` and scale `c`.
    pub fn soft(lambdas: &[f64], scale: f64) -> Result<Self> {
        Self::new(
            lambdas
                .iter()
                .map(|&lambda| SpectralFunction::SoftThreshold { lambda })
                .collect(),
            scale,
        )
    }

    pub fn truncation(ranks: &[usize]) -> Result<Self> {
        Self::new(
            ranks
                .iter()
                .map(|&rank| SpectralFunction::Truncation { rank })
                .collect(),
            1.0,
        )
    }

    pub fn per_mode(&self) -> &[SpectralFunction] {
        &self.per_mode
    }

    pub fn order(&self) -> usize {
        self.per_mode.len()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        Self::new(self.per_mode.clone(), scale)
    }

    pub fn with_mode(&self, mode: usize, f: SpectralFunction) -> Self {
        let mut out = self.clone();
        out.per_mode[mode] = f;
        out
    }

    /// Soft-threshold levels, when every mode is soft-thresholded.
    pub fn soft_lambdas(&self) -> Option<Vec<f64>> {
        self.per_mode
            .iter()
            .map(|f| match f {
                SpectralFunction::SoftThreshold { lambda } => Some(*lambda),
                _ => None,
            })
            .collect()
    }

    /// Truncation ranks, when every mode is truncated.
    pub fn ranks(&self) -> Option<Vec<usize>> {
        self.per_mode
            .iter()
            .map(|f| match f {
                SpectralFunction::Truncation { rank } => Some(*rank),
                _ => None,
            })
            .collect()
    }

    pub fn validate_for(&self, d: &HosvdDecomposition) -> Result<()> {
        if self.order() != d.order() {
            return Err(HoseError::Shape(format!(
                "plan has {} modes, tensor has {}",
                self.order(),
                d.order()
            )));
        }
        for (k, f) in self.per_mode.iter().enumerate() {
            f.validate(d.dims()[k]).map_err(|e| match e {
                HoseError::InvalidRank { rank, max, .. } => HoseError::InvalidRank { mode: k, rank, max },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Per-mode weights `f^k(sigma^k) / sigma^k`.
    pub fn mode_weights(&self, d: &HosvdDecomposition) -> Vec<Vec<f64>> {
        self.per_mode
            .iter()
            .zip(d.mode_singular_values())
            .map(|(f, sv)| f.apply(sv).iter().zip(sv).map(|(v, s)| v / s).collect())
            .collect()
    }
}

/// The shrunk core `c (f^1(D_1) D_1^-1, ...) . S`.
pub fn shrunk_core(d: &HosvdDecomposition, plan: &ShrinkagePlan) -> Result<DenseTensor> {
    plan.validate_for(d)?;
    let mut core = d.core().clone();
    for (k, w) in plan.mode_weights(d).iter().enumerate() {
        core = core.scale_mode(w, k)?;
    }
    Ok(core.scale(plan.scale()))
}

pub fn apply_spectral(d: &HosvdDecomposition, plan: &ShrinkagePlan) -> Result<DenseTensor> {
    d.expand(&shrunk_core(d, plan)?)
}

/// Truncated HOSVD with multilinear rank at most `ranks`.
pub fn truncated_hosvd(d: &HosvdDecomposition, ranks: &[usize]) -> Result<DenseTensor> {
    if ranks.len() != d.order() {
        return Err(HoseError::Shape(format!(
            "{} ranks for an order-{} tensor",
            ranks.len(),
            d.order()
        )));
    }
    for (k, (&r, &p)) in ranks.iter().zip(d.dims()).enumerate() {
        if r == 0 || r > p {
            return Err(HoseError::InvalidRank { mode: k, rank: r, max: p });
        }
    }
    apply_spectral(d, &ShrinkagePlan::truncation(ranks)?)
}

/// Elementwise soft-thresholding of the core, `g(s) = sign(s) (|s| - lambda)_+`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreShrinkagePlan {
    lambda: f64,
}

impl CoreShrinkagePlan {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(HoseError::InvalidParameter(format!("core threshold must be >= 0, got {lambda}")));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn shrink(&self, s: f64) -> f64 {
        if self.lambda == 0.0 {
            return s;
        }
        s.signum() * (s.abs() - self.lambda).max(0.0)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        if s.abs() > self.lambda || self.lambda == 0.0 {
            1.0
        } else {
            0.0
        }
    }
}

pub fn apply_core_shrinkage(d: &HosvdDecomposition, plan: &CoreShrinkagePlan) -> Result<DenseTensor> {
    d.expand(&d.core().map(|s| plan.shrink(s)))
}

/// Positive-part James-Stein estimator `(1 - (p - 2) tau^2 / ||x||^2)_+ x`.
pub fn james_stein(x: &DenseTensor, tau2: f64) -> Result<DenseTensor> {
    let p = x.len();
    if p < 3 {
        return Err(HoseError::InvalidParameter(format!("James-Stein needs p >= 3, got {p}")));
    }
    if !(tau2 >= 0.0) {
        return Err(HoseError::InvalidParameter(format!("tau2 must be >= 0, got {tau2}")));
    }
    let norm = x.frobenius_norm_sq();
    if norm == 0.0 {
        return Ok(x.scale(0.0));
    }
    let factor = (1.0 - (p as f64 - 2.0) * tau2 / norm).max(0.0);
    Ok(x.scale(factor))
}

/// Matrix estimators applied to the mode-1 unfolding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFamily {
    EfronMorris,
    SoftThreshold,
}

impl MatrixFamily {
    pub fn function(&self, lambda: f64) -> SpectralFunction {
        match self {
            MatrixFamily::EfronMorris => SpectralFunction::EfronMorris { lambda },
            MatrixFamily::SoftThreshold => SpectralFunction::SoftThreshold { lambda },
        }
    }
}

/// Thin SVD `M = U diag(sigma) V^T` of a matrix with `rows <= cols`, singular
/// values descending.
#[derive(Debug, Clone)]
pub struct MatrixSvd {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
    transposed: bool,
}

impl MatrixSvd {
    /// Decomposes `m`, transposing first when it is tall. Rejects rank
    /// deficiency and near-ties with the same tolerances as the HOSVD.
    pub fn new(m: &DenseMatrix) -> Result<Self> {
        let transposed = m.rows() > m.cols();
        let work = if transposed { m.transpose() } else { m.clone() };
        let svd = work.to_nalgebra().svd(true, true);
        let sv = svd.singular_values.as_slice().to_vec();
        let mut order: Vec<usize> = (0..sv.len()).collect();
        order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
        let u_all = svd.u.expect("requested");
        let vt_all = svd.v_t.expect("requested");
        let n = order.len();
        let mut u = DenseMatrix::zeros(work.rows(), n);
        let mut v = DenseMatrix::zeros(work.cols(), n);
        for (j, &src) in order.iter().enumerate() {
            for i in 0..work.rows() {
                u.set(i, j, u_all[(i, src)]);
            }
            for i in 0..work.cols() {
                v.set(i, j, vt_all[(src, i)]);
            }
        }
        let singular_values: Vec<f64> = order.iter().map(|&i| sv[i]).collect();
        let top = singular_values[0];
        let last = singular_values[n - 1];
        if !(last > 1e-10 * top) {
            return Err(HoseError::RankDeficient { mode: 0, value: last });
        }
        for i in 1..n {
            let gap = singular_values[i - 1].powi(2) - singular_values[i].powi(2);
            if gap <= 1e-10 * top * top {
                return Err(HoseError::DegenerateSpectrum { mode: 0, i: i - 1, j: i });
            }
        }
        Ok(Self {
            u,
            singular_values,
            v,
            transposed,
        })
    }

    /// `U diag(f(sigma)) V^T`, in the orientation of the original matrix.
    pub fn apply(&self, f: &SpectralFunction) -> DenseMatrix {
        let shrunk = f.apply(&self.singular_values);
        let rows = self.u.rows();
        let cols = self.v.rows();
        let mut out = DenseMatrix::zeros(rows, cols);
        for (l, &s) in shrunk.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let ul = self.u.column(l);
            let vl = self.v.column(l);
            for j in 0..cols {
                let w = s * vl[j];
                for i in 0..rows {
                    out.set(i, j, out.get(i, j) + w * ul[i]);
                }
            }
        }
        if self.transposed {
            out.transpose()
        } else {
            out
        }
    }

    /// `(rows, cols)` of the wide orientation.
    pub fn shape(&self) -> (usize, usize) {
        (self.u.rows(), self.v.rows())
    }
}

/// Applies a matrix spectral estimator to the mode-1 unfolding and folds back.
pub fn matrix_baseline(x: &DenseTensor, family: MatrixFamily, lambda: f64) -> Result<DenseTensor> {
    if family == MatrixFamily::SoftThreshold && !(lambda >= 0.0) {
        return Err(HoseError::InvalidParameter(format!("soft threshold must be >= 0, got {lambda}")));
    }
    let svd = MatrixSvd::new(&x.matricize(0)?)?;
    let est = svd.apply(&family.function(lambda));
    DenseTensor::dematricize(&est, 0, x.dims())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hosvd::{hosvd, multilinear_rank, mode_spectrum};
    use crate::tensor::test_util::*;

    fn max_abs_diff(a: &DenseTensor, b: &DenseTensor) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_plan_returns_input() {
        let x = gaussian_tensor(&[3, 4, 5], 1);
        let d = hosvd(&x).unwrap();
        let est = apply_spectral(&d, &ShrinkagePlan::identity(3)).unwrap();
        assert!(est.distance_sq(&x).unwrap().sqrt() / x.frobenius_norm() < 1e-12);
    }

    #[test]
    fn large_threshold_on_one_mode_zeroes() {
        let x = gaussian_tensor(&[3, 4, 5], 2);
        let d = hosvd(&x).unwrap();
        let top = d.singular_values(1)[0];
        let plan = ShrinkagePlan::soft(&[0.0, top, 0.0], 1.0).unwrap();
        let est = apply_spectral(&d, &plan).unwrap();
        assert_eq!(est.frobenius_norm_sq(), 0.0);
    }

    #[test]
    fn scale_is_linear() {
        let x = gaussian_tensor(&[3, 4, 5], 3);
        let d = hosvd(&x).unwrap();
        let plan = ShrinkagePlan::soft(&[0.4, 0.1, -0.3], 1.0).unwrap();
        let a = apply_spectral(&d, &plan).unwrap().scale(0.7);
        let b = apply_spectral(&d, &plan.with_scale(0.7).unwrap()).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn truncation_forms_agree() {
        let x = gaussian_tensor(&[4, 4, 4], 4);
        let d = hosvd(&x).unwrap();
        let ranks = [2, 3, 1];
        let spectral = truncated_hosvd(&d, &ranks).unwrap();
        let corner = DenseTensor::from_fn(d.dims(), |ix| {
            if ix.iter().zip(&ranks).all(|(i, r)| i < r) {
                d.core().get(ix)
            } else {
                0.0
            }
        })
        .unwrap();
        let zeroed = d.expand(&corner).unwrap();
        assert!(max_abs_diff(&spectral, &zeroed) < 1e-12);
        let r = multilinear_rank(&spectral, 1e-8).unwrap();
        assert!(r.iter().zip(&ranks).all(|(a, b)| a <= b));
    }

    #[test]
    fn truncation_full_and_exact_rank() {
        let x = gaussian_tensor(&[3, 4, 5], 5);
        let d = hosvd(&x).unwrap();
        let full = truncated_hosvd(&d, &[3, 4, 5]).unwrap();
        assert!(full.distance_sq(&x).unwrap().sqrt() / x.frobenius_norm() < 1e-12);
        assert!(matches!(
            truncated_hosvd(&d, &[0, 1, 1]),
            Err(HoseError::InvalidRank { mode: 0, .. })
        ));
        assert!(matches!(
            truncated_hosvd(&d, &[1, 5, 1]),
            Err(HoseError::InvalidRank { mode: 1, .. })
        ));

        // rank (5,5,5) signal in 10x10x10: truncating at (5,5,5) loses nothing
        let core = gaussian_tensor(&[5, 5, 5], 6);
        let fs: Vec<DenseMatrix> = (0..3)
            .map(|k| {
                let g = gaussian_matrix(10, 5, 60 + k).to_nalgebra();
                DenseMatrix::from_nalgebra(&g.qr().q())
            })
            .collect();
        let low = core.tucker(&fs).unwrap();
        assert!(hosvd(&low).is_err());
        let loose = crate::hosvd::HosvdOptions {
            rank_rtol: 0.0,
            tie_rtol: 0.0,
        };
        // a perturbation far below the tolerance keeps every mode full rank
        let x = low.add(&gaussian_tensor(&[10, 10, 10], 7).scale(1e-13)).unwrap();
        let d = crate::hosvd::hosvd_with(&x, loose).unwrap();
        let est = truncated_hosvd(&d, &[5, 5, 5]).unwrap();
        assert!(est.distance_sq(&low).unwrap().sqrt() / low.frobenius_norm() < 1e-10);
    }

    #[test]
    fn core_shrinkage() {
        let x = gaussian_tensor(&[3, 4, 5], 8);
        let d = hosvd(&x).unwrap();
        let same = apply_core_shrinkage(&d, &CoreShrinkagePlan::new(0.0).unwrap()).unwrap();
        assert!(max_abs_diff(&same, &x) < 1e-12);
        let top = d.core().values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let zero = apply_core_shrinkage(&d, &CoreShrinkagePlan::new(top).unwrap()).unwrap();
        assert_eq!(zero.frobenius_norm_sq(), 0.0);
        let plan = CoreShrinkagePlan::new(0.5).unwrap();
        let shrunk = d.core().map(|s| plan.shrink(s));
        let zeros = shrunk.values().iter().filter(|&&v| v == 0.0).count();
        let small = d.core().values().iter().filter(|v| v.abs() <= 0.5).count();
        assert_eq!(zeros, small);
        assert!(CoreShrinkagePlan::new(-1.0).is_err());
    }

    #[test]
    fn james_stein_cases() {
        let x = gaussian_tensor(&[3, 3, 3], 9);
        let p = x.len() as f64;
        let tau2 = x.frobenius_norm_sq() / (p - 2.0);
        assert_eq!(james_stein(&x, tau2).unwrap().frobenius_norm_sq(), 0.0);
        assert_eq!(james_stein(&x, 0.0).unwrap(), x);
        let zero = DenseTensor::zeros(&[3, 3]).unwrap();
        assert_eq!(james_stein(&zero, 1.0).unwrap(), zero);
        let tiny = DenseTensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        assert!(james_stein(&tiny, 1.0).is_err());
    }

    #[test]
    fn matrix_baseline_cases() {
        let x = gaussian_tensor(&[4, 3, 5], 10);
        let same = matrix_baseline(&x, MatrixFamily::SoftThreshold, 0.0).unwrap();
        assert!(max_abs_diff(&same, &x) < 1e-12);
        let same = matrix_baseline(&x, MatrixFamily::EfronMorris, 0.0).unwrap();
        assert!(max_abs_diff(&same, &x) < 1e-12);
        let top = mode_spectrum(&x, 0).unwrap()[0];
        let zero = matrix_baseline(&x, MatrixFamily::SoftThreshold, top).unwrap();
        assert_eq!(zero.frobenius_norm_sq(), 0.0);
        assert!(matrix_baseline(&x, MatrixFamily::SoftThreshold, -1.0).is_err());
    }

    #[test]
    fn matrix_soft_threshold_matches_direct_svd() {
        let x = gaussian_tensor(&[4, 6], 11);
        let lambda = 1.2;
        let got = matrix_baseline(&x, MatrixFamily::SoftThreshold, lambda).unwrap();
        let svd = x.matricize(0).unwrap().to_nalgebra().svd(true, true);
        let mut s = svd.singular_values.clone();
        s.iter_mut().for_each(|v| *v = (*v - lambda).max(0.0));
        let direct = svd.u.unwrap() * nalgebra::DMatrix::from_diagonal(&s) * svd.v_t.unwrap();
        for (a, b) in got.values().iter().zip(direct.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn orthogonal_equivariance() {
        let x = gaussian_tensor(&[4, 6], 12);
        let w = random_orthogonal(4, 13);
        let z = random_orthogonal(6, 14);
        let rotated = x.mode_multiply(&w, 0).unwrap().mode_multiply(&z, 1).unwrap();
        let lhs = matrix_baseline(&rotated, MatrixFamily::SoftThreshold, 0.8).unwrap();
        let rhs = matrix_baseline(&x, MatrixFamily::SoftThreshold, 0.8)
            .unwrap()
            .mode_multiply(&w, 0)
            .unwrap()
            .mode_multiply(&z, 1)
            .unwrap();
        assert!(max_abs_diff(&lhs, &rhs) < 1e-9);
    }

    #[test]
    fn soft_norm_monotone_in_each_lambda() {
        let x = gaussian_tensor(&[4, 5, 6], 15);
        let d = hosvd(&x).unwrap();
        for k in 0..3 {
            let top = d.singular_values(k)[0];
            let mut last = f64::INFINITY;
            for step in 0..=20 {
                let mut lambdas = [0.3, 0.2, 0.1];
                lambdas[k] = -top + 2.0 * top * step as f64 / 20.0;
                let est = apply_spectral(&d, &ShrinkagePlan::soft(&lambdas, 1.0).unwrap()).unwrap();
                let n = est.frobenius_norm();
                assert!(n <= last + 1e-12);
                last = n;
            }
        }
    }

    #[test]
    fn family_values() {
        let sv = [3.0, 2.0, 1.0];
        assert_eq!(SpectralFunction::SoftThreshold { lambda: 1.5 }.apply(&sv), vec![1.5, 0.5, 0.0]);
        assert_eq!(SpectralFunction::SoftThreshold { lambda: -1.0 }.apply(&sv), vec![4.0, 3.0, 2.0]);
        assert_eq!(SpectralFunction::HardThreshold { lambda: 2.0 }.apply(&sv), vec![3.0, 2.0, 0.0]);
        assert_eq!(SpectralFunction::Truncation { rank: 2 }.apply(&sv), vec![3.0, 2.0, 0.0]);
        assert_eq!(SpectralFunction::EfronMorris { lambda: 1.0 }.apply(&sv)[2], 0.0);
        let stein = SpectralFunction::Stein { lambda: 7.0 }.apply(&sv);
        assert!((stein[0] - 1.5).abs() < 1e-15);
        let adaptive = SpectralFunction::AdaptiveTrace { lambda: 2.0, gamma: 1.0 }.apply(&sv);
        assert_eq!(adaptive, vec![1.0, 0.0, 0.0]);
        let iem = SpectralFunction::ImprovedEfronMorris { gamma: 7.0, lambda: 1.0 }.apply(&sv);
        assert!((iem[2] - (0.5 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let sv = [3.1, 2.2, 1.3];
        let families = [
            SpectralFunction::Stein { lambda: 4.0 },
            SpectralFunction::ImprovedEfronMorris { gamma: 3.0, lambda: 0.4 },
            SpectralFunction::EfronMorris { lambda: 0.7 },
            SpectralFunction::AdaptiveTrace { lambda: 1.0, gamma: 2.5 },
            SpectralFunction::SoftThreshold { lambda: 2.0 },
        ];
        let h = 1e-6;
        for f in families {
            let jac = f.jacobian_diagonal(&sv);
            for i in 0..3 {
                let mut up = sv;
                let mut dn = sv;
                up[i] += h;
                dn[i] -= h;
                let fd = (f.apply(&up)[i] - f.apply(&dn)[i]) / (2.0 * h);
                assert!((fd - jac[i]).abs() < 1e-7, "{f:?} {i}: {fd} vs {}", jac[i]);
            }
        }
    }

    #[test]
    fn plan_validation() {
        assert!(ShrinkagePlan::soft(&[0.0, 0.0], 0.0).is_err());
        assert!(ShrinkagePlan::soft(&[], 1.0).is_err());
        let x = gaussian_tensor(&[3, 4, 5], 16);
        let d = hosvd(&x).unwrap();
        assert!(apply_spectral(&d, &ShrinkagePlan::identity(2)).is_err());
        let bad = ShrinkagePlan::new(
            vec![
                SpectralFunction::Identity,
                SpectralFunction::AdaptiveTrace { lambda: -1.0, gamma: 1.0 },
                SpectralFunction::Identity,
            ],
            1.0,
        )
        .unwrap();
        assert!(apply_spectral(&d, &bad).is_err());
    }
}
