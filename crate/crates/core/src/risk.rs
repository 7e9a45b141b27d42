//! Stein's unbiased risk estimate for higher-order spectral estimators.
//!
//! For `t(X) = c U . (f(D) D^-1) . S` the divergence has the closed form
//!
//! `div = c sum_i [ C_i prod_k g_k(i_k) + sum_k (prod_{j != k} g_j(i_j)) h_k(i_k) S_i^2 ]`
//!
//! with `g_k = f^k(sigma^k) / sigma^k`, `h_k = (df^k/dsigma)(sigma^k) / (sigma^k)^2`
//! and an array `C` that depends on the decomposition only:
//!
//! `C_i = 1 + sum_k sum_{j != i_k} S^2[.., j, ..] / (s_{i_k}^2 - s_j^2)
//!        - S_i^2 sum_k (1 / s_{i_k}^2 + sum_{m != i_k} 1 / (s_m^2 - s_{i_k}^2))`.
//!
//! Functions that look at the whole spectrum of a mode use the diagonal of
//! their Jacobian in place of `df^k/dsigma`.

use rayon::prelude::*;

use crate::error::{HoseError, Result};
use crate::hosvd::HosvdDecomposition;
use crate::shrinkage::{
    apply_core_shrinkage, apply_spectral, CoreShrinkagePlan, MatrixSvd, ShrinkagePlan, SpectralFunction,
};
use crate::tensor::{DenseMatrix, DenseTensor};

/// Relative distance (to `sigma_1`) below which a singular value counts as
/// sitting on a threshold.
pub const KINK_RTOL: f64 = 1e-12;

/// Which risk estimate a tuner minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    #[default]
    Sure,
    Gsure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    /// `||t(X) - X||^2`
    pub fit: f64,
    pub divergence: f64,
    /// `fit + 2 tau2 divergence - p tau2`
    pub sure: f64,
    /// `fit / (1 - divergence / p)^2`, `None` when `divergence >= p`.
    pub gsure: Option<f64>,
    pub tau2: f64,
    pub p: usize,
}

impl RiskEstimate {
    pub fn new(fit: f64, divergence: f64, tau2: f64, p: usize) -> Self {
        let pf = p as f64;
        let sure = fit + 2.0 * tau2 * divergence - pf * tau2;
        let gsure = if divergence < pf {
            let r = 1.0 - divergence / pf;
            Some(fit / (r * r))
        } else {
            None
        };
        Self {
            fit,
            divergence,
            sure,
            gsure,
            tau2,
            p,
        }
    }

    /// GSURE, or `GsureUndefined` when the divergence reaches `p`.
    pub fn gsure_checked(&self) -> Result<f64> {
        self.gsure.ok_or(HoseError::GsureUndefined {
            divergence: self.divergence,
            p: self.p,
        })
    }

    /// Value of the chosen objective; `None` for an undefined GSURE.
    pub fn objective(&self, objective: Objective) -> Option<f64> {
        match objective {
            Objective::Sure => Some(self.sure),
            Objective::Gsure => self.gsure,
        }
    }
}

/// `sum_i t_i prod_k w_k(i_k)`, reducing mode 1 first.
pub(crate) fn contract(values: &[f64], dims: &[usize], weights: &[&[f64]]) -> f64 {
    debug_assert_eq!(dims.len(), weights.len());
    let mut cur: Vec<f64> = Vec::new();
    let mut src: &[f64] = values;
    for (&pk, w) in dims.iter().zip(weights) {
        let rest = src.len() / pk;
        let next: Vec<f64> = (0..rest)
            .map(|j| {
                src[pk * j..pk * (j + 1)]
                    .iter()
                    .zip(w.iter())
                    .map(|(v, w)| v * w)
                    .sum()
            })
            .collect();
        cur = next;
        src = &cur;
    }
    cur[0]
}

/// Plan-independent pieces of the divergence for one decomposition.
#[derive(Debug, Clone)]
pub struct DivergenceWorkspace {
    c_array: DenseTensor,
    core_sq: DenseTensor,
    coupling: DenseTensor,
    gap_sums: Vec<Vec<f64>>,
    singular_values: Vec<Vec<f64>>,
}

impl DivergenceWorkspace {
    pub fn new(d: &HosvdDecomposition) -> Self {
        let core_sq = d.core().map(|s| s * s);
        let mut coupling = DenseTensor::zeros(d.dims()).expect("valid dims");
        let mut weight_sum = vec![0.0; core_sq.len()];
        let mut gap_sums = Vec::with_capacity(d.order());
        for (k, sv) in d.mode_singular_values().iter().enumerate() {
            let pk = sv.len();
            let sq: Vec<f64> = sv.iter().map(|s| s * s).collect();
            // W[a, j] = 1 / (s_a^2 - s_j^2), zero on the diagonal
            let w = DenseMatrix::from_fn(pk, pk, |a, j| if a == j { 0.0 } else { 1.0 / (sq[a] - sq[j]) });
            let mixed = core_sq.mode_multiply(&w, k).expect("square factor");
            coupling = coupling.add(&mixed).expect("same dims");
            let gaps: Vec<f64> = (0..pk).map(|a| (0..pk).map(|j| w.get(a, j)).sum()).collect();
            // 1/s_a^2 + sum_{m != a} 1/(s_m^2 - s_a^2) = 1/s_a^2 - gaps[a]
            let per_index: Vec<f64> = (0..pk).map(|a| 1.0 / sq[a] - gaps[a]).collect();
            let ones = DenseTensor::new(d.dims().to_vec(), vec![1.0; core_sq.len()]).expect("valid dims");
            let spread = ones.scale_mode(&per_index, k).expect("matching dims");
            for (acc, v) in weight_sum.iter_mut().zip(spread.values()) {
                *acc += v;
            }
            gap_sums.push(gaps);
        }
        let c_values: Vec<f64> = coupling
            .values()
            .iter()
            .zip(core_sq.values())
            .zip(&weight_sum)
            .map(|((t, s2), w)| 1.0 + t - s2 * w)
            .collect();
        Self {
            c_array: DenseTensor::new(d.dims().to_vec(), c_values).expect("valid dims"),
            core_sq,
            coupling,
            gap_sums,
            singular_values: d.mode_singular_values().to_vec(),
        }
    }

    /// The array `C`.
    pub fn c_array(&self) -> &DenseTensor {
        &self.c_array
    }

    /// Elementwise squares of the core.
    pub fn core_sq(&self) -> &DenseTensor {
        &self.core_sq
    }

    /// `sum_k sum_{j != i_k} S^2[.., j, ..] / (s_{i_k}^2 - s_j^2)`.
    pub fn coupling(&self) -> &DenseTensor {
        &self.coupling
    }

    /// Per mode, `sum_{j != a} 1 / (s_a^2 - s_j^2)`.
    pub fn gap_sums(&self) -> &[Vec<f64>] {
        &self.gap_sums
    }

    pub fn dims(&self) -> &[usize] {
        self.c_array.dims()
    }

    /// `H_k . S^2` summed over all entries, for one mode.
    pub fn h_term(&self, weights: &[Vec<f64>], slopes: &[f64], mode: usize) -> f64 {
        let ws: Vec<&[f64]> = (0..weights.len())
            .map(|j| if j == mode { slopes } else { weights[j].as_slice() })
            .collect();
        contract(self.core_sq.values(), self.dims(), &ws)
    }

    /// Divergence at unit scale from per-mode weights `g_k = f/sigma` and
    /// Jacobian diagonals `df/dsigma`.
    pub fn divergence_from(&self, weights: &[Vec<f64>], jacobians: &[Vec<f64>]) -> f64 {
        let ws: Vec<&[f64]> = weights.iter().map(Vec::as_slice).collect();
        let mut total = contract(self.c_array.values(), self.dims(), &ws);
        for (k, jac) in jacobians.iter().enumerate() {
            let slopes: Vec<f64> = jac
                .iter()
                .zip(&self.singular_values[k])
                .map(|(j, s)| j / (s * s))
                .collect();
            total += self.h_term(weights, &slopes, k);
        }
        total
    }
}

fn check_kinks(d: &HosvdDecomposition, plan: &ShrinkagePlan) -> Result<()> {
    for (k, (f, sv)) in plan.per_mode().iter().zip(d.mode_singular_values()).enumerate() {
        if let Some(threshold) = f.kink() {
            let tol = KINK_RTOL * sv[0];
            if let Some(&sigma) = sv.iter().find(|&&s| (s - threshold).abs() <= tol) {
                return Err(HoseError::ThresholdAtKink {
                    mode: k,
                    sigma,
                    threshold,
                });
            }
        }
    }
    Ok(())
}

fn divergence_with(ws: &DivergenceWorkspace, d: &HosvdDecomposition, plan: &ShrinkagePlan) -> Result<f64> {
    plan.validate_for(d)?;
    check_kinks(d, plan)?;
    let weights = plan.mode_weights(d);
    let jacobians: Vec<Vec<f64>> = plan
        .per_mode()
        .iter()
        .zip(d.mode_singular_values())
        .map(|(f, sv)| f.jacobian_diagonal(sv))
        .collect();
    let div = plan.scale() * ws.divergence_from(&weights, &jacobians);
    if !div.is_finite() {
        return Err(HoseError::NonFinite);
    }
    Ok(div)
}

/// Closed-form divergence for plans whose functions act on each singular
/// value separately.
pub fn divergence_spectral(d: &HosvdDecomposition, plan: &ShrinkagePlan) -> Result<f64> {
    if let Some(f) = plan.per_mode().iter().find(|f| !f.is_elementwise()) {
        return Err(HoseError::InvalidParameter(format!(
            "{f:?} uses the whole spectrum; use divergence_full_spectrum"
        )));
    }
    divergence_with(&DivergenceWorkspace::new(d), d, plan)
}

/// Closed-form divergence for any plan, including functions of the whole
/// mode spectrum (Stein, improved Efron-Morris).
pub fn divergence_full_spectrum(d: &HosvdDecomposition, plan: &ShrinkagePlan) -> Result<f64> {
    divergence_with(&DivergenceWorkspace::new(d), d, plan)
}

fn check_tau2(tau2: f64) -> Result<()> {
    if !(tau2 > 0.0 && tau2.is_finite()) {
        return Err(HoseError::InvalidParameter(format!("tau2 must be positive, got {tau2}")));
    }
    Ok(())
}

pub fn sure_spectral(d: &HosvdDecomposition, plan: &ShrinkagePlan, tau2: f64) -> Result<RiskEstimate> {
    sure_spectral_with(&DivergenceWorkspace::new(d), d, plan, tau2)
}

/// [`sure_spectral`] reusing a prebuilt workspace.
pub fn sure_spectral_with(
    ws: &DivergenceWorkspace,
    d: &HosvdDecomposition,
    plan: &ShrinkagePlan,
    tau2: f64,
) -> Result<RiskEstimate> {
    check_tau2(tau2)?;
    let divergence = divergence_with(ws, d, plan)?;
    let fit = apply_spectral(d, plan)?.distance_sq(d.data())?;
    Ok(RiskEstimate::new(fit, divergence, tau2, d.len()))
}

/// Divergence of `U . g(S)` with `g` soft-thresholding every core entry.
pub fn divergence_core_shrinkage(d: &HosvdDecomposition, plan: &CoreShrinkagePlan) -> Result<f64> {
    let ws = DivergenceWorkspace::new(d);
    let lambda = plan.lambda();
    if lambda > 0.0 {
        let top = d.core().values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if let Some(&s) = d
            .core()
            .values()
            .iter()
            .find(|s| (s.abs() - lambda).abs() <= KINK_RTOL * top)
        {
            return Err(HoseError::ThresholdAtKink {
                mode: 0,
                sigma: s,
                threshold: lambda,
            });
        }
    }
    let dims = d.dims();
    let gaps = ws.gap_sums();
    let gap_total = DenseTensor::from_fn(dims, |ix| ix.iter().enumerate().map(|(k, &i)| gaps[k][i]).sum())?;
    let div: f64 = d
        .core()
        .values()
        .iter()
        .zip(gap_total.values())
        .zip(ws.coupling().values())
        .map(|((&s, &a), &t)| s * plan.shrink(s) * a + plan.derivative(s) * (1.0 + t))
        .sum();
    if !div.is_finite() {
        return Err(HoseError::NonFinite);
    }
    Ok(div)
}

pub fn sure_core_shrinkage(d: &HosvdDecomposition, plan: &CoreShrinkagePlan, tau2: f64) -> Result<RiskEstimate> {
    check_tau2(tau2)?;
    let divergence = divergence_core_shrinkage(d, plan)?;
    let fit = apply_core_shrinkage(d, plan)?.distance_sq(d.data())?;
    Ok(RiskEstimate::new(fit, divergence, tau2, d.len()))
}

/// Central finite-difference divergence `sum_i (t(x + eps e_i)_i - t(x - eps e_i)_i) / (2 eps)`.
pub fn divergence_fd<F>(x: &DenseTensor, estimator: F, eps: f64) -> Result<f64>
where
    F: Fn(&DenseTensor) -> Result<DenseTensor> + Sync,
{
    if !(eps > 0.0) {
        return Err(HoseError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let terms: Vec<f64> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let mut up = x.clone();
            up.values_mut()[i] += eps;
            let mut down = x.clone();
            down.values_mut()[i] -= eps;
            let hi = estimator(&up)?.values()[i];
            let lo = estimator(&down)?.values()[i];
            Ok((hi - lo) / (2.0 * eps))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(terms.iter().sum())
}

/// Divergence of the matrix estimator `U f(Sigma) V^T` for an `m x n`
/// matrix (`m <= n` after orientation):
///
/// `sum_i [f'(s_i) + (n - m) f(s_i) / s_i] + 2 sum_{i != j} s_i f(s_i) / (s_i^2 - s_j^2)`.
pub fn divergence_matrix(svd: &MatrixSvd, f: &SpectralFunction) -> Result<f64> {
    let sv = &svd.singular_values;
    if let Some(threshold) = f.kink() {
        if let Some(&sigma) = sv.iter().find(|&&s| (s - threshold).abs() <= KINK_RTOL * sv[0]) {
            return Err(HoseError::ThresholdAtKink {
                mode: 0,
                sigma,
                threshold,
            });
        }
    }
    let (m, n) = svd.shape();
    let fs = f.apply(sv);
    let jac = f.jacobian_diagonal(sv);
    let extra = (n - m) as f64;
    let mut div = 0.0;
    for i in 0..sv.len() {
        div += jac[i] + extra * fs[i] / sv[i];
        for j in 0..sv.len() {
            if j != i {
                div += 2.0 * sv[i] * fs[i] / (sv[i] * sv[i] - sv[j] * sv[j]);
            }
        }
    }
    if !div.is_finite() {
        return Err(HoseError::NonFinite);
    }
    Ok(div)
}

/// SURE of a matrix spectral estimator; the fit is computed from the spectrum.
pub fn sure_matrix(svd: &MatrixSvd, f: &SpectralFunction, tau2: f64) -> Result<RiskEstimate> {
    check_tau2(tau2)?;
    let divergence = divergence_matrix(svd, f)?;
    let fit = f
        .apply(&svd.singular_values)
        .iter()
        .zip(&svd.singular_values)
        .map(|(a, s)| (a - s) * (a - s))
        .sum();
    let (m, n) = svd.shape();
    Ok(RiskEstimate::new(fit, divergence, tau2, m * n))
}
