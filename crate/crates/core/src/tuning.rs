//! SURE-driven selection of tuning parameters.

use rayon::prelude::*;

use crate::error::{HoseError, Result};
use crate::hosvd::{hosvd, hosvd_with, HosvdDecomposition, HosvdOptions};
use crate::minimize::{brent, grid_brent};
use crate::risk::{
    contract, sure_matrix, sure_spectral, DivergenceWorkspace, Objective, RiskEstimate, KINK_RTOL,
};
use crate::shrinkage::{MatrixFamily, MatrixSvd, ShrinkagePlan, SpectralFunction};
use crate::tensor::DenseTensor;

/// Smallest scale a tuner will return.
pub const MIN_SCALE: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct TuningOptions {
    pub objective: Objective,
    pub max_sweeps: usize,
    /// Stop when a sweep improves the objective by less than `rtol * |objective|`.
    pub rtol: f64,
    pub grid_points: usize,
    /// Evaluation budget per coordinate.
    pub max_evals: usize,
    /// Brent tolerance relative to `sigma_1` of the mode.
    pub lambda_rtol: f64,
}

impl Default for TuningOptions {
    fn default() -> Self {
        Self {
            objective: Objective::Sure,
            max_sweeps: 50,
            rtol: 1e-8,
            grid_points: 41,
            max_evals: 200,
            lambda_rtol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub lambdas: Vec<f64>,
    pub scale: f64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct TuningResult {
    pub plan: ShrinkagePlan,
    /// SURE at `plan`, recomputed with [`sure_spectral`].
    pub sure_value: f64,
    pub risk: RiskEstimate,
    pub objective: Objective,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
}

impl TuningResult {
    pub fn ranks(&self) -> Option<Vec<usize>> {
        self.plan.ranks()
    }
}

/// Fast SURE/GSURE for soft-threshold plans. Fit and divergence are sums
/// over the core, so one evaluation costs a handful of contractions.
pub struct SoftEvaluator<'a> {
    d: &'a HosvdDecomposition,
    ws: DivergenceWorkspace,
    energy: f64,
    tau2: f64,
}

/// Per-evaluation sums for a fixed set of thresholds.
#[derive(Debug, Clone, Copy)]
struct SoftSums {
    /// `sum S^2 F^2`
    a: f64,
    /// `sum S^2 F`
    b: f64,
    /// divergence at unit scale
    div1: f64,
}

impl<'a> SoftEvaluator<'a> {
    pub fn new(d: &'a HosvdDecomposition, tau2: f64) -> Self {
        let energy = d.core().frobenius_norm_sq();
        Self {
            d,
            ws: DivergenceWorkspace::new(d),
            energy,
            tau2,
        }
    }

    fn sums(&self, lambdas: &[f64]) -> SoftSums {
        let sv = self.d.mode_singular_values();
        let g: Vec<Vec<f64>> = lambdas
            .iter()
            .zip(sv)
            .map(|(&l, s)| s.iter().map(|&s| (s - l).max(0.0) / s).collect())
            .collect();
        let g2: Vec<Vec<f64>> = g.iter().map(|w| w.iter().map(|v| v * v).collect()).collect();
        let jac: Vec<Vec<f64>> = lambdas
            .iter()
            .zip(sv)
            .map(|(&l, s)| s.iter().map(|&s| if s > l { 1.0 } else { 0.0 }).collect())
            .collect();
        let dims = self.d.dims();
        let gr: Vec<&[f64]> = g.iter().map(Vec::as_slice).collect();
        let g2r: Vec<&[f64]> = g2.iter().map(Vec::as_slice).collect();
        SoftSums {
            a: contract(self.ws.core_sq().values(), dims, &g2r),
            b: contract(self.ws.core_sq().values(), dims, &gr),
            div1: self.ws.divergence_from(&g, &jac),
        }
    }

    fn risk_from(&self, s: SoftSums, scale: f64) -> RiskEstimate {
        let fit = (scale * scale * s.a - 2.0 * scale * s.b + self.energy).max(0.0);
        RiskEstimate::new(fit, scale * s.div1, self.tau2, self.d.len())
    }

    /// Risk estimate of the soft plan `(lambdas, scale)`.
    pub fn risk(&self, lambdas: &[f64], scale: f64) -> RiskEstimate {
        self.risk_from(self.sums(lambdas), scale)
    }

    /// SURE-optimal scale `(b - d - e) / a` for fixed thresholds.
    pub fn optimal_scale(&self, lambdas: &[f64]) -> Result<f64> {
        let s = self.sums(lambdas);
        if s.a == 0.0 {
            return Err(HoseError::EmptyActiveSet);
        }
        Ok((s.b - self.tau2 * s.div1) / s.a)
    }

    /// Best scale for the objective with the thresholds held fixed.
    fn best_scale(&self, lambdas: &[f64], objective: Objective) -> Option<f64> {
        let s = self.sums(lambdas);
        if s.a == 0.0 {
            return None;
        }
        match objective {
            Objective::Sure => Some(((s.b - self.tau2 * s.div1) / s.a).max(MIN_SCALE)),
            Objective::Gsure => {
                let m = brent(
                    |c| self.risk_from(s, c).gsure.unwrap_or(f64::INFINITY),
                    1e-6,
                    2.0,
                    1e-9,
                    200,
                );
                Some(m.x)
            }
        }
    }
}

fn objective_value(r: &RiskEstimate, objective: Objective) -> f64 {
    r.objective(objective).unwrap_or(f64::INFINITY)
}

/// Moves `lambda` off any singular value it sits on.
fn nudge_off_kinks(lambda: f64, sv: &[f64]) -> f64 {
    let step = KINK_RTOL * sv[0];
    let mut l = lambda;
    while sv.iter().any(|&s| (s - l).abs() <= step) {
        l += step;
    }
    l
}

/// `(b - d - e) / a` for a soft-threshold plan. The value may be non-positive
/// when the noise dominates the retained signal.
pub fn closed_form_scale(d: &HosvdDecomposition, plan: &ShrinkagePlan, tau2: f64) -> Result<f64> {
    plan.validate_for(d)?;
    let lambdas = plan
        .soft_lambdas()
        .ok_or_else(|| HoseError::InvalidParameter("closed-form scale needs a soft-threshold plan".into()))?;
    if !(tau2 > 0.0) {
        return Err(HoseError::InvalidParameter(format!("tau2 must be positive, got {tau2}")));
    }
    SoftEvaluator::new(d, tau2).optimal_scale(&lambdas)
}

/// Mode-specific soft-thresholding tuned by cyclic coordinate descent over
/// `lambda_1, ..., lambda_K, c`.
pub fn optimize_soft_threshold(x: &DenseTensor, tau2: f64, opts: &TuningOptions) -> Result<TuningResult> {
    let d = hosvd(x)?;
    optimize_soft_threshold_decomposed(&d, tau2, opts)
}

pub fn optimize_soft_threshold_decomposed(
    d: &HosvdDecomposition,
    tau2: f64,
    opts: &TuningOptions,
) -> Result<TuningResult> {
    if !(tau2 > 0.0 && tau2.is_finite()) {
        return Err(HoseError::InvalidParameter(format!("tau2 must be positive, got {tau2}")));
    }
    let eval = SoftEvaluator::new(d, tau2);
    let sv = d.mode_singular_values();
    let order = d.order();
    let obj = opts.objective;

    let mut lambdas = vec![0.0; order];
    let mut scale = 1.0;
    let mut best = objective_value(&eval.risk(&lambdas, scale), obj);
    if !best.is_finite() && obj == Objective::Sure {
        return Err(HoseError::NonFinite);
    }
    let mut trace = vec![TraceEntry {
        lambdas: lambdas.clone(),
        scale,
        value: best,
    }];
    let mut converged = false;

    for _ in 0..opts.max_sweeps {
        let start = best;
        for k in 0..order {
            let top = sv[k][0];
            let probe = |l: f64, lambdas: &[f64]| {
                let mut ls = lambdas.to_vec();
                ls[k] = nudge_off_kinks(l, &sv[k]);
                objective_value(&eval.risk(&ls, scale), obj)
            };
            let tol = opts.lambda_rtol * top;
            let mut m = grid_brent(|l| probe(l, &lambdas), -top, top, opts.grid_points, tol, opts.max_evals);
            if m.x <= -top + (2.0 * top) / (opts.grid_points.max(3) - 1) as f64 {
                let wide = grid_brent(|l| probe(l, &lambdas), -10.0 * top, -top, opts.grid_points, tol, opts.max_evals);
                if wide.fx < m.fx {
                    m = wide;
                }
            }
            if m.fx < best {
                lambdas[k] = nudge_off_kinks(m.x, &sv[k]);
                best = objective_value(&eval.risk(&lambdas, scale), obj);
                trace.push(TraceEntry {
                    lambdas: lambdas.clone(),
                    scale,
                    value: best,
                });
            }
        }
        if let Some(c) = eval.best_scale(&lambdas, obj) {
            let v = objective_value(&eval.risk(&lambdas, c), obj);
            if v < best {
                scale = c;
                best = v;
                trace.push(TraceEntry {
                    lambdas: lambdas.clone(),
                    scale,
                    value: best,
                });
            }
        }
        if !best.is_finite() {
            return Err(HoseError::NonFinite);
        }
        if start - best < opts.rtol * best.abs() {
            converged = true;
            break;
        }
    }

    let plan = ShrinkagePlan::soft(&lambdas, scale)?;
    let risk = sure_spectral(d, &plan, tau2)?;
    Ok(TuningResult {
        plan,
        sure_value: risk.sure,
        risk,
        objective: obj,
        trace,
        converged,
    })
}

/// Inclusive prefix sums along every mode.
fn prefix_sums(values: &[f64], dims: &[usize]) -> Vec<f64> {
    let mut out = values.to_vec();
    let mut stride = 1;
    for &pk in dims {
        let block = stride * pk;
        for start in (0..out.len()).step_by(block) {
            for i in 1..pk {
                for s in 0..stride {
                    let cur = start + i * stride + s;
                    out[cur] += out[cur - stride];
                }
            }
        }
        stride = block;
    }
    out
}

fn rank_offset(ranks: &[usize], dims: &[usize]) -> usize {
    let mut off = 0;
    let mut stride = 1;
    for (&r, &pk) in ranks.iter().zip(dims) {
        off += (r - 1) * stride;
        stride *= pk;
    }
    off
}

/// Every rank tuple with each `r_k` in `1..=p_k`, mode 1 fastest.
pub fn rank_tuples(dims: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = dims.iter().product();
    (0..total)
        .map(|mut idx| {
            dims.iter()
                .map(|&pk| {
                    let r = idx % pk + 1;
                    idx /= pk;
                    r
                })
                .collect()
        })
        .collect()
}

/// SURE of the truncated HOSVD at every rank tuple, in [`rank_tuples`] order.
pub fn rank_risk_table(d: &HosvdDecomposition, tau2: f64) -> Vec<(Vec<usize>, RiskEstimate)> {
    let ws = DivergenceWorkspace::new(d);
    let dims = d.dims();
    let sv = d.mode_singular_values();
    let inv_sq: Vec<Vec<f64>> = sv.iter().map(|s| s.iter().map(|v| 1.0 / (v * v)).collect()).collect();
    // divergence contribution of each retained core entry
    let g: Vec<f64> = DenseTensor::from_fn(dims, |ix| ix.iter().enumerate().map(|(k, &i)| inv_sq[k][i]).sum())
        .expect("valid dims")
        .values()
        .iter()
        .zip(ws.core_sq().values())
        .zip(ws.c_array().values())
        .map(|((w, s2), c)| c + s2 * w)
        .collect();
    let kept_energy = prefix_sums(ws.core_sq().values(), dims);
    let kept_div = prefix_sums(&g, dims);
    let energy = d.core().frobenius_norm_sq();
    rank_tuples(dims)
        .into_par_iter()
        .map(|r| {
            let off = rank_offset(&r, dims);
            let fit = (energy - kept_energy[off]).max(0.0);
            let risk = RiskEstimate::new(fit, kept_div[off], tau2, d.len());
            (r, risk)
        })
        .collect()
}

/// Exhaustive SURE search over multilinear ranks of the truncated HOSVD.
/// Ties go to the smaller total rank, then to the lexicographically smaller
/// tuple.
pub fn select_rank(x: &DenseTensor, tau2: f64, objective: Objective) -> Result<TuningResult> {
    select_rank_with(x, tau2, objective, HosvdOptions::default())
}

pub fn select_rank_with(
    x: &DenseTensor,
    tau2: f64,
    objective: Objective,
    opts: HosvdOptions,
) -> Result<TuningResult> {
    let d = hosvd_with(x, opts)?;
    select_rank_decomposed(&d, tau2, objective)
}

pub fn select_rank_decomposed(d: &HosvdDecomposition, tau2: f64, objective: Objective) -> Result<TuningResult> {
    if !(tau2 > 0.0 && tau2.is_finite()) {
        return Err(HoseError::InvalidParameter(format!("tau2 must be positive, got {tau2}")));
    }
    let table = rank_risk_table(d, tau2);
    let key = |r: &Vec<usize>| (r.iter().sum::<usize>(), r.clone());
    let (ranks, _) = table
        .iter()
        .filter_map(|(r, risk)| risk.objective(objective).map(|v| (r, v)))
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| key(a.0).cmp(&key(b.0))))
        .ok_or(match objective {
            Objective::Sure => HoseError::NonFinite,
            Objective::Gsure => HoseError::GsureUndefined {
                divergence: d.len() as f64,
                p: d.len(),
            },
        })?;
    let plan = ShrinkagePlan::truncation(ranks)?;
    let risk = sure_spectral(d, &plan, tau2)?;
    let value = risk.objective(objective).unwrap_or(f64::INFINITY);
    Ok(TuningResult {
        plan,
        sure_value: risk.sure,
        risk,
        objective,
        trace: vec![TraceEntry {
            lambdas: Vec::new(),
            scale: 1.0,
            value,
        }],
        converged: true,
    })
}

/// A matrix estimator with its SURE-tuned parameter.
#[derive(Debug, Clone)]
pub struct MatrixTuning {
    pub family: MatrixFamily,
    pub lambda: f64,
    pub risk: RiskEstimate,
}

/// Tunes a matrix family on the mode-1 unfolding: soft thresholds over
/// `[0, sigma_1]`, Efron-Morris constants over `[0, sigma_1^2]`.
pub fn tune_matrix_baseline(
    x: &DenseTensor,
    family: MatrixFamily,
    tau2: f64,
    objective: Objective,
) -> Result<MatrixTuning> {
    let svd = MatrixSvd::new(&x.matricize(0)?)?;
    let top = svd.singular_values[0];
    let hi = match family {
        MatrixFamily::SoftThreshold => top,
        MatrixFamily::EfronMorris => top * top,
    };
    let tuned_fn = |l: f64| -> SpectralFunction {
        let l = match family {
            MatrixFamily::SoftThreshold => nudge_off_kinks(l, &svd.singular_values),
            MatrixFamily::EfronMorris => l,
        };
        family.function(l)
    };
    let value = |l: f64| {
        sure_matrix(&svd, &tuned_fn(l), tau2)
            .ok()
            .and_then(|r| r.objective(objective))
            .unwrap_or(f64::INFINITY)
    };
    let m = grid_brent(value, 0.0, hi, 41, 1e-6 * hi, 200);
    let f = tuned_fn(m.x);
    let lambda = match f {
        SpectralFunction::SoftThreshold { lambda } | SpectralFunction::EfronMorris { lambda } => lambda,
        _ => unreachable!("matrix families are soft or Efron-Morris"),
    };
    let risk = sure_matrix(&svd, &f, tau2)?;
    Ok(MatrixTuning { family, lambda, risk })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shrinkage::{apply_spectral, truncated_hosvd};
    use crate::tensor::test_util::*;
    use crate::tensor::DenseMatrix;

    #[test]
    fn prefix_sums_match_brute_force() {
        let t = gaussian_tensor(&[3, 4, 2], 1);
        let ps = prefix_sums(t.values(), t.dims());
        for r in rank_tuples(t.dims()) {
            let mut brute = 0.0;
            for i in 0..r[0] {
                for j in 0..r[1] {
                    for k in 0..r[2] {
                        brute += t.get(&[i, j, k]);
                    }
                }
            }
            assert!((ps[rank_offset(&r, t.dims())] - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_table_matches_sure_spectral() {
        let x = gaussian_tensor(&[3, 4, 5], 2);
        let d = hosvd(&x).unwrap();
        for (r, risk) in rank_risk_table(&d, 0.8) {
            let direct = sure_spectral(&d, &ShrinkagePlan::truncation(&r).unwrap(), 0.8).unwrap();
            assert!((risk.sure - direct.sure).abs() < 1e-9 * direct.sure.abs().max(1.0), "{r:?}");
            assert!((risk.divergence - direct.divergence).abs() < 1e-9 * direct.divergence.abs().max(1.0));
        }
    }

    #[test]
    fn select_rank_is_table_minimum() {
        let x = gaussian_tensor(&[4, 4, 4], 3);
        let res = select_rank(&x, 0.5, Objective::Sure).unwrap();
        let d = hosvd(&x).unwrap();
        let min = rank_risk_table(&d, 0.5)
            .iter()
            .map(|(_, r)| r.sure)
            .fold(f64::INFINITY, f64::min);
        assert!((res.sure_value - min).abs() < 1e-9 * min.abs().max(1.0));
    }

    #[test]
    fn recovers_noiseless_rank() {
        let core = gaussian_tensor(&[2, 3, 4], 4);
        let fs: Vec<DenseMatrix> = [6, 6, 6]
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let q = random_orthogonal(p, 40 + k as u64);
                DenseMatrix::from_fn(p, core.dims()[k], |i, j| q.get(i, j))
            })
            .collect();
        let theta = core.tucker(&fs).unwrap();
        // far below the noise level implied by tau2, only there to keep every mode full rank
        let x = theta.add(&gaussian_tensor(&[6, 6, 6], 5).scale(1e-9)).unwrap();
        let loose = HosvdOptions {
            rank_rtol: 0.0,
            tie_rtol: 0.0,
        };
        let res = select_rank_with(&x, 1e-12, Objective::Sure, loose).unwrap();
        assert_eq!(res.ranks().unwrap(), vec![2, 3, 4]);
        let est = truncated_hosvd(&hosvd_with(&x, loose).unwrap(), &[2, 3, 4]).unwrap();
        assert!(est.distance_sq(&theta).unwrap() < 1e-9);
    }

    #[test]
    fn closed_form_scale_beats_grid() {
        for seed in 0..5 {
            let x = gaussian_tensor(&[4, 4, 4], 100 + seed);
            let d = hosvd(&x).unwrap();
            let lambdas: Vec<f64> = (0..3).map(|k| 0.3 * d.singular_values(k)[0]).collect();
            let plan = ShrinkagePlan::soft(&lambdas, 1.0).unwrap();
            let c = closed_form_scale(&d, &plan, 0.5).unwrap();
            let at = |c: f64| sure_spectral(&d, &plan.with_scale(c).unwrap(), 0.5).unwrap().sure;
            let best = at(c);
            for i in 1..=200 {
                assert!(best <= at(0.01 * i as f64) + 1e-9 * best.abs());
            }
        }
    }

    #[test]
    fn identity_plan_scale_near_one() {
        let x = gaussian_tensor(&[3, 4, 5], 6);
        let d = hosvd(&x).unwrap();
        let c = closed_form_scale(&d, &ShrinkagePlan::soft(&[0.0; 3], 1.0).unwrap(), 1e-14).unwrap();
        assert!((c - 1.0).abs() < 1e-10);
        let all = ShrinkagePlan::soft(&[1e6; 3], 1.0).unwrap();
        assert!(matches!(closed_form_scale(&d, &all, 1.0), Err(HoseError::EmptyActiveSet)));
    }

    #[test]
    fn evaluator_matches_sure_spectral() {
        let x = gaussian_tensor(&[3, 4, 5], 7);
        let d = hosvd(&x).unwrap();
        let eval = SoftEvaluator::new(&d, 0.7);
        let lambdas = [0.4, -0.2, 1.1];
        let fast = eval.risk(&lambdas, 0.85);
        let slow = sure_spectral(&d, &ShrinkagePlan::soft(&lambdas, 0.85).unwrap(), 0.7).unwrap();
        assert!((fast.sure - slow.sure).abs() < 1e-9 * slow.sure.abs());
    }

    #[test]
    fn descent_is_monotone_and_locally_optimal() {
        let x = gaussian_tensor(&[5, 5, 5], 8);
        let res = optimize_soft_threshold(&x, 1.0, &TuningOptions::default()).unwrap();
        for w in res.trace.windows(2) {
            assert!(w[1].value <= w[0].value);
        }
        let d = hosvd(&x).unwrap();
        let lambdas = res.plan.soft_lambdas().unwrap();
        let c = res.plan.scale();
        let sure = |ls: &[f64], c: f64| match sure_spectral(&d, &ShrinkagePlan::soft(ls, c).unwrap(), 1.0) {
            Ok(r) => r.sure,
            Err(_) => f64::INFINITY,
        };
        let base = res.sure_value;
        assert_eq!(base, sure(&lambdas, c));
        for k in 0..3 {
            for sign in [-1.0, 1.0] {
                let mut ls = lambdas.clone();
                ls[k] += sign * 0.01 * d.singular_values(k)[0];
                assert!(sure(&ls, c) >= base - 1e-9 * base.abs(), "mode {k} sign {sign}");
            }
        }
        for f in [0.99, 1.01] {
            assert!(sure(&lambdas, c * f) >= base - 1e-9 * base.abs());
        }
    }

    #[test]
    fn pure_noise_goes_to_zero() {
        let x = gaussian_tensor(&[4, 4, 4], 9).scale(0.05);
        let res = optimize_soft_threshold(&x, 1.0, &TuningOptions::default()).unwrap();
        let d = hosvd(&x).unwrap();
        let est = apply_spectral(&d, &res.plan).unwrap();
        assert!(est.frobenius_norm_sq() < 1e-6 * x.frobenius_norm_sq());
        let target = x.frobenius_norm_sq() - 64.0;
        assert!((res.sure_value - target).abs() < 1e-6 * target.abs());
    }

    #[test]
    fn deterministic() {
        let x = gaussian_tensor(&[4, 5, 3], 10);
        let a = optimize_soft_threshold(&x, 1.0, &TuningOptions::default()).unwrap();
        let b = optimize_soft_threshold(&x, 1.0, &TuningOptions::default()).unwrap();
        assert_eq!(a.plan, b.plan);
        assert_eq!(a.sure_value.to_bits(), b.sure_value.to_bits());
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn gsure_objective_runs() {
        let x = gaussian_tensor(&[4, 4, 4], 11);
        let opts = TuningOptions {
            objective: Objective::Gsure,
            ..TuningOptions::default()
        };
        let res = optimize_soft_threshold(&x, 1.0, &opts).unwrap();
        assert!(res.risk.gsure.is_some());
        let r = select_rank(&x, 1.0, Objective::Gsure).unwrap();
        assert!(r.risk.gsure.is_some());
    }

    #[test]
    fn matrix_tuning_beats_endpoints() {
        let x = gaussian_tensor(&[4, 3, 3], 12);
        for family in [MatrixFamily::SoftThreshold, MatrixFamily::EfronMorris] {
            let t = tune_matrix_baseline(&x, family, 1.0, Objective::Sure).unwrap();
            let svd = MatrixSvd::new(&x.matricize(0).unwrap()).unwrap();
            let id = sure_matrix(&svd, &family.function(0.0), 1.0).unwrap();
            assert!(t.risk.sure <= id.sure + 1e-12);
        }
    }
}
