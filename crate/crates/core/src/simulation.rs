//! Simulated mean tensors and Monte Carlo comparisons of the estimators.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`. The mean
//! tensor is drawn from stream 0 and replicate `r` uses stream `r + 1`, so a
//! replicate's noise does not depend on how replicates are scheduled.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{HoseError, Result};
use crate::hosvd::hosvd;
use crate::risk::Objective;
use crate::shrinkage::{
    apply_spectral, james_stein, matrix_baseline, MatrixFamily, MatrixSvd, SpectralFunction,
};
use crate::tensor::{DenseMatrix, DenseTensor};
use crate::tuning::{
    optimize_soft_threshold_decomposed, select_rank_decomposed, tune_matrix_baseline, TuningOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// i.i.d. standard normal entries
    A,
    /// mode-1 covariance `diag(1^2, ..., 10^2)`
    B,
    /// AR(1) mode-1 covariance
    C,
    /// mode-1 unfolding of rank 5
    D,
    /// `diag(1^2, ..., 10^2)` covariance on every mode
    E,
    /// multilinear rank 5 on every mode with equal nonzero singular values
    F,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::A,
        Scenario::B,
        Scenario::C,
        Scenario::D,
        Scenario::E,
        Scenario::F,
    ];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Scenario {
    type Err = HoseError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(Scenario::A),
            "B" => Ok(Scenario::B),
            "C" => Ok(Scenario::C),
            "D" => Ok(Scenario::D),
            "E" => Ok(Scenario::E),
            "F" => Ok(Scenario::F),
            _ => Err(HoseError::InvalidParameter(format!("unknown scenario {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub dims: Vec<usize>,
    pub target_norm_sq: f64,
    pub ar_rho: f64,
    pub seed: u64,
}

/// Rank used by scenarios D and F.
pub const LOW_RANK: usize = 5;

impl ScenarioSpec {
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        Self {
            scenario,
            dims: vec![10, 10, 10],
            target_norm_sq: 1000.0,
            ar_rho: 0.7,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(HoseError::InvalidParameter(format!("bad dims {:?}", self.dims)));
        }
        if !(self.target_norm_sq > 0.0 && self.target_norm_sq.is_finite()) {
            return Err(HoseError::InvalidParameter(format!(
                "target norm must be positive, got {}",
                self.target_norm_sq
            )));
        }
        if !(self.ar_rho.abs() < 1.0) {
            return Err(HoseError::InvalidParameter(format!("AR coefficient {} must lie in (-1, 1)", self.ar_rho)));
        }
        let needs_rank = matches!(self.scenario, Scenario::D | Scenario::F);
        if needs_rank && self.dims.iter().any(|&d| d < LOW_RANK) {
            return Err(HoseError::InvalidParameter(format!(
                "scenario {} needs every dimension >= {LOW_RANK}",
                self.scenario
            )));
        }
        Ok(())
    }
}

/// Generator for the mean tensor.
pub fn theta_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for replicate `rep`.
pub fn replicate_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep + 1);
    rng
}

fn gaussian_tensor<R: Rng>(dims: &[usize], rng: &mut R) -> Result<DenseTensor> {
    DenseTensor::from_fn(dims, |_| rng.sample(StandardNormal))
}

fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let values = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DenseMatrix::new(rows, cols, values).expect("sized values")
}

/// `diag(1, ..., n)`, the square root of `diag(1^2, ..., n^2)`.
fn linear_scales(n: usize) -> DenseMatrix {
    let d: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    DenseMatrix::diagonal(&d)
}

pub fn ar1_covariance(n: usize, rho: f64) -> DenseMatrix {
    DenseMatrix::from_fn(n, n, |i, j| rho.powi((i as i32 - j as i32).abs()))
}

/// Covariance of each mode-1 fiber of the unscaled scenario B, C or E mean,
/// taken at fiber `(0, ..., 0)`.
pub fn mode1_covariance(scenario: Scenario, p1: usize, rho: f64) -> Option<DenseMatrix> {
    match scenario {
        Scenario::B | Scenario::E => {
            let d: Vec<f64> = (1..=p1).map(|i| (i * i) as f64).collect();
            Some(DenseMatrix::diagonal(&d))
        }
        Scenario::C => Some(ar1_covariance(p1, rho)),
        _ => None,
    }
}

fn lower_cholesky(m: &DenseMatrix) -> Result<DenseMatrix> {
    let chol = m
        .to_nalgebra()
        .cholesky()
        .ok_or_else(|| HoseError::InvalidParameter("covariance is not positive definite".into()))?;
    Ok(DenseMatrix::from_nalgebra(&chol.l()))
}

fn orthonormal_columns<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let g = gaussian_matrix(rows, cols, rng).to_nalgebra();
    DenseMatrix::from_nalgebra(&g.qr().q())
}

/// The scenario mean before rescaling.
pub fn raw_mean<R: Rng>(spec: &ScenarioSpec, rng: &mut R) -> Result<DenseTensor> {
    spec.validate()?;
    let dims = &spec.dims;
    let p1 = dims[0];
    match spec.scenario {
        Scenario::A => gaussian_tensor(dims, rng),
        Scenario::B => gaussian_tensor(dims, rng)?.mode_multiply(&linear_scales(p1), 0),
        Scenario::C => {
            let l = lower_cholesky(&ar1_covariance(p1, spec.ar_rho))?;
            gaussian_tensor(dims, rng)?.mode_multiply(&l, 0)
        }
        Scenario::D => {
            let p: usize = dims.iter().product();
            let m = gaussian_matrix(p1, p / p1, rng);
            let low = MatrixSvd::new(&m)?.apply(&SpectralFunction::Truncation { rank: LOW_RANK });
            DenseTensor::dematricize(&low, 0, dims)
        }
        Scenario::E => {
            let scales: Vec<DenseMatrix> = dims.iter().map(|&d| linear_scales(d)).collect();
            gaussian_tensor(dims, rng)?.tucker(&scales)
        }
        Scenario::F => {
            let core_dims = vec![LOW_RANK; dims.len()];
            let core = DenseTensor::from_fn(&core_dims, |ix| {
                if ix.iter().all(|&i| i == ix[0]) {
                    1.0
                } else {
                    0.0
                }
            })?;
            let factors: Vec<DenseMatrix> = dims.iter().map(|&d| orthonormal_columns(d, LOW_RANK, rng)).collect();
            core.tucker(&factors)
        }
    }
}

/// The scenario mean rescaled to squared norm `target_norm_sq`.
pub fn generate_mean(spec: &ScenarioSpec) -> Result<DenseTensor> {
    generate_mean_with(spec, &mut theta_rng(spec.seed))
}

pub fn generate_mean_with<R: Rng>(spec: &ScenarioSpec, rng: &mut R) -> Result<DenseTensor> {
    let raw = raw_mean(spec, rng)?;
    let norm_sq = raw.frobenius_norm_sq();
    if norm_sq == 0.0 {
        return Err(HoseError::NonFinite);
    }
    Ok(raw.scale((spec.target_norm_sq / norm_sq).sqrt()))
}

/// `theta + tau Z` with `Z` drawn from the replicate-0 stream of `seed`.
pub fn add_noise(theta: &DenseTensor, tau2: f64, seed: u64) -> Result<DenseTensor> {
    add_noise_with(theta, tau2, &mut replicate_rng(seed, 0))
}

pub fn add_noise_with<R: Rng>(theta: &DenseTensor, tau2: f64, rng: &mut R) -> Result<DenseTensor> {
    if !(tau2 >= 0.0 && tau2.is_finite()) {
        return Err(HoseError::InvalidParameter(format!("tau2 must be >= 0, got {tau2}")));
    }
    if tau2 == 0.0 {
        return Ok(theta.clone());
    }
    let tau = tau2.sqrt();
    let mut x = theta.clone();
    for v in x.values_mut() {
        *v += tau * rng.sample::<f64, _>(StandardNormal);
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Identity,
    JamesStein,
    EfronMorris,
    MatrixSoft,
    Msst,
    TruncatedHosvd,
}

impl Estimator {
    pub const ALL: [Estimator; 6] = [
        Estimator::Identity,
        Estimator::JamesStein,
        Estimator::EfronMorris,
        Estimator::MatrixSoft,
        Estimator::Msst,
        Estimator::TruncatedHosvd,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Identity => "identity",
            Estimator::JamesStein => "james_stein",
            Estimator::EfronMorris => "efron_morris",
            Estimator::MatrixSoft => "matrix_soft",
            Estimator::Msst => "msst",
            Estimator::TruncatedHosvd => "truncated_hosvd",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = HoseError;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| HoseError::InvalidParameter(format!("unknown estimator {s:?}")))
    }
}

/// Runs each estimator on `x`, sharing one HOSVD between the tensor methods.
pub fn estimate_all(x: &DenseTensor, tau2: f64, estimators: &[Estimator]) -> Vec<Result<DenseTensor>> {
    let needs_hosvd = estimators
        .iter()
        .any(|e| matches!(e, Estimator::Msst | Estimator::TruncatedHosvd));
    let d = if needs_hosvd { Some(hosvd(x)) } else { None };
    let matrix = |family| -> Result<DenseTensor> {
        let t = tune_matrix_baseline(x, family, tau2, Objective::Sure)?;
        matrix_baseline(x, family, t.lambda)
    };
    estimators
        .iter()
        .map(|e| match e {
            Estimator::Identity => Ok(x.clone()),
            Estimator::JamesStein => james_stein(x, tau2),
            Estimator::EfronMorris => matrix(MatrixFamily::EfronMorris),
            Estimator::MatrixSoft => matrix(MatrixFamily::SoftThreshold),
            Estimator::Msst | Estimator::TruncatedHosvd => {
                let d = match d.as_ref().expect("computed above") {
                    Ok(d) => d,
                    // the decomposition is deterministic, so this reproduces the error
                    Err(_) => return Err(hosvd(x).expect_err("same input")),
                };
                let tuned = if *e == Estimator::Msst {
                    optimize_soft_threshold_decomposed(d, tau2, &TuningOptions::default())?
                } else {
                    select_rank_decomposed(d, tau2, Objective::Sure)?
                };
                apply_spectral(d, &tuned.plan)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary {
            n,
            mean: f64::NAN,
            se: f64::NAN,
            median: f64::NAN,
            q1: f64::NAN,
            q3: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Summary {
        n,
        mean,
        se: (var / n as f64).sqrt(),
        median: quantile(&sorted, 0.5),
        q1: quantile(&sorted, 0.25),
        q3: quantile(&sorted, 0.75),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StudyOptions {
    /// Draw a fresh mean for every replicate.
    pub redraw_theta: bool,
}

#[derive(Debug, Clone)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub estimator: Estimator,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub spec: ScenarioSpec,
    pub tau2: f64,
    pub estimators: Vec<Estimator>,
    /// Indices of the replicates that completed.
    pub replicates: Vec<usize>,
    /// `losses[e][j]` is the loss of estimator `e` on the `j`-th completed replicate.
    pub losses: Vec<Vec<f64>>,
    pub failures: Vec<ReplicateFailure>,
}

impl StudyResult {
    pub fn losses_for(&self, e: Estimator) -> Option<&[f64]> {
        self.estimators.iter().position(|&x| x == e).map(|i| self.losses[i].as_slice())
    }

    pub fn summary(&self, e: Estimator) -> Option<Summary> {
        self.losses_for(e).map(summarize)
    }

    /// `(replicate, estimator, loss)` rows, replicates 1-based.
    pub fn loss_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for (j, &rep) in self.replicates.iter().enumerate() {
            for (i, e) in self.estimators.iter().enumerate() {
                rows.push(vec![
                    (rep + 1).to_string(),
                    e.name().to_string(),
                    crate::io::format_value(self.losses[i][j]),
                ]);
            }
        }
        rows
    }
}

fn check_failures(failed: usize, reps: usize) -> Result<()> {
    // failures must stay strictly below 1% of the replicates
    if failed * 100 >= reps && failed > 0 {
        return Err(HoseError::StudyFailed { failed, reps });
    }
    Ok(())
}

fn replicate_data(
    spec: &ScenarioSpec,
    fixed: Option<&DenseTensor>,
    tau2: f64,
    rep: usize,
) -> Result<(DenseTensor, DenseTensor)> {
    let mut rng = replicate_rng(spec.seed, rep as u64);
    let theta = match fixed {
        Some(t) => t.clone(),
        None => generate_mean_with(spec, &mut rng)?,
    };
    let x = add_noise_with(&theta, tau2, &mut rng)?;
    Ok((theta, x))
}

/// Monte Carlo comparison of estimators on one scenario. Replicates run in
/// parallel; a replicate where any estimator fails is skipped and logged.
pub fn run_study(
    spec: &ScenarioSpec,
    estimators: &[Estimator],
    n_reps: usize,
    tau2: f64,
    opts: StudyOptions,
) -> Result<StudyResult> {
    if n_reps == 0 {
        return Err(HoseError::InvalidParameter("need at least one replicate".into()));
    }
    let theta = if opts.redraw_theta {
        None
    } else {
        Some(generate_mean(spec)?)
    };
    let outcomes: Vec<std::result::Result<Vec<f64>, ReplicateFailure>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let fail = |estimator, e: HoseError| ReplicateFailure {
                replicate: rep,
                estimator,
                message: format!("{}: {e}", e.code()),
            };
            let (theta, x) = replicate_data(spec, theta.as_ref(), tau2, rep).map_err(|e| fail(estimators[0], e))?;
            estimate_all(&x, tau2, estimators)
                .into_iter()
                .zip(estimators)
                .map(|(est, &e)| {
                    let est = est.map_err(|err| fail(e, err))?;
                    est.distance_sq(&theta).map_err(|err| fail(e, err))
                })
                .collect()
        })
        .collect();
    let mut losses = vec![Vec::with_capacity(n_reps); estimators.len()];
    let mut replicates = Vec::with_capacity(n_reps);
    let mut failures = Vec::new();
    for (rep, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(ls) => {
                replicates.push(rep);
                for (acc, l) in losses.iter_mut().zip(ls) {
                    acc.push(l);
                }
            }
            Err(f) => failures.push(f),
        }
    }
    check_failures(failures.len(), n_reps)?;
    Ok(StudyResult {
        spec: spec.clone(),
        tau2,
        estimators: estimators.to_vec(),
        replicates,
        losses,
        failures,
    })
}

#[derive(Debug, Clone)]
pub struct RankStudy {
    pub dims: Vec<usize>,
    /// Selected ranks of each completed replicate.
    pub ranks: Vec<Vec<usize>>,
    pub failures: Vec<ReplicateFailure>,
}

impl RankStudy {
    /// Share of replicates choosing each rank `1..=p_k` on `mode`.
    pub fn frequencies(&self, mode: usize) -> Vec<f64> {
        let mut counts = vec![0usize; self.dims[mode]];
        for r in &self.ranks {
            counts[r[mode] - 1] += 1;
        }
        let n = self.ranks.len().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }

    /// Share of replicates selecting exactly `target`.
    pub fn joint_frequency(&self, target: &[usize]) -> f64 {
        let hits = self.ranks.iter().filter(|r| r.as_slice() == target).count();
        hits as f64 / self.ranks.len().max(1) as f64
    }

    /// `(mode, rank, frequency)` rows, 1-based.
    pub fn frequency_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for k in 0..self.dims.len() {
            for (i, f) in self.frequencies(k).into_iter().enumerate() {
                rows.push(vec![(k + 1).to_string(), (i + 1).to_string(), format!("{f}")]);
            }
        }
        rows
    }
}

/// SURE rank selection across replicates of scenario D or F.
pub fn rank_recovery_study(spec: &ScenarioSpec, n_reps: usize, tau2: f64, opts: StudyOptions) -> Result<RankStudy> {
    if !matches!(spec.scenario, Scenario::D | Scenario::F) {
        return Err(HoseError::InvalidParameter(format!(
            "rank study needs scenario D or F, got {}",
            spec.scenario
        )));
    }
    if n_reps == 0 {
        return Err(HoseError::InvalidParameter("need at least one replicate".into()));
    }
    let theta = if opts.redraw_theta {
        None
    } else {
        Some(generate_mean(spec)?)
    };
    let outcomes: Vec<std::result::Result<Vec<usize>, ReplicateFailure>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let run = || -> Result<Vec<usize>> {
                let (_, x) = replicate_data(spec, theta.as_ref(), tau2, rep)?;
                let d = hosvd(&x)?;
                let res = select_rank_decomposed(&d, tau2, Objective::Sure)?;
                Ok(res.ranks().expect("truncation plan"))
            };
            run().map_err(|e| ReplicateFailure {
                replicate: rep,
                estimator: Estimator::TruncatedHosvd,
                message: format!("{}: {e}", e.code()),
            })
        })
        .collect();
    let mut ranks = Vec::with_capacity(n_reps);
    let mut failures = Vec::new();
    for out in outcomes {
        match out {
            Ok(r) => ranks.push(r),
            Err(f) => failures.push(f),
        }
    }
    check_failures(failures.len(), n_reps)?;
    Ok(RankStudy {
        dims: spec.dims.clone(),
        ranks,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hosvd::{mode_spectrum, multilinear_rank};

    #[test]
    fn every_scenario_is_rescaled() {
        for s in Scenario::ALL {
            let theta = generate_mean(&ScenarioSpec::new(s, 1)).unwrap();
            assert!((theta.frobenius_norm_sq() - 1000.0).abs() < 1e-12 * 1000.0, "{s}");
            assert_eq!(theta.dims(), &[10, 10, 10]);
        }
    }

    #[test]
    fn scenario_f_structure() {
        let theta = generate_mean(&ScenarioSpec::new(Scenario::F, 2)).unwrap();
        assert_eq!(multilinear_rank(&theta, 1e-8).unwrap(), vec![5, 5, 5]);
        for k in 0..3 {
            let sv = mode_spectrum(&theta, k).unwrap();
            for s in &sv[1..5] {
                assert!((s - sv[0]).abs() < 1e-10 * sv[0]);
            }
        }
    }

    #[test]
    fn scenario_d_structure() {
        let theta = generate_mean(&ScenarioSpec::new(Scenario::D, 3)).unwrap();
        assert_eq!(multilinear_rank(&theta, 1e-8).unwrap(), vec![5, 10, 10]);
    }

    #[test]
    fn mode1_covariances() {
        for s in [Scenario::B, Scenario::C, Scenario::E] {
            let spec = ScenarioSpec::new(s, 4);
            let target = mode1_covariance(s, 10, spec.ar_rho).unwrap();
            let mut rng = theta_rng(4);
            let draws = 10_000;
            let mut acc = DenseMatrix::zeros(10, 10);
            for _ in 0..draws {
                let t = raw_mean(&spec, &mut rng).unwrap();
                let fiber: Vec<f64> = (0..10).map(|i| t.get(&[i, 0, 0])).collect();
                for i in 0..10 {
                    for j in 0..10 {
                        acc.set(i, j, acc.get(i, j) + fiber[i] * fiber[j] / draws as f64);
                    }
                }
            }
            let mut diff = 0.0;
            for i in 0..10 {
                for j in 0..10 {
                    diff += (acc.get(i, j) - target.get(i, j)).powi(2);
                }
            }
            let rel = diff.sqrt() / target.frobenius_norm_sq().sqrt();
            assert!(rel < 0.1, "{s}: {rel}");
        }
    }

    #[test]
    fn noise() {
        let theta = generate_mean(&ScenarioSpec::new(Scenario::A, 5)).unwrap();
        assert_eq!(add_noise(&theta, 0.0, 9).unwrap(), theta);
        assert_eq!(add_noise(&theta, 1.0, 9).unwrap(), add_noise(&theta, 1.0, 9).unwrap());
        assert_ne!(add_noise(&theta, 1.0, 9).unwrap(), add_noise(&theta, 1.0, 10).unwrap());
        let draws = 1000;
        let mean = (0..draws)
            .map(|r| {
                let x = add_noise_with(&theta, 2.0, &mut replicate_rng(11, r)).unwrap();
                x.distance_sq(&theta).unwrap()
            })
            .sum::<f64>()
            / draws as f64;
        // the sample mean has standard deviation tau2 sqrt(2p / draws)
        assert!((mean - 2000.0).abs() < 4.0 * 2.0 * (2.0 * 1000.0 / draws as f64).sqrt());
    }

    #[test]
    fn summary_statistics() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.q3, 3.25);
        assert!((s.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn small_study_is_deterministic() {
        let spec = ScenarioSpec {
            dims: vec![5, 5, 5],
            ..ScenarioSpec::new(Scenario::F, 6)
        };
        let a = run_study(&spec, &Estimator::ALL, 4, 1.0, StudyOptions::default()).unwrap();
        let b = run_study(&spec, &Estimator::ALL, 4, 1.0, StudyOptions::default()).unwrap();
        assert_eq!(a.losses, b.losses);
        assert_eq!(a.loss_rows().len(), 24);
        assert!(a.losses.iter().flatten().all(|&l| l >= 0.0));
        let redraw = run_study(
            &spec,
            &[Estimator::Identity],
            3,
            1.0,
            StudyOptions { redraw_theta: true },
        )
        .unwrap();
        assert_eq!(redraw.replicates, vec![0, 1, 2]);
    }

    #[test]
    fn rank_study_frequencies_sum_to_one() {
        let spec = ScenarioSpec {
            dims: vec![6, 6, 6],
            ..ScenarioSpec::new(Scenario::F, 7)
        };
        let study = rank_recovery_study(&spec, 6, 1.0, StudyOptions::default()).unwrap();
        for k in 0..3 {
            let total: f64 = study.frequencies(k).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert_eq!(study.frequency_rows().len(), 18);
        assert!(rank_recovery_study(&ScenarioSpec::new(Scenario::A, 1), 2, 1.0, StudyOptions::default()).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!("f".parse::<Scenario>().unwrap(), Scenario::F);
        assert!("G".parse::<Scenario>().is_err());
        for e in Estimator::ALL {
            assert_eq!(e.name().parse::<Estimator>().unwrap(), e);
        }
    }

    #[test]
    fn failure_budget() {
        assert!(check_failures(0, 10).is_ok());
        assert!(check_failures(1, 200).is_ok());
        assert!(check_failures(2, 200).is_err());
        assert!(check_failures(1, 50).is_err());
    }
}
