//! Multivariate relational proportions: arcsine stabilization, main-effects
//! ANOVA, and shrinkage of the interaction residual.

use std::f64::consts::FRAC_PI_2;

use crate::error::{HoseError, Result};
use crate::hosvd::hosvd;
use crate::risk::Objective;
use crate::shrinkage::apply_spectral;
use crate::tensor::DenseTensor;
use crate::tuning::{optimize_soft_threshold_decomposed, select_rank_decomposed, TuningOptions};

/// Observed proportions with their binomial counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionTensor {
    proportions: DenseTensor,
    counts: DenseTensor,
}

impl ProportionTensor {
    pub fn new(proportions: DenseTensor, counts: DenseTensor) -> Result<Self> {
        if proportions.dims() != counts.dims() {
            return Err(HoseError::Shape(format!(
                "proportions {:?} vs counts {:?}",
                proportions.dims(),
                counts.dims()
            )));
        }
        if let Some(y) = proportions.values().iter().find(|y| !(0.0..=1.0).contains(*y)) {
            return Err(HoseError::InvalidParameter(format!("proportion {y} outside [0, 1]")));
        }
        if let Some(n) = counts.values().iter().find(|&&n| !(n >= 1.0 && n.fract() == 0.0)) {
            return Err(HoseError::InvalidParameter(format!("count {n} is not a positive integer")));
        }
        Ok(Self { proportions, counts })
    }

    pub fn proportions(&self) -> &DenseTensor {
        &self.proportions
    }

    pub fn counts(&self) -> &DenseTensor {
        &self.counts
    }
}

/// `sqrt(n) asin(2y - 1)`, approximately `N(sqrt(n) asin(2p - 1), 1)`.
pub fn arcsine_transform(pt: &ProportionTensor) -> DenseTensor {
    let values = pt
        .proportions
        .values()
        .iter()
        .zip(pt.counts.values())
        .map(|(&y, &n)| n.sqrt() * (2.0 * y - 1.0).clamp(-1.0, 1.0).asin())
        .collect();
    DenseTensor::new(pt.proportions.dims().to_vec(), values).expect("validated dims")
}

/// Inverse of [`arcsine_transform`]: `(sin(theta / sqrt(n)) + 1) / 2`, with
/// `theta / sqrt(n)` clamped to `[-pi/2, pi/2]`.
pub fn back_transform(theta: &DenseTensor, counts: &DenseTensor) -> Result<DenseTensor> {
    if theta.dims() != counts.dims() {
        return Err(HoseError::Shape(format!("{:?} vs {:?}", theta.dims(), counts.dims())));
    }
    let values = theta
        .values()
        .iter()
        .zip(counts.values())
        .map(|(&t, &n)| ((t / n.sqrt()).clamp(-FRAC_PI_2, FRAC_PI_2).sin() + 1.0) / 2.0)
        .collect();
    DenseTensor::new(theta.dims().to_vec(), values)
}

/// `x = mu + sum_k effect_k[i_k] + residual`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnovaDecomposition {
    pub mean: f64,
    pub effects: Vec<Vec<f64>>,
    pub residual: DenseTensor,
}

impl AnovaDecomposition {
    /// `mu + sum_k effect_k[i_k]` as a tensor.
    pub fn main_effects_fit(&self) -> DenseTensor {
        DenseTensor::from_fn(self.residual.dims(), |ix| {
            self.mean + ix.iter().zip(&self.effects).map(|(&i, e)| e[i]).sum::<f64>()
        })
        .expect("valid dims")
    }

    pub fn reconstruct(&self) -> DenseTensor {
        self.main_effects_fit().add(&self.residual).expect("same dims")
    }
}

/// Mode-`k` marginal means.
fn marginal_means(x: &DenseTensor, mode: usize) -> Vec<f64> {
    let pk = x.dims()[mode];
    let mut sums = vec![0.0; pk];
    let stride: usize = x.dims()[..mode].iter().product();
    for (off, &v) in x.values().iter().enumerate() {
        sums[(off / stride) % pk] += v;
    }
    let per = (x.len() / pk) as f64;
    sums.into_iter().map(|s| s / per).collect()
}

/// Least-squares main-effects fit. The residual is
/// `x - mu - sum_k (mean_k[i_k] - mu)`, whose every unfolding has zero row sums.
pub fn anova_decompose(x: &DenseTensor) -> Result<AnovaDecomposition> {
    if x.order() < 2 {
        return Err(HoseError::InvalidParameter(format!(
            "ANOVA needs at least two modes, got {}",
            x.order()
        )));
    }
    let mean = x.values().iter().sum::<f64>() / x.len() as f64;
    let effects: Vec<Vec<f64>> = (0..x.order())
        .map(|k| marginal_means(x, k).into_iter().map(|m| m - mean).collect())
        .collect();
    let mut out = AnovaDecomposition {
        mean,
        effects,
        residual: DenseTensor::zeros(x.dims())?,
    };
    out.residual = x.sub(&out.main_effects_fit())?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualMethod {
    /// Mode-specific soft-thresholding.
    Msst,
    TruncatedHosvd,
}

impl std::str::FromStr for ResidualMethod {
    type Err = HoseError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "msst" => Ok(ResidualMethod::Msst),
            "truncated_hosvd" | "truncated" => Ok(ResidualMethod::TruncatedHosvd),
            _ => Err(HoseError::InvalidParameter(format!("unknown residual method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub anova: AnovaDecomposition,
    pub shrunk_residual: DenseTensor,
    /// Main effects plus the shrunk residual.
    pub fitted: DenseTensor,
    pub residual_norm: f64,
    pub shrunk_residual_norm: f64,
}

/// Shrinks the SURE-tuned residual of the main-effects fit, leaving the grand
/// mean and effects untouched.
pub fn shrink_residual_pipeline(x: &DenseTensor, method: ResidualMethod, tau2: f64) -> Result<PipelineResult> {
    let anova = anova_decompose(x)?;
    let residual_norm = anova.residual.frobenius_norm();
    let scale = x.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let shrunk_residual = if residual_norm <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        DenseTensor::zeros(x.dims())?
    } else {
        let d = hosvd(&anova.residual)?;
        let plan = match method {
            ResidualMethod::Msst => optimize_soft_threshold_decomposed(&d, tau2, &TuningOptions::default())?.plan,
            ResidualMethod::TruncatedHosvd => select_rank_decomposed(&d, tau2, Objective::Sure)?.plan,
        };
        apply_spectral(&d, &plan)?
    };
    let fitted = anova.main_effects_fit().add(&shrunk_residual)?;
    Ok(PipelineResult {
        shrunk_residual_norm: shrunk_residual.frobenius_norm(),
        residual_norm,
        anova,
        shrunk_residual,
        fitted,
    })
}
