//! Tensor denoising by higher-order spectral shrinkage, tuned by SURE.

pub mod cli;
pub mod error;
pub mod hosvd;
pub mod io;
pub mod minimize;
pub mod relational;
pub mod risk;
pub mod shrinkage;
pub mod simulation;
pub mod tensor;
pub mod tuning;

pub use error::{HoseError, Result};
pub use hosvd::{hosvd, HosvdDecomposition};
pub use risk::{sure_spectral, Objective, RiskEstimate};
pub use shrinkage::{apply_spectral, ShrinkagePlan, SpectralFunction};
pub use tensor::{DenseMatrix, DenseTensor};
