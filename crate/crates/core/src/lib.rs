//! Learned sketching of dense weight matrices.
//!
//! A weight matrix is compressed row by row into a handful of shared
//! *sketched parameters* per row group plus a packed integer mapping that
//! says which sketched parameter each original entry reads from. The mapping
//! is learned with Hessian-weighted 1-D k-means and OPTQ-style error
//! compensation; afterwards the sketched parameters stay trainable while the
//! mapping is frozen.
//!
//! Module map:
//!
//! * [`numerics`] dense matrices, GEMM, Cholesky, Jacobi SVD, seeded RNG, MAT1 I/O
//! * [`calibration`] Hessian `2XXᵀ`, its dampened inverse and Cholesky factor
//! * [`learner`] weighted k-means, sketching matrix, row-wise sketch learning
//! * [`runtime`] the [`SketchedMatrix`] artifact: reconstruction, forward,
//!   gradients, index packing and the SKT1 container
//! * [`finetune`] adaptation loop that only touches sketched parameters
//! * [`delta`] low-rank vs sketch approximation errors of weight updates
//! * [`theory`] power-law spectra, random-fold sketching, crossover analysis

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod delta;
mod error;
pub mod finetune;
pub mod learner;
pub mod numerics;
pub mod parallel;
pub mod runtime;
pub mod theory;

pub use calibration::{build_hessian, CalibrationSet, HessianFactor};
pub use error::{Error, Result};
pub use learner::{sketch_matrix, SketchConfig};
pub use numerics::{Matrix, Rng};
pub use runtime::{SketchGradient, SketchedMatrix};
