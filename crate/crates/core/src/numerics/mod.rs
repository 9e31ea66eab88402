//! Dense real-matrix kernels: storage, products, Cholesky, Jacobi SVD,
//! seeded RNG and the MAT1 file format.

mod cholesky;
pub mod mat1;
mod matrix;
mod rng;
mod svd;

pub use cholesky::{cholesky, spd_inverse, SYMMETRY_TOL};
pub use mat1::{load_mat1, read_mat1, save_mat1, write_mat1, Dtype};
pub use matrix::{gemm, matmul, matmul_nt, matmul_tn, Matrix, Op};
pub use rng::Rng;
pub use svd::{singular_values, svd, truncated_svd, Svd};

pub(crate) use matrix::{axpy, dot, gemm_acc};
