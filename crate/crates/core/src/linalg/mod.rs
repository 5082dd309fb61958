//! Dense, low-rank, Kronecker and block-diagonal linear algebra.
//!
//! Everything here is `f64` and allocation-explicit. Matrices are stored
//! row-major; the Kronecker helpers use the column-major `vec` convention
//! (`vec` stacks columns), under which `(A ⊗ G) vec(X) = vec(G X Aᵀ)`.

mod block;
mod cholesky;
mod dense;
mod eigen;
mod kron;
mod lowrank;
mod lu;
pub mod oracle;
pub mod vector;

pub use block::BlockDiagonal;
pub use cholesky::{sym_solve, Cholesky};
pub use dense::DenseMatrix;
pub use eigen::{min_eigenvalue, SymmetricEigen};
pub use kron::{kron_apply, mat_col_major, vec_col_major, KroneckerOperator};
pub use lowrank::LowRankFactor;
pub use lu::Lu;
pub use oracle::dense_inverse_oracle;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {value:e} at step {step})")]
    NotPositiveDefinite { step: usize, value: f64 },
    #[error("matrix is numerically singular")]
    Singular,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("dimension {0} exceeds the dense oracle limit")]
    TooLarge(usize),
}

/// Anything that can be applied to a vector as a symmetric linear map.
pub trait SymOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;

    /// Dense materialisation, column by column. Only meant for small sizes.
    fn to_dense(&self) -> DenseMatrix {
        let n = self.dim();
        let mut m = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply(&e);
            for i in 0..n {
                m[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        m
    }
}

impl SymOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }
}

/// `γ I` on an `n`-dimensional space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledIdentity {
    pub scale: f64,
    pub n: usize,
}

impl SymOperator for ScaledIdentity {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v * self.scale).collect()
    }
}
