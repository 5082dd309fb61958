//! Brute-force reference computations for tests.

use super::{DenseMatrix, LinalgError};

/// Largest dimension the dense oracle accepts.
pub const ORACLE_MAX_DIM: usize = 256;

/// Inverse by Gauss-Jordan elimination with full pivoting.
///
/// Deliberately shares no code with the Cholesky or LU paths.
pub fn dense_inverse_oracle(m: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch { expected: m.rows(), found: m.cols() });
    }
    let n = m.rows();
    if n > ORACLE_MAX_DIM {
        return Err(LinalgError::TooLarge(n));
    }
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut colperm: Vec<usize> = (0..n).collect();
    let scale = m.max_abs();

    for k in 0..n {
        let (mut pr, mut pc, mut best) = (k, k, 0.0_f64);
        for i in k..n {
            for j in k..n {
                if a[i][j].abs() > best {
                    best = a[i][j].abs();
                    pr = i;
                    pc = j;
                }
            }
        }
        if !(best > 1e-300 && best > 1e-15 * scale) {
            return Err(LinalgError::Singular);
        }
        a.swap(k, pr);
        inv.swap(k, pr);
        if pc != k {
            for row in a.iter_mut() {
                row.swap(k, pc);
            }
            colperm.swap(k, pc);
        }
        let d = a[k][k];
        for j in 0..n {
            a[k][j] /= d;
            inv[k][j] /= d;
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            let f = a[i][k];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a[i][j] -= f * a[k][j];
                inv[i][j] -= f * inv[k][j];
            }
        }
    }
    // Column swaps of M permute the rows of the inverse.
    let mut out = DenseMatrix::zeros(n, n);
    for (k, &orig) in colperm.iter().enumerate() {
        out.row_mut(orig).copy_from_slice(&inv[k]);
    }
    Ok(out)
}

/// `‖M X − I‖_∞`
pub fn inverse_residual(m: &DenseMatrix, inv: &DenseMatrix) -> f64 {
    m.matmul(inv).sub(&DenseMatrix::identity(m.rows())).norm_inf()
}
