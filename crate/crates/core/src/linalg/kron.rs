use super::{DenseMatrix, LinalgError, SymOperator};

/// `A ⊗ G` with `A` on the left (`m_A × m_A`) and `G` on the right
/// (`m_G × m_G`). Acting on `x = vec(X)` with `X` of shape `m_G × m_A`, it
/// returns `vec(G X Aᵀ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KroneckerOperator {
    pub left: DenseMatrix,
    pub right: DenseMatrix,
}

impl KroneckerOperator {
    pub fn new(left: DenseMatrix, right: DenseMatrix) -> Result<Self, LinalgError> {
        for f in [&left, &right] {
            if !f.is_square() {
                return Err(LinalgError::DimensionMismatch { expected: f.rows(), found: f.cols() });
            }
            if !f.is_symmetric() {
                return Err(LinalgError::NotSymmetric);
            }
        }
        Ok(Self { left, right })
    }

    pub fn m_a(&self) -> usize {
        self.left.rows()
    }

    pub fn m_g(&self) -> usize {
        self.right.rows()
    }

    /// Explicit `(m_A m_G)²` matrix.
    pub fn materialize(&self) -> DenseMatrix {
        let (ma, mg) = (self.m_a(), self.m_g());
        DenseMatrix::from_fn(ma * mg, ma * mg, |r, c| {
            let (a, g) = (r / mg, r % mg);
            let (a2, g2) = (c / mg, c % mg);
            self.left[(a, a2)] * self.right[(g, g2)]
        })
    }
}

impl SymOperator for KroneckerOperator {
    fn dim(&self) -> usize {
        self.m_a() * self.m_g()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        kron_apply(self, x).expect("kron operator dimension")
    }
}

/// Reshapes `x` (column-major) into a `rows × cols` matrix.
pub fn mat_col_major(x: &[f64], rows: usize, cols: usize) -> DenseMatrix {
    assert_eq!(x.len(), rows * cols);
    DenseMatrix::from_fn(rows, cols, |i, j| x[j * rows + i])
}

/// Stacks the columns of `m`.
pub fn vec_col_major(m: &DenseMatrix) -> Vec<f64> {
    let (r, c) = (m.rows(), m.cols());
    let mut out = Vec::with_capacity(r * c);
    for j in 0..c {
        for i in 0..r {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// `(A ⊗ G) x = vec(G X Aᵀ)`.
pub fn kron_apply(k: &KroneckerOperator, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = k.m_a() * k.m_g();
    if x.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: x.len() });
    }
    let xm = mat_col_major(x, k.m_g(), k.m_a());
    let y = k.right.matmul(&xm).matmul_tr(&k.left);
    Ok(vec_col_major(&y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_left_factor() {
        let k = KroneckerOperator::new(DenseMatrix::identity(2), DenseMatrix::from_diag(&[3.0, 5.0])).unwrap();
        assert_eq!(kron_apply(&k, &[1.0, 1.0, 1.0, 1.0]).unwrap(), vec![3.0, 5.0, 3.0, 5.0]);
    }

    #[test]
    fn permutation_left_factor() {
        let swap = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let k = KroneckerOperator::new(swap, DenseMatrix::identity(2)).unwrap();
        assert_eq!(kron_apply(&k, &[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn wrong_length() {
        let k = KroneckerOperator::new(DenseMatrix::identity(2), DenseMatrix::identity(3)).unwrap();
        assert!(matches!(kron_apply(&k, &[1.0; 5]), Err(LinalgError::DimensionMismatch { expected: 6, found: 5 })));
    }

    #[test]
    fn vec_roundtrip() {
        let m = DenseMatrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        let v = vec_col_major(&m);
        assert_eq!(v, vec![0.0, 2.0, 4.0, 1.0, 3.0, 5.0]);
        assert_eq!(mat_col_major(&v, 3, 2), m);
    }
}
