use super::{DenseMatrix, LinalgError};

/// Symmetric-pivoted Cholesky factorisation in square-root-free form,
/// `P M Pᵀ = L D Lᵀ` with unit lower-triangular `L`.
///
/// Only the lower triangle of the input is read.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
    d: Vec<f64>,
    /// `perm[i]` is the original index placed at position `i`.
    perm: Vec<usize>,
}

impl Cholesky {
    pub fn new(m: &DenseMatrix) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::DimensionMismatch { expected: m.rows(), found: m.cols() });
        }
        if !m.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = m.rows();
        let mut a = DenseMatrix::from_fn(n, n, |i, j| if i >= j { m[(i, j)] } else { m[(j, i)] });
        let mut perm: Vec<usize> = (0..n).collect();
        let mut dvec = vec![0.0; n];
        let tol = 1e-13 * (m.trace() / n.max(1) as f64).max(0.0);

        for k in 0..n {
            // largest remaining diagonal
            let mut p = k;
            for i in k + 1..n {
                if a[(i, i)] > a[(p, p)] {
                    p = i;
                }
            }
            let piv = a[(p, p)];
            if !(piv > tol && piv > 0.0) {
                return Err(LinalgError::NotPositiveDefinite { step: k, value: piv });
            }
            if p != k {
                swap_sym(&mut a, k, p);
                perm.swap(k, p);
            }
            dvec[k] = piv;
            a[(k, k)] = 1.0;
            for j in k + 1..n {
                let ajk = a[(j, k)];
                if ajk == 0.0 {
                    continue;
                }
                for i in j..n {
                    let v = a[(i, k)] * ajk / piv;
                    a[(i, j)] -= v;
                }
            }
            for i in k + 1..n {
                a[(i, k)] /= piv;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                a[(i, j)] = 0.0;
            }
        }
        Ok(Self { l: a, d: dvec, perm })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn l(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "cholesky solve dimension mismatch");
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.l.row(i);
            let mut s = y[i];
            for j in 0..i {
                s -= row[j] * y[j];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= self.l[(j, i)] * y[j];
            }
            y[i] = s;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    /// Solves for every column of `b`.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            out.set_col(j, &self.solve(&b.col(j)));
        }
        out
    }

    pub fn inverse(&self) -> DenseMatrix {
        self.solve_matrix(&DenseMatrix::identity(self.dim()))
    }
}

/// Swaps index `k` and `p` (k < p) in a symmetric matrix stored in its lower
/// triangle, including the already-factored columns.
fn swap_sym(a: &mut DenseMatrix, k: usize, p: usize) {
    let n = a.rows();
    let t = a[(k, k)];
    a[(k, k)] = a[(p, p)];
    a[(p, p)] = t;
    for j in 0..k {
        let t = a[(k, j)];
        a[(k, j)] = a[(p, j)];
        a[(p, j)] = t;
    }
    for i in k + 1..p {
        let t = a[(i, k)];
        a[(i, k)] = a[(p, i)];
        a[(p, i)] = t;
    }
    for i in p + 1..n {
        let t = a[(i, k)];
        a[(i, k)] = a[(i, p)];
        a[(i, p)] = t;
    }
}

/// Solves `M x = b` for symmetric positive definite `M`.
pub fn sym_solve(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if b.len() != m.rows() {
        return Err(LinalgError::DimensionMismatch { expected: m.rows(), found: b.len() });
    }
    Ok(Cholesky::new(m)?.solve(b))
}
