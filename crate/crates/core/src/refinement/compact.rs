use serde::{Deserialize, Serialize};

use super::{CurvaturePair, PairBuffer, RefinementError};
use crate::linalg::vector::dot;
use crate::linalg::{DenseMatrix, Lu, SymOperator};

pub const GAMMA_MIN: f64 = 1e-4;
pub const GAMMA_MAX: f64 = 1e4;

/// Choice of the initial scale `γ` in `Λ⁰ = γ I`, computed from the newest
/// pair and clipped to `[1e-4, 1e4]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GammaRule {
    /// `vᵀv / uᵀv`
    #[default]
    Spectral,
    /// `uᵀv / uᵀu`
    Rayleigh,
    Fixed { value: f64 },
}


impl GammaRule {
    pub fn gamma(self, newest: Option<&CurvaturePair>) -> f64 {
        let raw = match (self, newest) {
            (GammaRule::Fixed { value }, _) => value,
            (_, None) => 1.0,
            (GammaRule::Spectral, Some(p)) => dot(&p.v, &p.v) / dot(&p.u, &p.v),
            (GammaRule::Rayleigh, Some(p)) => dot(&p.u, &p.v) / dot(&p.u, &p.u),
        };
        if raw.is_finite() {
            raw.clamp(GAMMA_MIN, GAMMA_MAX)
        } else {
            1.0
        }
    }
}

/// `Λ = γ I − C P⁻¹ Cᵀ` with `C = [γU, V]` and
/// `P = [[γUᵀU, L], [Lᵀ, −D]]`.
#[derive(Debug, Clone)]
pub struct CompactLBFGS {
    pub gamma: f64,
    pub c: DenseMatrix,
    pub p: DenseMatrix,
    /// Strictly lower part, `L_ij = u_iᵀ v_j` for `i > j`.
    pub l: DenseMatrix,
    pub d: Vec<f64>,
    dim: usize,
    p_lu: Option<Lu>,
}

impl CompactLBFGS {
    /// `γ I` with no pairs.
    pub fn scaled_identity(gamma: f64, n: usize) -> Self {
        Self {
            gamma,
            c: DenseMatrix::zeros(n, 0),
            p: DenseMatrix::zeros(0, 0),
            l: DenseMatrix::zeros(0, 0),
            d: Vec::new(),
            dim: n,
            p_lu: None,
        }
    }

    pub fn num_pairs(&self) -> usize {
        self.d.len()
    }

    pub fn p_lu(&self) -> Option<&Lu> {
        self.p_lu.as_ref()
    }

    pub fn materialize(&self) -> DenseMatrix {
        let mut m = DenseMatrix::scaled_identity(self.dim, self.gamma);
        if let Some(lu) = &self.p_lu {
            let pinv_ct = lu.solve_matrix(&self.c.transpose());
            m = m.sub(&self.c.matmul(&pinv_ct));
        }
        m
    }
}

impl SymOperator for CompactLBFGS {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = x.iter().map(|v| self.gamma * v).collect();
        if let Some(lu) = &self.p_lu {
            let w = lu.solve(&self.c.tr_matvec(x));
            let cw = self.c.matvec(&w);
            for (a, b) in y.iter_mut().zip(&cw) {
                *a -= b;
            }
        }
        y
    }
}

/// Assembles the compact factors from pairs ordered oldest first.
pub fn build_compact<'a, I>(pairs: I, gamma: f64, n: usize) -> Result<CompactLBFGS, RefinementError>
where
    I: IntoIterator<Item = &'a CurvaturePair>,
{
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(RefinementError::InvalidGamma(gamma));
    }
    let pairs: Vec<&CurvaturePair> = pairs.into_iter().collect();
    let q = pairs.len();
    if q == 0 {
        return Ok(CompactLBFGS::scaled_identity(gamma, n));
    }
    for p in &pairs {
        if p.u.len() != n || p.v.len() != n {
            return Err(RefinementError::ShapeMismatch(format!("pair of length {} in dimension {n}", p.u.len())));
        }
    }
    let us: Vec<&[f64]> = pairs.iter().map(|p| p.u.as_slice()).collect();
    let vs: Vec<&[f64]> = pairs.iter().map(|p| p.v.as_slice()).collect();
    let u = DenseMatrix::from_columns(n, &us);
    let v = DenseMatrix::from_columns(n, &vs);
    let c = u.scale(gamma).hcat(&v);
    let utu = u.tr_matmul(&u);
    let utv = u.tr_matmul(&v);
    let mut l = DenseMatrix::zeros(q, q);
    let mut d = vec![0.0; q];
    for i in 0..q {
        d[i] = utv[(i, i)];
        for j in 0..i {
            l[(i, j)] = utv[(i, j)];
        }
    }
    let mut p = DenseMatrix::zeros(2 * q, 2 * q);
    for i in 0..q {
        for j in 0..q {
            p[(i, j)] = gamma * utu[(i, j)];
            p[(i, q + j)] = l[(i, j)];
            p[(q + j, i)] = l[(i, j)];
        }
        p[(q + i, q + i)] = -d[i];
    }
    let p_lu = Lu::new(&p).map_err(|_| RefinementError::SingularP)?;
    Ok(CompactLBFGS { gamma, c, p, l, d, dim: n, p_lu: Some(p_lu) })
}

/// Builds from the buffer, dropping the oldest pair after each `SingularP`.
/// Falls back to `γ I` once the buffer is exhausted.
pub fn build_compact_with_fallback(buffer: &mut PairBuffer, gamma: f64, n: usize) -> Result<CompactLBFGS, RefinementError> {
    loop {
        match build_compact(buffer.pairs(), gamma, n) {
            Ok(c) => return Ok(c),
            Err(RefinementError::SingularP) => {
                if buffer.drop_oldest().is_none() {
                    return Ok(CompactLBFGS::scaled_identity(gamma, n));
                }
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_buffer_is_scaled_identity() {
        let c = build_compact(std::iter::empty(), 2.0, 3).unwrap();
        assert_eq!(c.materialize(), DenseMatrix::scaled_identity(3, 2.0));
    }

    #[test]
    fn single_pair_closed_form() {
        let p = CurvaturePair { u: vec![1.0, 0.0, 0.0], v_hat: None, v: vec![2.0, 0.0, 0.0] };
        let c = build_compact([&p], 1.0, 3).unwrap();
        let m = c.materialize();
        let want = DenseMatrix::from_diag(&[2.0, 1.0, 1.0]);
        assert!(m.sub(&want).max_abs() < 1e-15);
    }

    #[test]
    fn gamma_rules() {
        let p = CurvaturePair { u: vec![1.0, 0.0], v_hat: None, v: vec![2.0, 2.0] };
        assert_eq!(GammaRule::Spectral.gamma(Some(&p)), 4.0);
        assert_eq!(GammaRule::Rayleigh.gamma(Some(&p)), 2.0);
        assert_eq!(GammaRule::Fixed { value: 1e9 }.gamma(None), GAMMA_MAX);
    }
}
