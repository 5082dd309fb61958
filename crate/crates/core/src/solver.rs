//! Directions `d = −(B + λI)⁻¹ g` for each structural form of `B`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::{BaseMatrix, BaseVariant};
use crate::linalg::{
    mat_col_major, vec_col_major, Cholesky, DenseMatrix, KroneckerOperator, LinalgError, Lu, SymOperator, SymmetricEigen,
};
use crate::parallel;
use crate::refinement::{BlockRefinement, CompactLBFGS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("shifted system is not positive definite")]
    NotPositiveDefinite,
    #[error("capacitance matrix is singular")]
    SingularT,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported system structure: {0}")]
    Unsupported(&'static str),
    #[error("non-finite input")]
    NonFinite,
    #[error("solve failed after {retries} λ doublings (last λ = {lambda:e})")]
    SolveFailed { retries: u32, lambda: f64 },
}

impl SolverError {
    /// Errors that a larger `λ` can cure.
    pub fn is_retryable(&self) -> bool {
        matches!(self, SolverError::NotPositiveDefinite | SolverError::SingularT)
    }
}

impl From<LinalgError> for SolverError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::NotPositiveDefinite { .. } => SolverError::NotPositiveDefinite,
            LinalgError::Singular => SolverError::SingularT,
            LinalgError::DimensionMismatch { expected, found } => SolverError::DimensionMismatch { expected, found },
            LinalgError::NonFinite => SolverError::NonFinite,
            LinalgError::NotSymmetric | LinalgError::TooLarge(_) => SolverError::Unsupported("matrix input"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Refinement {
    None,
    Compact(CompactLBFGS),
    /// `G`-side block; only meaningful with a Kronecker base.
    Block(BlockRefinement),
}

/// `B + λI` with `B = base + refinement`.
#[derive(Debug, Clone)]
pub struct RegularizedSystem {
    pub base: BaseMatrix,
    pub refinement: Refinement,
    pub lambda: f64,
}

/// How `λ` enters a Kronecker solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KronMode {
    /// `(Â ⊗ M + λI)` solved exactly in the eigenbasis of `Â`.
    #[default]
    Exact,
    /// `(Â + √λ I) ⊗ (M + √λ I)`.
    PiSplit,
}

impl RegularizedSystem {
    pub fn new(base: BaseMatrix, refinement: Refinement, lambda: f64) -> Self {
        Self { base, refinement, lambda }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// `B + λI` as a dense matrix (tests and small problems only).
    pub fn materialize(&self) -> DenseMatrix {
        let mut m = match (&self.base.variant, &self.refinement) {
            (BaseVariant::Kron { a, g }, Refinement::Block(b)) => {
                let mut k = KroneckerOperator { left: a.clone(), right: g.add(&b.lambda) }.materialize();
                k.add_diag(self.base.shift);
                k
            }
            (_, Refinement::Compact(c)) => self.base.materialize().add(&c.materialize()),
            _ => self.base.materialize(),
        };
        m.add_diag(self.lambda);
        m
    }
}

impl SymOperator for RegularizedSystem {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = match (&self.base.variant, &self.refinement) {
            (BaseVariant::Kron { a, g }, Refinement::Block(b)) => {
                let k = KroneckerOperator { left: a.clone(), right: g.add(&b.lambda) };
                let mut y = k.apply(x);
                crate::linalg::vector::axpy(self.base.shift, x, &mut y);
                y
            }
            (_, Refinement::Compact(c)) => {
                let mut y = self.base.apply(x);
                crate::linalg::vector::axpy(1.0, &c.apply(x), &mut y);
                y
            }
            _ => self.base.apply(x),
        };
        crate::linalg::vector::axpy(self.lambda, x, &mut y);
        y
    }
}

/// Solves with `Â ⊗ M + c I` using `Â = E Σ Eᵀ`: one SPD solve
/// `(σ_j M + c I) y_j = z_j` per eigenvalue in the rotated basis.
pub struct KronSolver {
    eig: SymmetricEigen,
    chols: Vec<Cholesky>,
    m_g: usize,
}

impl KronSolver {
    pub fn new(a: &DenseMatrix, m: &DenseMatrix, c: f64) -> Result<Self, SolverError> {
        let eig = SymmetricEigen::new(a)?;
        let m = m.symmetrize();
        let built: Vec<Result<Cholesky, LinalgError>> = parallel::map(&eig.values, |&s| {
            let mut sys = m.scale(s);
            sys.add_diag(c);
            Cholesky::new(&sys)
        });
        let chols = built.into_iter().collect::<Result<Vec<_>, _>>()?;
        Ok(Self { eig, chols, m_g: m.rows() })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m_a = self.eig.values.len();
        let x = mat_col_major(b, self.m_g, m_a);
        let z = x.matmul(&self.eig.vectors);
        let cols: Vec<Vec<f64>> = parallel::map_range(m_a, |j| self.chols[j].solve(&z.col(j)));
        let mut y = DenseMatrix::zeros(self.m_g, m_a);
        for (j, c) in cols.iter().enumerate() {
            y.set_col(j, c);
        }
        vec_col_major(&y.matmul_tr(&self.eig.vectors))
    }
}

/// Applies `(H + c I)⁻¹` for the base structures that allow it cheaply.
enum ShiftedBase {
    Scalar(f64),
    Dense(Cholesky),
    Kron(KronSolver),
}

impl ShiftedBase {
    fn new(base: &BaseMatrix, extra: f64) -> Result<Self, SolverError> {
        let c = base.shift + extra;
        match &base.variant {
            BaseVariant::Zero(_) => {
                if c > 0.0 {
                    Ok(ShiftedBase::Scalar(c))
                } else {
                    Err(SolverError::NotPositiveDefinite)
                }
            }
            BaseVariant::SubsampledHessian(h) | BaseVariant::Ggn(h) | BaseVariant::Efim(h) => {
                let mut m = h.clone();
                m.add_diag(c);
                Ok(ShiftedBase::Dense(Cholesky::new(&m)?))
            }
            BaseVariant::Kron { a, g } => Ok(ShiftedBase::Kron(KronSolver::new(a, g, c)?)),
            BaseVariant::LowRankEfim(_) => Err(SolverError::Unsupported("low-rank base in the SMW path")),
        }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            ShiftedBase::Scalar(c) => b.iter().map(|x| x / c).collect(),
            ShiftedBase::Dense(ch) => ch.solve(b),
            ShiftedBase::Kron(k) => k.solve(b),
        }
    }
}

fn check_len(n: usize, g: &[f64]) -> Result<(), SolverError> {
    if g.len() != n {
        return Err(SolverError::DimensionMismatch { expected: n, found: g.len() });
    }
    if !crate::linalg::vector::all_finite(g) {
        return Err(SolverError::NonFinite);
    }
    Ok(())
}

fn compact_of(sys: &RegularizedSystem) -> Result<Option<&CompactLBFGS>, SolverError> {
    match &sys.refinement {
        Refinement::None => Ok(None),
        Refinement::Compact(c) => {
            if c.dim() != sys.dim() {
                return Err(SolverError::DimensionMismatch { expected: sys.dim(), found: c.dim() });
            }
            Ok(Some(c))
        }
        Refinement::Block(_) => Err(SolverError::Unsupported("block refinement needs the Kronecker path")),
    }
}

/// `−(H̃ − C P⁻¹ Cᵀ)⁻¹ g` with `H̃ = H + (γ + λ) I` through
/// `H̃⁻¹ + H̃⁻¹ C T⁻¹ Cᵀ H̃⁻¹`, `T = P − Cᵀ H̃⁻¹ C`.
pub fn direction_smw(sys: &RegularizedSystem, g: &[f64]) -> Result<Vec<f64>, SolverError> {
    let n = sys.dim();
    check_len(n, g)?;
    let compact = compact_of(sys)?;
    let gamma = compact.map_or(0.0, |c| c.gamma);
    let hs = ShiftedBase::new(&sys.base, gamma + sys.lambda)?;
    let hg = hs.solve(g);
    let mut d = hg;
    if let Some(c) = compact.filter(|c| c.num_pairs() > 0) {
        let k = c.c.cols();
        let wcols: Vec<Vec<f64>> = parallel::map_range(k, |j| hs.solve(&c.c.col(j)));
        let mut w = DenseMatrix::zeros(n, k);
        for (j, col) in wcols.iter().enumerate() {
            w.set_col(j, col);
        }
        let t = c.p.sub(&c.c.tr_matmul(&w));
        let t_lu = Lu::new(&t).map_err(|_| SolverError::SingularT)?;
        let corr = w.matvec(&t_lu.solve(&w.tr_matvec(g)));
        crate::linalg::vector::axpy(1.0, &corr, &mut d);
    }
    for x in &mut d {
        *x = -*x;
    }
    finite(d)
}

fn finite(d: Vec<f64>) -> Result<Vec<f64>, SolverError> {
    if crate::linalg::vector::all_finite(&d) {
        Ok(d)
    } else {
        Err(SolverError::NotPositiveDefinite)
    }
}

/// `−(QQᵀ + γI − C P⁻¹ Cᵀ + λI)⁻¹ g` with `C̃ = [C, Q]`, `P̃ = diag(P, −I)`:
/// writing `c = γ + λ (+ shift)`, the inverse is
/// `I/c + C̃ T̂⁻¹ C̃ᵀ / c²` with `T̂ = P̃ − C̃ᵀC̃ / c`.
pub fn direction_lowrank(sys: &RegularizedSystem, g: &[f64]) -> Result<Vec<f64>, SolverError> {
    let n = sys.dim();
    check_len(n, g)?;
    let q = match &sys.base.variant {
        BaseVariant::LowRankEfim(f) => &f.q,
        _ => return Err(SolverError::Unsupported("direction_lowrank needs a low-rank base")),
    };
    let compact = compact_of(sys)?;
    let gamma = compact.map_or(0.0, |c| c.gamma);
    let c = gamma + sys.lambda + sys.base.shift;
    if !(c > 0.0) {
        return Err(SolverError::NotPositiveDefinite);
    }
    let (ct, pt) = match compact.filter(|c| c.num_pairs() > 0) {
        Some(cl) => (cl.c.hcat(q), DenseMatrix::block_diag(&cl.p, &DenseMatrix::scaled_identity(q.cols(), -1.0))),
        None => (q.clone(), DenseMatrix::scaled_identity(q.cols(), -1.0)),
    };
    let mut d: Vec<f64> = g.iter().map(|x| x / c).collect();
    if ct.cols() > 0 {
        let t = pt.sub(&ct.tr_matmul(&ct).scale(1.0 / c));
        let t_lu = Lu::new(&t).map_err(|_| SolverError::SingularT)?;
        let corr = ct.matvec(&t_lu.solve(&ct.tr_matvec(g)));
        crate::linalg::vector::axpy(1.0 / (c * c), &corr, &mut d);
    }
    for x in &mut d {
        *x = -*x;
    }
    finite(d)
}

/// `−(Â ⊗ (G̃ + Λ̃) + λI)⁻¹ g`.
pub fn direction_kron(
    a: &DenseMatrix,
    g_fac: &DenseMatrix,
    lam: Option<&BlockRefinement>,
    lambda: f64,
    g: &[f64],
    mode: KronMode,
) -> Result<Vec<f64>, SolverError> {
    let (m_a, m_g) = (a.rows(), g_fac.rows());
    check_len(m_a * m_g, g)?;
    let m = match lam {
        Some(b) => {
            if b.dim() != m_g {
                return Err(SolverError::DimensionMismatch { expected: m_g, found: b.dim() });
            }
            g_fac.add(&b.lambda)
        }
        None => g_fac.clone(),
    };
    let mut d = match mode {
        KronMode::Exact => KronSolver::new(a, &m, lambda)?.solve(g),
        KronMode::PiSplit => {
            let r = lambda.sqrt();
            let mut ar = a.clone();
            ar.add_diag(r);
            let mut mr = m.symmetrize();
            mr.add_diag(r);
            let ca = Cholesky::new(&ar)?;
            let cm = Cholesky::new(&mr)?;
            // X ↦ M_r⁻¹ X A_r⁻¹
            let x = mat_col_major(g, m_g, m_a);
            let left = cm.solve_matrix(&x);
            let y = ca.solve_matrix(&left.transpose()).transpose();
            vec_col_major(&y)
        }
    };
    for x in &mut d {
        *x = -*x;
    }
    finite(d)
}

/// Chooses the solve path from the structure of `sys`.
pub fn direction(sys: &RegularizedSystem, g: &[f64], mode: KronMode) -> Result<Vec<f64>, SolverError> {
    match (&sys.base.variant, &sys.refinement) {
        (BaseVariant::Kron { a, g: gf }, Refinement::Block(b)) => {
            direction_kron(a, gf, Some(b), sys.lambda + sys.base.shift, g, mode)
        }
        (BaseVariant::Kron { a, g: gf }, Refinement::None) if mode == KronMode::PiSplit => {
            direction_kron(a, gf, None, sys.lambda + sys.base.shift, g, mode)
        }
        (BaseVariant::LowRankEfim(_), _) => direction_lowrank(sys, g),
        _ => direction_smw(sys, g),
    }
}

/// Per-block directions, concatenated in block order.
pub fn direction_block(blocks: &[RegularizedSystem], g: &[f64], mode: KronMode) -> Result<Vec<f64>, SolverError> {
    let total: usize = blocks.iter().map(|b| b.dim()).sum();
    check_len(total, g)?;
    let mut offs = Vec::with_capacity(blocks.len());
    let mut o = 0;
    for b in blocks {
        offs.push(o);
        o += b.dim();
    }
    let parts: Vec<Result<Vec<f64>, SolverError>> =
        parallel::map_range(blocks.len(), |j| direction(&blocks[j], &g[offs[j]..offs[j] + blocks[j].dim()], mode));
    let mut d = Vec::with_capacity(total);
    for p in parts {
        d.extend(p?);
    }
    Ok(d)
}

/// Solves, doubling `λ` after each retryable failure, at most
/// `max_retries` times. Returns the direction and the number of doublings;
/// `blocks[..].lambda` holds the value that succeeded.
pub fn solve_with_retry(
    blocks: &mut [RegularizedSystem],
    g: &[f64],
    mode: KronMode,
    max_retries: u32,
) -> Result<(Vec<f64>, u32), SolverError> {
    let mut retries = 0;
    loop {
        let res = if blocks.len() == 1 { direction(&blocks[0], g, mode) } else { direction_block(blocks, g, mode) };
        match res {
            Ok(d) => return Ok((d, retries)),
            Err(e) if e.is_retryable() && retries < max_retries => {
                retries += 1;
                for b in blocks.iter_mut() {
                    b.lambda = if b.lambda > 0.0 { 2.0 * b.lambda } else { f64::MIN_POSITIVE };
                }
            }
            Err(e) if e.is_retryable() => {
                return Err(SolverError::SolveFailed { retries, lambda: blocks.first().map_or(0.0, |b| b.lambda) })
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::LowRankFactor;
    use crate::refinement::build_compact;

    #[test]
    fn scaled_identity_case() {
        let sys = RegularizedSystem::new(BaseMatrix::zero(2), Refinement::None, 2.0);
        assert_eq!(direction_smw(&sys, &[2.0, 4.0]).unwrap(), vec![-1.0, -2.0]);
        assert_eq!(direction_smw(&sys, &[0.0, 0.0]).unwrap(), vec![-0.0, -0.0]);
    }

    #[test]
    fn lowrank_trivial_cases() {
        let q = LowRankFactor::new(DenseMatrix::zeros(3, 0));
        let cl = build_compact(std::iter::empty(), 0.5, 3).unwrap();
        let sys = RegularizedSystem::new(BaseMatrix::new(BaseVariant::LowRankEfim(q)), Refinement::Compact(cl.clone()), 0.5);
        assert_eq!(direction_lowrank(&sys, &[1.0, 2.0, 3.0]).unwrap(), vec![-1.0, -2.0, -3.0]);

        let q = LowRankFactor::new(DenseMatrix::from_columns(3, &[&[1.0, 0.0, 0.0]]));
        let sys = RegularizedSystem::new(BaseMatrix::new(BaseVariant::LowRankEfim(q)), Refinement::Compact(cl), 0.5);
        let d = direction_lowrank(&sys, &[1.0, 0.0, 0.0]).unwrap();
        assert!((d[0] + 0.5).abs() < 1e-15 && d[1] == 0.0 && d[2] == 0.0);
    }

    #[test]
    fn two_identity_blocks() {
        let mk = || RegularizedSystem::new(BaseMatrix::new(BaseVariant::Ggn(DenseMatrix::identity(2))), Refinement::None, 1.0);
        let d = direction_block(&[mk(), mk()], &[2.0, 4.0, 6.0, 8.0], KronMode::Exact).unwrap();
        assert_eq!(d, vec![-1.0, -2.0, -3.0, -4.0]);
    }

    #[test]
    fn kron_identity_left_factor() {
        let gf = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let g = [1.0, 2.0, 3.0, 4.0];
        let d = direction_kron(&DenseMatrix::identity(2), &gf, None, 0.5, &g, KronMode::Exact).unwrap();
        let mut m = gf.clone();
        m.add_diag(0.5);
        let c = Cholesky::new(&m).unwrap();
        let want: Vec<f64> = [c.solve(&g[..2]), c.solve(&g[2..])].concat().iter().map(|x| -x).collect();
        for (a, b) in d.iter().zip(&want) {
            assert!((a - b).abs() < 1e-14);
        }
        let z = direction_kron(&DenseMatrix::identity(2), &gf, None, 0.5, &[0.0; 4], KronMode::Exact).unwrap();
        assert!(z.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn retry_doubles_lambda() {
        let h = DenseMatrix::from_diag(&[1.0, -1.5]);
        let mut sys = [RegularizedSystem::new(BaseMatrix::new(BaseVariant::SubsampledHessian(h)), Refinement::None, 0.5)];
        let (d, retries) = solve_with_retry(&mut sys, &[1.0, 1.0], KronMode::Exact, 40).unwrap();
        assert_eq!(retries, 2);
        assert_eq!(sys[0].lambda, 2.0);
        assert!((d[1] + 2.0).abs() < 1e-14);
        let mut bad = [RegularizedSystem::new(BaseMatrix::new(BaseVariant::SubsampledHessian(DenseMatrix::from_diag(&[-1e6]))), Refinement::None, 1e-9)];
        assert!(matches!(solve_with_retry(&mut bad, &[1.0], KronMode::Exact, 3), Err(SolverError::SolveFailed { retries: 3, .. })));
    }
}
