use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::RefinementError;
use crate::linalg::{Cholesky, DenseMatrix, Lu, SymmetricEigen};

/// Middle matrix `ℙ` of the block update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PChoice {
    /// `½(𝕍ᵀ𝕌 + 𝕌ᵀ𝕍)`
    #[default]
    Symmetrized,
    /// `(tr(𝕍ᵀ𝕌)/s) I`
    Trace,
    /// `diag(𝕍ᵀ𝕌)`
    Diagonal,
    /// `𝕍ᵀ𝕌` as is. Enforces `Λ'𝕌 = 𝕍` exactly; symmetric only when
    /// `𝕍ᵀ𝕌` is.
    Exact,
}

/// Dense refinement on the `G`-side of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRefinement {
    pub lambda: DenseMatrix,
}

impl BlockRefinement {
    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self { lambda: DenseMatrix::scaled_identity(n, s) }
    }

    pub fn dim(&self) -> usize {
        self.lambda.rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutcome {
    pub refinement: BlockRefinement,
    pub damped: bool,
}

/// `W^{-1/2}` for symmetric positive definite `W`.
fn inv_sqrt(w: &DenseMatrix) -> Result<DenseMatrix, RefinementError> {
    let e = SymmetricEigen::new(w).map_err(|_| RefinementError::RankDeficientU)?;
    let mut out = DenseMatrix::zeros(w.rows(), w.rows());
    for (k, s) in e.values.iter().enumerate() {
        if !(*s > 0.0) {
            return Err(RefinementError::RankDeficientU);
        }
        let c = e.vectors.col(k);
        out.rank_one_update(1.0 / s.sqrt(), &c, &c);
    }
    Ok(out)
}

/// Curvature ratio `ρ` that the damping drives to at least 0.2.
fn curvature_ratio(choice: PChoice, vtu: &DenseMatrix, w: &DenseMatrix) -> Result<f64, RefinementError> {
    Ok(match choice {
        PChoice::Symmetrized | PChoice::Exact => {
            let wi = inv_sqrt(w)?;
            let m = wi.matmul(&vtu.symmetrize()).matmul(&wi);
            SymmetricEigen::new(&m).map_err(|_| RefinementError::RankDeficientU)?.min()
        }
        PChoice::Trace => vtu.trace() / w.trace(),
        PChoice::Diagonal => (0..w.rows()).map(|j| vtu[(j, j)] / w[(j, j)]).fold(f64::INFINITY, f64::min),
    })
}

fn p_matrix(choice: PChoice, vtu: &DenseMatrix) -> DenseMatrix {
    let s = vtu.rows();
    match choice {
        PChoice::Symmetrized => vtu.symmetrize(),
        PChoice::Trace => DenseMatrix::scaled_identity(s, vtu.trace() / s as f64),
        PChoice::Diagonal => DenseMatrix::from_diag(&vtu.diag()),
        PChoice::Exact => vtu.clone(),
    }
}

/// `Λ' = Λ + 𝕍 ℙ⁻¹ 𝕍ᵀ − Λ𝕌 (𝕌ᵀΛ𝕌)⁻¹ 𝕌ᵀΛ`.
///
/// With `damping`, `𝕍 ← τ𝕍 + (1 − τ)Λ𝕌` with `τ = 0.8/(1 − ρ)` whenever the
/// curvature ratio `ρ` of `ℙ` against `𝕌ᵀΛ𝕌` is below 0.2.
pub fn block_bfgs_update(
    lam: &BlockRefinement,
    u: &DenseMatrix,
    v: &DenseMatrix,
    choice: PChoice,
    damping: bool,
) -> Result<BlockOutcome, RefinementError> {
    let m = lam.dim();
    if u.rows() != m || (u.rows(), u.cols()) != (v.rows(), v.cols()) || u.cols() == 0 {
        return Err(RefinementError::ShapeMismatch(format!(
            "U is {}x{}, V is {}x{}, Λ is {m}x{m}",
            u.rows(),
            u.cols(),
            v.rows(),
            v.cols()
        )));
    }
    if !u.is_finite() || !v.is_finite() {
        return Err(RefinementError::NonFinite);
    }
    if u.max_abs() == 0.0 {
        return Err(RefinementError::ZeroStep);
    }
    let lu = lam.lambda.matmul(u);
    let w = u.tr_matmul(&lu).symmetrize();
    let w_chol = Cholesky::new(&w).map_err(|_| RefinementError::RankDeficientU)?;

    let mut v = v.clone();
    let mut vtu = v.tr_matmul(u);
    let mut damped = false;
    if damping {
        let rho = curvature_ratio(choice, &vtu, &w)?;
        if rho < 0.2 {
            let tau = 0.8 / (1.0 - rho);
            v = v.scale(tau).add(&lu.scale(1.0 - tau));
            vtu = v.tr_matmul(u);
            damped = true;
        }
    }
    let p = p_matrix(choice, &vtu);
    // ℙ⁻¹ 𝕍ᵀ
    let pinv_vt = match choice {
        PChoice::Exact => Lu::new(&p).map_err(|_| RefinementError::NotPositiveDefinite)?.solve_matrix(&v.transpose()),
        _ => Cholesky::new(&p).map_err(|_| RefinementError::NotPositiveDefinite)?.solve_matrix(&v.transpose()),
    };
    let plus = v.matmul(&pinv_vt);
    let winv_lut = w_chol.solve_matrix(&lu.transpose());
    let minus = lu.matmul(&winv_lut);
    let mut next = lam.lambda.add(&plus).sub(&minus);
    if choice != PChoice::Exact {
        next = next.symmetrize();
    }
    if !next.is_finite() {
        return Err(RefinementError::NonFinite);
    }
    Ok(BlockOutcome { refinement: BlockRefinement { lambda: next }, damped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SketchKind {
    /// Entries `N(0, 1/s)`.
    #[default]
    Gaussian,
    /// `s` distinct columns, kept in their original order.
    RowSubsample,
}

/// Column sketch `Ξ` (`c × s`) applied as `𝕌Ξ`, `𝕍Ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SketchConfig {
    pub dim: usize,
    pub kind: SketchKind,
    pub seed: u64,
}

impl SketchConfig {
    /// Draws `Ξ` for `cols` input columns, or the selected column indices.
    fn draw(&self, cols: usize) -> Result<Sketch, RefinementError> {
        if self.dim == 0 || self.dim > cols {
            return Err(RefinementError::InvalidSketch { dim: self.dim, cols });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok(match self.kind {
            SketchKind::Gaussian => {
                let dist = Normal::new(0.0, (1.0 / self.dim as f64).sqrt()).expect("valid normal");
                let mut xi = DenseMatrix::zeros(cols, self.dim);
                for e in xi.as_mut_slice() {
                    *e = dist.sample(&mut rng);
                }
                Sketch::Dense(xi)
            }
            SketchKind::RowSubsample => {
                let mut idx = rand::seq::index::sample(&mut rng, cols, self.dim).into_vec();
                idx.sort_unstable();
                Sketch::Select(idx)
            }
        })
    }
}

enum Sketch {
    Dense(DenseMatrix),
    Select(Vec<usize>),
}

impl Sketch {
    fn apply(&self, m: &DenseMatrix) -> DenseMatrix {
        match self {
            Sketch::Dense(xi) => m.matmul(xi),
            Sketch::Select(idx) => m.select_cols(idx),
        }
    }
}

/// Block update on the sketched pair `(𝕌Ξ, 𝕍Ξ)`.
pub fn sketchy_block_bfgs_update(
    lam: &BlockRefinement,
    u: &DenseMatrix,
    v: &DenseMatrix,
    sketch: &SketchConfig,
    choice: PChoice,
    damping: bool,
) -> Result<BlockOutcome, RefinementError> {
    if (u.rows(), u.cols()) != (v.rows(), v.cols()) {
        return Err(RefinementError::ShapeMismatch("U and V differ in shape".into()));
    }
    let xi = sketch.draw(u.cols())?;
    block_bfgs_update(lam, &xi.apply(u), &xi.apply(v), choice, damping)
}
