use super::{ForwardCache, LayerInfo, ModelError};
use crate::linalg::{mat_col_major, DenseMatrix};

/// Parameter-space pair for one layer: `𝕌 = ÛÂ`,
/// `𝕍 = V̂ − shift·Û − G̃ÛÂ`, where `Û`, `V̂` are the `m_g × m_a` matrix
/// forms of the layer's step and gradient difference.
///
/// A block refinement with `Λ̃𝕌 = 𝕍` makes `(Â ⊗ (G̃ + Λ̃) + shift·I) u = v̂`.
pub fn b1_pair(
    u: &[f64],
    v_hat: &[f64],
    info: &LayerInfo,
    a: &DenseMatrix,
    g: &DenseMatrix,
    shift: f64,
) -> Result<(DenseMatrix, DenseMatrix), ModelError> {
    let n = info.m_a * info.m_g;
    if u.len() != n || v_hat.len() != n || a.rows() != info.m_a || g.rows() != info.m_g {
        return Err(ModelError::ShapeMismatch(format!("layer block of {n} entries")));
    }
    let uh = mat_col_major(u, info.m_g, info.m_a);
    let vh = mat_col_major(v_hat, info.m_g, info.m_a);
    let uu = uh.matmul(a);
    let vv = vh.sub(&uh.scale(shift)).sub(&g.matmul(&uu));
    Ok((uu, vv))
}

/// Batch-averaged differences `(Ũ, Ṽ)` of pre-activations and their
/// gradients for every layer, one column per spatial location.
pub fn preactivation_differences(
    prev: &ForwardCache,
    next: &ForwardCache,
) -> Result<Vec<(DenseMatrix, DenseMatrix)>, ModelError> {
    if prev.samples.is_empty() || next.samples.is_empty() {
        return Err(ModelError::EmptyCache);
    }
    if prev.indices != next.indices {
        return Err(ModelError::ShapeMismatch("caches cover different samples".into()));
    }
    let count = prev.samples.len();
    let layers = prev.samples[0].len();
    Ok((0..layers)
        .map(|l| {
            let c0 = &prev.samples[0][l];
            let mut u = DenseMatrix::zeros(c0.s.rows(), c0.s.cols());
            let mut v = DenseMatrix::zeros(c0.ds.rows(), c0.ds.cols());
            for (p, q) in prev.samples.iter().zip(&next.samples) {
                u.add_assign(&q[l].s.sub(&p[l].s));
                v.add_assign(&q[l].ds.sub(&p[l].ds));
            }
            let inv = 1.0 / count as f64;
            (u.scale(inv), v.scale(inv))
        })
        .collect())
}

/// Pre-activation pair: `𝕌 = Ũ`, `𝕍 = cṼ − G̃Ũ`.
///
/// `c` is `|𝒯|` when `Â` averages over spatial locations and 1 otherwise.
pub fn b2_pair(diff: &(DenseMatrix, DenseMatrix), g: &DenseMatrix, c: f64) -> (DenseMatrix, DenseMatrix) {
    let (u, v) = diff;
    (u.clone(), v.scale(c).sub(&g.matmul(u)))
}
