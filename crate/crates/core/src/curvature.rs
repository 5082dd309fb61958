//! Base matrices `H_k` built from model callbacks on a sample set.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{kron_apply, DenseMatrix, KroneckerOperator, LowRankFactor, SymOperator};
use crate::models::{reduce_samples, ForwardCache, ModelError, Objective};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurvatureError {
    #[error("model cannot provide this base matrix: {0}")]
    UnsupportedModel(ModelError),
    #[error("layer {0} has no Kronecker factorisation")]
    LayerUnsupported(usize),
    #[error(transparent)]
    Model(ModelError),
}

impl From<ModelError> for CurvatureError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Unsupported(_) => CurvatureError::UnsupportedModel(e),
            ModelError::LayerUnsupported(l) => CurvatureError::LayerUnsupported(l),
            other => CurvatureError::Model(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleKind {
    Gradient,
    Hessian,
}

/// Sorted, distinct dataset rows drawn for one purpose in one iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    pub indices: Vec<usize>,
    pub kind: SampleKind,
    pub seed: u64,
}

impl SampleSet {
    /// Every row, in order.
    pub fn full(n_total: usize, kind: SampleKind) -> Self {
        Self { indices: (0..n_total).collect(), kind, seed: 0 }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Uniform sampling of `size` rows out of `n_total` without replacement.
/// Sizes of at least `n_total` give the full, ordered index set.
pub fn draw_sample_set(n_total: usize, size: usize, kind: SampleKind, seed: u64) -> SampleSet {
    assert!(n_total >= 1, "cannot sample from an empty dataset");
    let size = size.clamp(1, n_total);
    if size == n_total {
        return SampleSet { indices: (0..n_total).collect(), kind, seed };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = rand::seq::index::sample(&mut rng, n_total, size).into_vec();
    indices.sort_unstable();
    SampleSet { indices, kind, seed }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaseVariant {
    /// `H = 0`.
    Zero(usize),
    SubsampledHessian(DenseMatrix),
    Ggn(DenseMatrix),
    Efim(DenseMatrix),
    LowRankEfim(LowRankFactor),
    /// `Â ⊗ G̃`
    Kron { a: DenseMatrix, g: DenseMatrix },
}

/// `variant + shift · I`. The shift carries the ℓ₂ curvature `2μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseMatrix {
    pub variant: BaseVariant,
    pub shift: f64,
    pub samples: Option<SampleSet>,
}

impl BaseMatrix {
    pub fn new(variant: BaseVariant) -> Self {
        Self { variant, shift: 0.0, samples: None }
    }

    pub fn zero(n: usize) -> Self {
        Self::new(BaseVariant::Zero(n))
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn with_samples(mut self, s: SampleSet) -> Self {
        self.samples = Some(s);
        self
    }

    /// Dense matrix of the variant, if stored densely.
    pub fn dense(&self) -> Option<&DenseMatrix> {
        match &self.variant {
            BaseVariant::SubsampledHessian(m) | BaseVariant::Ggn(m) | BaseVariant::Efim(m) => Some(m),
            _ => None,
        }
    }

    pub fn kron(&self) -> Option<(&DenseMatrix, &DenseMatrix)> {
        match &self.variant {
            BaseVariant::Kron { a, g } => Some((a, g)),
            _ => None,
        }
    }

    /// Materialised `variant + shift · I`.
    pub fn materialize(&self) -> DenseMatrix {
        let mut m = match &self.variant {
            BaseVariant::Zero(n) => DenseMatrix::zeros(*n, *n),
            BaseVariant::SubsampledHessian(m) | BaseVariant::Ggn(m) | BaseVariant::Efim(m) => m.clone(),
            BaseVariant::LowRankEfim(q) => q.materialize(),
            BaseVariant::Kron { a, g } => KroneckerOperator { left: a.clone(), right: g.clone() }.materialize(),
        };
        if self.shift != 0.0 {
            m.add_diag(self.shift);
        }
        m
    }
}

impl SymOperator for BaseMatrix {
    fn dim(&self) -> usize {
        match &self.variant {
            BaseVariant::Zero(n) => *n,
            BaseVariant::SubsampledHessian(m) | BaseVariant::Ggn(m) | BaseVariant::Efim(m) => m.rows(),
            BaseVariant::LowRankEfim(q) => q.q.rows(),
            BaseVariant::Kron { a, g } => a.rows() * g.rows(),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = match &self.variant {
            BaseVariant::Zero(n) => vec![0.0; *n],
            BaseVariant::SubsampledHessian(m) | BaseVariant::Ggn(m) | BaseVariant::Efim(m) => m.matvec(x),
            BaseVariant::LowRankEfim(q) => q.apply(x),
            BaseVariant::Kron { a, g } => {
                let k = KroneckerOperator { left: a.clone(), right: g.clone() };
                kron_apply(&k, x).expect("kron base dimension")
            }
        };
        if self.shift != 0.0 {
            crate::linalg::vector::axpy(self.shift, x, &mut y);
        }
        y
    }
}

/// `(1/|S|) Σ ∇²ψ_i(θ)`.
pub fn subsampled_hessian(model: &dyn Objective, theta: &[f64], s: &SampleSet) -> Result<BaseMatrix, CurvatureError> {
    let h = model.data_hessian(theta, &s.indices)?;
    Ok(BaseMatrix::new(BaseVariant::SubsampledHessian(h)).with_samples(s.clone()))
}

/// `(1/|S|) Σ J_f^i ∇²_f ℓ_i (J_f^i)ᵀ`.
pub fn ggn_matrix(model: &dyn Objective, theta: &[f64], s: &SampleSet) -> Result<BaseMatrix, CurvatureError> {
    if s.is_empty() {
        return Err(ModelError::EmptySampleSet.into());
    }
    let n = model.dim();
    let acc = reduce_samples(&s.indices, n * n, |i, acc| {
        let sj = model.sample_jacobian(theta, i)?;
        // J H Jᵀ = (J H) Jᵀ
        let jh = sj.jacobian.matmul(&sj.loss_hessian);
        let m = jh.matmul_tr(&sj.jacobian);
        crate::linalg::vector::axpy(1.0, m.as_slice(), acc);
        Ok(())
    })?;
    let mut g = DenseMatrix::from_row_major(n, n, acc);
    g.scale_assign(1.0 / s.len() as f64);
    Ok(BaseMatrix::new(BaseVariant::Ggn(g)).with_samples(s.clone()))
}

/// Empirical Fisher `(1/|S|) Σ ∇ψ_i ∇ψ_iᵀ`, dense or as the factor
/// `Q = [∇ψ_i / √|S|]`.
pub fn efim(model: &dyn Objective, theta: &[f64], s: &SampleSet, low_rank: bool) -> Result<BaseMatrix, CurvatureError> {
    if s.is_empty() {
        return Err(ModelError::EmptySampleSet.into());
    }
    let n = model.dim();
    let scale = 1.0 / (s.len() as f64).sqrt();
    let grads: Vec<Result<Vec<f64>, ModelError>> =
        crate::parallel::map(&s.indices, |&i| model.sample_loss_grad(theta, i).map(|(_, g)| g));
    let grads = grads.into_iter().collect::<Result<Vec<_>, _>>()?;
    let variant = if low_rank {
        let mut q = DenseMatrix::zeros(n, s.len());
        for (j, g) in grads.iter().enumerate() {
            let c: Vec<f64> = g.iter().map(|v| v * scale).collect();
            q.set_col(j, &c);
        }
        BaseVariant::LowRankEfim(LowRankFactor::new(q))
    } else {
        let acc = reduce_samples(&(0..grads.len()).collect::<Vec<_>>(), n * n, |j, acc| {
            let g: Vec<f64> = grads[j].iter().map(|v| v * scale).collect();
            for (a, ga) in g.iter().enumerate() {
                if *ga == 0.0 {
                    continue;
                }
                for (r, gb) in acc[a * n..(a + 1) * n].iter_mut().zip(&g) {
                    *r += ga * gb;
                }
            }
            Ok(())
        })?;
        BaseVariant::Efim(DenseMatrix::from_row_major(n, n, acc))
    };
    Ok(BaseMatrix::new(variant).with_samples(s.clone()))
}

/// How spatial locations enter `Â` for convolutional layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialNorm {
    /// `Â = (1/|S|) Σ_i (1/|𝒯|) A_i A_iᵀ`
    #[default]
    Average,
    /// `Â = (1/|S|) Σ_i A_i A_iᵀ`
    Sum,
}

/// Empirical KFAC factors of one layer from a populated cache.
pub fn kfac_from_cache(cache: &ForwardCache, layer: usize, norm: SpatialNorm) -> Result<BaseMatrix, CurvatureError> {
    if cache.samples.is_empty() {
        return Err(ModelError::EmptyCache.into());
    }
    let first = cache.samples[0].get(layer).ok_or(CurvatureError::LayerUnsupported(layer))?;
    let (ma, mg) = (first.a.rows(), first.ds.rows());
    let spatial = first.a.cols();
    let ks: Vec<usize> = (0..cache.samples.len()).collect();
    let acc = reduce_samples(&ks, ma * ma + mg * mg, |k, acc| {
        let c = &cache.samples[k][layer];
        let aa = c.a.matmul_tr(&c.a);
        let gg = c.ds.matmul_tr(&c.ds);
        crate::linalg::vector::axpy(1.0, aa.as_slice(), &mut acc[..ma * ma]);
        crate::linalg::vector::axpy(1.0, gg.as_slice(), &mut acc[ma * ma..]);
        Ok(())
    })?;
    let inv = 1.0 / cache.samples.len() as f64;
    let a_scale = match norm {
        SpatialNorm::Average => inv / spatial as f64,
        SpatialNorm::Sum => inv,
    };
    let a = DenseMatrix::from_row_major(ma, ma, acc[..ma * ma].iter().map(|v| v * a_scale).collect());
    let g = DenseMatrix::from_row_major(mg, mg, acc[ma * ma..].iter().map(|v| v * inv).collect());
    let set = SampleSet { indices: cache.indices.clone(), kind: SampleKind::Hessian, seed: 0 };
    Ok(BaseMatrix::new(BaseVariant::Kron { a, g }).with_samples(set))
}

/// Runs a forward/backward pass on `s` and returns the KFAC factors of
/// `layer` (true labels, so no extra backward pass).
pub fn kfac_empirical_factors(
    model: &dyn Objective,
    theta: &[f64],
    s: &SampleSet,
    layer: usize,
    norm: SpatialNorm,
) -> Result<BaseMatrix, CurvatureError> {
    let net = model.layered().ok_or(CurvatureError::LayerUnsupported(layer))?;
    if layer >= net.layers().len() {
        return Err(CurvatureError::LayerUnsupported(layer));
    }
    let (_, _, cache) = net.forward_backward(theta, &s.indices)?;
    let mut b = kfac_from_cache(&cache, layer, norm)?;
    b.samples = Some(s.clone());
    Ok(b)
}
