//! Problems with exact derivatives.
//!
//! Every objective has the form `Ψ(θ) = (1/N) Σ ψ_i(θ) + μ‖θ‖²`. The data term
//! is exposed per sample; the ℓ₂ term is added by the provided methods.

mod kron_pairs;
mod logistic;
mod network;
mod quadratic;

pub use kron_pairs::{b1_pair, b2_pair, preactivation_differences};
pub use logistic::LogisticRegression;
pub use network::{conv_forward_backward, Activation, ConvOutput, ConvSpec, LayerSpec, Loss, Network};
pub use quadratic::Quadratic;

use std::ops::Range;

use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::parallel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("model does not support {0}")]
    Unsupported(&'static str),
    #[error("non-finite activation in layer {layer}")]
    NonFiniteActivation { layer: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("layer {0} has no Kronecker factorisation")]
    LayerUnsupported(usize),
    #[error("forward cache is empty")]
    EmptyCache,
    #[error("empty sample set")]
    EmptySampleSet,
}

/// Per-sample output Jacobian `J_f^i` (columns `∂f_j/∂θ`, shape `n × m`) with
/// the loss derivatives taken with respect to the model output.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleJacobian {
    pub jacobian: DenseMatrix,
    pub loss_grad: Vec<f64>,
    pub loss_hessian: DenseMatrix,
}

pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn num_samples(&self) -> usize;
    /// ℓ₂ coefficient `μ` in `μ‖θ‖²`.
    fn mu(&self) -> f64;

    /// `ψ_i(θ)` and `∇ψ_i(θ)`.
    fn sample_loss_grad(&self, theta: &[f64], i: usize) -> Result<(f64, Vec<f64>), ModelError>;

    /// Adds `weight · ∇ψ_i(θ)` to `acc` and returns `ψ_i(θ)`.
    fn accumulate_loss_grad(&self, theta: &[f64], i: usize, weight: f64, acc: &mut [f64]) -> Result<f64, ModelError> {
        let (l, g) = self.sample_loss_grad(theta, i)?;
        crate::linalg::vector::axpy(weight, &g, acc);
        Ok(l)
    }

    fn sample_hessian(&self, _theta: &[f64], _i: usize) -> Result<DenseMatrix, ModelError> {
        Err(ModelError::Unsupported("per-sample Hessians"))
    }

    fn sample_jacobian(&self, _theta: &[f64], _i: usize) -> Result<SampleJacobian, ModelError> {
        Err(ModelError::Unsupported("per-sample Jacobians"))
    }

    /// `J_f^i(θ) r`
    fn sample_vjp(&self, theta: &[f64], i: usize, r: &[f64]) -> Result<Vec<f64>, ModelError> {
        Ok(self.sample_jacobian(theta, i)?.jacobian.matvec(r))
    }

    /// `∇_f ℓ_i` at `θ`.
    fn sample_output_grad(&self, theta: &[f64], i: usize) -> Result<Vec<f64>, ModelError> {
        Ok(self.sample_jacobian(theta, i)?.loss_grad)
    }

    fn layered(&self) -> Option<&dyn Layered> {
        None
    }

    /// Mini-batch objective and gradient including the ℓ₂ term.
    fn value_grad(&self, theta: &[f64], idx: &[usize]) -> Result<(f64, Vec<f64>), ModelError> {
        if idx.is_empty() {
            return Err(ModelError::EmptySampleSet);
        }
        let n = self.dim();
        let acc = reduce_samples(idx, n + 1, |i, acc| {
            let l = self.accumulate_loss_grad(theta, i, 1.0, &mut acc[..n])?;
            acc[n] += l;
            Ok(())
        })?;
        let inv = 1.0 / idx.len() as f64;
        let mu = self.mu();
        let mut g: Vec<f64> = acc[..n].iter().map(|v| v * inv).collect();
        for (gi, t) in g.iter_mut().zip(theta) {
            *gi += 2.0 * mu * t;
        }
        let reg = mu * crate::linalg::vector::dot(theta, theta);
        Ok((acc[n] * inv + reg, g))
    }

    fn value(&self, theta: &[f64], idx: &[usize]) -> Result<f64, ModelError> {
        Ok(self.value_grad(theta, idx)?.0)
    }

    /// `(1/|S|) Σ ∇²ψ_i(θ)` without the ℓ₂ term.
    fn data_hessian(&self, theta: &[f64], idx: &[usize]) -> Result<DenseMatrix, ModelError> {
        if idx.is_empty() {
            return Err(ModelError::EmptySampleSet);
        }
        let n = self.dim();
        let acc = reduce_samples(idx, n * n, |i, acc| {
            let h = self.sample_hessian(theta, i)?;
            crate::linalg::vector::axpy(1.0, h.as_slice(), acc);
            Ok(())
        })?;
        let mut h = DenseMatrix::from_row_major(n, n, acc);
        h.scale_assign(1.0 / idx.len() as f64);
        Ok(h)
    }
}

/// Sums per-sample contributions into a flat accumulator of length `len`,
/// chunk by chunk, with the fixed reduction tree of [`parallel`].
pub fn reduce_samples<F>(idx: &[usize], len: usize, f: F) -> Result<Vec<f64>, ModelError>
where
    F: Fn(usize, &mut [f64]) -> Result<(), ModelError> + Sync + Send,
{
    let out = parallel::chunked_reduce(
        idx,
        |chunk| {
            let mut acc = vec![0.0; len];
            for &i in chunk {
                f(i, &mut acc)?;
            }
            Ok(acc)
        },
        |a: Result<Vec<f64>, ModelError>, b| Ok(parallel::add_vecs(a?, b?)),
    );
    out.unwrap_or_else(|| Ok(vec![0.0; len]))
}

/// Geometry of one layer's parameter block `Θ̃` (`m_g × m_a`, stored
/// column-major at `params`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerInfo {
    pub params: Range<usize>,
    /// Rows of the (expanded) activation matrix `A`.
    pub m_a: usize,
    /// Rows of the pre-activation matrix `S`.
    pub m_g: usize,
    /// Spatial locations `|𝒯|` (1 for fully-connected layers).
    pub spatial: usize,
}

/// One sample's quantities at one layer. `a` is `m_a × |𝒯|`, `s` and `ds`
/// are `m_g × |𝒯|`. The sample's gradient block is `vec(ds aᵀ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCapture {
    pub a: DenseMatrix,
    pub s: DenseMatrix,
    pub ds: DenseMatrix,
}

/// Per-sample, per-layer captures from a forward/backward pass on a fixed
/// parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub theta: Vec<f64>,
    pub indices: Vec<usize>,
    /// `samples[k][l]` is sample `indices[k]` at layer `l`.
    pub samples: Vec<Vec<LayerCapture>>,
}

impl ForwardCache {
    pub fn is_valid_for(&self, theta: &[f64]) -> bool {
        self.theta == theta
    }
}

/// Models made of layers with Kronecker-factorable parameter blocks.
pub trait Layered: Sync {
    fn layers(&self) -> &[LayerInfo];

    /// Mini-batch objective and gradient (both with the ℓ₂ term) plus the cache.
    fn forward_backward(&self, theta: &[f64], idx: &[usize]) -> Result<(f64, Vec<f64>, ForwardCache), ModelError>;
}
