use super::{reduce_samples, ModelError, Objective, SampleJacobian};
use crate::dataio::Dataset;
use crate::linalg::DenseMatrix;

/// `ψ_i(θ) = log(1 + exp(−y_i ⟨x_i, θ⟩))` with `y_i ∈ {−1, +1}`.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    data: Dataset,
    mu: f64,
}

/// `σ(z) = 1 / (1 + e^{−z})`
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)`
#[inline]
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

impl LogisticRegression {
    pub fn new(data: Dataset, mu: f64) -> Result<Self, ModelError> {
        if data.labels.len() != data.len() {
            return Err(ModelError::ShapeMismatch(format!("{} labels for {} rows", data.labels.len(), data.len())));
        }
        if data.labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(ModelError::ShapeMismatch("labels must be -1 or +1".into()));
        }
        if !(mu >= 0.0) {
            return Err(ModelError::ShapeMismatch(format!("mu must be non-negative, got {mu}")));
        }
        Ok(Self { data, mu })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Margin `y_i ⟨x_i, θ⟩`.
    #[inline]
    fn margin(&self, theta: &[f64], i: usize) -> f64 {
        self.data.labels[i] * self.data.features.row_dot(i, theta)
    }
}

impl Objective for LogisticRegression {
    fn dim(&self) -> usize {
        self.data.n_features
    }

    fn num_samples(&self) -> usize {
        self.data.len()
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn sample_loss_grad(&self, theta: &[f64], i: usize) -> Result<(f64, Vec<f64>), ModelError> {
        let mut g = vec![0.0; self.dim()];
        let l = self.accumulate_loss_grad(theta, i, 1.0, &mut g)?;
        Ok((l, g))
    }

    fn accumulate_loss_grad(&self, theta: &[f64], i: usize, weight: f64, acc: &mut [f64]) -> Result<f64, ModelError> {
        let m = self.margin(theta, i);
        let y = self.data.labels[i];
        self.data.features.row_axpy(i, -weight * y * sigmoid(-m), acc);
        Ok(softplus(-m))
    }

    fn sample_hessian(&self, theta: &[f64], i: usize) -> Result<DenseMatrix, ModelError> {
        let n = self.dim();
        let m = self.margin(theta, i);
        let mut h = DenseMatrix::zeros(n, n);
        self.data.features.row_outer_acc(i, sigmoid(m) * sigmoid(-m), &mut h);
        Ok(h)
    }

    fn data_hessian(&self, theta: &[f64], idx: &[usize]) -> Result<DenseMatrix, ModelError> {
        if idx.is_empty() {
            return Err(ModelError::EmptySampleSet);
        }
        let n = self.dim();
        let acc = reduce_samples(idx, n * n, |i, acc| {
            let m = self.margin(theta, i);
            let w = sigmoid(m) * sigmoid(-m);
            let x = self.data.features.row_dense(i, n);
            for (a, xa) in x.iter().enumerate() {
                let f = w * xa;
                if f == 0.0 {
                    continue;
                }
                let row = &mut acc[a * n..(a + 1) * n];
                for (r, xb) in row.iter_mut().zip(&x) {
                    *r += f * xb;
                }
            }
            Ok(())
        })?;
        let mut h = DenseMatrix::from_row_major(n, n, acc);
        h.scale_assign(1.0 / idx.len() as f64);
        Ok(h)
    }

    /// The model output is `f = ⟨x_i, θ⟩`, so `J_f^i = x_i` (one column) and
    /// the loss is `log(1 + e^{−y f})`.
    fn sample_jacobian(&self, theta: &[f64], i: usize) -> Result<SampleJacobian, ModelError> {
        let n = self.dim();
        let x = self.data.features.row_dense(i, n);
        let f = self.data.features.row_dot(i, theta);
        let y = self.data.labels[i];
        Ok(SampleJacobian {
            jacobian: DenseMatrix::from_columns(n, &[&x]),
            loss_grad: vec![-y * sigmoid(-y * f)],
            loss_hessian: DenseMatrix::from_diag(&[sigmoid(f) * sigmoid(-f)]),
        })
    }

    fn sample_vjp(&self, _theta: &[f64], i: usize, r: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut out = vec![0.0; self.dim()];
        self.data.features.row_axpy(i, r[0], &mut out);
        Ok(out)
    }

    fn sample_output_grad(&self, theta: &[f64], i: usize) -> Result<Vec<f64>, ModelError> {
        let y = self.data.labels[i];
        Ok(vec![-y * sigmoid(-self.margin(theta, i))])
    }
}
