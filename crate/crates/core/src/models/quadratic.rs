use super::{ModelError, Objective};
use crate::linalg::{vector::dot, DenseMatrix};

/// `ψ_i(θ) = ½ θᵀ A_i θ − b_iᵀ θ`, one term per sample. Handy for checks with
/// a known Hessian and minimiser.
#[derive(Debug, Clone)]
pub struct Quadratic {
    terms: Vec<(DenseMatrix, Vec<f64>)>,
}

impl Quadratic {
    pub fn new(terms: Vec<(DenseMatrix, Vec<f64>)>) -> Self {
        assert!(!terms.is_empty());
        let n = terms[0].1.len();
        for (a, b) in &terms {
            assert!(a.is_square() && a.rows() == n && b.len() == n);
        }
        Self { terms }
    }

    /// A single term.
    pub fn single(a: DenseMatrix, b: Vec<f64>) -> Self {
        Self::new(vec![(a, b)])
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.terms[0].1.len()
    }
    fn num_samples(&self) -> usize {
        self.terms.len()
    }
    fn mu(&self) -> f64 {
        0.0
    }
    fn sample_loss_grad(&self, theta: &[f64], i: usize) -> Result<(f64, Vec<f64>), ModelError> {
        let (a, b) = &self.terms[i];
        let at = a.matvec(theta);
        let l = 0.5 * dot(theta, &at) - dot(b, theta);
        Ok((l, at.iter().zip(b).map(|(x, y)| x - y).collect()))
    }
    fn sample_hessian(&self, _theta: &[f64], i: usize) -> Result<DenseMatrix, ModelError> {
        Ok(self.terms[i].0.clone())
    }
}
