use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::RefinementError;
use crate::curvature::SampleSet;
use crate::linalg::vector::{all_finite, dot, norm, sub};
use crate::linalg::SymOperator;
use crate::models::{reduce_samples, Objective};

/// Step `u`, same-sample gradient difference `v̂`, and residual
/// `v = v̂ − H u` the refinement must explain.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair {
    pub u: Vec<f64>,
    pub v_hat: Option<Vec<f64>>,
    pub v: Vec<f64>,
}

impl CurvaturePair {
    pub fn is_finite(&self) -> bool {
        all_finite(&self.u) && all_finite(&self.v) && self.v_hat.as_deref().is_none_or(all_finite)
    }

    /// Recomputes `v = v̂ − H u` against a new base.
    pub fn rebase(&mut self, h: &dyn SymOperator) {
        if let Some(vh) = &self.v_hat {
            self.v = sub(vh, &h.apply(&self.u));
        }
    }
}

/// Pair from two iterates and gradients taken on the same sample set.
pub fn make_pair(
    theta_prev: &[f64],
    theta_next: &[f64],
    g_prev: &[f64],
    g_next: &[f64],
    h: &dyn SymOperator,
) -> Result<CurvaturePair, RefinementError> {
    let u = sub(theta_next, theta_prev);
    if norm(&u) == 0.0 {
        return Err(RefinementError::ZeroStep);
    }
    let v_hat = sub(g_next, g_prev);
    let v = sub(&v_hat, &h.apply(&u));
    let p = CurvaturePair { u, v_hat: Some(v_hat), v };
    if !p.is_finite() {
        return Err(RefinementError::NonFinite);
    }
    Ok(p)
}

/// Pair whose residual is the change of the output Jacobian along the loss
/// gradient, `v = (1/|S|) Σ (J_f^i(θ_next) − J_f^i(θ_prev)) ∇_f ℓ_i(θ_next)`.
pub fn make_structured_pair(
    model: &dyn Objective,
    theta_prev: &[f64],
    theta_next: &[f64],
    s: &SampleSet,
) -> Result<CurvaturePair, RefinementError> {
    let u = sub(theta_next, theta_prev);
    if norm(&u) == 0.0 {
        return Err(RefinementError::ZeroStep);
    }
    let n = model.dim();
    let acc = reduce_samples(&s.indices, n, |i, acc| {
        let r = model.sample_output_grad(theta_next, i)?;
        let jn = model.sample_vjp(theta_next, i, &r)?;
        let jp = model.sample_vjp(theta_prev, i, &r)?;
        for ((a, x), y) in acc.iter_mut().zip(&jn).zip(&jp) {
            *a += x - y;
        }
        Ok(())
    })?;
    let inv = 1.0 / s.len().max(1) as f64;
    let p = CurvaturePair { u, v_hat: None, v: acc.iter().map(|x| x * inv).collect() };
    if !p.is_finite() {
        return Err(RefinementError::NonFinite);
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcceptOutcome {
    Accepted,
    Rejected,
    Damped,
}

impl AcceptOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            AcceptOutcome::Accepted => "accepted",
            AcceptOutcome::Rejected => "rejected",
            AcceptOutcome::Damped => "damped",
        }
    }

    pub fn is_stored(self) -> bool {
        !matches!(self, AcceptOutcome::Rejected)
    }
}

/// FIFO window of accepted pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBuffer {
    pub capacity: usize,
    pub eps_b: f64,
    pub damping: bool,
    pairs: VecDeque<CurvaturePair>,
}

impl PairBuffer {
    pub fn new(capacity: usize, eps_b: f64, damping: bool) -> Self {
        Self { capacity, eps_b, damping, pairs: VecDeque::with_capacity(capacity) }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = &CurvaturePair> {
        self.pairs.iter()
    }

    pub fn newest(&self) -> Option<&CurvaturePair> {
        self.pairs.back()
    }

    pub fn newest_mut(&mut self) -> Option<&mut CurvaturePair> {
        self.pairs.back_mut()
    }

    pub fn drop_oldest(&mut self) -> Option<CurvaturePair> {
        self.pairs.pop_front()
    }

    pub fn drop_newest(&mut self) -> Option<CurvaturePair> {
        self.pairs.pop_back()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    pub fn take_all(&mut self) -> Vec<CurvaturePair> {
        self.pairs.drain(..).collect()
    }

    /// `uᵀv ≥ ε_B ‖u‖ ‖v‖` with strictly positive curvature.
    pub fn passes(&self, u: &[f64], v: &[f64]) -> bool {
        let uv = dot(u, v);
        uv > 0.0 && uv >= self.eps_b * norm(u) * norm(v)
    }

    fn push(&mut self, p: CurvaturePair) {
        if self.capacity == 0 {
            return;
        }
        while self.pairs.len() >= self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(p);
    }
}

/// Tests `pair` and stores it on success. With damping enabled, a failing
/// pair gets `v ← τ v + (1 − τ) Λ u`, `τ = 0.8 uᵀΛu / (uᵀΛu − uᵀv)`, and is
/// tested again.
pub fn accept_pair(mut pair: CurvaturePair, buffer: &mut PairBuffer, lam: &dyn SymOperator) -> AcceptOutcome {
    if !pair.is_finite() {
        return AcceptOutcome::Rejected;
    }
    if buffer.passes(&pair.u, &pair.v) {
        buffer.push(pair);
        return AcceptOutcome::Accepted;
    }
    if !buffer.damping {
        return AcceptOutcome::Rejected;
    }
    let lu = lam.apply(&pair.u);
    let ulu = dot(&pair.u, &lu);
    let uv = dot(&pair.u, &pair.v);
    if !(ulu > 0.0) || !(uv < 0.2 * ulu) {
        return AcceptOutcome::Rejected;
    }
    let tau = 0.8 * ulu / (ulu - uv);
    let damped: Vec<f64> = pair.v.iter().zip(&lu).map(|(v, l)| tau * v + (1.0 - tau) * l).collect();
    if !buffer.passes(&pair.u, &damped) {
        return AcceptOutcome::Rejected;
    }
    pair.v = damped;
    buffer.push(pair);
    AcceptOutcome::Damped
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseMatrix, ScaledIdentity};

    fn e1() -> Vec<f64> {
        vec![1.0, 0.0, 0.0]
    }

    fn pair(u: Vec<f64>, v: Vec<f64>) -> CurvaturePair {
        CurvaturePair { u, v_hat: None, v }
    }

    #[test]
    fn zero_step_and_zero_base() {
        let t = [1.0, 2.0];
        let z = DenseMatrix::zeros(2, 2);
        assert_eq!(make_pair(&t, &t, &[0.0; 2], &[1.0; 2], &z).unwrap_err(), RefinementError::ZeroStep);
        let p = make_pair(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[2.0, 3.0], &z).unwrap();
        assert_eq!(p.v, p.v_hat.clone().unwrap());
    }

    #[test]
    fn acceptance_examples() {
        let id = ScaledIdentity { scale: 1.0, n: 3 };
        let mut b = PairBuffer::new(5, 1e-8, false);
        assert_eq!(accept_pair(pair(e1(), e1()), &mut b, &id), AcceptOutcome::Accepted);
        let neg: Vec<f64> = e1().iter().map(|x| -x).collect();
        assert_eq!(accept_pair(pair(e1(), neg.clone()), &mut b, &id), AcceptOutcome::Rejected);
        let mut d = PairBuffer::new(5, 1e-8, true);
        assert_eq!(accept_pair(pair(e1(), neg), &mut d, &id), AcceptOutcome::Damped);
        let v = &d.newest().unwrap().v;
        assert!((v[0] - 0.2).abs() < 1e-15 && v[1] == 0.0 && v[2] == 0.0);
    }

    #[test]
    fn zero_residual_is_rejected() {
        let id = ScaledIdentity { scale: 1.0, n: 3 };
        let mut b = PairBuffer::new(5, 1e-8, false);
        assert_eq!(accept_pair(pair(e1(), vec![0.0; 3]), &mut b, &id), AcceptOutcome::Rejected);
    }

    #[test]
    fn fifo_eviction() {
        let id = ScaledIdentity { scale: 1.0, n: 1 };
        let mut b = PairBuffer::new(2, 1e-8, false);
        for k in 1..=3 {
            accept_pair(pair(vec![k as f64], vec![1.0]), &mut b, &id);
        }
        let us: Vec<f64> = b.pairs().map(|p| p.u[0]).collect();
        assert_eq!(us, vec![2.0, 3.0]);
    }
}
