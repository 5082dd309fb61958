//! Regularisation, step-size and batch-size sequences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("thresholds must satisfy 0 < r1 < r2 (got r1={r1}, r2={r2})")]
    Thresholds { r1: f64, r2: f64 },
    #[error("step size must be positive")]
    Alpha,
    #[error("theory estimates must be positive with L_psi >= 1")]
    Estimates,
    #[error("batch rule is invalid: {0}")]
    Batch(String),
}

/// Regularisation `λ_k` from the previous mini-batch gradient norm.
///
/// `None` (the first iteration) and `r₁ ≤ ‖g‖ ≤ r₂` give `1/α`; below `r₁`
/// it is `2r₁/(‖g‖ + r₁)/α`, above `r₂` it is `2‖g‖/(‖g‖ + r₂)/α`.
pub fn lambda_k(gnorm_prev: Option<f64>, alpha: f64, r1: f64, r2: f64) -> f64 {
    match gnorm_prev {
        Some(g) if g < r1 => (2.0 * r1 / alpha) / (g + r1),
        Some(g) if g > r2 => (2.0 * g / alpha) / (g + r2),
        _ => 1.0 / alpha,
    }
}

/// Largest constant step size covered by the global convergence result,
/// `r₁ / (4 r₂ (L_Ψ + h))`.
pub fn theory_alpha_bound(l_psi: f64, h: f64, r1: f64, r2: f64) -> f64 {
    r1 / (4.0 * r2 * (l_psi + h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlphaSeq {
    Constant { value: f64 },
    /// `α₀ / (1 + k)^a`
    Polynomial { alpha0: f64, a: f64 },
}

impl AlphaSeq {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            AlphaSeq::Constant { value } => value,
            AlphaSeq::Polynomial { alpha0, a } => alpha0 / (1.0 + k as f64).powf(a),
        }
    }
}

/// User estimates of the smoothness constants. When present, a constant `α`
/// is clamped to [`theory_alpha_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryEstimates {
    pub l_psi: f64,
    pub h: f64,
    /// Gradient-dominance constant; recorded only.
    #[serde(default = "one")]
    pub c: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BatchRule {
    /// Every row, every iteration.
    Full,
    Constant { s0: usize },
    /// `⌈s₀ ρ^k⌉`
    Geometric { s0: usize, ratio: f64 },
    /// `⌈s₀ ρ^{k log(k+2)}⌉`
    Superlinear { s0: usize, ratio: f64 },
}

impl BatchRule {
    fn validate(&self) -> Result<(), ScheduleError> {
        match *self {
            BatchRule::Full => Ok(()),
            BatchRule::Constant { s0 } if s0 >= 1 => Ok(()),
            BatchRule::Geometric { s0, ratio } | BatchRule::Superlinear { s0, ratio } if s0 >= 1 && ratio >= 1.0 => Ok(()),
            other => Err(ScheduleError::Batch(format!("{other:?}"))),
        }
    }
}

/// Unrounded batch size (before the ceiling and the cap at `N`).
pub fn batch_size_real(rule: &BatchRule, k: usize) -> f64 {
    let k = k as f64;
    match *rule {
        BatchRule::Full => f64::INFINITY,
        BatchRule::Constant { s0 } => s0 as f64,
        BatchRule::Geometric { s0, ratio } => s0 as f64 * ratio.powf(k),
        BatchRule::Superlinear { s0, ratio } => s0 as f64 * ratio.powf(k * (k + 2.0).ln()),
    }
}

/// Batch size at iteration `k` for a dataset of `n_total` rows: at least 1,
/// nondecreasing, saturating at `n_total`.
pub fn batch_size_k(rule: &BatchRule, k: usize, n_total: usize) -> usize {
    let r = batch_size_real(rule, k);
    if !(r < n_total as f64) {
        return n_total;
    }
    (r.ceil() as usize).clamp(1, n_total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub r1: f64,
    pub r2: f64,
    pub alpha: AlphaSeq,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default)]
    pub theory: Option<TheoryEstimates>,
    pub batch_g: BatchRule,
    pub batch_h: BatchRule,
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        if !(self.r1 > 0.0 && self.r1 < self.r2) {
            return Err(ScheduleError::Thresholds { r1: self.r1, r2: self.r2 });
        }
        let a0 = self.alpha.at(0);
        if !(a0 > 0.0) || !a0.is_finite() || !(self.beta > 0.0) {
            return Err(ScheduleError::Alpha);
        }
        if let Some(t) = &self.theory {
            if !(t.l_psi >= 1.0 && t.h > 0.0 && t.c > 0.0) {
                return Err(ScheduleError::Estimates);
            }
        }
        self.batch_g.validate()?;
        self.batch_h.validate()
    }

    /// `α_k`, clamped to the theory bound when estimates are given.
    pub fn alpha_k(&self, k: usize) -> f64 {
        let a = self.alpha.at(k);
        match (&self.theory, &self.alpha) {
            (Some(t), AlphaSeq::Constant { .. }) => a.min(theory_alpha_bound(t.l_psi, t.h, self.r1, self.r2)),
            _ => a,
        }
    }

    pub fn lambda_k(&self, k: usize, gnorm_prev: Option<f64>) -> f64 {
        lambda_k(gnorm_prev, self.alpha_k(k), self.r1, self.r2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_k(Some(5.0), 0.1, 1.0, 10.0), 10.0);
        assert_eq!(lambda_k(Some(0.5), 0.1, 1.0, 10.0), 40.0 / 3.0);
        assert_eq!(lambda_k(None, 0.25, 1.0, 10.0), 4.0);
        let at = lambda_k(Some(1.0), 0.1, 1.0, 10.0);
        let below = (2.0 * 1.0 / 0.1) / (1.0 + 1.0);
        assert!((at - below).abs() <= 1e-12 * at);
    }

    #[test]
    fn alpha_bounds() {
        assert_eq!(theory_alpha_bound(1.0, 1.0, 1.0, 2.0), 1.0 / 16.0);
        assert!((theory_alpha_bound(4.0, 1.0, 0.1, 10.0) - 5e-4).abs() < 1e-18);
    }

    #[test]
    fn batch_examples() {
        let c = BatchRule::Constant { s0: 32 };
        assert!((0..10).all(|k| batch_size_k(&c, k, 1000) == 32));
        let g = BatchRule::Geometric { s0: 8, ratio: 2.0 };
        assert_eq!(batch_size_k(&g, 3, 1000), 64);
        assert_eq!(batch_size_k(&g, 3, 50), 50);
        assert_eq!(batch_size_k(&BatchRule::Full, 0, 17), 17);
        assert_eq!(batch_size_k(&g, 2000, 1000), 1000);
    }
}
