use serde::{Deserialize, Serialize};

use crate::curvature::SpatialNorm;
use crate::refinement::{GammaRule, PChoice, SketchKind};
use crate::schedule::ScheduleConfig;
use crate::solver::KronMode;

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Zero base, no refinement: `d = −g/λ_k`.
    SgdBaseline,
    /// Base matrix only.
    Ssn,
    /// Subsampled Hessian base with compact L-BFGS refinement.
    S4qn,
    /// Any vector base with compact L-BFGS refinement.
    S2qn,
    /// Per-layer Kronecker base with per-layer compact L-BFGS.
    SkqnL,
    /// Kronecker base with a block refinement fitted to parameter-space pairs.
    SkqnB1,
    /// Kronecker base with a block refinement fitted to pre-activation pairs.
    SkqnB2,
}

impl Method {
    pub fn is_kron(self) -> bool {
        matches!(self, Method::SkqnL | Method::SkqnB1 | Method::SkqnB2)
    }

    pub fn uses_pairs(self) -> bool {
        !matches!(self, Method::SgdBaseline | Method::Ssn)
    }

    pub fn default_base(self) -> BaseChoice {
        match self {
            Method::SgdBaseline => BaseChoice::Zero,
            Method::Ssn | Method::S4qn | Method::S2qn => BaseChoice::Hessian,
            _ => BaseChoice::Kron,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::SgdBaseline => "sgd-baseline",
            Method::Ssn => "ssn",
            Method::S4qn => "s4qn",
            Method::S2qn => "s2qn",
            Method::SkqnL => "skqn-l",
            Method::SkqnB1 => "skqn-b1",
            Method::SkqnB2 => "skqn-b2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseChoice {
    Zero,
    Hessian,
    Ggn,
    Efim,
    EfimLowRank,
    Kron,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairMode {
    /// `v = v̂ − H u` from same-sample gradient differences.
    #[default]
    Secant,
    /// Jacobian-difference pairs; needs per-sample Jacobian products.
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SketchSpec {
    pub dim: usize,
    #[serde(default)]
    pub kind: SketchKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefinementConfig {
    pub memory: usize,
    pub eps_b: f64,
    pub damping: bool,
    pub gamma: GammaRule,
    /// Recompute `v = v̂ − H_k u` for every stored pair, not only the newest.
    pub strict: bool,
    pub pairs: PairMode,
    pub block_p: PChoice,
    /// Initial block refinement `s·I`.
    pub block_init: f64,
    pub sketch: Option<SketchSpec>,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            memory: 5,
            eps_b: 1e-8,
            damping: true,
            gamma: GammaRule::Spectral,
            strict: false,
            pairs: PairMode::Secant,
            block_p: PChoice::Symmetrized,
            block_init: 1e-3,
            sketch: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_retries: u32,
    pub kron_mode: KronMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_retries: 40, kron_mode: KronMode::Exact }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KfacConfig {
    pub spatial: SpatialNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budget {
    pub max_epochs: f64,
    pub max_iters: Option<usize>,
    /// Stop once a probed full gradient norm is at most this.
    pub tol: Option<f64>,
    /// Epochs between full-gradient probes; 0 probes every iteration.
    pub probe_interval: f64,
    pub wall_seconds: Option<f64>,
}

impl Default for Budget {
    fn default() -> Self {
        Self { max_epochs: 20.0, max_iters: None, tol: None, probe_interval: 0.0, wall_seconds: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub method: Method,
    #[serde(default)]
    pub base: Option<BaseChoice>,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub refinement: RefinementConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub kfac: KfacConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub record_wall_time: bool,
}

impl EngineConfig {
    pub fn base_choice(&self) -> BaseChoice {
        self.base.unwrap_or(self.method.default_base())
    }

    /// Fills every defaulted choice so the serialized form is complete.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.base = Some(self.base_choice());
        c
    }

    /// Checks the settings on their own; model-dependent checks happen when
    /// the engine is built.
    pub fn validate(&self) -> Result<(), EngineError> {
        self.schedule.validate().map_err(|e| EngineError::Config(e.to_string()))?;
        let base = self.base_choice();
        let ok = match self.method {
            Method::SgdBaseline => base == BaseChoice::Zero,
            Method::S4qn => base == BaseChoice::Hessian,
            Method::Ssn | Method::S2qn => !matches!(base, BaseChoice::Kron | BaseChoice::Zero),
            _ => base == BaseChoice::Kron,
        };
        if !ok {
            return Err(EngineError::Config(format!(
                "method {} cannot use base {:?}",
                self.method.as_str(),
                base
            )));
        }
        if self.refinement.pairs == PairMode::Structured && !matches!(self.method, Method::S4qn | Method::S2qn) {
            return Err(EngineError::Config("structured pairs need method s4qn or s2qn".into()));
        }
        let r = &self.refinement;
        if !(r.eps_b >= 0.0 && r.eps_b.is_finite()) || !(r.block_init > 0.0 && r.block_init.is_finite()) {
            return Err(EngineError::Config("eps_b must be >= 0 and block_init > 0".into()));
        }
        if r.sketch.is_some_and(|s| s.dim == 0) {
            return Err(EngineError::Config("sketch dim must be positive".into()));
        }
        let b = &self.budget;
        if !(b.max_epochs >= 0.0) || !(b.probe_interval >= 0.0) || b.tol.is_some_and(|t| !(t > 0.0)) {
            return Err(EngineError::Config("budget values must be non-negative".into()));
        }
        Ok(())
    }
}
