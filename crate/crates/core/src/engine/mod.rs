//! Iteration driver: sampling, base and refinement assembly, direction
//! solve, the same-sample gradient pass and pair bookkeeping.

mod config;
mod record;

pub use config::{BaseChoice, Budget, EngineConfig, KfacConfig, Method, PairMode, RefinementConfig, SketchSpec, SolverConfig};
pub use record::{IterRow, PairFlag, RunRecord, CSV_HEADER};

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::{
    draw_sample_set, efim, ggn_matrix, kfac_from_cache, subsampled_hessian, BaseMatrix, CurvatureError, SampleKind,
    SampleSet, SpatialNorm,
};
use crate::linalg::vector::{all_finite, axpy, dot, norm, sub};
use crate::linalg::{sym_solve, DenseMatrix, ScaledIdentity, SymOperator};
use crate::models::{b1_pair, b2_pair, preactivation_differences, ForwardCache, LayerInfo, ModelError, Objective};
use crate::refinement::{
    accept_pair, block_bfgs_update, build_compact, build_compact_with_fallback, make_pair, make_structured_pair,
    sketchy_block_bfgs_update, AcceptOutcome, BlockOutcome, BlockRefinement, CurvaturePair, PairBuffer,
    RefinementError, SketchConfig, GAMMA_MAX, GAMMA_MIN,
};
use crate::schedule::batch_size_k;
use crate::seed::{derive, Stream};
use crate::solver::{solve_with_retry, Refinement, RegularizedSystem, SolverError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("direction solve failed at iteration {k} after {retries} retries (lambda={lambda})")]
    SolveFailed { k: usize, retries: u32, lambda: f64 },
    #[error("solver error at iteration {k}: {source}")]
    Solver { k: usize, source: SolverError },
    #[error("non-finite loss or iterate at iteration {k}")]
    NonFiniteLoss { k: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error("refinement error: {0}")]
    Refinement(#[from] RefinementError),
    #[error("reference optimum not reached (gradient norm {gnorm:e} after {iters} iterations)")]
    NotConverged { gnorm: f64, iters: usize },
}

impl EngineError {
    /// Short machine-readable tag.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::Config(_) => "config",
            EngineError::SolveFailed { .. } => "solve-failed",
            EngineError::Solver { .. } => "solver",
            EngineError::NonFiniteLoss { .. } => "non-finite",
            EngineError::Model(_) => "model",
            EngineError::Curvature(_) => "curvature",
            EngineError::Refinement(_) => "refinement",
            EngineError::NotConverged { .. } => "not-converged",
        }
    }
}

/// `(Ψ − Ψ*) / max(1, Ψ*)`
pub fn relerr(psi: f64, psi_star: f64) -> f64 {
    (psi - psi_star) / psi_star.max(1.0)
}

/// Mini-batch loss and gradient at one parameter vector.
#[derive(Debug, Clone)]
struct GradEval {
    theta: Vec<f64>,
    indices: Vec<usize>,
    loss: f64,
    grad: Vec<f64>,
    cache: Option<ForwardCache>,
}

#[derive(Debug, Clone)]
enum Pending {
    None,
    Failed,
    Vector(CurvaturePair),
    /// Per-layer `(Ũ, Ṽ)` for pre-activation pairs.
    PreActivation(Vec<(DenseMatrix, DenseMatrix)>),
}

#[derive(Debug, Clone)]
enum RefState {
    None,
    Compact(PairBuffer),
    LayerCompact(Vec<PairBuffer>),
    Block(Vec<BlockRefinement>),
}

/// Mutable state carried between iterations.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub theta: Vec<f64>,
    pub k: usize,
    /// Sample-gradient evaluations divided by `N`.
    pub epochs: f64,
    pub gnorm_prev: Option<f64>,
    refinement: RefState,
    pending: Pending,
    cached: Option<GradEval>,
    last_probe_bucket: Option<u64>,
}

impl OptimizerState {
    /// Number of stored vector pairs (summed over layers).
    pub fn stored_pairs(&self) -> usize {
        match &self.refinement {
            RefState::Compact(b) => b.len(),
            RefState::LayerCompact(bs) => bs.iter().map(|b| b.len()).sum(),
            _ => 0,
        }
    }

    /// Current block refinements, one per layer.
    pub fn block_refinements(&self) -> Option<&[BlockRefinement]> {
        match &self.refinement {
            RefState::Block(b) => Some(b),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxEpochs,
    MaxIters,
    Tolerance,
    WallClock,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub theta: Vec<f64>,
    pub stop: StopReason,
    pub epochs: f64,
    pub final_loss: f64,
    pub final_gnorm: f64,
    pub final_relerr: Option<f64>,
}

pub struct Engine<'a> {
    cfg: EngineConfig,
    model: &'a dyn Objective,
    layers: Vec<LayerInfo>,
    psi_star: Option<f64>,
}

impl<'a> Engine<'a> {
    pub fn new(cfg: &EngineConfig, model: &'a dyn Objective) -> Result<Self, EngineError> {
        cfg.validate()?;
        let cfg = cfg.resolved();
        if model.num_samples() == 0 {
            return Err(EngineError::Config("dataset is empty".into()));
        }
        let mut layers = Vec::new();
        if cfg.method.is_kron() {
            let net = model
                .layered()
                .ok_or_else(|| EngineError::Config(format!("method {} needs a layered model", cfg.method.as_str())))?;
            layers = net.layers().to_vec();
            let mut off = 0;
            for l in &layers {
                if l.params.start != off || l.params.len() != l.m_a * l.m_g {
                    return Err(EngineError::Config("layer blocks do not partition the parameters".into()));
                }
                off = l.params.end;
            }
            if off != model.dim() {
                return Err(EngineError::Config("layer blocks do not cover the parameters".into()));
            }
        }
        let probe = cfg.refinement.pairs == PairMode::Structured;
        if probe {
            model.sample_output_grad(&vec![0.0; model.dim()], 0).map_err(|e| EngineError::Config(e.to_string()))?;
        }
        Ok(Self { cfg, model, layers, psi_star: None })
    }

    /// Enables the relative-error column.
    pub fn with_reference(mut self, psi_star: f64) -> Self {
        self.psi_star = Some(psi_star);
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn init_state(&self, theta0: Vec<f64>) -> Result<OptimizerState, EngineError> {
        if theta0.len() != self.model.dim() {
            return Err(EngineError::Config(format!(
                "initial point has length {}, model expects {}",
                theta0.len(),
                self.model.dim()
            )));
        }
        let r = &self.cfg.refinement;
        let buffer = || PairBuffer::new(r.memory, r.eps_b, r.damping);
        let refinement = match self.cfg.method {
            Method::SgdBaseline | Method::Ssn => RefState::None,
            Method::S4qn | Method::S2qn => RefState::Compact(buffer()),
            Method::SkqnL => RefState::LayerCompact(self.layers.iter().map(|_| buffer()).collect()),
            Method::SkqnB1 | Method::SkqnB2 => RefState::Block(
                self.layers.iter().map(|l| BlockRefinement::scaled_identity(l.m_g, r.block_init)).collect(),
            ),
        };
        Ok(OptimizerState {
            theta: theta0,
            k: 0,
            epochs: 0.0,
            gnorm_prev: None,
            refinement,
            pending: Pending::None,
            cached: None,
            last_probe_bucket: None,
        })
    }

    fn n_total(&self) -> usize {
        self.model.num_samples()
    }

    fn shift(&self) -> f64 {
        2.0 * self.model.mu()
    }

    fn evaluate(&self, theta: &[f64], idx: &[usize], keep_cache: bool) -> Result<GradEval, EngineError> {
        let (loss, grad, cache) = if self.cfg.method.is_kron() {
            let net = self.model.layered().expect("checked at construction");
            let (l, g, c) = net.forward_backward(theta, idx)?;
            (l, g, keep_cache.then_some(c))
        } else {
            let (l, g) = self.model.value_grad(theta, idx)?;
            (l, g, None)
        };
        Ok(GradEval { theta: theta.to_vec(), indices: idx.to_vec(), loss, grad, cache })
    }

    fn vector_base(&self, theta: &[f64], s: &SampleSet) -> Result<BaseMatrix, EngineError> {
        let b = match self.cfg.base_choice() {
            BaseChoice::Zero => BaseMatrix::zero(self.model.dim()),
            BaseChoice::Hessian => subsampled_hessian(self.model, theta, s)?,
            BaseChoice::Ggn => ggn_matrix(self.model, theta, s)?,
            BaseChoice::Efim => efim(self.model, theta, s, false)?,
            BaseChoice::EfimLowRank => efim(self.model, theta, s, true)?,
            BaseChoice::Kron => unreachable!("validated"),
        };
        Ok(b.with_shift(self.shift()))
    }

    fn kron_bases(&self, theta: &[f64], s: &SampleSet, reuse: Option<&ForwardCache>) -> Result<Vec<BaseMatrix>, EngineError> {
        let owned;
        let cache = match reuse {
            Some(c) if c.indices == s.indices && c.is_valid_for(theta) => c,
            _ => {
                let net = self.model.layered().expect("checked at construction");
                owned = net.forward_backward(theta, &s.indices)?.2;
                &owned
            }
        };
        (0..self.layers.len())
            .map(|l| {
                let mut b = kfac_from_cache(cache, l, self.cfg.kfac.spatial)?.with_shift(self.shift());
                b.samples = Some(s.clone());
                Ok(b)
            })
            .collect()
    }

    /// One iteration. Returns the row appended to the record.
    pub fn step(&self, st: &mut OptimizerState) -> Result<IterRow, EngineError> {
        let t0 = Instant::now();
        let cfg = &self.cfg;
        let k = st.k;
        let n_total = self.n_total();
        let sg = batch_size_k(&cfg.schedule.batch_g, k, n_total);
        let sh = batch_size_k(&cfg.schedule.batch_h, k, n_total);
        let s_g = draw_sample_set(n_total, sg, SampleKind::Gradient, derive(cfg.seed, k as u64, Stream::GradientSet, 0));
        let s_h = draw_sample_set(n_total, sh, SampleKind::Hessian, derive(cfg.seed, k as u64, Stream::HessianSet, 0));
        let b2 = cfg.method == Method::SkqnB2;

        let reusable = st
            .cached
            .take()
            .filter(|c| c.indices == s_g.indices && c.theta == st.theta && (!b2 || c.cache.is_some()));
        let cur = match reusable {
            Some(c) => c,
            None => {
                st.epochs += s_g.len() as f64 / n_total as f64;
                self.evaluate(&st.theta, &s_g.indices, cfg.method.is_kron())?
            }
        };
        if !cur.loss.is_finite() || !all_finite(&cur.grad) {
            return Err(EngineError::NonFiniteLoss { k });
        }
        let gnorm = norm(&cur.grad);
        let lambda = cfg.schedule.lambda_k(k, st.gnorm_prev);

        let pending = std::mem::replace(&mut st.pending, Pending::None);
        let (mut systems, flag) = if cfg.method.is_kron() {
            let bases = self.kron_bases(&st.theta, &s_h, cur.cache.as_ref())?;
            let flag = self.absorb_layers(&mut st.refinement, pending, &bases, k);
            let systems = self.layer_systems(&mut st.refinement, bases, lambda)?;
            (systems, flag)
        } else {
            let base = self.vector_base(&st.theta, &s_h)?;
            let flag = self.absorb_vector(&mut st.refinement, pending, &base);
            let refinement = match &mut st.refinement {
                RefState::Compact(buf) if !buf.is_empty() => {
                    let gamma = cfg.refinement.gamma.gamma(buf.newest());
                    Refinement::Compact(build_compact_with_fallback(buf, gamma, self.model.dim())?)
                }
                _ => Refinement::None,
            };
            (vec![RegularizedSystem::new(base, refinement, lambda)], flag)
        };

        let (d, _) = solve_with_retry(&mut systems, &cur.grad, cfg.solver.kron_mode, cfg.solver.max_retries).map_err(
            |e| match e {
                SolverError::SolveFailed { retries, lambda } => EngineError::SolveFailed { k, retries, lambda },
                other => EngineError::Solver { k, source: other },
            },
        )?;
        let lambda_used = systems[0].lambda;
        let mut theta_next = st.theta.clone();
        axpy(cfg.schedule.beta, &d, &mut theta_next);
        if !all_finite(&theta_next) {
            return Err(EngineError::NonFiniteLoss { k });
        }

        if cfg.method.uses_pairs() {
            let next = self.evaluate(&theta_next, &s_g.indices, b2)?;
            st.epochs += s_g.len() as f64 / n_total as f64;
            st.pending = self.form_pending(&cur, &next, &systems, &s_h)?;
            st.cached = Some(next);
        }

        st.gnorm_prev = Some(gnorm);
        st.theta = theta_next;
        st.k += 1;

        let (full_loss, fullgnorm) = if self.probe_due(st) {
            let all: Vec<usize> = (0..n_total).collect();
            let (l, g) = self.model.value_grad(&st.theta, &all)?;
            (Some(l), Some(norm(&g)))
        } else {
            (None, None)
        };
        Ok(IterRow {
            k,
            epoch: st.epochs,
            loss: cur.loss,
            gnorm,
            full_loss,
            fullgnorm,
            relerr: match (full_loss, self.psi_star) {
                (Some(l), Some(p)) => Some(relerr(l, p)),
                _ => None,
            },
            lambda: lambda_used,
            sg: s_g.len(),
            sh: s_h.len(),
            pair: flag,
            ms: cfg.record_wall_time.then(|| t0.elapsed().as_secs_f64() * 1e3),
        })
    }

    fn probe_due(&self, st: &mut OptimizerState) -> bool {
        let every = self.cfg.budget.probe_interval;
        if every <= 0.0 {
            return true;
        }
        let bucket = (st.epochs / every).floor() as u64;
        if st.last_probe_bucket != Some(bucket) {
            st.last_probe_bucket = Some(bucket);
            true
        } else {
            false
        }
    }

    fn form_pending(
        &self,
        cur: &GradEval,
        next: &GradEval,
        systems: &[RegularizedSystem],
        s_h: &SampleSet,
    ) -> Result<Pending, EngineError> {
        let cfg = &self.cfg;
        if cfg.method == Method::SkqnB2 {
            let (Some(cp), Some(cn)) = (&cur.cache, &next.cache) else {
                return Ok(Pending::Failed);
            };
            if cur.theta == next.theta {
                return Ok(Pending::Failed);
            }
            return Ok(match preactivation_differences(cp, cn) {
                Ok(d) => Pending::PreActivation(d),
                Err(_) => Pending::Failed,
            });
        }
        let made = match cfg.refinement.pairs {
            PairMode::Structured => make_structured_pair(self.model, &cur.theta, &next.theta, s_h),
            PairMode::Secant if cfg.method.is_kron() => {
                let ops: Vec<&dyn SymOperator> = systems.iter().map(|s| &s.base as &dyn SymOperator).collect();
                make_pair(&cur.theta, &next.theta, &cur.grad, &next.grad, &BlockOp(&ops))
            }
            PairMode::Secant => make_pair(&cur.theta, &next.theta, &cur.grad, &next.grad, &systems[0].base),
        };
        match made {
            Ok(p) => Ok(Pending::Vector(p)),
            Err(RefinementError::ZeroStep | RefinementError::NonFinite) => Ok(Pending::Failed),
            Err(e) => Err(e.into()),
        }
    }

    fn absorb_vector(&self, rs: &mut RefState, pending: Pending, base: &BaseMatrix) -> PairFlag {
        let RefState::Compact(buf) = rs else {
            return PairFlag::None;
        };
        match pending {
            Pending::None => PairFlag::None,
            Pending::Failed | Pending::PreActivation(_) => PairFlag::Rejected,
            Pending::Vector(mut p) => {
                if self.cfg.refinement.strict {
                    for mut old in buf.take_all() {
                        old.rebase(base);
                        let lam = damping_operator(buf, self.cfg.refinement.gamma, &old);
                        accept_pair(old, buf, lam.as_ref());
                    }
                }
                p.rebase(base);
                let lam = damping_operator(buf, self.cfg.refinement.gamma, &p);
                flag_of(accept_pair(p, buf, lam.as_ref()))
            }
        }
    }

    fn absorb_layers(&self, rs: &mut RefState, pending: Pending, bases: &[BaseMatrix], k: usize) -> PairFlag {
        let flags: Vec<PairFlag> = match (rs, pending) {
            (_, Pending::None) => return PairFlag::None,
            (_, Pending::Failed) => return PairFlag::Rejected,
            (RefState::LayerCompact(bufs), Pending::Vector(p)) => {
                let vh = p.v_hat.as_ref().expect("secant pair");
                self.layers
                    .iter()
                    .zip(bufs.iter_mut())
                    .zip(bases)
                    .map(|((l, buf), base)| {
                        let u = p.u[l.params.clone()].to_vec();
                        let v_hat = vh[l.params.clone()].to_vec();
                        let v = sub(&v_hat, &base.apply(&u));
                        let pair = CurvaturePair { u, v_hat: Some(v_hat), v };
                        if norm(&pair.u) == 0.0 {
                            return PairFlag::Rejected;
                        }
                        let lam = damping_operator(buf, self.cfg.refinement.gamma, &pair);
                        flag_of(accept_pair(pair, buf, lam.as_ref()))
                    })
                    .collect()
            }
            (RefState::Block(lams), Pending::Vector(p)) => {
                let vh = p.v_hat.as_ref().expect("secant pair");
                let shift = self.shift();
                self.layers
                    .iter()
                    .enumerate()
                    .map(|(j, l)| {
                        let (a, g) = bases[j].kron().expect("kron base");
                        match b1_pair(&p.u[l.params.clone()], &vh[l.params.clone()], l, a, g, shift) {
                            Ok((uu, vv)) => self.update_block(&mut lams[j], &uu, &vv, k, j),
                            Err(_) => PairFlag::Rejected,
                        }
                    })
                    .collect()
            }
            (RefState::Block(lams), Pending::PreActivation(pairs)) => pairs
                .iter()
                .enumerate()
                .map(|(j, diff)| {
                    let (_, g) = bases[j].kron().expect("kron base");
                    let c = match self.cfg.kfac.spatial {
                        SpatialNorm::Average => self.layers[j].spatial as f64,
                        SpatialNorm::Sum => 1.0,
                    };
                    let (uu, vv) = b2_pair(diff, g, c);
                    self.update_block(&mut lams[j], &uu, &vv, k, j)
                })
                .collect(),
            _ => return PairFlag::Rejected,
        };
        combine_flags(&flags)
    }

    fn update_block(&self, lam: &mut BlockRefinement, u: &DenseMatrix, v: &DenseMatrix, k: usize, layer: usize) -> PairFlag {
        let r = &self.cfg.refinement;
        if u.max_abs() == 0.0 {
            return PairFlag::Rejected;
        }
        let dim = r.sketch.map_or(u.cols(), |s| s.dim).min(u.cols()).min(u.rows());
        let first = if r.sketch.is_some() || dim < u.cols() {
            let sketch = SketchConfig {
                dim,
                kind: r.sketch.map(|s| s.kind).unwrap_or_default(),
                seed: derive(self.cfg.seed, k as u64, Stream::Sketch, layer as u64),
            };
            sketchy_block_bfgs_update(lam, u, v, &sketch, r.block_p, r.damping)
        } else {
            block_bfgs_update(lam, u, v, r.block_p, r.damping)
        };
        let out = match first {
            Err(RefinementError::RankDeficientU | RefinementError::NotPositiveDefinite) => {
                let j = (0..u.cols())
                    .max_by(|&a, &b| norm(&u.col(a)).total_cmp(&norm(&u.col(b))))
                    .expect("non-empty");
                let uc = DenseMatrix::from_columns(u.rows(), &[&u.col(j)]);
                let vc = DenseMatrix::from_columns(v.rows(), &[&v.col(j)]);
                block_bfgs_update(lam, &uc, &vc, r.block_p, r.damping)
            }
            other => other,
        };
        match out {
            Ok(BlockOutcome { refinement, damped }) => {
                *lam = refinement;
                if damped {
                    PairFlag::Damped
                } else {
                    PairFlag::Accepted
                }
            }
            Err(_) => PairFlag::Rejected,
        }
    }

    fn layer_systems(&self, rs: &mut RefState, bases: Vec<BaseMatrix>, lambda: f64) -> Result<Vec<RegularizedSystem>, EngineError> {
        let gamma_rule = self.cfg.refinement.gamma;
        bases
            .into_iter()
            .enumerate()
            .map(|(j, base)| {
                let refinement = match rs {
                    RefState::LayerCompact(bufs) if !bufs[j].is_empty() => {
                        let buf = &mut bufs[j];
                        let gamma = gamma_rule.gamma(buf.newest());
                        Refinement::Compact(build_compact_with_fallback(buf, gamma, base.dim())?)
                    }
                    RefState::Block(lams) => Refinement::Block(lams[j].clone()),
                    _ => Refinement::None,
                };
                Ok(RegularizedSystem::new(base, refinement, lambda))
            })
            .collect()
    }

    /// Iterates until a budget or the tolerance is reached.
    pub fn run(&self, theta0: Vec<f64>) -> Result<RunOutput, EngineError> {
        let mut st = self.init_state(theta0)?;
        let mut record = RunRecord::default();
        let b = self.cfg.budget;
        let start = Instant::now();
        let stop = loop {
            if st.epochs >= b.max_epochs {
                break StopReason::MaxEpochs;
            }
            if b.max_iters.is_some_and(|m| st.k >= m) {
                break StopReason::MaxIters;
            }
            if b.wall_seconds.is_some_and(|w| start.elapsed().as_secs_f64() >= w) {
                break StopReason::WallClock;
            }
            let row = self.step(&mut st)?;
            let hit = matches!((row.fullgnorm, b.tol), (Some(g), Some(t)) if g <= t);
            record.push(row);
            if hit {
                break StopReason::Tolerance;
            }
        };
        let all: Vec<usize> = (0..self.n_total()).collect();
        let (final_loss, g) = self.model.value_grad(&st.theta, &all)?;
        Ok(RunOutput {
            record,
            theta: st.theta,
            stop,
            epochs: st.epochs,
            final_loss,
            final_gnorm: norm(&g),
            final_relerr: self.psi_star.map(|p| relerr(final_loss, p)),
        })
    }
}

/// Convenience wrapper around [`Engine`].
pub fn run(cfg: &EngineConfig, model: &dyn Objective, theta0: Vec<f64>, psi_star: Option<f64>) -> Result<RunOutput, EngineError> {
    let mut e = Engine::new(cfg, model)?;
    if let Some(p) = psi_star {
        e = e.with_reference(p);
    }
    e.run(theta0)
}

/// Block-diagonal operator over consecutive blocks.
struct BlockOp<'a>(&'a [&'a dyn SymOperator]);

impl SymOperator for BlockOp<'_> {
    fn dim(&self) -> usize {
        self.0.iter().map(|b| b.dim()).sum()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len());
        let mut off = 0;
        for b in self.0 {
            out.extend(b.apply(&x[off..off + b.dim()]));
            off += b.dim();
        }
        out
    }
}

/// Damping reference `Λ`: the current compact matrix, or `γ̂ I` with
/// `γ̂ = ‖v‖/‖u‖` (clipped) while the buffer is empty.
fn damping_operator(buf: &PairBuffer, rule: crate::refinement::GammaRule, p: &CurvaturePair) -> Box<dyn SymOperator> {
    let n = p.u.len();
    let fallback = || {
        let g = norm(&p.v) / norm(&p.u);
        let g = if g.is_finite() { g.clamp(GAMMA_MIN, GAMMA_MAX) } else { 1.0 };
        Box::new(ScaledIdentity { scale: g, n }) as Box<dyn SymOperator>
    };
    if buf.is_empty() {
        return fallback();
    }
    match build_compact(buf.pairs(), rule.gamma(buf.newest()), n) {
        Ok(c) => Box::new(c),
        Err(_) => fallback(),
    }
}

fn flag_of(o: AcceptOutcome) -> PairFlag {
    match o {
        AcceptOutcome::Accepted => PairFlag::Accepted,
        AcceptOutcome::Rejected => PairFlag::Rejected,
        AcceptOutcome::Damped => PairFlag::Damped,
    }
}

/// `rejected` only when no block stored anything; `damped` if any did.
fn combine_flags(flags: &[PairFlag]) -> PairFlag {
    if flags.contains(&PairFlag::Damped) {
        PairFlag::Damped
    } else if flags.contains(&PairFlag::Accepted) {
        PairFlag::Accepted
    } else {
        PairFlag::Rejected
    }
}

/// Full-batch Newton with Armijo backtracking until `‖∇Ψ‖ ≤ 1e-12`.
/// Needs per-sample Hessians.
pub fn compute_reference_optimum(model: &dyn Objective, theta0: &[f64]) -> Result<(Vec<f64>, f64), EngineError> {
    const TOL: f64 = 1e-12;
    const MAX_ITERS: usize = 200;
    let all: Vec<usize> = (0..model.num_samples()).collect();
    let mut theta = theta0.to_vec();
    let (mut f, mut g) = model.value_grad(&theta, &all)?;
    for _ in 0..MAX_ITERS {
        let gn = norm(&g);
        if gn <= TOL {
            return Ok((theta, f));
        }
        let mut h = model.data_hessian(&theta, &all)?;
        h.add_diag(2.0 * model.mu());
        let d: Vec<f64> = sym_solve(&h, &g)
            .map_err(|_| EngineError::NotConverged { gnorm: gn, iters: 0 })?
            .into_iter()
            .map(|x| -x)
            .collect();
        let slope = dot(&g, &d);
        // Near the optimum decreases fall below the resolution of Ψ, so the
        // full step is taken without a test.
        let mut t = 1.0;
        let mut trial;
        loop {
            trial = theta.clone();
            axpy(t, &d, &mut trial);
            let ft = model.value(&trial, &all)?;
            if gn < 1e-6 || ft <= f + 1e-4 * t * slope || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        theta = trial;
        (f, g) = model.value_grad(&theta, &all)?;
    }
    let gnorm = norm(&g);
    if gnorm <= TOL {
        Ok((theta, f))
    } else {
        Err(EngineError::NotConverged { gnorm, iters: MAX_ITERS })
    }
}
