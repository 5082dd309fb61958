//! Oracle suites: each fast path checked against a naive reference on random
//! instances. Used by the `validate` command and the acceptance tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curvature::{BaseMatrix, BaseVariant};
use crate::dataio::{synth_logistic, ConditionProfile};
use crate::linalg::vector::{norm, rel_err, sub};
use crate::linalg::{dense_inverse_oracle, kron_apply, sym_solve, DenseMatrix, KroneckerOperator, LowRankFactor, SymOperator};
use crate::models::{b1_pair, conv_forward_backward, Activation, ConvSpec, LayerInfo, LayerSpec, LogisticRegression, Loss, Network, Objective};
use crate::refinement::{
    accept_pair, block_bfgs_update, build_compact, sketchy_block_bfgs_update, BlockRefinement, CurvaturePair, GammaRule,
    PChoice, PairBuffer, SketchConfig, SketchKind,
};
use crate::solver::{direction_kron, direction_lowrank, direction_smw, KronMode, Refinement, RegularizedSystem};

pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut Rng64, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_matrix(rng: &mut Rng64, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_row_major(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// `XᵀX/n + floor·I` for a random square `X`.
pub fn random_spd(rng: &mut Rng64, n: usize, floor: f64) -> DenseMatrix {
    let x = random_matrix(rng, n, n);
    let mut m = x.tr_matmul(&x).scale(1.0 / n as f64).symmetrize();
    m.add_diag(floor);
    m
}

/// Pairs `v = M u` for one random SPD `M`, so every pair has positive
/// curvature.
pub fn random_pairs(rng: &mut Rng64, n: usize, p: usize) -> Vec<CurvaturePair> {
    let m = random_spd(rng, n, 0.5);
    (0..p)
        .map(|_| {
            let u = random_vec(rng, n);
            let v = m.matvec(&u);
            CurvaturePair { u, v_hat: None, v }
        })
        .collect()
}

/// BFGS applied pair by pair to `γI`:
/// `B ← B − BuuᵀB/(uᵀBu) + vvᵀ/(uᵀv)`.
pub fn recursive_bfgs(pairs: &[CurvaturePair], gamma: f64, n: usize) -> DenseMatrix {
    let mut b = DenseMatrix::scaled_identity(n, gamma);
    for p in pairs {
        let bu = b.matvec(&p.u);
        let ubu: f64 = p.u.iter().zip(&bu).map(|(x, y)| x * y).sum();
        let uv: f64 = p.u.iter().zip(&p.v).map(|(x, y)| x * y).sum();
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] += p.v[i] * p.v[j] / uv - bu[i] * bu[j] / ubu;
            }
        }
    }
    b
}

/// Explicit `A ⊗ G` by index arithmetic.
pub fn kron_dense(a: &DenseMatrix, g: &DenseMatrix) -> DenseMatrix {
    let (ma, mg) = (a.rows(), g.rows());
    DenseMatrix::from_fn(ma * mg, ma * mg, |r, c| a[(r / mg, c / mg)] * g[(r % mg, c % mg)])
}

/// Same-padded cross-correlation by direct summation. `w` is column-major
/// `out × (in·window)`, inputs and outputs channel-major.
pub fn conv_nested_loop(c: &ConvSpec, w: &[f64], x: &[f64]) -> Vec<f64> {
    let (h, wd, k) = (c.height as isize, c.width as isize, c.radius as isize);
    let side = 2 * k + 1;
    let mut out = vec![0.0; c.output_len()];
    for o in 0..c.out_channels {
        for y in 0..h {
            for xx in 0..wd {
                let mut acc = 0.0;
                for j in 0..c.in_channels {
                    for dy in -k..=k {
                        for dx in -k..=k {
                            let (sy, sx) = (y + dy, xx + dx);
                            if sy < 0 || sy >= h || sx < 0 || sx >= wd {
                                continue;
                            }
                            let col = j * c.window() + ((dy + k) * side + dx + k) as usize;
                            acc += w[col * c.out_channels + o] * x[j * c.spatial() + (sy * wd + sx) as usize];
                        }
                    }
                }
                out[o * c.spatial() + (y * wd + xx) as usize] = acc;
            }
        }
    }
    out
}

/// Weight gradient of `½‖conv(x) − t‖²` by direct summation, column-major
/// like the weights.
pub fn conv_weight_grad_nested_loop(c: &ConvSpec, w: &[f64], x: &[f64], t: &[f64]) -> Vec<f64> {
    let s = conv_nested_loop(c, w, x);
    let r: Vec<f64> = s.iter().zip(t).map(|(a, b)| a - b).collect();
    let (h, wd, k) = (c.height as isize, c.width as isize, c.radius as isize);
    let side = 2 * k + 1;
    let mut g = vec![0.0; w.len()];
    for o in 0..c.out_channels {
        for j in 0..c.in_channels {
            for dy in -k..=k {
                for dx in -k..=k {
                    let col = j * c.window() + ((dy + k) * side + dx + k) as usize;
                    let mut acc = 0.0;
                    for y in 0..h {
                        for xx in 0..wd {
                            let (sy, sx) = (y + dy, xx + dx);
                            if sy >= 0 && sy < h && sx >= 0 && sx < wd {
                                acc += r[o * c.spatial() + (y * wd + xx) as usize]
                                    * x[j * c.spatial() + (sy * wd + sx) as usize];
                            }
                        }
                    }
                    g[col * c.out_channels + o] = acc;
                }
            }
        }
    }
    g
}

/// Central differences with step `1e-5 (1 + |θ_i|)`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, theta: &[f64]) -> Vec<f64> {
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let h = 1e-5 * (1.0 + theta[i].abs());
            t[i] = theta[i] + h;
            let fp = f(&t);
            t[i] = theta[i] - h;
            let fm = f(&t);
            t[i] = theta[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Deliberate corruption of one suite's fast path, for checking that the
/// suites can fail.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Fault(Option<String>);

impl Fault {
    pub fn none() -> Self {
        Fault(None)
    }

    pub fn named(suite: &str) -> Self {
        Fault(Some(suite.to_string()))
    }

    /// Reads `S2QN_FAULT`.
    pub fn from_env() -> Self {
        Fault(std::env::var("S2QN_FAULT").ok().filter(|s| !s.is_empty()))
    }

    fn hits(&self, suite: &str) -> bool {
        self.0.as_deref() == Some(suite)
    }

    fn tamper(&self, suite: &str, v: &mut [f64]) {
        if self.hits(suite) {
            if let Some(x) = v.first_mut() {
                *x = *x * 1.001 + 1e-3;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    /// Largest error seen, in the suite's own metric.
    pub worst: f64,
    pub tol: f64,
}

impl SuiteResult {
    fn from_errors(name: &'static str, errs: &[f64], tol: f64) -> Self {
        let worst = errs.iter().cloned().fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
        Self { name, passed: !errs.is_empty() && worst <= tol, cases: errs.len(), worst, tol }
    }
}

type SuiteFn = fn(&Fault) -> SuiteResult;

pub const SUITES: &[(&str, SuiteFn)] = &[
    ("dense-inverse", suite_dense_inverse),
    ("smw", suite_smw),
    ("lowrank", suite_lowrank),
    ("compact", suite_compact),
    ("secant", suite_secant),
    ("block-secant", suite_block_secant),
    ("fd-lr", suite_fd_lr),
    ("fd-mlp", suite_fd_mlp),
    ("fd-conv", suite_fd_conv),
    ("conv-oracle", suite_conv_oracle),
    ("kron", suite_kron),
    ("kron-secant", suite_kron_secant),
];

/// Runs every suite whose name contains `filter`.
pub fn run_suites(filter: Option<&str>, fault: &Fault) -> Vec<SuiteResult> {
    SUITES
        .iter()
        .filter(|(name, _)| filter.is_none_or(|f| name.contains(f)))
        .map(|(_, f)| f(fault))
        .collect()
}

/// `sym_solve` against the elimination oracle, dims 2..=64.
pub fn suite_dense_inverse(fault: &Fault) -> SuiteResult {
    let mut r = rng(11);
    let errs: Vec<f64> = (0..24)
        .map(|i| {
            let n = 2 + (i * 62) / 23;
            let m = random_spd(&mut r, n, 0.1);
            let b = random_vec(&mut r, n);
            let mut x = sym_solve(&m, &b).unwrap_or_else(|_| vec![f64::NAN; n]);
            fault.tamper("dense-inverse", &mut x);
            let want = dense_inverse_oracle(&m).expect("spd is invertible").matvec(&b);
            rel_err(&x, &want)
        })
        .collect();
    SuiteResult::from_errors("dense-inverse", &errs, 1e-9)
}

/// Random dense base, `1..=p` BFGS pairs, `λ ∈ [0.01, 1]`.
pub fn smw_instance(r: &mut Rng64, n: usize, p: usize) -> (RegularizedSystem, Vec<f64>) {
    let h = random_spd(r, n, 0.05);
    let pairs = random_pairs(r, n, p);
    let gamma = GammaRule::Spectral.gamma(pairs.last());
    let c = build_compact(&pairs, gamma, n).expect("positive-curvature pairs");
    let lambda = r.random_range(0.01..1.0);
    let sys = RegularizedSystem::new(BaseMatrix::new(BaseVariant::Ggn(h)), Refinement::Compact(c), lambda);
    (sys, random_vec(r, n))
}

/// `−(B + λI)⁻¹ g` by explicit inversion of the materialised system.
pub fn dense_direction(sys: &RegularizedSystem, g: &[f64]) -> Vec<f64> {
    let inv = dense_inverse_oracle(&sys.materialize()).expect("invertible system");
    inv.matvec(g).iter().map(|x| -x).collect()
}

pub fn suite_smw(fault: &Fault) -> SuiteResult {
    let mut r = rng(1);
    let errs: Vec<f64> = (0..50)
        .map(|_| {
            let n = r.random_range(2..=64);
            let p = r.random_range(1..=5);
            let (sys, g) = smw_instance(&mut r, n, p);
            let mut d = direction_smw(&sys, &g).unwrap_or_else(|_| vec![f64::NAN; n]);
            fault.tamper("smw", &mut d);
            rel_err(&d, &dense_direction(&sys, &g))
        })
        .collect();
    SuiteResult::from_errors("smw", &errs, 1e-8)
}

/// Low-rank `QQᵀ` base of rank `r`, `p` pairs.
pub fn lowrank_instance(rg: &mut Rng64, n: usize, r: usize, p: usize) -> (RegularizedSystem, Vec<f64>) {
    let q = random_matrix(rg, n, r);
    let pairs = random_pairs(rg, n, p);
    let gamma = GammaRule::Spectral.gamma(pairs.last());
    let c = build_compact(&pairs, gamma, n).expect("positive-curvature pairs");
    let lambda = rg.random_range(0.01..1.0);
    let sys = RegularizedSystem::new(BaseMatrix::new(BaseVariant::LowRankEfim(LowRankFactor::new(q))), Refinement::Compact(c), lambda);
    (sys, random_vec(rg, n))
}

pub fn suite_lowrank(fault: &Fault) -> SuiteResult {
    let mut r = rng(2);
    let errs: Vec<f64> = (0..50)
        .map(|_| {
            let n = r.random_range(2..=64);
            let rank = r.random_range(0..=8);
            let p = r.random_range(1..=5);
            let (sys, g) = lowrank_instance(&mut r, n, rank, p);
            let mut d = direction_lowrank(&sys, &g).unwrap_or_else(|_| vec![f64::NAN; n]);
            fault.tamper("lowrank", &mut d);
            rel_err(&d, &dense_direction(&sys, &g))
        })
        .collect();
    SuiteResult::from_errors("lowrank", &errs, 1e-8)
}

/// Compact form against pair-by-pair BFGS, max-entry error relative to the
/// oracle's largest entry.
pub fn suite_compact(fault: &Fault) -> SuiteResult {
    let mut r = rng(3);
    let errs: Vec<f64> = (0..100)
        .map(|_| {
            let n = r.random_range(2..=16);
            let p = r.random_range(1..=5);
            let pairs = random_pairs(&mut r, n, p);
            let gamma = GammaRule::Spectral.gamma(pairs.last());
            let mut m = build_compact(&pairs, gamma, n).map(|c| c.materialize()).unwrap_or_else(|_| DenseMatrix::zeros(n, n));
            fault.tamper("compact", m.as_mut_slice());
            let want = recursive_bfgs(&pairs, gamma, n);
            m.sub(&want).max_abs() / want.max_abs()
        })
        .collect();
    SuiteResult::from_errors("compact", &errs, 1e-9)
}

/// `‖Λu − v‖ / (‖Λ‖‖u‖ + ‖v‖)` for the newest pair after each accepted
/// vector update.
pub fn suite_secant(fault: &Fault) -> SuiteResult {
    let mut r = rng(4);
    let mut errs = Vec::new();
    for _ in 0..20 {
        let n = r.random_range(2..=32);
        let mut buf = PairBuffer::new(5, 1e-8, true);
        let mut lam = build_compact(std::iter::empty(), 1.0, n).expect("empty");
        for p in random_pairs(&mut r, n, 8) {
            if !accept_pair(p, &mut buf, &lam).is_stored() {
                continue;
            }
            let gamma = GammaRule::Spectral.gamma(buf.newest());
            lam = build_compact(buf.pairs(), gamma, n).expect("accepted pairs");
            let newest = buf.newest().expect("stored");
            let mut lu = lam.apply(&newest.u);
            fault.tamper("secant", &mut lu);
            let scale = lam.materialize().norm_fro() * norm(&newest.u) + norm(&newest.v);
            errs.push(norm(&sub(&lu, &newest.v)) / scale);
        }
    }
    SuiteResult::from_errors("secant", &errs, 1e-8)
}

/// Multi-secant `Λ'𝕌 = 𝕍` with `ℙ = 𝕍ᵀ𝕌` SPD.
pub fn suite_block_secant(fault: &Fault) -> SuiteResult {
    let mut r = rng(5);
    let errs: Vec<f64> = (0..40)
        .map(|_| {
            let m = r.random_range(2..=12);
            let s = r.random_range(1..=m.min(4));
            let lam = BlockRefinement { lambda: random_spd(&mut r, m, 0.5) };
            let target = random_spd(&mut r, m, 0.5);
            let u = random_matrix(&mut r, m, s);
            let v = target.matmul(&u);
            let out = block_bfgs_update(&lam, &u, &v, PChoice::Exact, false);
            let mut lu = out.map(|o| o.refinement.lambda.matmul(&u)).unwrap_or_else(|_| DenseMatrix::zeros(m, s));
            fault.tamper("block-secant", lu.as_mut_slice());
            lu.sub(&v).max_abs() / v.max_abs()
        })
        .collect();
    SuiteResult::from_errors("block-secant", &errs, 1e-9)
}

fn fd_error(model: &dyn Objective, theta: &[f64], suite: &str, fault: &Fault) -> f64 {
    let idx: Vec<usize> = (0..model.num_samples()).collect();
    let mut g = model.value_grad(theta, &idx).map(|(_, g)| g).unwrap_or_else(|_| vec![f64::NAN; theta.len()]);
    fault.tamper(suite, &mut g);
    let fd = fd_gradient(|t| model.value(t, &idx).unwrap_or(f64::NAN), theta);
    rel_err(&g, &fd)
}

pub fn suite_fd_lr(fault: &Fault) -> SuiteResult {
    let mut r = rng(6);
    let errs: Vec<f64> = (0..5)
        .map(|seed| {
            let (data, _) = synth_logistic(10, 40, ConditionProfile::default(), seed).expect("valid sizes");
            let model = LogisticRegression::new(data, 1e-3).expect("valid model");
            let theta = random_vec(&mut r, 10);
            fd_error(&model, &theta, "fd-lr", fault)
        })
        .collect();
    SuiteResult::from_errors("fd-lr", &errs, 1e-6)
}

pub fn small_mlp(r: &mut Rng64, loss: Loss, samples: usize) -> Network {
    let specs = vec![LayerSpec::Dense { inputs: 5, outputs: 4 }, LayerSpec::Dense { inputs: 4, outputs: 3 }];
    let x = random_matrix(r, samples, 5);
    let t = DenseMatrix::from_row_major(samples, 3, (0..samples * 3).map(|_| r.random_range(0.0..1.0)).collect());
    Network::new(specs, Activation::Sigmoid, loss, x, t, 1e-3).expect("consistent shapes")
}

pub fn suite_fd_mlp(fault: &Fault) -> SuiteResult {
    let mut r = rng(7);
    let errs: Vec<f64> = [Loss::Square, Loss::CrossEntropy, Loss::Square, Loss::CrossEntropy]
        .iter()
        .map(|&loss| {
            let net = small_mlp(&mut r, loss, 6);
            let theta = random_vec(&mut r, net.dim());
            fd_error(&net, &theta, "fd-mlp", fault)
        })
        .collect();
    SuiteResult::from_errors("fd-mlp", &errs, 1e-5)
}

pub fn small_conv_net(r: &mut Rng64, samples: usize) -> Network {
    let c1 = ConvSpec { in_channels: 2, out_channels: 3, radius: 1, height: 4, width: 4 };
    let c2 = ConvSpec { in_channels: 3, out_channels: 1, radius: 1, height: 4, width: 4 };
    let x = random_matrix(r, samples, c1.input_len());
    let t = random_matrix(r, samples, c2.output_len());
    Network::new(vec![LayerSpec::Conv(c1), LayerSpec::Conv(c2)], Activation::Sigmoid, Loss::Square, x, t, 1e-3)
        .expect("consistent shapes")
}

pub fn suite_fd_conv(fault: &Fault) -> SuiteResult {
    let mut r = rng(8);
    let errs: Vec<f64> = (0..3)
        .map(|_| {
            let net = small_conv_net(&mut r, 3);
            let theta = random_vec(&mut r, net.dim());
            fd_error(&net, &theta, "fd-conv", fault)
        })
        .collect();
    SuiteResult::from_errors("fd-conv", &errs, 1e-5)
}

/// Single conv layer outputs and weight gradients against direct
/// summation, on grids up to 6×6.
pub fn suite_conv_oracle(fault: &Fault) -> SuiteResult {
    let mut r = rng(9);
    let mut errs = Vec::new();
    for case in 0..8 {
        let spec = ConvSpec {
            in_channels: r.random_range(1..=4),
            out_channels: r.random_range(1..=4),
            radius: r.random_range(0..=2),
            height: 1 + case % 6,
            width: 6 - case % 6,
        };
        let w = random_vec(&mut r, spec.out_channels * spec.m_a());
        let x = random_matrix(&mut r, 2, spec.input_len());
        let t = random_matrix(&mut r, 2, spec.output_len());
        let Ok(out) = conv_forward_backward(&spec, &w, &x, &t) else {
            errs.push(f64::INFINITY);
            continue;
        };
        for i in 0..2 {
            let mut s = out.outputs.row(i).to_vec();
            fault.tamper("conv-oracle", &mut s);
            let want = conv_nested_loop(&spec, &w, x.row(i));
            errs.push(sub(&s, &want).iter().fold(0.0, |a: f64, b| a.max(b.abs())));
            let g = crate::linalg::vec_col_major(&out.grads[i]);
            let want = conv_weight_grad_nested_loop(&spec, &w, x.row(i), t.row(i));
            errs.push(sub(&g, &want).iter().fold(0.0, |a: f64, b| a.max(b.abs())));
        }
    }
    SuiteResult::from_errors("conv-oracle", &errs, 1e-12)
}

/// B1 pair from a layer whose true curvature is `Â ⊗ (G̃ + Λ*) + shift·I`,
/// then one exact block update; returns the relative secant residual
/// `‖(Â ⊗ (G̃ + Λ̃') + shift·I)u − v̂‖ / ‖v̂‖`.
pub fn b1_single_pair_residual(r: &mut Rng64, m_a: usize, m_g: usize) -> f64 {
    let a = random_spd(r, m_a, 0.3);
    let g = random_spd(r, m_g, 0.3);
    let truth = random_spd(r, m_g, 0.3);
    let shift = 0.01;
    let n = m_a * m_g;
    let u = random_vec(r, n);
    let mut v_hat = KroneckerOperator { left: a.clone(), right: g.add(&truth) }.apply(&u);
    crate::linalg::vector::axpy(shift, &u, &mut v_hat);
    let info = LayerInfo { params: 0..n, m_a, m_g, spatial: 1 };
    let (uu, vv) = b1_pair(&u, &v_hat, &info, &a, &g, shift).expect("matching shapes");
    let lam = BlockRefinement::scaled_identity(m_g, 1.0);
    let Ok(out) = block_bfgs_update(&lam, &uu, &vv, PChoice::Exact, false) else {
        return f64::INFINITY;
    };
    let mut bu = KroneckerOperator { left: a, right: g.add(&out.refinement.lambda) }.apply(&u);
    crate::linalg::vector::axpy(shift, &u, &mut bu);
    rel_err(&bu, &v_hat)
}

/// Kronecker products, solves, B1 secant and the identity sketch.
pub fn suite_kron(fault: &Fault) -> SuiteResult {
    let mut r = rng(10);
    let mut errs = Vec::new();
    for _ in 0..30 {
        let (ma, mg) = (r.random_range(1..=4), r.random_range(1..=4));
        let a = random_spd(&mut r, ma, 0.2);
        let g = random_spd(&mut r, mg, 0.2);
        let x = random_vec(&mut r, ma * mg);
        let k = KroneckerOperator { left: a.clone(), right: g.clone() };
        let mut y = kron_apply(&k, &x).unwrap_or_else(|_| vec![f64::NAN; x.len()]);
        fault.tamper("kron", &mut y);
        errs.push(rel_err(&y, &kron_dense(&a, &g).matvec(&x)));

        let lam = BlockRefinement { lambda: random_spd(&mut r, mg, 0.2) };
        let lambda = r.random_range(0.01..1.0);
        let mut d = direction_kron(&a, &g, Some(&lam), lambda, &x, KronMode::Exact).unwrap_or_else(|_| vec![f64::NAN; x.len()]);
        fault.tamper("kron", &mut d);
        let mut dense = kron_dense(&a, &g.add(&lam.lambda));
        dense.add_diag(lambda);
        let want: Vec<f64> = dense_inverse_oracle(&dense).expect("spd").matvec(&x).iter().map(|v| -v).collect();
        errs.push(rel_err(&d, &want));
    }
    SuiteResult::from_errors("kron", &errs, 1e-10)
}

/// B1 single-pair secant residual, and the identity sketch reproducing the
/// unsketched update bit for bit (any difference counts as an infinite error).
pub fn suite_kron_secant(fault: &Fault) -> SuiteResult {
    let mut r = rng(12);
    let mut errs = Vec::new();
    for _ in 0..10 {
        let m_g = r.random_range(2..=4);
        let m_a = r.random_range(1..=m_g);
        let mut e = [b1_single_pair_residual(&mut r, m_a, m_g)];
        fault.tamper("kron-secant", &mut e);
        errs.push(e[0]);
    }
    for _ in 0..10 {
        let m = r.random_range(2..=6);
        let cols = r.random_range(1..=m);
        let lam = BlockRefinement { lambda: random_spd(&mut r, m, 0.5) };
        let u = random_matrix(&mut r, m, cols);
        let v = random_spd(&mut r, m, 0.5).matmul(&u);
        let sk = SketchConfig { dim: cols, kind: SketchKind::RowSubsample, seed: r.random() };
        let plain = block_bfgs_update(&lam, &u, &v, PChoice::Symmetrized, true);
        let sketched = sketchy_block_bfgs_update(&lam, &u, &v, &sk, PChoice::Symmetrized, true);
        errs.push(if plain == sketched && plain.is_ok() { 0.0 } else { f64::INFINITY });
    }
    SuiteResult::from_errors("kron-secant", &errs, 1e-6)
}
