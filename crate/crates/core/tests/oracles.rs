//! Worked examples checked against independent reference computations.

use s2qn::curvature::{
    draw_sample_set, efim, ggn_matrix, kfac_empirical_factors, subsampled_hessian, BaseMatrix, BaseVariant, SampleKind,
    SampleSet, SpatialNorm,
};
use s2qn::dataio::{synth_logistic, ConditionProfile, Dataset, Features};
use s2qn::engine::{compute_reference_optimum, run, Engine, EngineConfig, PairFlag};
use s2qn::linalg::vector::{norm, rel_err, sub};
use s2qn::linalg::{dense_inverse_oracle, kron_apply, min_eigenvalue, sym_solve, DenseMatrix, KroneckerOperator};
use s2qn::models::{
    b1_pair, b2_pair, preactivation_differences, Activation, ConvSpec, LayerInfo, LayerSpec, Layered, LogisticRegression,
    Loss, Network, Objective, Quadratic,
};
use s2qn::refinement::{
    accept_pair, block_bfgs_update, build_compact, make_pair, make_structured_pair, sketchy_block_bfgs_update,
    AcceptOutcome, BlockRefinement, CurvaturePair, PChoice, PairBuffer, SketchConfig, SketchKind,
};
use s2qn::schedule::lambda_k;
use s2qn::solver::{direction_block, direction_kron, direction_smw, KronMode, Refinement, RegularizedSystem};
use s2qn::validation::{
    conv_nested_loop, dense_direction, kron_dense, lowrank_instance, random_matrix, random_spd, random_vec, rng,
};

fn all(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn lr(n: usize, samples: usize, mu: f64, seed: u64) -> LogisticRegression {
    let (data, _) = synth_logistic(n, samples, ConditionProfile::default(), seed).unwrap();
    LogisticRegression::new(data, mu).unwrap()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn dense_features(d: &Dataset) -> DenseMatrix {
    d.features.to_dense(d.n_features)
}

fn engine_cfg(json: &str) -> EngineConfig {
    serde_json::from_str(json).unwrap()
}

// ---- linear algebra ----

#[test]
fn sym_solve_matches_inverse_oracle_8x8() {
    let mut r = rng(100);
    let m = random_spd(&mut r, 8, 0.1);
    let b = random_vec(&mut r, 8);
    let x = sym_solve(&m, &b).unwrap();
    let want = dense_inverse_oracle(&m).unwrap().matvec(&b);
    assert!(rel_err(&x, &want) <= 1e-10);
}

#[test]
fn kron_apply_matches_materialized_3x3() {
    let mut r = rng(101);
    let a = random_matrix(&mut r, 3, 3);
    let g = random_matrix(&mut r, 3, 3);
    let x = random_vec(&mut r, 9);
    let y = kron_apply(&KroneckerOperator { left: a.clone(), right: g.clone() }, &x).unwrap();
    let want = kron_dense(&a, &g).matvec(&x);
    assert!(sub(&y, &want).iter().all(|d| d.abs() <= 1e-12));
}

#[test]
fn inverse_oracle_residual_16x16() {
    let mut r = rng(102);
    let mut m = random_matrix(&mut r, 16, 16);
    m.add_diag(4.0);
    let inv = dense_inverse_oracle(&m).unwrap();
    let mut res = m.matmul(&inv);
    res.add_diag(-1.0);
    assert!(res.norm_inf() <= 1e-9);
}

// ---- curvature ----

#[test]
fn subsampled_hessian_matches_naive_sum() {
    let model = lr(6, 80, 1e-3, 1);
    let s = draw_sample_set(80, 16, SampleKind::Hessian, 9);
    let h = subsampled_hessian(&model, &[0.0; 6], &s).unwrap().materialize();
    let x = dense_features(model.data());
    let mut want = DenseMatrix::zeros(6, 6);
    for &i in &s.indices {
        // σ'(0) = 1/4
        want.rank_one_update(0.25 / 16.0, x.row(i), x.row(i));
    }
    assert!(h.sub(&want).max_abs() <= 1e-12);
}

#[test]
fn full_sample_hessian_is_exact_hessian() {
    let model = lr(5, 40, 1e-2, 2);
    let theta = random_vec(&mut rng(1), 5);
    let h = subsampled_hessian(&model, &theta, &SampleSet::full(40, SampleKind::Hessian)).unwrap().materialize();
    let x = dense_features(model.data());
    let mut want = DenseMatrix::zeros(5, 5);
    for i in 0..40 {
        let z: f64 = x.row(i).iter().zip(&theta).map(|(a, b)| a * b).sum();
        want.rank_one_update(sigmoid(z) * sigmoid(-z) / 40.0, x.row(i), x.row(i));
    }
    assert!(h.sub(&want).max_abs() <= 1e-12);
}

#[test]
fn lr_hessian_matches_fd_of_gradient() {
    let model = lr(6, 50, 1e-2, 3);
    let idx = all(50);
    let theta = random_vec(&mut rng(2), 6);
    let mut h = model.data_hessian(&theta, &idx).unwrap();
    h.add_diag(2.0 * model.mu());
    for j in 0..6 {
        let step = 1e-5;
        let mut tp = theta.clone();
        tp[j] += step;
        let mut tm = theta.clone();
        tm[j] -= step;
        let gp = model.value_grad(&tp, &idx).unwrap().1;
        let gm = model.value_grad(&tm, &idx).unwrap().1;
        let col: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * step)).collect();
        assert!(rel_err(&h.col(j), &col) <= 1e-6, "column {j}");
    }
}

#[test]
fn ggn_plus_shift_is_lr_hessian() {
    let model = lr(7, 60, 1e-3, 4);
    let theta = random_vec(&mut rng(3), 7);
    let s = SampleSet::full(60, SampleKind::Hessian);
    let mut g = ggn_matrix(&model, &theta, &s).unwrap().materialize();
    g.add_diag(2.0 * model.mu());
    let mut h = subsampled_hessian(&model, &theta, &s).unwrap().materialize();
    h.add_diag(2.0 * model.mu());
    assert!(g.sub(&h).max_abs() <= 1e-10);
}

fn tiny_mlp(samples: usize, loss: Loss, seed: u64) -> Network {
    let mut r = rng(seed);
    let x = random_matrix(&mut r, samples, 3);
    let t = DenseMatrix::from_row_major(samples, 2, (0..samples * 2).map(|i| ((i * 7) % 5) as f64 / 5.0).collect());
    Network::new(
        vec![LayerSpec::Dense { inputs: 3, outputs: 4 }, LayerSpec::Dense { inputs: 4, outputs: 2 }],
        Activation::Sigmoid,
        loss,
        x,
        t,
        0.0,
    )
    .unwrap()
}

#[test]
fn ggn_mlp_is_psd_and_matches_per_sample_assembly() {
    let net = tiny_mlp(4, Loss::CrossEntropy, 5);
    let theta = net.init_params(1);
    let s = SampleSet::full(4, SampleKind::Hessian);
    let g = ggn_matrix(&net, &theta, &s).unwrap().materialize();
    let n = net.dim();
    let mut want = DenseMatrix::zeros(n, n);
    for i in 0..4 {
        let sj = net.sample_jacobian(&theta, i).unwrap();
        for o in 0..sj.loss_grad.len() {
            let col = sj.jacobian.col(o);
            want.rank_one_update(sj.loss_hessian[(o, o)] / 4.0, &col, &col);
        }
    }
    assert!(g.sub(&want).max_abs() <= 1e-12);
    assert!(min_eigenvalue(&g).unwrap() >= -1e-10);
}

#[test]
fn ggn_square_loss_single_output_is_outer_product() {
    let net = Network::new(
        vec![LayerSpec::Dense { inputs: 2, outputs: 1 }],
        Activation::Sigmoid,
        Loss::Square,
        DenseMatrix::from_rows(&[vec![0.5, -2.0]]),
        DenseMatrix::from_rows(&[vec![1.0]]),
        0.0,
    )
    .unwrap();
    let g = ggn_matrix(&net, &[0.3, 0.1, -0.2], &SampleSet::full(1, SampleKind::Hessian)).unwrap().materialize();
    let q = [0.5, -2.0, 1.0];
    assert!(g.sub(&DenseMatrix::outer(&q, &q)).max_abs() <= 1e-15);
}

#[test]
fn efim_dense_and_low_rank_agree() {
    let model = lr(9, 50, 1e-3, 6);
    let theta = random_vec(&mut rng(4), 9);
    let s = draw_sample_set(50, 8, SampleKind::Hessian, 3);
    let d = efim(&model, &theta, &s, false).unwrap().materialize();
    let l = efim(&model, &theta, &s, true).unwrap().materialize();
    assert!(d.sub(&l).max_abs() <= 1e-12);
}

#[test]
fn efim_single_sample_is_rank_one() {
    let model = lr(4, 10, 0.0, 7);
    let theta = random_vec(&mut rng(5), 4);
    let g = model.sample_loss_grad(&theta, 3).unwrap().1;
    let s = SampleSet { indices: vec![3], kind: SampleKind::Hessian, seed: 0 };
    let e = efim(&model, &theta, &s, false).unwrap().materialize();
    assert!(e.sub(&DenseMatrix::outer(&g, &g)).max_abs() <= 1e-15);
}

#[test]
fn kfac_single_sample_fc_is_rank_one_kronecker() {
    let net = tiny_mlp(1, Loss::Square, 8);
    let theta = net.init_params(2);
    let s = SampleSet::full(1, SampleKind::Hessian);
    let (_, grad) = net.value_grad(&theta, &[0]).unwrap();
    for (l, info) in net.layers().iter().enumerate() {
        let b = kfac_empirical_factors(&net, &theta, &s, l, SpatialNorm::Average).unwrap();
        let (a, g) = b.kron().unwrap();
        let gh = &grad[info.params.clone()];
        assert!(kron_dense(a, g).sub(&DenseMatrix::outer(gh, gh)).max_abs() <= 1e-12, "layer {l}");
    }
}

#[test]
fn kfac_conv_on_single_pixel_grid_is_fc() {
    let (inp, out) = (3, 2);
    let mut r = rng(9);
    let x = random_matrix(&mut r, 3, inp);
    let t = random_matrix(&mut r, 3, out);
    let spec = ConvSpec { in_channels: inp, out_channels: out, radius: 0, height: 1, width: 1 };
    let conv = Network::new(vec![LayerSpec::Conv(spec)], Activation::Sigmoid, Loss::Square, x.clone(), t.clone(), 0.0).unwrap();
    let fc = Network::new(vec![LayerSpec::Dense { inputs: inp, outputs: out }], Activation::Sigmoid, Loss::Square, x, t, 0.0)
        .unwrap();
    let w = random_vec(&mut r, inp * out);
    let mut wb = w.clone();
    wb.extend([0.0; 2]);
    let s = SampleSet::full(3, SampleKind::Hessian);
    let bc = kfac_empirical_factors(&conv, &w, &s, 0, SpatialNorm::Average).unwrap();
    let bf = kfac_empirical_factors(&fc, &wb, &s, 0, SpatialNorm::Average).unwrap();
    let ((ac, gc), (af, gf)) = (bc.kron().unwrap(), bf.kron().unwrap());
    assert!(gc.sub(gf).max_abs() <= 1e-15);
    for i in 0..inp {
        for j in 0..inp {
            assert!((ac[(i, j)] - af[(i, j)]).abs() <= 1e-15);
        }
    }
}

/// Unrolls the `(2K+1)²` neighbourhoods of every location by hand.
fn im2col_loops(c: &ConvSpec, x: &[f64]) -> DenseMatrix {
    let k = c.radius as isize;
    let mut a = DenseMatrix::zeros(c.m_a(), c.spatial());
    for y in 0..c.height as isize {
        for xx in 0..c.width as isize {
            let t = (y * c.width as isize + xx) as usize;
            let mut row = 0;
            for j in 0..c.in_channels {
                for dy in -k..=k {
                    for dx in -k..=k {
                        let (sy, sx) = (y + dy, xx + dx);
                        if sy >= 0 && sy < c.height as isize && sx >= 0 && sx < c.width as isize {
                            a[(row, t)] = x[j * c.spatial() + (sy * c.width as isize + sx) as usize];
                        }
                        row += 1;
                    }
                }
            }
        }
    }
    a
}

#[test]
fn kfac_conv_3x3_matches_im2col_loops() {
    let spec = ConvSpec { in_channels: 2, out_channels: 2, radius: 1, height: 3, width: 3 };
    let mut r = rng(10);
    let samples = 4;
    let x = random_matrix(&mut r, samples, spec.input_len());
    let t = random_matrix(&mut r, samples, spec.output_len());
    let net = Network::new(vec![LayerSpec::Conv(spec)], Activation::Sigmoid, Loss::Square, x.clone(), t.clone(), 0.0).unwrap();
    let w = random_vec(&mut r, net.dim());
    let b = kfac_empirical_factors(&net, &w, &SampleSet::full(samples, SampleKind::Hessian), 0, SpatialNorm::Average).unwrap();
    let (a, g) = b.kron().unwrap();
    let mut a_want = DenseMatrix::zeros(spec.m_a(), spec.m_a());
    let mut g_want = DenseMatrix::zeros(2, 2);
    for i in 0..samples {
        let ai = im2col_loops(&spec, x.row(i));
        a_want.add_assign(&ai.matmul_tr(&ai).scale(1.0 / (samples * spec.spatial()) as f64));
        let s = conv_nested_loop(&spec, &w, x.row(i));
        let d = DenseMatrix::from_row_major(2, spec.spatial(), sub(&s, t.row(i)));
        g_want.add_assign(&d.matmul_tr(&d).scale(1.0 / samples as f64));
    }
    assert!(a.sub(&a_want).max_abs() <= 1e-12);
    assert!(g.sub(&g_want).max_abs() <= 1e-12);
}

// ---- models ----

#[test]
fn single_linear_layer_is_least_squares() {
    let mut r = rng(11);
    let (n, samples) = (4, 12);
    let x = random_matrix(&mut r, samples, n);
    let y = random_matrix(&mut r, samples, 1);
    let net = Network::new(vec![LayerSpec::Dense { inputs: n, outputs: 1 }], Activation::Sigmoid, Loss::Square, x.clone(), y.clone(), 0.0)
        .unwrap();
    let theta = random_vec(&mut r, n + 1);
    let (_, g) = net.value_grad(&theta, &all(samples)).unwrap();
    // ½‖Xw + b − y‖² / N  →  [Xᵀr; Σr] / N
    let mut want = vec![0.0; n + 1];
    for i in 0..samples {
        let res = x.row(i).iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() + theta[n] - y[(i, 0)];
        for j in 0..n {
            want[j] += res * x[(i, j)] / samples as f64;
        }
        want[n] += res / samples as f64;
    }
    assert!(rel_err(&g, &want) <= 1e-13);
}

#[test]
fn conv_matches_nested_loops_on_4x4() {
    let spec = ConvSpec { in_channels: 3, out_channels: 2, radius: 1, height: 4, width: 4 };
    let mut r = rng(12);
    let x = random_matrix(&mut r, 2, spec.input_len());
    let t = random_matrix(&mut r, 2, spec.output_len());
    let w = random_vec(&mut r, spec.out_channels * spec.m_a());
    let out = s2qn::models::conv_forward_backward(&spec, &w, &x, &t).unwrap();
    for i in 0..2 {
        let want = conv_nested_loop(&spec, &w, x.row(i));
        assert!(sub(out.outputs.row(i), &want).iter().all(|d| d.abs() <= 1e-12));
    }
}

#[test]
fn quadratic_pair_has_zero_residual() {
    let a = DenseMatrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
    let model = Quadratic::single(a.clone(), vec![1.0, 2.0]);
    let (tp, tn) = ([1.0, -2.0], [3.0, 5.0]);
    let gp = model.value_grad(&tp, &[0]).unwrap().1;
    let gn = model.value_grad(&tn, &[0]).unwrap().1;
    let p = make_pair(&tp, &tn, &gp, &gn, &a).unwrap();
    assert_eq!(p.v, vec![0.0, 0.0]);
}

#[test]
fn structured_pair_single_sample_direct_formula() {
    let net = Network::new(
        vec![LayerSpec::Dense { inputs: 3, outputs: 2 }, LayerSpec::Dense { inputs: 2, outputs: 1 }],
        Activation::Sigmoid,
        Loss::Square,
        DenseMatrix::from_rows(&[vec![0.2, -1.0, 0.7]]),
        DenseMatrix::from_rows(&[vec![0.4]]),
        0.0,
    )
    .unwrap();
    let tp = net.init_params(3);
    let tn: Vec<f64> = tp.iter().enumerate().map(|(i, v)| v + 0.05 * ((i % 3) as f64 - 1.0)).collect();
    let s = SampleSet { indices: vec![0], kind: SampleKind::Hessian, seed: 0 };
    let p = make_structured_pair(&net, &tp, &tn, &s).unwrap();
    let jn = net.sample_jacobian(&tn, 0).unwrap();
    let jp = net.sample_jacobian(&tp, 0).unwrap();
    let r = jn.loss_grad[0];
    let want: Vec<f64> = jn.jacobian.col(0).iter().zip(jp.jacobian.col(0)).map(|(a, b)| (a - b) * r).collect();
    assert!(rel_err(&p.v, &want) <= 1e-14);
    assert!(p.v_hat.is_none());
}

#[test]
fn structured_pair_is_zero_for_linear_outputs() {
    let model = lr(5, 20, 1e-3, 13);
    let tp = vec![0.1; 5];
    let tn = vec![-0.2; 5];
    let p = make_structured_pair(&model, &tp, &tn, &SampleSet::full(20, SampleKind::Hessian)).unwrap();
    assert!(p.v.iter().all(|v| *v == 0.0));
}

// ---- refinement ----

#[test]
fn powell_damping_hand_example() {
    let mut buf = PairBuffer::new(3, 1e-8, true);
    let id = DenseMatrix::identity(3);
    let out = accept_pair(CurvaturePair { u: vec![1.0, 0.0, 0.0], v_hat: None, v: vec![-1.0, 0.0, 0.0] }, &mut buf, &id);
    assert_eq!(out, AcceptOutcome::Damped);
    assert_eq!(buf.newest().unwrap().v, vec![-0.4 + 0.6, 0.0, 0.0]);
}

#[test]
fn block_two_column_secant() {
    let mut r = rng(14);
    let lam = BlockRefinement { lambda: random_spd(&mut r, 5, 0.5) };
    let u = random_matrix(&mut r, 5, 2);
    let v = random_spd(&mut r, 5, 0.5).matmul(&u);
    let out = block_bfgs_update(&lam, &u, &v, PChoice::Exact, false).unwrap();
    assert!(out.refinement.lambda.matmul(&u).sub(&v).max_abs() <= 1e-9);
}

#[test]
fn row_subsample_sketch_selects_columns() {
    let mut r = rng(15);
    let lam = BlockRefinement { lambda: random_spd(&mut r, 6, 0.5) };
    let u = random_matrix(&mut r, 6, 4);
    let v = random_spd(&mut r, 6, 0.5).matmul(&u);
    let sk = SketchConfig { dim: 2, kind: SketchKind::RowSubsample, seed: 77 };
    let got = sketchy_block_bfgs_update(&lam, &u, &v, &sk, PChoice::Symmetrized, true).unwrap();
    let mut matches = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            let pick = [i, j];
            let want = block_bfgs_update(&lam, &u.select_cols(&pick), &v.select_cols(&pick), PChoice::Symmetrized, true).unwrap();
            matches += (want == got) as usize;
        }
    }
    assert_eq!(matches, 1);
}

// ---- solver ----

#[test]
fn smw_single_pair_n12() {
    let mut r = rng(16);
    let h = random_spd(&mut r, 12, 0.1);
    let u = random_vec(&mut r, 12);
    let v = random_spd(&mut r, 12, 0.5).matvec(&u);
    let c = build_compact(&[CurvaturePair { u, v_hat: None, v }], 1.0, 12).unwrap();
    let sys = RegularizedSystem::new(BaseMatrix::new(BaseVariant::SubsampledHessian(h)), Refinement::Compact(c), 0.1);
    let g = random_vec(&mut r, 12);
    assert!(rel_err(&direction_smw(&sys, &g).unwrap(), &dense_direction(&sys, &g)) <= 1e-9);
}

#[test]
fn lowrank_n20_r4_p2() {
    let (sys, g) = lowrank_instance(&mut rng(17), 20, 4, 2);
    let d = s2qn::solver::direction_lowrank(&sys, &g).unwrap();
    assert!(rel_err(&d, &dense_direction(&sys, &g)) <= 1e-8);
}

#[test]
fn three_blocks_match_assembled_system() {
    let mut r = rng(18);
    let sizes = [3, 5, 4];
    let blocks: Vec<RegularizedSystem> = sizes
        .iter()
        .map(|&n| RegularizedSystem::new(BaseMatrix::new(BaseVariant::Ggn(random_spd(&mut r, n, 0.1))), Refinement::None, 0.2))
        .collect();
    let g = random_vec(&mut r, 12);
    let d = direction_block(&blocks, &g, KronMode::Exact).unwrap();
    let mut full = DenseMatrix::zeros(12, 12);
    let mut off = 0;
    for b in &blocks {
        let m = b.materialize();
        for i in 0..m.rows() {
            for j in 0..m.rows() {
                full[(off + i, off + j)] = m[(i, j)];
            }
        }
        off += m.rows();
    }
    let want: Vec<f64> = dense_inverse_oracle(&full).unwrap().matvec(&g).iter().map(|x| -x).collect();
    assert!(rel_err(&d, &want) <= 1e-9);
}

#[test]
fn kron_2x2_solve() {
    let mut r = rng(19);
    let a = random_spd(&mut r, 2, 0.2);
    let g = random_spd(&mut r, 2, 0.2);
    let x = random_vec(&mut r, 4);
    let d = direction_kron(&a, &g, None, 0.3, &x, KronMode::Exact).unwrap();
    let mut m = kron_dense(&a, &g);
    m.add_diag(0.3);
    let want: Vec<f64> = dense_inverse_oracle(&m).unwrap().matvec(&x).iter().map(|v| -v).collect();
    assert!(rel_err(&d, &want) <= 1e-10);
}

// ---- Kronecker pairs ----

#[test]
fn b1_with_identity_a_is_vector_secant() {
    let mut r = rng(20);
    let m_g = 4;
    let g = random_spd(&mut r, m_g, 0.2);
    let u = random_vec(&mut r, m_g);
    let v_hat = random_spd(&mut r, m_g, 0.5).add(&g).matvec(&u);
    let info = LayerInfo { params: 0..m_g, m_a: 1, m_g, spatial: 1 };
    let (uu, vv) = b1_pair(&u, &v_hat, &info, &DenseMatrix::identity(1), &g, 0.0).unwrap();
    assert_eq!(uu.as_slice(), u.as_slice());
    let out = block_bfgs_update(&BlockRefinement::scaled_identity(m_g, 1.0), &uu, &vv, PChoice::Exact, false).unwrap();
    let got = g.add(&out.refinement.lambda).matvec(&u);
    assert!(rel_err(&got, &v_hat) <= 1e-10);
}

#[test]
fn b2_single_pixel_single_sample() {
    let net = tiny_mlp(1, Loss::Square, 21);
    let tp = net.init_params(4);
    let tn: Vec<f64> = tp.iter().map(|v| v * 0.9 + 0.01).collect();
    let (_, _, cp) = net.forward_backward(&tp, &[0]).unwrap();
    let (_, _, cn) = net.forward_backward(&tn, &[0]).unwrap();
    let diffs = preactivation_differences(&cp, &cn).unwrap();
    for (l, diff) in diffs.iter().enumerate() {
        let g = random_spd(&mut rng(l as u64), net.layers()[l].m_g, 0.1);
        let (uu, vv) = b2_pair(diff, &g, 1.0);
        let du = cn.samples[0][l].s.sub(&cp.samples[0][l].s);
        let dv = cn.samples[0][l].ds.sub(&cp.samples[0][l].ds);
        assert_eq!(uu.cols(), 1);
        assert!(uu.sub(&du).max_abs() == 0.0);
        assert!(vv.sub(&dv.sub(&g.matmul(&du))).max_abs() <= 1e-15);
    }
}

// ---- schedule ----

#[test]
fn lambda_rule_examples() {
    assert_eq!(lambda_k(Some(3.0), 0.1, 1.0, 10.0), 10.0);
    assert!((lambda_k(Some(0.5), 0.1, 1.0, 10.0) - 40.0 / 3.0).abs() <= 1e-12);
    assert_eq!(lambda_k(Some(1.0), 0.1, 1.0, 10.0), (2.0 / 0.1) / 2.0);
}

// ---- engine ----

const NEWTON: &str = r#"{"method": "ssn",
  "schedule": {"r1": 1e-9, "r2": 1e9, "alpha": {"kind": "constant", "value": 1e12},
               "batch_g": {"kind": "full"}, "batch_h": {"kind": "full"}},
  "budget": {"max_epochs": 100, "max_iters": 1}}"#;

#[test]
fn newton_step_on_quadratic_lands_on_minimizer() {
    let a = DenseMatrix::from_rows(&[vec![3.0, 1.0, 0.0], vec![1.0, 2.0, 0.5], vec![0.0, 0.5, 1.5]]);
    let b = vec![1.0, -1.0, 2.0];
    let model = Quadratic::single(a.clone(), b.clone());
    let out = run(&engine_cfg(NEWTON), &model, vec![5.0, 5.0, 5.0], None).unwrap();
    let star = sym_solve(&a, &b).unwrap();
    assert!(norm(&sub(&out.theta, &star)) <= 1e-8);
}

#[test]
fn zero_gradient_leaves_theta_and_rejects_pair() {
    let model = Quadratic::single(DenseMatrix::identity(2), vec![0.0, 0.0]);
    let cfg = engine_cfg(
        r#"{"method": "s4qn",
            "schedule": {"r1": 1e-3, "r2": 1.0, "alpha": {"kind": "constant", "value": 0.5},
                         "batch_g": {"kind": "full"}, "batch_h": {"kind": "full"}},
            "budget": {"max_iters": 2}}"#,
    );
    let out = run(&cfg, &model, vec![0.0, 0.0], None).unwrap();
    assert_eq!(out.theta, vec![0.0, 0.0]);
    assert_eq!(out.record.rows[1].pair, PairFlag::Rejected);
}

const STOCHASTIC_LR: &str = r#"{"method": "s4qn", "seed": 5,
  "schedule": {"r1": 1e-3, "r2": 1.0, "alpha": {"kind": "constant", "value": 0.5},
               "batch_g": {"kind": "constant", "s0": 16}, "batch_h": {"kind": "constant", "s0": 8}},
  "budget": {"max_epochs": 3}}"#;

#[test]
fn fixed_seed_runs_are_identical() {
    let model = lr(8, 100, 1e-3, 22);
    let cfg = engine_cfg(STOCHASTIC_LR);
    let a = run(&cfg, &model, vec![0.0; 8], None).unwrap();
    let b = run(&cfg, &model, vec![0.0; 8], None).unwrap();
    assert_eq!(a.record, b.record);
    assert_eq!(a.theta, b.theta);
    assert!(!a.record.is_empty());
}

#[test]
fn zero_epoch_budget_is_empty() {
    let model = lr(4, 30, 1e-3, 23);
    let mut cfg = engine_cfg(STOCHASTIC_LR);
    cfg.budget.max_epochs = 0.0;
    let theta0 = vec![0.1, 0.2, 0.3, 0.4];
    let out = run(&cfg, &model, theta0.clone(), None).unwrap();
    assert!(out.record.is_empty());
    assert_eq!(out.theta, theta0);
}

#[test]
fn full_batch_ssn_is_regularized_newton() {
    let (n, samples, mu) = (6, 40, 1e-2);
    let model = lr(n, samples, mu, 24);
    let cfg = engine_cfg(
        r#"{"method": "ssn",
            "schedule": {"r1": 1e-2, "r2": 0.2, "alpha": {"kind": "constant", "value": 2.0},
                         "batch_g": {"kind": "full"}, "batch_h": {"kind": "full"}},
            "budget": {"max_epochs": 100, "max_iters": 6}}"#,
    );
    let out = run(&cfg, &model, vec![0.0; n], None).unwrap();

    let x = dense_features(model.data());
    let y = &model.data().labels;
    let mut theta = vec![0.0; n];
    let mut prev: Option<f64> = None;
    for _ in 0..6 {
        let mut g = vec![0.0; n];
        let mut h = DenseMatrix::zeros(n, n);
        for i in 0..samples {
            let m = y[i] * x.row(i).iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>();
            for j in 0..n {
                g[j] += -y[i] * x[(i, j)] * sigmoid(-m) / samples as f64;
            }
            h.rank_one_update(sigmoid(m) * sigmoid(-m) / samples as f64, x.row(i), x.row(i));
        }
        for j in 0..n {
            g[j] += 2.0 * mu * theta[j];
        }
        let lam = lambda_k(prev, 2.0, 1e-2, 0.2);
        h.add_diag(2.0 * mu + lam);
        let step = dense_inverse_oracle(&h).unwrap().matvec(&g);
        theta = sub(&theta, &step);
        prev = Some(norm(&g));
    }
    assert!(rel_err(&out.theta, &theta) <= 1e-10);
}

#[test]
fn reference_optimum_with_dominant_regularizer() {
    let model = lr(5, 50, 1e3, 25);
    let (theta, psi) = compute_reference_optimum(&model, &[0.0; 5]).unwrap();
    assert!(norm(&theta) <= 1e-3);
    // 2μ-strong convexity brackets Ψ* between Ψ(0) − ‖∇Ψ(0)‖²/4μ and Ψ(0)
    let g0 = model.value_grad(&[0.0; 5], &all(50)).unwrap().1;
    assert!(psi <= 2f64.ln() + 1e-15);
    assert!(psi >= 2f64.ln() - norm(&g0).powi(2) / 4e3 - 1e-12);
    let again = compute_reference_optimum(&model, &[0.0; 5]).unwrap();
    assert_eq!(again.1, psi);
}

#[test]
fn reference_optimum_matches_long_gradient_descent() {
    let x = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![2.0, -0.5], vec![-1.0, -1.0], vec![-0.5, -2.0]]);
    let data = Dataset {
        name: "tiny".into(),
        features: Features::Dense(x.clone()),
        labels: vec![1.0, 1.0, -1.0, -1.0],
        n_features: 2,
        normalization: None,
    };
    let mu = 0.05;
    let model = LogisticRegression::new(data, mu).unwrap();
    let (_, psi) = compute_reference_optimum(&model, &[0.0, 0.0]).unwrap();

    // plain gradient descent on the closed-form objective
    let f = |t: &[f64]| {
        let mut v = 0.0;
        let mut g = [2.0 * mu * t[0], 2.0 * mu * t[1]];
        for i in 0..4 {
            let yv = if i < 2 { 1.0 } else { -1.0 };
            let m = yv * (x[(i, 0)] * t[0] + x[(i, 1)] * t[1]);
            v += (1.0 + (-m).exp()).ln() / 4.0;
            for j in 0..2 {
                g[j] -= yv * x[(i, j)] * sigmoid(-m) / 4.0;
            }
        }
        (v + mu * (t[0] * t[0] + t[1] * t[1]), g)
    };
    let mut t = [0.0, 0.0];
    for _ in 0..200_000 {
        let (_, g) = f(&t);
        t[0] -= 0.5 * g[0];
        t[1] -= 0.5 * g[1];
    }
    assert!((f(&t).0 - psi).abs() <= 1e-8);
}

#[test]
fn theory_mode_full_batch_descends_monotonically() {
    let model = lr(10, 200, 1e-3, 26);
    let cfg = engine_cfg(
        r#"{"method": "s4qn",
            "schedule": {"r1": 1e-4, "r2": 1e-3, "alpha": {"kind": "constant", "value": 1.0},
                         "theory": {"l_psi": 1.0, "h": 1.0},
                         "batch_g": {"kind": "full"}, "batch_h": {"kind": "full"}},
            "budget": {"max_epochs": 1000, "max_iters": 40}}"#,
    );
    let out = run(&cfg, &model, vec![0.0; 10], None).unwrap();
    let losses: Vec<f64> = out.record.rows.iter().map(|r| r.loss).collect();
    assert!(losses.windows(2).all(|w| w[1] <= w[0]), "{losses:?}");
    assert!(out.final_loss < losses[0]);
}

#[test]
fn sampling_depends_only_on_seed_and_iteration() {
    let model = lr(6, 120, 1e-3, 27);
    let mut cfg = engine_cfg(STOCHASTIC_LR);
    let e1 = Engine::new(&cfg, &model).unwrap();
    let mut s1 = e1.init_state(vec![0.0; 6]).unwrap();
    let r1: Vec<_> = (0..4).map(|_| e1.step(&mut s1).unwrap()).collect();
    // different refinement state, same draws
    cfg.refinement.memory = 1;
    let e2 = Engine::new(&cfg, &model).unwrap();
    let mut s2 = e2.init_state(vec![0.3; 6]).unwrap();
    let r2: Vec<_> = (0..4).map(|_| e2.step(&mut s2).unwrap()).collect();
    for (a, b) in r1.iter().zip(&r2) {
        assert_eq!((a.sg, a.sh, a.epoch), (b.sg, b.sh, b.epoch));
    }
    let s = draw_sample_set(120, 16, SampleKind::Gradient, s2qn::seed::derive(5, 2, s2qn::seed::Stream::GradientSet, 0));
    assert_eq!(s, draw_sample_set(120, 16, SampleKind::Gradient, s2qn::seed::derive(5, 2, s2qn::seed::Stream::GradientSet, 0)));
}
