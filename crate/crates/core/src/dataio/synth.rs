use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Features};
use crate::linalg::{DenseMatrix, SymmetricEigen};

/// Column scaling and planted-parameter size for [`synth_logistic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionProfile {
    /// Column `j` is scaled by `decay^(j/(n−1))`; `1.0` gives isotropic features.
    pub decay: f64,
    /// Euclidean norm of the planted parameter.
    pub theta_scale: f64,
    /// Center each column and rescale it to exact empirical variance before
    /// the decay is applied.
    pub whiten: bool,
    /// Center and rotate so the empirical covariance is exactly `I`
    /// (before the decay). Implies `whiten`.
    pub decorrelate: bool,
    /// Multiplies every feature after all other scaling.
    pub feature_scale: f64,
}

impl Default for ConditionProfile {
    fn default() -> Self {
        Self { decay: 1.0, theta_scale: 1.0, whiten: false, decorrelate: false, feature_scale: 1.0 }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Gaussian features with labels drawn from the logistic model at a planted
/// parameter. Returns the dataset and the planted parameter.
pub fn synth_logistic(n: usize, big_n: usize, profile: ConditionProfile, seed: u64) -> Result<(Dataset, Vec<f64>), DataError> {
    if n < 2 || big_n < 2 {
        return Err(DataError::InvalidArgument(format!("need n, N >= 2 (got n={n}, N={big_n})")));
    }
    if !(profile.decay > 0.0) || !(profile.theta_scale >= 0.0) || !(profile.feature_scale > 0.0) {
        return Err(DataError::InvalidArgument(
            "decay and feature_scale must be positive, theta_scale non-negative".into(),
        ));
    }
    if profile.decorrelate && big_n <= n {
        return Err(DataError::InvalidArgument("decorrelation needs N > n".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DenseMatrix::from_fn(big_n, n, |_, _| 0.0);
    for v in x.as_mut_slice() {
        *v = StandardNormal.sample(&mut rng);
    }
    if profile.whiten || profile.decorrelate {
        for j in 0..n {
            let mean = (0..big_n).map(|i| x[(i, j)]).sum::<f64>() / big_n as f64;
            let var = (0..big_n).map(|i| (x[(i, j)] - mean).powi(2)).sum::<f64>() / big_n as f64;
            let sd = var.sqrt().max(1e-300);
            for i in 0..big_n {
                x[(i, j)] = (x[(i, j)] - mean) / sd;
            }
        }
    }
    if profile.decorrelate {
        x = decorrelate(&x)?;
    }
    for j in 0..n {
        let s = profile.feature_scale * profile.decay.powf(j as f64 / (n - 1) as f64);
        for i in 0..big_n {
            x[(i, j)] *= s;
        }
    }
    let mut theta: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let tn = crate::linalg::vector::norm(&theta);
    for t in &mut theta {
        *t *= profile.theta_scale / tn;
    }
    let labels = (0..big_n)
        .map(|i| {
            let p = sigmoid(crate::linalg::vector::dot(x.row(i), &theta));
            if rng.random::<f64>() < p {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let data = Dataset {
        name: format!("synth-logistic-n{n}-N{big_n}-s{seed}"),
        features: Features::Dense(x),
        labels,
        n_features: n,
        normalization: None,
    };
    Ok((data, theta))
}

/// `X C^{-1/2}` for centered `X` with `C = XᵀX/N`.
fn decorrelate(x: &DenseMatrix) -> Result<DenseMatrix, DataError> {
    let (rows, cols) = (x.rows(), x.cols());
    let mut c = x.tr_matmul(x);
    c.scale_assign(1.0 / rows as f64);
    let e = SymmetricEigen::new(&c).map_err(|e| DataError::InvalidArgument(e.to_string()))?;
    if !(e.min() > 0.0) {
        return Err(DataError::InvalidArgument("feature covariance is singular".into()));
    }
    let mut w = DenseMatrix::zeros(cols, cols);
    for (k, s) in e.values.iter().enumerate() {
        let v = e.vectors.col(k);
        w.rank_one_update(1.0 / s.sqrt(), &v, &v);
    }
    Ok(x.matmul(&w))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurvesToyOptions {
    /// Image side length in pixels.
    pub side: usize,
    pub count: usize,
    /// Stroke half-width in pixels.
    pub width: f64,
}

impl Default for CurvesToyOptions {
    fn default() -> Self {
        Self { side: 8, count: 1000, width: 0.7 }
    }
}

pub const CURVES_TOY_MAX_COUNT: usize = 2000;

/// Small images of random quadratic Bézier strokes, pixels in `[0, 1]`.
pub fn synth_curves_toy(opts: CurvesToyOptions, seed: u64) -> Result<Dataset, DataError> {
    if opts.side < 2 || opts.count == 0 || opts.count > CURVES_TOY_MAX_COUNT || !(opts.width > 0.0) {
        return Err(DataError::InvalidArgument(format!("bad curves-toy options {opts:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = opts.side;
    let npix = side * side;
    let lim = (side - 1) as f64;
    let mut x = DenseMatrix::zeros(opts.count, npix);
    for i in 0..opts.count {
        let pts: Vec<(f64, f64)> = (0..3).map(|_| (rng.random::<f64>() * lim, rng.random::<f64>() * lim)).collect();
        let samples = 4 * side;
        let curve: Vec<(f64, f64)> = (0..=samples)
            .map(|s| {
                let t = s as f64 / samples as f64;
                let (a, b, c) = ((1.0 - t) * (1.0 - t), 2.0 * t * (1.0 - t), t * t);
                (a * pts[0].0 + b * pts[1].0 + c * pts[2].0, a * pts[0].1 + b * pts[1].1 + c * pts[2].1)
            })
            .collect();
        let row = x.row_mut(i);
        for py in 0..side {
            for px in 0..side {
                let d2 = curve
                    .iter()
                    .map(|&(cx, cy)| (cx - px as f64).powi(2) + (cy - py as f64).powi(2))
                    .fold(f64::INFINITY, f64::min);
                row[py * side + px] = (-d2 / (2.0 * opts.width * opts.width)).exp();
            }
        }
    }
    Ok(Dataset {
        name: format!("curves-toy-{side}x{side}-s{seed}"),
        features: Features::Dense(x),
        labels: Vec::new(),
        n_features: npix,
        normalization: None,
    })
}
