//! Datasets: LIBSVM text ingestion, synthetic generators and normalisation.

mod libsvm;
mod synth;

pub use libsvm::{parse_libsvm, read_libsvm, write_libsvm, LibsvmOptions};
pub use synth::{synth_curves_toy, synth_logistic, ConditionProfile, CurvesToyOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::DenseMatrix;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("feature indices not increasing at line {line}")]
    IndexOrder { line: usize },
    #[error("cannot map label set {0} to binary labels")]
    AmbiguousLabels(String),
    #[error("dataset is empty")]
    Empty,
    #[error("invalid generator argument: {0}")]
    InvalidArgument(String),
}

/// Feature storage. Sparse rows hold `(column, value)` pairs with strictly
/// increasing columns.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Sparse(Vec<Vec<(usize, f64)>>),
    Dense(DenseMatrix),
}

impl Features {
    pub fn num_rows(&self) -> usize {
        match self {
            Features::Sparse(r) => r.len(),
            Features::Dense(m) => m.rows(),
        }
    }

    /// `⟨x_i, θ⟩`
    #[inline]
    pub fn row_dot(&self, i: usize, theta: &[f64]) -> f64 {
        match self {
            Features::Sparse(r) => r[i].iter().map(|&(j, v)| v * theta[j]).sum(),
            Features::Dense(m) => crate::linalg::vector::dot(m.row(i), theta),
        }
    }

    /// `out += alpha · x_i`
    #[inline]
    pub fn row_axpy(&self, i: usize, alpha: f64, out: &mut [f64]) {
        match self {
            Features::Sparse(r) => {
                for &(j, v) in &r[i] {
                    out[j] += alpha * v;
                }
            }
            Features::Dense(m) => crate::linalg::vector::axpy(alpha, m.row(i), out),
        }
    }

    /// `out += alpha · x_i x_iᵀ`
    pub fn row_outer_acc(&self, i: usize, alpha: f64, out: &mut DenseMatrix) {
        match self {
            Features::Sparse(r) => {
                for &(a, va) in &r[i] {
                    let f = alpha * va;
                    for &(b, vb) in &r[i] {
                        out[(a, b)] += f * vb;
                    }
                }
            }
            Features::Dense(m) => {
                let x = m.row(i);
                out.rank_one_update(alpha, x, x);
            }
        }
    }

    pub fn row_dense(&self, i: usize, n: usize) -> Vec<f64> {
        match self {
            Features::Sparse(r) => {
                let mut x = vec![0.0; n];
                for &(j, v) in &r[i] {
                    x[j] = v;
                }
                x
            }
            Features::Dense(m) => m.row(i).to_vec(),
        }
    }

    pub fn to_dense(&self, n: usize) -> DenseMatrix {
        match self {
            Features::Dense(m) => m.clone(),
            Features::Sparse(r) => {
                let mut m = DenseMatrix::zeros(r.len(), n);
                for (i, row) in r.iter().enumerate() {
                    for &(j, v) in row {
                        m[(i, j)] = v;
                    }
                }
                m
            }
        }
    }
}

/// Per-feature max-abs scaling, kept so it can be undone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Features,
    /// Binary labels in `{−1, +1}`; empty for unlabelled data.
    pub labels: Vec<f64>,
    pub n_features: usize,
    pub normalization: Option<Normalization>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.num_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scales every feature by its largest absolute value. Columns that are
    /// identically zero keep scale 1.
    pub fn normalize_max_abs(&mut self) {
        let n = self.n_features;
        let mut scales = vec![0.0_f64; n];
        match &self.features {
            Features::Sparse(r) => {
                for row in r {
                    for &(j, v) in row {
                        scales[j] = scales[j].max(v.abs());
                    }
                }
            }
            Features::Dense(m) => {
                for i in 0..m.rows() {
                    for (j, v) in m.row(i).iter().enumerate() {
                        scales[j] = scales[j].max(v.abs());
                    }
                }
            }
        }
        for s in &mut scales {
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        self.apply_scales(&scales, false);
        self.normalization = Some(Normalization { scales });
    }

    /// Restores the original feature values.
    pub fn denormalize(&mut self) {
        if let Some(norm) = self.normalization.take() {
            self.apply_scales(&norm.scales, true);
        }
    }

    fn apply_scales(&mut self, scales: &[f64], multiply: bool) {
        let f = |v: f64, s: f64| if multiply { v * s } else { v / s };
        match &mut self.features {
            Features::Sparse(r) => {
                for row in r {
                    for (j, v) in row.iter_mut() {
                        *v = f(*v, scales[*j]);
                    }
                }
            }
            Features::Dense(m) => {
                for i in 0..m.rows() {
                    for (j, v) in m.row_mut(i).iter_mut().enumerate() {
                        *v = f(*v, scales[j]);
                    }
                }
            }
        }
    }
}
