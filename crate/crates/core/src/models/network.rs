use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::{sigmoid, softplus};
use super::{ForwardCache, LayerCapture, LayerInfo, Layered, ModelError, Objective, SampleJacobian};
use crate::linalg::{mat_col_major, vec_col_major, DenseMatrix};
use crate::parallel;

/// Convolution with a `(2K+1)²` window, stride 1 and zero padding `K`, so the
/// output grid matches the input grid. No bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub radius: usize,
    pub height: usize,
    pub width: usize,
}

impl ConvSpec {
    pub fn window(&self) -> usize {
        (2 * self.radius + 1).pow(2)
    }
    pub fn spatial(&self) -> usize {
        self.height * self.width
    }
    pub fn m_a(&self) -> usize {
        self.in_channels * self.window()
    }
    pub fn input_len(&self) -> usize {
        self.in_channels * self.spatial()
    }
    pub fn output_len(&self) -> usize {
        self.out_channels * self.spatial()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LayerSpec {
    /// Fully connected, with a bias carried as an extra constant activation.
    Dense { inputs: usize, outputs: usize },
    Conv(ConvSpec),
}

impl LayerSpec {
    pub fn input_len(&self) -> usize {
        match self {
            LayerSpec::Dense { inputs, .. } => *inputs,
            LayerSpec::Conv(c) => c.input_len(),
        }
    }
    pub fn output_len(&self) -> usize {
        match self {
            LayerSpec::Dense { outputs, .. } => *outputs,
            LayerSpec::Conv(c) => c.output_len(),
        }
    }
    fn shape(&self) -> (usize, usize, usize) {
        match self {
            LayerSpec::Dense { inputs, outputs } => (inputs + 1, *outputs, 1),
            LayerSpec::Conv(c) => (c.m_a(), c.out_channels, c.spatial()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Sigmoid,
    Relu,
}

impl Activation {
    #[inline]
    fn eval(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Relu => z.max(0.0),
        }
    }
    #[inline]
    fn deriv(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// `½‖f − y‖²`
    Square,
    /// Sigmoid cross-entropy on logits, `Σ softplus(f_j) − y_j f_j`.
    CrossEntropy,
}

impl Loss {
    /// Value, gradient and (diagonal) Hessian with respect to the output.
    fn eval(self, f: &[f64], y: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        match self {
            Loss::Square => {
                let r: Vec<f64> = f.iter().zip(y).map(|(a, b)| a - b).collect();
                let v = 0.5 * r.iter().map(|x| x * x).sum::<f64>();
                (v, r, vec![1.0; f.len()])
            }
            Loss::CrossEntropy => {
                let v = f.iter().zip(y).map(|(a, b)| softplus(*a) - b * a).sum();
                let g = f.iter().zip(y).map(|(a, b)| sigmoid(*a) - b).collect();
                let h = f.iter().map(|a| sigmoid(*a) * sigmoid(-*a)).collect();
                (v, g, h)
            }
        }
    }
}

/// Feed-forward network of dense and convolutional layers. Hidden layers
/// apply `activation`; the last layer is linear.
#[derive(Debug, Clone)]
pub struct Network {
    specs: Vec<LayerSpec>,
    infos: Vec<LayerInfo>,
    activation: Activation,
    loss: Loss,
    inputs: DenseMatrix,
    targets: DenseMatrix,
    mu: f64,
}

struct Trace {
    a: Vec<DenseMatrix>,
    s: Vec<DenseMatrix>,
    out: Vec<f64>,
}

impl Network {
    pub fn new(
        specs: Vec<LayerSpec>,
        activation: Activation,
        loss: Loss,
        inputs: DenseMatrix,
        targets: DenseMatrix,
        mu: f64,
    ) -> Result<Self, ModelError> {
        if specs.is_empty() {
            return Err(ModelError::ShapeMismatch("network has no layers".into()));
        }
        for w in specs.windows(2) {
            if w[0].output_len() != w[1].input_len() {
                return Err(ModelError::ShapeMismatch(format!(
                    "layer output {} does not feed input {}",
                    w[0].output_len(),
                    w[1].input_len()
                )));
            }
        }
        if inputs.cols() != specs[0].input_len() {
            return Err(ModelError::ShapeMismatch(format!("inputs have {} columns, expected {}", inputs.cols(), specs[0].input_len())));
        }
        let out_len = specs.last().unwrap().output_len();
        if targets.cols() != out_len || targets.rows() != inputs.rows() {
            return Err(ModelError::ShapeMismatch(format!(
                "targets are {}x{}, expected {}x{}",
                targets.rows(),
                targets.cols(),
                inputs.rows(),
                out_len
            )));
        }
        let mut infos = Vec::with_capacity(specs.len());
        let mut off = 0;
        for s in &specs {
            let (m_a, m_g, spatial) = s.shape();
            infos.push(LayerInfo { params: off..off + m_a * m_g, m_a, m_g, spatial });
            off += m_a * m_g;
        }
        Ok(Self { specs, infos, activation, loss, inputs, targets, mu })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn output_len(&self) -> usize {
        self.specs.last().unwrap().output_len()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; self.dim()];
        for (spec, info) in self.specs.iter().zip(&self.infos) {
            let (fan_in, fan_out) = match spec {
                LayerSpec::Dense { inputs, outputs } => (*inputs, *outputs),
                LayerSpec::Conv(c) => (c.m_a(), c.out_channels * c.window()),
            };
            let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let bias_col = matches!(spec, LayerSpec::Dense { .. }).then(|| info.m_a - 1);
            for a in 0..info.m_a {
                for g in 0..info.m_g {
                    let v = rng.random_range(-lim..lim);
                    if Some(a) != bias_col {
                        theta[info.params.start + a * info.m_g + g] = v;
                    }
                }
            }
        }
        theta
    }

    fn weights(&self, l: usize, theta: &[f64]) -> DenseMatrix {
        let info = &self.infos[l];
        mat_col_major(&theta[info.params.clone()], info.m_g, info.m_a)
    }

    /// Activation matrix `A` (`m_a × |𝒯|`) for the layer input `x`.
    fn expand(&self, l: usize, x: &[f64]) -> DenseMatrix {
        match &self.specs[l] {
            LayerSpec::Dense { inputs, .. } => {
                let mut a = DenseMatrix::zeros(inputs + 1, 1);
                for (i, v) in x.iter().enumerate() {
                    a[(i, 0)] = *v;
                }
                a[(*inputs, 0)] = 1.0;
                a
            }
            LayerSpec::Conv(c) => im2col(c, x),
        }
    }

    /// Adjoint of [`Self::expand`] restricted to the real inputs.
    fn fold(&self, l: usize, da: &DenseMatrix) -> Vec<f64> {
        match &self.specs[l] {
            LayerSpec::Dense { inputs, .. } => (0..*inputs).map(|i| da[(i, 0)]).collect(),
            LayerSpec::Conv(c) => col2im(c, da),
        }
    }

    fn forward(&self, theta: &[f64], x: &[f64]) -> Result<Trace, ModelError> {
        let nl = self.specs.len();
        let mut a_list = Vec::with_capacity(nl);
        let mut s_list = Vec::with_capacity(nl);
        let mut act = x.to_vec();
        for l in 0..nl {
            let a = self.expand(l, &act);
            let s = self.weights(l, theta).matmul(&a);
            if !s.is_finite() {
                return Err(ModelError::NonFiniteActivation { layer: l });
            }
            // channel-major flattening: z[g·|𝒯| + t] = S[g, t]
            let z = s.as_slice().to_vec();
            act = if l + 1 < nl { z.iter().map(|&v| self.activation.eval(v)).collect() } else { z };
            a_list.push(a);
            s_list.push(s);
        }
        Ok(Trace { a: a_list, s: s_list, out: act })
    }

    /// Backward pass seeded with the output gradient `r`. Returns the
    /// per-layer pre-activation gradients and `Jᵀ`-style parameter gradient.
    fn backward(&self, theta: &[f64], tr: &Trace, r: &[f64]) -> (Vec<DenseMatrix>, Vec<f64>) {
        let nl = self.specs.len();
        let mut grad = vec![0.0; self.dim()];
        let mut ds_list = vec![DenseMatrix::zeros(0, 0); nl];
        let last = &self.infos[nl - 1];
        let mut ds = DenseMatrix::from_row_major(last.m_g, last.spatial, r.to_vec());
        for l in (0..nl).rev() {
            let info = &self.infos[l];
            let gblock = ds.matmul_tr(&tr.a[l]);
            grad[info.params.clone()].copy_from_slice(&vec_col_major(&gblock));
            if l > 0 {
                let da = self.weights(l, theta).tr_matmul(&ds);
                let dact = self.fold(l, &da);
                let prev = &tr.s[l - 1];
                let pd: Vec<f64> =
                    dact.iter().zip(prev.as_slice()).map(|(d, s)| d * self.activation.deriv(*s)).collect();
                ds_list[l] = ds;
                ds = DenseMatrix::from_row_major(prev.rows(), prev.cols(), pd);
            } else {
                ds_list[l] = ds.clone();
            }
        }
        (ds_list, grad)
    }

    fn sample_pass(&self, theta: &[f64], i: usize) -> Result<(f64, Vec<f64>, Vec<LayerCapture>), ModelError> {
        let tr = self.forward(theta, self.inputs.row(i))?;
        let (l, r, _) = self.loss.eval(&tr.out, self.targets.row(i));
        let (ds, g) = self.backward(theta, &tr, &r);
        let caps = tr.a.into_iter().zip(tr.s).zip(ds).map(|((a, s), ds)| LayerCapture { a, s, ds }).collect();
        Ok((l, g, caps))
    }
}

fn im2col(c: &ConvSpec, x: &[f64]) -> DenseMatrix {
    let (h, w, k) = (c.height as isize, c.width as isize, c.radius as isize);
    let t_len = c.spatial();
    let win = c.window();
    let mut a = DenseMatrix::zeros(c.m_a(), t_len);
    for j in 0..c.in_channels {
        let mut d = 0;
        for dy in -k..=k {
            for dx in -k..=k {
                let row = j * win + d;
                for y in 0..h {
                    for xx in 0..w {
                        let (sy, sx) = (y + dy, xx + dx);
                        if sy >= 0 && sy < h && sx >= 0 && sx < w {
                            a[(row, (y * w + xx) as usize)] = x[j * t_len + (sy * w + sx) as usize];
                        }
                    }
                }
                d += 1;
            }
        }
    }
    a
}

fn col2im(c: &ConvSpec, da: &DenseMatrix) -> Vec<f64> {
    let (h, w, k) = (c.height as isize, c.width as isize, c.radius as isize);
    let t_len = c.spatial();
    let win = c.window();
    let mut out = vec![0.0; c.input_len()];
    for j in 0..c.in_channels {
        let mut d = 0;
        for dy in -k..=k {
            for dx in -k..=k {
                let row = j * win + d;
                for y in 0..h {
                    for xx in 0..w {
                        let (sy, sx) = (y + dy, xx + dx);
                        if sy >= 0 && sy < h && sx >= 0 && sx < w {
                            out[j * t_len + (sy * w + sx) as usize] += da[(row, (y * w + xx) as usize)];
                        }
                    }
                }
                d += 1;
            }
        }
    }
    out
}

impl Objective for Network {
    fn dim(&self) -> usize {
        self.infos.last().unwrap().params.end
    }

    fn num_samples(&self) -> usize {
        self.inputs.rows()
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn sample_loss_grad(&self, theta: &[f64], i: usize) -> Result<(f64, Vec<f64>), ModelError> {
        let tr = self.forward(theta, self.inputs.row(i))?;
        let (l, r, _) = self.loss.eval(&tr.out, self.targets.row(i));
        Ok((l, self.backward(theta, &tr, &r).1))
    }

    fn sample_jacobian(&self, theta: &[f64], i: usize) -> Result<SampleJacobian, ModelError> {
        let tr = self.forward(theta, self.inputs.row(i))?;
        let (_, lg, lh) = self.loss.eval(&tr.out, self.targets.row(i));
        let m = tr.out.len();
        let mut jac = DenseMatrix::zeros(self.dim(), m);
        let mut e = vec![0.0; m];
        for j in 0..m {
            e[j] = 1.0;
            jac.set_col(j, &self.backward(theta, &tr, &e).1);
            e[j] = 0.0;
        }
        Ok(SampleJacobian { jacobian: jac, loss_grad: lg, loss_hessian: DenseMatrix::from_diag(&lh) })
    }

    fn sample_vjp(&self, theta: &[f64], i: usize, r: &[f64]) -> Result<Vec<f64>, ModelError> {
        let tr = self.forward(theta, self.inputs.row(i))?;
        if r.len() != tr.out.len() {
            return Err(ModelError::ShapeMismatch(format!("vjp seed has {} entries, output has {}", r.len(), tr.out.len())));
        }
        Ok(self.backward(theta, &tr, r).1)
    }

    fn sample_output_grad(&self, theta: &[f64], i: usize) -> Result<Vec<f64>, ModelError> {
        let tr = self.forward(theta, self.inputs.row(i))?;
        Ok(self.loss.eval(&tr.out, self.targets.row(i)).1)
    }

    fn layered(&self) -> Option<&dyn Layered> {
        Some(self)
    }
}

impl Layered for Network {
    fn layers(&self) -> &[LayerInfo] {
        &self.infos
    }

    fn forward_backward(&self, theta: &[f64], idx: &[usize]) -> Result<(f64, Vec<f64>, ForwardCache), ModelError> {
        if idx.is_empty() {
            return Err(ModelError::EmptySampleSet);
        }
        let n = self.dim();
        type Part = Result<(Vec<f64>, Vec<Vec<LayerCapture>>), ModelError>;
        let out: Part = parallel::chunked_reduce(
            idx,
            |chunk| {
                let mut acc = vec![0.0; n + 1];
                let mut caps = Vec::with_capacity(chunk.len());
                for &i in chunk {
                    let (l, g, c) = self.sample_pass(theta, i)?;
                    crate::linalg::vector::axpy(1.0, &g, &mut acc[..n]);
                    acc[n] += l;
                    caps.push(c);
                }
                Ok((acc, caps))
            },
            |a: Part, b: Part| {
                let (mut a, b) = (a?, b?);
                a.1.extend(b.1);
                Ok((parallel::add_vecs(a.0, b.0), a.1))
            },
        )
        .expect("non-empty index set");
        let (acc, samples) = out?;
        let inv = 1.0 / idx.len() as f64;
        let mut g: Vec<f64> = acc[..n].iter().map(|v| v * inv).collect();
        for (gi, t) in g.iter_mut().zip(theta) {
            *gi += 2.0 * self.mu * t;
        }
        let loss = acc[n] * inv + self.mu * crate::linalg::vector::dot(theta, theta);
        Ok((loss, g, ForwardCache { theta: theta.to_vec(), indices: idx.to_vec(), samples }))
    }
}

/// Result of a single convolutional layer under square loss.
#[derive(Debug, Clone)]
pub struct ConvOutput {
    /// One row per sample, channel-major.
    pub outputs: DenseMatrix,
    /// Per-sample `𝒟Θ̃ = G Aᵀ` (`out_channels × in_channels·|Δ|`).
    pub grads: Vec<DenseMatrix>,
    pub cache: ForwardCache,
}

/// Runs one convolutional layer with square loss against `targets` on every
/// row of `inputs`. `theta` is `vec(Θ̃)`, column-major.
pub fn conv_forward_backward(
    spec: &ConvSpec,
    theta: &[f64],
    inputs: &DenseMatrix,
    targets: &DenseMatrix,
) -> Result<ConvOutput, ModelError> {
    if theta.len() != spec.out_channels * spec.m_a() {
        return Err(ModelError::ShapeMismatch(format!("conv weights have {} entries, expected {}", theta.len(), spec.out_channels * spec.m_a())));
    }
    let net = Network::new(vec![LayerSpec::Conv(*spec)], Activation::Sigmoid, Loss::Square, inputs.clone(), targets.clone(), 0.0)?;
    let idx: Vec<usize> = (0..inputs.rows()).collect();
    let (_, _, cache) = net.forward_backward(theta, &idx)?;
    let mut outputs = DenseMatrix::zeros(inputs.rows(), spec.output_len());
    let mut grads = Vec::with_capacity(idx.len());
    for (k, caps) in cache.samples.iter().enumerate() {
        outputs.row_mut(k).copy_from_slice(caps[0].s.as_slice());
        grads.push(caps[0].ds.matmul_tr(&caps[0].a));
    }
    Ok(ConvOutput { outputs, grads, cache })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_linear_net_has_zero_square_loss() {
        let net = Network::new(
            vec![LayerSpec::Dense { inputs: 1, outputs: 1 }],
            Activation::Sigmoid,
            Loss::Square,
            DenseMatrix::from_rows(&[vec![0.7]]),
            DenseMatrix::from_rows(&[vec![0.0]]),
            0.0,
        )
        .unwrap();
        let (l, g) = net.value_grad(&[0.0, 0.0], &[0]).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn shape_checks() {
        let r = Network::new(
            vec![LayerSpec::Dense { inputs: 2, outputs: 3 }, LayerSpec::Dense { inputs: 4, outputs: 1 }],
            Activation::Sigmoid,
            Loss::Square,
            DenseMatrix::zeros(1, 2),
            DenseMatrix::zeros(1, 1),
            0.0,
        );
        assert!(matches!(r, Err(ModelError::ShapeMismatch(_))));
    }

    #[test]
    fn im2col_fold_are_adjoint() {
        let c = ConvSpec { in_channels: 2, out_channels: 1, radius: 1, height: 3, width: 4 };
        let x: Vec<f64> = (0..c.input_len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = im2col(&c, &x);
        let y = DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| ((i * 7 + j * 3) as f64).cos());
        let lhs: f64 = a.as_slice().iter().zip(y.as_slice()).map(|(p, q)| p * q).sum();
        let rhs = crate::linalg::vector::dot(&x, &col2im(&c, &y));
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
