//! Single-bottleneck autoencoder `d → k → d` trained with mini-batch SGD on
//! mean squared reconstruction error.
//!
//! The bottleneck carries the configured activation; the output layer is
//! linear. Loss over a batch `B` is `Σ‖x̂ − x‖² / (|B| · d)`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EmbedConfig, EmbedError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    #[default]
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.max(T::zero()),
            Activation::Sigmoid => T::one() / (T::one() + (-z).exp()),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `h`.
    #[inline]
    fn slope<T: Scalar>(self, z: T, h: T) -> T {
        match self {
            Activation::Linear => T::one(),
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => h * (T::one() - h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AutoencoderModel<T> {
    /// `k × d`
    pub encoder_weights: Matrix<T>,
    pub encoder_bias: Vec<T>,
    /// `d × k`
    pub decoder_weights: Matrix<T>,
    pub decoder_bias: Vec<T>,
    pub activation: Activation,
    /// Full-data reconstruction MSE after each completed epoch.
    pub training_log: Vec<T>,
}

/// Loss gradient with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub encoder_weights: Matrix<T>,
    pub encoder_bias: Vec<T>,
    pub decoder_weights: Matrix<T>,
    pub decoder_bias: Vec<T>,
}

impl<T: Scalar> Gradients<T> {
    fn zeros_like(m: &AutoencoderModel<T>) -> Self {
        Self {
            encoder_weights: Matrix::zeros(m.k(), m.dim()),
            encoder_bias: vec![T::zero(); m.k()],
            decoder_weights: Matrix::zeros(m.dim(), m.k()),
            decoder_bias: vec![T::zero(); m.dim()],
        }
    }

    fn flat(&self) -> impl Iterator<Item = &T> {
        self.encoder_weights
            .as_slice()
            .iter()
            .chain(&self.encoder_bias)
            .chain(self.decoder_weights.as_slice())
            .chain(&self.decoder_bias)
    }
}

struct Forward<T> {
    pre: Vec<T>,
    code: Vec<T>,
    out: Vec<T>,
}

impl<T: Scalar> AutoencoderModel<T> {
    /// Xavier-uniform weights, zero biases.
    pub fn xavier(d: usize, k: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (d + k) as f64).sqrt();
        let mut draw = |rows, cols| {
            Matrix::from_vec(
                rows,
                cols,
                (0..rows * cols)
                    .map(|_| T::of(rng.random_range(-limit..=limit)))
                    .collect(),
            )
        };
        let encoder_weights = draw(k, d);
        let decoder_weights = draw(d, k);
        Self {
            encoder_weights,
            encoder_bias: vec![T::zero(); k],
            decoder_weights,
            decoder_bias: vec![T::zero(); d],
            activation,
            training_log: Vec::new(),
        }
    }

    /// Identity encoder and decoder (`k = d`).
    pub fn identity(d: usize, activation: Activation) -> Self {
        Self {
            encoder_weights: Matrix::identity(d),
            encoder_bias: vec![T::zero(); d],
            decoder_weights: Matrix::identity(d),
            decoder_bias: vec![T::zero(); d],
            activation,
            training_log: Vec::new(),
        }
    }

    pub fn zeros(d: usize, k: usize, activation: Activation) -> Self {
        Self {
            encoder_weights: Matrix::zeros(k, d),
            encoder_bias: vec![T::zero(); k],
            decoder_weights: Matrix::zeros(d, k),
            decoder_bias: vec![T::zero(); d],
            activation,
            training_log: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.encoder_weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.encoder_weights.cols()
    }

    pub fn is_finite(&self) -> bool {
        self.encoder_weights.is_finite()
            && self.decoder_weights.is_finite()
            && self.encoder_bias.iter().chain(&self.decoder_bias).all(|v| v.is_finite())
    }

    fn forward(&self, x: &[T]) -> Forward<T> {
        let pre: Vec<T> = (0..self.k())
            .map(|j| crate::scalar::dot(self.encoder_weights.row(j), x) + self.encoder_bias[j])
            .collect();
        let code: Vec<T> = pre.iter().map(|&z| self.activation.apply(z)).collect();
        let out = (0..self.dim())
            .map(|i| crate::scalar::dot(self.decoder_weights.row(i), &code) + self.decoder_bias[i])
            .collect();
        Forward { pre, code, out }
    }

    pub fn encode(&self, data: &Matrix<T>) -> Result<Matrix<T>, EmbedError> {
        self.check_dim(data)?;
        let mut out = Matrix::zeros(data.rows(), self.k());
        for (i, x) in data.iter_rows().enumerate() {
            out.row_mut(i).copy_from_slice(&self.forward(x).code);
        }
        Ok(out)
    }

    pub fn reconstruct(&self, data: &Matrix<T>) -> Result<Matrix<T>, EmbedError> {
        self.check_dim(data)?;
        let mut out = Matrix::zeros(data.rows(), self.dim());
        for (i, x) in data.iter_rows().enumerate() {
            out.row_mut(i).copy_from_slice(&self.forward(x).out);
        }
        Ok(out)
    }

    /// Mean squared reconstruction error over the rows of `data`.
    pub fn loss(&self, data: &Matrix<T>) -> Result<T, EmbedError> {
        self.check_dim(data)?;
        Ok(self.loss_rows(data, 0..data.rows()))
    }

    fn loss_rows(&self, data: &Matrix<T>, rows: impl ExactSizeIterator<Item = usize>) -> T {
        let count = rows.len();
        let mut acc = T::zero();
        for i in rows {
            let x = data.row(i);
            let f = self.forward(x);
            acc += crate::scalar::sq_dist(&f.out, x);
        }
        acc / T::of_usize((count * self.dim()).max(1))
    }

    /// Analytic gradient of the batch loss by backpropagation.
    pub fn gradients(&self, data: &Matrix<T>) -> Result<Gradients<T>, EmbedError> {
        self.check_dim(data)?;
        let mut g = Gradients::zeros_like(self);
        self.accumulate(data, 0..data.rows(), &mut g);
        Ok(g)
    }

    fn accumulate(&self, data: &Matrix<T>, rows: impl ExactSizeIterator<Item = usize>, g: &mut Gradients<T>) {
        let (d, k) = (self.dim(), self.k());
        let scale = T::of(2.0) / T::of_usize((rows.len() * d).max(1));
        let mut delta_out = vec![T::zero(); d];
        let mut delta_code = vec![T::zero(); k];
        for i in rows {
            let x = data.row(i);
            let f = self.forward(x);
            for r in 0..d {
                delta_out[r] = scale * (f.out[r] - x[r]);
                g.decoder_bias[r] += delta_out[r];
                let gw = g.decoder_weights.row_mut(r);
                for (gw, &h) in gw.iter_mut().zip(&f.code) {
                    *gw += delta_out[r] * h;
                }
            }
            for j in 0..k {
                let mut back = T::zero();
                for r in 0..d {
                    back += self.decoder_weights[(r, j)] * delta_out[r];
                }
                delta_code[j] = back * self.activation.slope(f.pre[j], f.code[j]);
                g.encoder_bias[j] += delta_code[j];
                let gw = g.encoder_weights.row_mut(j);
                for (gw, &xv) in gw.iter_mut().zip(x) {
                    *gw += delta_code[j] * xv;
                }
            }
        }
    }

    fn step(&mut self, g: &Gradients<T>, lr: T) {
        let upd = |p: &mut [T], gp: &[T]| p.iter_mut().zip(gp).for_each(|(p, &g)| *p -= lr * g);
        upd(self.encoder_weights.as_mut_slice(), g.encoder_weights.as_slice());
        upd(&mut self.encoder_bias, &g.encoder_bias);
        upd(self.decoder_weights.as_mut_slice(), g.decoder_weights.as_slice());
        upd(&mut self.decoder_bias, &g.decoder_bias);
    }

    /// Parameter `p` in the order encoder weights, encoder bias, decoder weights, decoder bias.
    fn param_mut(&mut self, mut p: usize) -> &mut T {
        let ew = self.encoder_weights.as_mut_slice();
        if p < ew.len() {
            return &mut ew[p];
        }
        p -= ew.len();
        if p < self.encoder_bias.len() {
            return &mut self.encoder_bias[p];
        }
        p -= self.encoder_bias.len();
        let dw = self.decoder_weights.as_mut_slice();
        if p < dw.len() {
            return &mut dw[p];
        }
        &mut self.decoder_bias[p - dw.len()]
    }

    fn check_dim(&self, data: &Matrix<T>) -> Result<(), EmbedError> {
        if data.cols() != self.dim() {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dim(),
                found: data.cols(),
            });
        }
        Ok(())
    }
}

fn check_config(d: usize, cfg: &EmbedConfig) -> Result<(), EmbedError> {
    if cfg.k == 0 || cfg.k > d {
        return Err(EmbedError::InvalidK { k: cfg.k, n: 0, d });
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(EmbedError::InvalidConfig(
            "epochs, batch_size and learning_rate must be positive".into(),
        ));
    }
    Ok(())
}

/// Xavier-initialized training run. Initialization and shuffling use
/// independent ChaCha streams of `cfg.seed`.
pub fn fit_autoencoder<T: Scalar>(data: &Matrix<T>, cfg: &EmbedConfig) -> Result<AutoencoderModel<T>, EmbedError> {
    check_config(data.cols(), cfg)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = AutoencoderModel::xavier(data.cols(), cfg.k, cfg.activation, &mut init_rng);
    train_autoencoder(model, data, cfg)
}

/// Continues SGD from `model` for `cfg.epochs` epochs.
pub fn train_autoencoder<T: Scalar>(
    mut model: AutoencoderModel<T>,
    data: &Matrix<T>,
    cfg: &EmbedConfig,
) -> Result<AutoencoderModel<T>, EmbedError> {
    check_config(data.cols(), cfg)?;
    model.check_dim(data)?;
    if data.rows() == 0 {
        return Err(EmbedError::TooFewSamples(0));
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let lr = T::of(cfg.learning_rate);
    let mut order: Vec<usize> = (0..data.rows()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut g = Gradients::zeros_like(&model);
            model.accumulate(data, batch.iter().copied(), &mut g);
            model.step(&g, lr);
        }
        let loss = model.loss_rows(data, 0..data.rows());
        if !loss.is_finite() || !model.is_finite() {
            return Err(EmbedError::NonFiniteLoss { epoch });
        }
        model.training_log.push(loss);
    }
    Ok(model)
}

/// Largest relative deviation between `analytic` and central finite
/// differences of the batch loss, over every parameter. An entry counts as
/// zero error when both sides are below `1e-12`; otherwise the deviation is
/// relative to the finite-difference value.
pub fn compare_gradients<T: Scalar>(
    model: &AutoencoderModel<T>,
    batch: &Matrix<T>,
    epsilon: T,
    analytic: &Gradients<T>,
) -> Result<T, EmbedError> {
    model.check_dim(batch)?;
    let mut probe = model.clone();
    let analytic: Vec<T> = analytic.flat().copied().collect();
    let tiny = T::of(1e-12);
    let two_eps = epsilon + epsilon;
    let mut worst = T::zero();
    for (p, &a) in analytic.iter().enumerate() {
        let orig = *probe.param_mut(p);
        *probe.param_mut(p) = orig + epsilon;
        let up = probe.loss_rows(batch, 0..batch.rows());
        *probe.param_mut(p) = orig - epsilon;
        let down = probe.loss_rows(batch, 0..batch.rows());
        *probe.param_mut(p) = orig;
        let numeric = (up - down) / two_eps;
        if a.abs() < tiny && numeric.abs() < tiny {
            continue;
        }
        let err = (a - numeric).abs() / numeric.abs().max(tiny);
        worst = worst.max(err);
    }
    Ok(worst)
}

pub fn gradient_check<T: Scalar>(model: &AutoencoderModel<T>, batch: &Matrix<T>, epsilon: T) -> Result<T, EmbedError> {
    let g = model.gradients(batch)?;
    compare_gradients(model, batch, epsilon, &g)
}
