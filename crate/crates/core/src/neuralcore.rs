//! Accelerator-side arithmetic: hidden FC layer with fused ReLU, output layer
//! with fused softmax and cross-entropy, backpropagation, and the combined
//! per-batch kernel driven by the `is_training` flag.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::adam::{apply_batch_update, AdamHyper, AdamState};
use crate::dims::ModelDims;
use crate::error::{Error, Result};
use crate::hoststage::ConvBatch;
use crate::tensor::Matrix;

/// Guard added inside `ln` so an exactly-zero probability stays finite.
pub const LOG_EPS: f64 = 1e-12;

pub const INIT_STD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    /// `pool_map_length x layer_size`
    pub w1: Matrix,
    /// `layer_size x class_size`
    pub w2: Matrix,
}

impl Weights {
    pub fn is_finite(&self) -> bool {
        self.w1.is_finite() && self.w2.is_finite()
    }

    pub fn len(&self) -> usize {
        self.w1.as_slice().len() + self.w2.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// i.i.d. N(0, 0.1²) weights; `w1` is filled first, then `w2`.
pub fn init_weights(dims: &ModelDims, seed: u64) -> Weights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let mut sample = |rows, cols| Matrix::from_fn(rows, cols, |_, _| normal.sample(&mut rng));
    let w1 = sample(dims.pool_map_length, dims.layer_size);
    let w2 = sample(dims.layer_size, dims.class_size);
    Weights { w1, w2 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub v: Matrix,
    /// Post-ReLU hidden activations.
    pub h1: Matrix,
    /// Softmax probabilities.
    pub h2: Matrix,
    /// Mean cross-entropy over the batch.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub g_w1: Matrix,
    pub g_w2: Matrix,
}

/// `h1 = ReLU(v · W1)`.
pub fn fc_forward(v: &Matrix, w1: &Matrix) -> Result<Matrix> {
    let mut h1 = v.matmul(w1)?;
    for x in h1.as_mut_slice() {
        if x.is_nan() || *x <= 0.0 {
            *x = 0.0;
        }
    }
    Ok(h1)
}

/// Max-shifted softmax of one row, in place. Returns the exponential sum.
fn softmax_row(row: &mut [f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
    sum
}

/// Logits `h1 · W2`, softmax, and mean cross-entropy against `out_actual`.
pub fn out_forward(h1: &Matrix, w2: &Matrix, out_actual: &Matrix) -> Result<(Matrix, f64)> {
    let mut h2 = h1.matmul(w2)?;
    out_actual.expect_shape("out_forward", h2.rows(), h2.cols())?;
    let mut total = 0.0;
    for i in 0..h2.rows() {
        let row = h2.row_mut(i);
        softmax_row(row);
        for (&p, &y) in row.iter().zip(out_actual.row(i)) {
            if y != 0.0 {
                total += y * (p + LOG_EPS).ln();
            }
        }
    }
    let loss = -total / h2.rows() as f64;
    Ok((h2, loss))
}

/// Weight gradients of the mean cross-entropy.
pub fn backward(trace: &ForwardTrace, out_actual: &Matrix, weights: &Weights) -> Result<Gradients> {
    let batch = trace.h2.rows();
    out_actual.expect_shape("backward", batch, trace.h2.cols())?;
    weights
        .w2
        .expect_shape("backward", trace.h1.cols(), trace.h2.cols())?;
    weights
        .w1
        .expect_shape("backward", trace.v.cols(), trace.h1.cols())?;

    let scale = batch as f64;
    let dz = Matrix::from_fn(batch, trace.h2.cols(), |i, j| {
        (trace.h2.get(i, j) - out_actual.get(i, j)) / scale
    });
    let g_w2 = trace.h1.t_matmul(&dz)?;

    let mut dh1 = dz.matmul_t(&weights.w2)?;
    for (d, &h) in dh1.as_mut_slice().iter_mut().zip(trace.h1.as_slice()) {
        if h.is_nan() || h <= 0.0 {
            *d = 0.0;
        }
    }
    let g_w1 = trace.v.t_matmul(&dh1)?;
    Ok(Gradients { g_w1, g_w2 })
}

/// Fraction of rows whose arg-max prediction equals the arg-max target;
/// ties go to the lowest index.
pub fn accuracy(h2: &Matrix, out_actual: &Matrix) -> f64 {
    if h2.rows() == 0 {
        return 0.0;
    }
    correct_predictions(h2, out_actual) as f64 / h2.rows() as f64
}

pub fn correct_predictions(h2: &Matrix, out_actual: &Matrix) -> usize {
    (0..h2.rows())
        .filter(|&i| argmax(h2.row(i)) == argmax(out_actual.row(i)))
        .count()
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// Everything the accelerator keeps resident between batches.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub weights: Weights,
    pub adam: AdamState,
    pub hyper: AdamHyper,
}

impl ModelState {
    pub fn new(weights: Weights, hyper: AdamHyper) -> Self {
        let adam = AdamState::zeros(weights.w1.shape(), weights.w2.shape());
        ModelState {
            weights,
            adam,
            hyper,
        }
    }

    pub fn init(dims: &ModelDims, seed: u64, hyper: AdamHyper) -> Self {
        ModelState::new(init_weights(dims, seed), hyper)
    }
}

/// One accelerator invocation: forward pass always, then backward pass and
/// both Adam updates when `is_training`. The state is untouched otherwise.
pub fn accel_kernel(
    conv: &ConvBatch,
    state: &mut ModelState,
    is_training: bool,
) -> Result<ForwardTrace> {
    let h1 = fc_forward(&conv.v, &state.weights.w1)?;
    let (h2, loss) = out_forward(&h1, &state.weights.w2, &conv.out_actual)?;
    let trace = ForwardTrace {
        v: conv.v.clone(),
        h1,
        h2,
        loss,
    };
    if is_training {
        let grads = backward(&trace, &conv.out_actual, &state.weights)?;
        let ModelState {
            weights,
            adam,
            hyper,
        } = state;
        apply_batch_update(
            adam,
            &mut weights.w1,
            &mut weights.w2,
            &grads.g_w1,
            &grads.g_w2,
            hyper,
        )?;
        if !weights.is_finite() {
            return Err(Error::Stage(format!(
                "weights became non-finite after batch {}",
                conv.index
            )));
        }
    }
    Ok(trace)
}
