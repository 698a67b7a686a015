//! Adam with bias correction, sharing one step counter and one pair of
//! correction factors between both weight matrices of a mini-batch.
//!
//! Per element, for step `t >= 1`:
//!
//! ```text
//! m <- b1*m + (1-b1)*g
//! v <- b2*v + (1-b2)*g^2
//! W <- W - eta * (m*c1) / (sqrt(v*c2) + eps),   c1 = 1/(1-b1^t), c2 = 1/(1-b2^t)
//! ```
//!
//! `eps` sits outside the square root.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eta: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eta: 0.01,
            eps: 1e-7,
        }
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: f64| b > 0.0 && b < 1.0;
        if !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(Error::Config(format!(
                "Adam betas must lie in (0, 1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if self.eta.is_nan() || self.eta <= 0.0 || self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::Config(format!(
                "Adam eta and eps must be positive, got {} and {}",
                self.eta, self.eps
            )));
        }
        Ok(())
    }
}

/// Bias-correction multipliers for one step, computed once per mini-batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionFactors {
    pub c1: f64,
    pub c2: f64,
}

pub fn correction_factors(hyper: &AdamHyper, t: u64) -> Result<CorrectionFactors> {
    if t == 0 {
        return Err(Error::ZeroStep);
    }
    let t = t as f64;
    Ok(CorrectionFactors {
        c1: 1.0 / (1.0 - hyper.beta1.powf(t)),
        c2: 1.0 / (1.0 - hyper.beta2.powf(t)),
    })
}

/// One elementwise Adam step over equally sized slices.
pub fn adam_update(
    w: &mut [f64],
    m: &mut [f64],
    v: &mut [f64],
    g: &[f64],
    corr: CorrectionFactors,
    hyper: &AdamHyper,
) -> Result<()> {
    let n = w.len();
    if m.len() != n || v.len() != n || g.len() != n {
        return Err(Error::shape(
            "adam_update",
            format!("{n} elements in W, m, v, g"),
            format!("{}, {}, {}, {}", n, m.len(), v.len(), g.len()),
        ));
    }
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    let (one_minus_b1, one_minus_b2) = (1.0 - b1, 1.0 - b2);
    for i in 0..n {
        let gi = g[i];
        let mi = b1 * m[i] + one_minus_b1 * gi;
        let vi = b2 * v[i] + one_minus_b2 * (gi * gi);
        m[i] = mi;
        v[i] = vi;
        let m_hat = mi * corr.c1;
        let v_hat = vi * corr.c2;
        w[i] -= hyper.eta * m_hat / (v_hat.sqrt() + hyper.eps);
    }
    Ok(())
}

/// Optimizer state: first and second moments for both layers and the shared
/// step counter (number of mini-batches applied so far).
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m_w1: Matrix,
    pub v_w1: Matrix,
    pub m_w2: Matrix,
    pub v_w2: Matrix,
    pub t: u64,
}

impl AdamState {
    pub fn zeros(w1_shape: (usize, usize), w2_shape: (usize, usize)) -> Self {
        AdamState {
            m_w1: Matrix::zeros(w1_shape.0, w1_shape.1),
            v_w1: Matrix::zeros(w1_shape.0, w1_shape.1),
            m_w2: Matrix::zeros(w2_shape.0, w2_shape.1),
            v_w2: Matrix::zeros(w2_shape.0, w2_shape.1),
            t: 0,
        }
    }
}

/// Advance `t`, compute the correction factors once, then update the output
/// layer followed by the hidden layer with the same factors.
pub fn apply_batch_update(
    state: &mut AdamState,
    w1: &mut Matrix,
    w2: &mut Matrix,
    g_w1: &Matrix,
    g_w2: &Matrix,
    hyper: &AdamHyper,
) -> Result<()> {
    for (name, shape) in [
        ("mW1", state.m_w1.shape()),
        ("vW1", state.v_w1.shape()),
        ("gW1", g_w1.shape()),
    ] {
        if shape != w1.shape() {
            return Err(Error::shape(
                "apply_batch_update",
                format!("{name} shaped like W1 {:?}", w1.shape()),
                format!("{shape:?}"),
            ));
        }
    }
    for (name, shape) in [
        ("mW2", state.m_w2.shape()),
        ("vW2", state.v_w2.shape()),
        ("gW2", g_w2.shape()),
    ] {
        if shape != w2.shape() {
            return Err(Error::shape(
                "apply_batch_update",
                format!("{name} shaped like W2 {:?}", w2.shape()),
                format!("{shape:?}"),
            ));
        }
    }

    let t = state.t + 1;
    let corr = correction_factors(hyper, t)?;
    adam_update(
        w2.as_mut_slice(),
        state.m_w2.as_mut_slice(),
        state.v_w2.as_mut_slice(),
        g_w2.as_slice(),
        corr,
        hyper,
    )?;
    adam_update(
        w1.as_mut_slice(),
        state.m_w1.as_mut_slice(),
        state.v_w1.as_mut_slice(),
        g_w1.as_slice(),
        corr,
        hyper,
    )?;
    state.t = t;
    Ok(())
}
