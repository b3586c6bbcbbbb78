//! Single-layer LSTM cell with an explicit-cache backward pass.
//!
//! Gate layout is fused: rows `[0,H)` input gate `i`, `[H,2H)` forget gate
//! `f`, `[2H,3H)` output gate `o`, `[3H,4H)` candidate `g`.
//!
//! ```text
//! i, f, o = σ(Wx·x + Wh·h + b)      g = tanh(Wx·x + Wh·h + b)
//! c' = f⊙c + i⊙g                    h' = o⊙tanh(c')
//! ```

use rand::Rng;

use crate::math::{init_uniform, sigmoid, MathError, Tensor1, Tensor2};

pub const FORGET_BIAS_INIT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// 4H × E
    pub wx: Tensor2,
    /// 4H × H
    pub wh: Tensor2,
    /// 4H
    pub b: Tensor1,
}

impl LstmParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            wx: Tensor2::zeros(4 * hidden, input),
            wh: Tensor2::zeros(4 * hidden, hidden),
            b: vec![0.0; 4 * hidden],
        }
    }

    /// Xavier-uniform weights, zero biases except the forget gate at 1.0.
    pub fn init<R: Rng + ?Sized>(hidden: usize, input: usize, rng: &mut R) -> Self {
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].fill(FORGET_BIAS_INIT);
        Self {
            wx: init_uniform(4 * hidden, input, rng),
            wh: init_uniform(4 * hidden, hidden, rng),
            b,
        }
    }

    pub fn hidden(&self) -> usize {
        self.b.len() / 4
    }

    pub fn input(&self) -> usize {
        self.wx.cols()
    }

    pub fn check_shapes(&self) -> Result<(), MathError> {
        let h4 = self.b.len();
        let h = h4 / 4;
        if h4 % 4 != 0 || self.wx.rows() != h4 || self.wh.shape() != (h4, h) {
            return Err(MathError::ShapeMismatch {
                op: "lstm params",
                left: self.wx.shape(),
                right: self.wh.shape(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Tensor1,
    pub c: Tensor1,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub x: Tensor1,
    pub h_prev: Tensor1,
    pub c_prev: Tensor1,
    /// Post-activation gates `[i; f; o; g]`, length 4H.
    pub gates: Tensor1,
    pub tanh_c: Tensor1,
}

/// Gradients with respect to one step's inputs. Parameter gradients are
/// accumulated into the caller's buffer instead.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStepGrads {
    pub x: Tensor1,
    pub h_prev: Tensor1,
    pub c_prev: Tensor1,
}

pub fn lstm_step(
    params: &LstmParams,
    x: &[f64],
    state: &LstmState,
) -> Result<(LstmState, LstmCache), MathError> {
    let hidden = params.hidden();
    if x.len() != params.input() || state.h.len() != hidden || state.c.len() != hidden {
        return Err(MathError::ShapeMismatch {
            op: "lstm_step",
            left: (params.input(), hidden),
            right: (x.len(), state.h.len()),
        });
    }
    let mut gates = params.b.clone();
    params.wx.matvec_acc(x, &mut gates);
    params.wh.matvec_acc(&state.h, &mut gates);
    for z in &mut gates[..3 * hidden] {
        *z = sigmoid(*z);
    }
    for z in &mut gates[3 * hidden..] {
        *z = z.tanh();
    }

    let mut c = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    let mut tanh_c = vec![0.0; hidden];
    for k in 0..hidden {
        let (i, f, o, g) = (gates[k], gates[hidden + k], gates[2 * hidden + k], gates[3 * hidden + k]);
        c[k] = f * state.c[k] + i * g;
        tanh_c[k] = c[k].tanh();
        h[k] = o * tanh_c[k];
    }
    let cache = LstmCache {
        x: x.to_vec(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        gates,
        tanh_c,
    };
    Ok((LstmState { h, c }, cache))
}

/// Backpropagates `(∂L/∂h', ∂L/∂c')` through one step. Parameter gradients
/// are added into `param_grads`.
pub fn lstm_step_backward(
    params: &LstmParams,
    cache: &LstmCache,
    grad_h: &[f64],
    grad_c: &[f64],
    param_grads: &mut LstmParams,
) -> LstmStepGrads {
    let hidden = params.hidden();
    let g = &cache.gates;
    let mut dz = vec![0.0; 4 * hidden];
    let mut dc_prev = vec![0.0; hidden];
    for k in 0..hidden {
        let (i, f, o, cand) = (g[k], g[hidden + k], g[2 * hidden + k], g[3 * hidden + k]);
        let tc = cache.tanh_c[k];
        let dc = grad_c[k] + grad_h[k] * o * (1.0 - tc * tc);
        let d_o = grad_h[k] * tc;
        let d_i = dc * cand;
        let d_f = dc * cache.c_prev[k];
        let d_g = dc * i;
        dc_prev[k] = dc * f;
        dz[k] = d_i * i * (1.0 - i);
        dz[hidden + k] = d_f * f * (1.0 - f);
        dz[2 * hidden + k] = d_o * o * (1.0 - o);
        dz[3 * hidden + k] = d_g * (1.0 - cand * cand);
    }

    param_grads.wx.add_outer(&dz, &cache.x);
    param_grads.wh.add_outer(&dz, &cache.h_prev);
    for (gb, d) in param_grads.b.iter_mut().zip(&dz) {
        *gb += d;
    }

    let mut dx = vec![0.0; cache.x.len()];
    params.wx.matvec_t_acc(&dz, &mut dx);
    let mut dh_prev = vec![0.0; hidden];
    params.wh.matvec_t_acc(&dz, &mut dh_prev);
    LstmStepGrads {
        x: dx,
        h_prev: dh_prev,
        c_prev: dc_prev,
    }
}
