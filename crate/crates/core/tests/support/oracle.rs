//! Loop-level reference implementation of the summarizer forward pass,
//! written without any of the library's tensor helpers and generic over the
//! scalar type so it can run in f64 or double-double.

use bans_core::model::Seq2SeqModel;
use bans_core::rnn::LstmParams;
use bans_core::text::{BOS, EOS, PAD};

use super::dd::Scalar;

pub type Matrix<T> = Vec<Vec<T>>;

pub fn matrix<T: Scalar>(rows: usize, cols: usize, data: &[f64]) -> Matrix<T> {
    assert_eq!(data.len(), rows * cols);
    data.chunks(cols.max(1)).take(rows).map(|r| r.iter().map(|&x| T::of(x)).collect()).collect()
}

pub fn vector<T: Scalar>(data: &[f64]) -> Vec<T> {
    data.iter().map(|&x| T::of(x)).collect()
}

#[derive(Clone)]
pub struct RefLstm<T> {
    pub wx: Matrix<T>,
    pub wh: Matrix<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> RefLstm<T> {
    pub fn from_params(p: &LstmParams) -> Self {
        RefLstm {
            wx: matrix(p.wx.rows(), p.wx.cols(), p.wx.data()),
            wh: matrix(p.wh.rows(), p.wh.cols(), p.wh.data()),
            b: vector(&p.b),
        }
    }

    /// One step; returns `(h', c')`.
    pub fn step(&self, x: &[T], h: &[T], c: &[T]) -> (Vec<T>, Vec<T>) {
        let hidden = h.len();
        let mut z = self.b.clone();
        for r in 0..4 * hidden {
            for j in 0..x.len() {
                z[r] = z[r] + self.wx[r][j] * x[j];
            }
            for k in 0..hidden {
                z[r] = z[r] + self.wh[r][k] * h[k];
            }
        }
        let mut h2 = Vec::with_capacity(hidden);
        let mut c2 = Vec::with_capacity(hidden);
        for k in 0..hidden {
            let i = z[k].sigmoid();
            let f = z[hidden + k].sigmoid();
            let o = z[2 * hidden + k].sigmoid();
            let g = z[3 * hidden + k].tanh();
            let c_new = f * c[k] + i * g;
            c2.push(c_new);
            h2.push(o * c_new.tanh());
        }
        (h2, c2)
    }
}

/// Dot-product attention; returns `(weights, context)`.
pub fn ref_attend<T: Scalar>(dec: &[T], enc: &[Vec<T>], masked: &[bool]) -> (Vec<T>, Vec<T>) {
    let zero = T::of(0.0);
    let mut scores = vec![zero; enc.len()];
    let mut max: Option<T> = None;
    for t in 0..enc.len() {
        if masked[t] {
            continue;
        }
        let mut s = zero;
        for k in 0..dec.len() {
            s = s + dec[k] * enc[t][k];
        }
        scores[t] = s;
        max = Some(match max {
            Some(m) if m >= s => m,
            _ => s,
        });
    }
    let max = max.expect("at least one unmasked position");
    let mut weights = vec![zero; enc.len()];
    let mut total = zero;
    for t in 0..enc.len() {
        if !masked[t] {
            weights[t] = (scores[t] - max).exp();
            total = total + weights[t];
        }
    }
    let mut context = vec![zero; dec.len()];
    for t in 0..enc.len() {
        if masked[t] {
            continue;
        }
        weights[t] = weights[t] / total;
        for k in 0..dec.len() {
            context[k] = context[k] + weights[t] * enc[t][k];
        }
    }
    (weights, context)
}

#[derive(Clone)]
pub struct RefModel<T> {
    pub embedding: Matrix<T>,
    pub enc: RefLstm<T>,
    pub dec: RefLstm<T>,
    pub w_out: Matrix<T>,
    pub b_out: Vec<T>,
    pub hidden: usize,
}

/// Summed cross-entropy over scored target positions and their count.
pub struct RefLoss<T> {
    pub loss_sum: T,
    pub tokens: usize,
}

impl<T: Scalar> RefLoss<T> {
    pub fn mean(&self) -> T {
        self.loss_sum / T::of(self.tokens as f64)
    }
}

impl<T: Scalar> RefModel<T> {
    pub fn from_model(m: &Seq2SeqModel) -> Self {
        let p = &m.params;
        RefModel {
            embedding: matrix(p.embedding.rows(), p.embedding.cols(), p.embedding.data()),
            enc: RefLstm::from_params(&p.enc),
            dec: RefLstm::from_params(&p.dec),
            w_out: matrix(p.w_out.rows(), p.w_out.cols(), p.w_out.data()),
            b_out: vector(&p.b_out),
            hidden: m.dims.hidden,
        }
    }

    /// Encoder states at original positions plus the final `(h, c)`.
    pub fn encode(&self, src: &[usize], masked: &[bool]) -> (Vec<Vec<T>>, Vec<T>, Vec<T>) {
        let zero = T::of(0.0);
        let mut h = vec![zero; self.hidden];
        let mut c = vec![zero; self.hidden];
        let mut hs = vec![vec![zero; self.hidden]; src.len()];
        let mut t = src.len();
        while t > 0 {
            t -= 1;
            if masked[t] {
                continue;
            }
            let (h2, c2) = self.enc.step(&self.embedding[src[t]], &h, &c);
            hs[t] = h2.clone();
            h = h2;
            c = c2;
        }
        (hs, h, c)
    }

    pub fn loss(&self, src: &[usize], masked: &[bool], tgt: &[usize]) -> RefLoss<T> {
        let (hs, mut h, mut c) = self.encode(src, masked);
        let len = tgt.iter().rposition(|&id| id != PAD).map_or(0, |i| i + 1);
        assert!(len >= 2 && tgt[0] == BOS && tgt[len - 1] == EOS);
        let mut loss_sum = T::of(0.0);
        let mut tokens = 0;
        for t in 0..len - 1 {
            let (h2, c2) = self.dec.step(&self.embedding[tgt[t]], &h, &c);
            h = h2;
            c = c2;
            let target = tgt[t + 1];
            if target == PAD {
                continue;
            }
            let (_, context) = ref_attend(&h, &hs, masked);
            let logits = self.logits(&h, &context);
            let mut max = logits[0];
            for &l in &logits {
                if l > max {
                    max = l;
                }
            }
            let mut total = T::of(0.0);
            for &l in &logits {
                total = total + (l - max).exp();
            }
            loss_sum = loss_sum + total.ln() - (logits[target] - max);
            tokens += 1;
        }
        RefLoss { loss_sum, tokens }
    }

    fn logits(&self, h: &[T], context: &[T]) -> Vec<T> {
        let mut out = self.b_out.clone();
        for v in 0..out.len() {
            for k in 0..self.hidden {
                out[v] = out[v] + self.w_out[v][k] * h[k] + self.w_out[v][self.hidden + k] * context[k];
            }
        }
        out
    }
}
