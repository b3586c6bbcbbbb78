//! The attention seq2seq summarizer.
//!
//! * one embedding table (V×E) feeds both encoder and decoder;
//! * the encoder LSTM reads the source right-to-left from a zero state, and
//!   its hidden states are stored at their original source positions;
//! * the decoder starts from the encoder's final state, attends over all
//!   encoder states at every step and projects `[h ; context]` (2H) to V
//!   logits;
//! * training loss is mean softmax cross-entropy over non-PAD targets.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{attend, attend_backward, AttentionCache, AttentionError, AttentionResult};
use crate::math::{argmax, axpy, cross_entropy, init_uniform, MathError, Tensor1, Tensor2};
use crate::rnn::{lstm_step, lstm_step_backward, LstmCache, LstmParams, LstmState};
use crate::text::{BOS, EOS, PAD};

pub const DEFAULT_EMBED: usize = 128;
pub const DEFAULT_HIDDEN: usize = 256;
/// Longest reference summary (12 words) plus markers and slack.
pub const DEFAULT_MAX_DECODE_LEN: usize = 15;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("source sequence is empty")]
    EmptySource,
    #[error("token id {id} out of range for vocabulary size {vocab}")]
    IdOutOfRange { id: usize, vocab: usize },
    #[error("target must start with BOS and end with EOS (got {0:?})")]
    MalformedTarget(Vec<usize>),
    #[error("mask length {mask} does not match sequence length {len}")]
    MaskLength { mask: usize, len: usize },
    #[error("invalid model dimensions {0:?}")]
    BadDims(ModelDims),
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Math(#[from] MathError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
}

impl ModelDims {
    pub fn validate(self) -> Result<Self, ModelError> {
        if self.vocab < crate::text::RESERVED.len() || self.embed == 0 || self.hidden == 0 {
            return Err(ModelError::BadDims(self));
        }
        Ok(self)
    }
}

pub const TENSOR_NAMES: [&str; 9] = [
    "embedding", "enc.wx", "enc.wh", "enc.b", "dec.wx", "dec.wh", "dec.b", "out.w", "out.b",
];

/// Row/column shape of each tensor in [`TENSOR_NAMES`] order; vectors are `(n, 1)`.
pub fn tensor_shapes(d: ModelDims) -> [(usize, usize); 9] {
    let (v, e, h) = (d.vocab, d.embed, d.hidden);
    [
        (v, e),
        (4 * h, e),
        (4 * h, h),
        (4 * h, 1),
        (4 * h, e),
        (4 * h, h),
        (4 * h, 1),
        (v, 2 * h),
        (v, 1),
    ]
}

/// Parameter container shared by the model and its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub embedding: Tensor2,
    pub enc: LstmParams,
    pub dec: LstmParams,
    pub w_out: Tensor2,
    pub b_out: Tensor1,
}

impl Params {
    pub fn zeros(d: ModelDims) -> Self {
        Self {
            embedding: Tensor2::zeros(d.vocab, d.embed),
            enc: LstmParams::zeros(d.hidden, d.embed),
            dec: LstmParams::zeros(d.hidden, d.embed),
            w_out: Tensor2::zeros(d.vocab, 2 * d.hidden),
            b_out: vec![0.0; d.vocab],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 9] {
        [
            self.embedding.data(),
            self.enc.wx.data(),
            self.enc.wh.data(),
            &self.enc.b,
            self.dec.wx.data(),
            self.dec.wh.data(),
            &self.dec.b,
            self.w_out.data(),
            &self.b_out,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 9] {
        [
            self.embedding.data_mut(),
            self.enc.wx.data_mut(),
            self.enc.wh.data_mut(),
            &mut self.enc.b,
            self.dec.wx.data_mut(),
            self.dec.wh.data_mut(),
            &mut self.dec.b,
            self.w_out.data_mut(),
            &mut self.b_out,
        ]
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut rest = flat;
        for t in self.tensors_mut() {
            let (head, tail) = rest.split_at(t.len());
            t.copy_from_slice(head);
            rest = tail;
        }
        assert!(rest.is_empty(), "flat parameter vector too long");
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &Params) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(1.0, b, a);
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|x| x * x).sum()
    }
}

/// Gradient with the same layout as the model parameters.
pub type Gradients = Params;

#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqModel {
    pub dims: ModelDims,
    pub params: Params,
}

/// Encoder output aligned to source positions.
#[derive(Debug, Clone)]
pub struct Encoded {
    /// `hs[t]` is the encoder hidden state after reading source position `t`.
    pub hs: Vec<Tensor1>,
    pub final_state: LstmState,
    pub masked: Vec<bool>,
    caches: Vec<Option<LstmCache>>,
}

#[derive(Debug, Clone)]
pub struct StepCache {
    prev_id: usize,
    lstm: LstmCache,
    attn: AttentionCache,
    features: Tensor1,
}

#[derive(Debug, Clone)]
pub struct DecoderStep {
    pub logits: Tensor1,
    pub state: LstmState,
    pub attention: AttentionResult,
    pub cache: StepCache,
}

#[derive(Debug, Clone)]
struct ScoredStep {
    cache: StepCache,
    /// `softmax(logits) − onehot(target)`; `None` for PAD targets.
    dlogits: Option<Tensor1>,
}

/// Teacher-forced forward pass with everything backward needs.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    src: Vec<usize>,
    encoded: Encoded,
    steps: Vec<ScoredStep>,
    pub loss_sum: f64,
    pub tokens: usize,
    pub correct: usize,
}

impl ForwardPass {
    /// Mean cross-entropy over scored (non-PAD) target positions.
    pub fn loss(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.loss_sum / self.tokens as f64
        }
    }

    /// Fraction of scored positions where argmax equals the gold token.
    pub fn accuracy(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.correct as f64 / self.tokens as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOutput {
    pub ids: Vec<usize>,
    /// Attention weights over source positions for each emitted step.
    pub attention: Vec<Tensor1>,
}

impl Seq2SeqModel {
    /// Xavier-uniform weights, forget-gate biases 1, other biases 0.
    pub fn init<R: Rng + ?Sized>(dims: ModelDims, rng: &mut R) -> Result<Self, ModelError> {
        let d = dims.validate()?;
        let params = Params {
            embedding: init_uniform(d.vocab, d.embed, rng),
            enc: LstmParams::init(d.hidden, d.embed, rng),
            dec: LstmParams::init(d.hidden, d.embed, rng),
            w_out: init_uniform(d.vocab, 2 * d.hidden, rng),
            b_out: vec![0.0; d.vocab],
        };
        Ok(Self { dims: d, params })
    }

    pub fn zeros(dims: ModelDims) -> Result<Self, ModelError> {
        let d = dims.validate()?;
        Ok(Self {
            dims: d,
            params: Params::zeros(d),
        })
    }

    fn check_id(&self, id: usize) -> Result<(), ModelError> {
        if id >= self.dims.vocab {
            return Err(ModelError::IdOutOfRange {
                id,
                vocab: self.dims.vocab,
            });
        }
        Ok(())
    }

    pub fn encode_sequence(&self, src: &[usize]) -> Result<Encoded, ModelError> {
        self.encode_masked(src, &vec![false; src.len()])
    }

    /// Reads `src` from last to first position. Masked positions are skipped:
    /// the recurrent state passes through and their hidden slot is zero.
    pub fn encode_masked(&self, src: &[usize], masked: &[bool]) -> Result<Encoded, ModelError> {
        if masked.len() != src.len() {
            return Err(ModelError::MaskLength {
                mask: masked.len(),
                len: src.len(),
            });
        }
        if src.is_empty() || masked.iter().all(|&m| m) {
            return Err(ModelError::EmptySource);
        }
        for &id in src {
            self.check_id(id)?;
        }
        let h = self.dims.hidden;
        let mut state = LstmState::zeros(h);
        let mut hs = vec![vec![0.0; h]; src.len()];
        let mut caches = vec![None; src.len()];
        for t in (0..src.len()).rev() {
            if masked[t] {
                continue;
            }
            let (next, cache) = lstm_step(&self.params.enc, self.params.embedding.row(src[t]), &state)?;
            hs[t] = next.h.clone();
            caches[t] = Some(cache);
            state = next;
        }
        Ok(Encoded {
            hs,
            final_state: state,
            masked: masked.to_vec(),
            caches,
        })
    }

    pub fn step_decoder(
        &self,
        prev_id: usize,
        state: &LstmState,
        encoded: &Encoded,
    ) -> Result<DecoderStep, ModelError> {
        self.check_id(prev_id)?;
        let p = &self.params;
        let (next, lstm) = lstm_step(&p.dec, p.embedding.row(prev_id), state)?;
        let (attention, attn) = attend(&next.h, &encoded.hs, &encoded.masked)?;
        let features = [next.h.as_slice(), attention.context.as_slice()].concat();
        let mut logits = p.b_out.clone();
        p.w_out.matvec_acc(&features, &mut logits);
        Ok(DecoderStep {
            logits,
            state: next,
            attention,
            cache: StepCache {
                prev_id,
                lstm,
                attn,
                features,
            },
        })
    }

    pub fn forward_teacher_forced(&self, src: &[usize], tgt: &[usize]) -> Result<ForwardPass, ModelError> {
        self.forward_masked(src, &vec![false; src.len()], tgt)
    }

    /// `tgt` may carry trailing PAD; its non-PAD prefix must be `BOS … EOS`.
    pub fn forward_masked(
        &self,
        src: &[usize],
        src_masked: &[bool],
        tgt: &[usize],
    ) -> Result<ForwardPass, ModelError> {
        let len = tgt.iter().rposition(|&id| id != PAD).map_or(0, |i| i + 1);
        if len < 2 || tgt[0] != BOS || tgt[len - 1] != EOS {
            return Err(ModelError::MalformedTarget(tgt.to_vec()));
        }
        for &id in &tgt[..len] {
            self.check_id(id)?;
        }
        let encoded = self.encode_masked(src, src_masked)?;
        let mut state = encoded.final_state.clone();
        let mut steps = Vec::with_capacity(len - 1);
        let (mut loss_sum, mut tokens, mut correct) = (0.0, 0, 0);
        for t in 0..len - 1 {
            let step = self.step_decoder(tgt[t], &state, &encoded)?;
            let target = tgt[t + 1];
            let dlogits = if target == PAD {
                None
            } else {
                let (loss, grad) = cross_entropy(&step.logits, target)?;
                loss_sum += loss;
                tokens += 1;
                if argmax(&step.logits) == target {
                    correct += 1;
                }
                Some(grad)
            };
            state = step.state;
            steps.push(ScoredStep {
                cache: step.cache,
                dlogits,
            });
        }
        Ok(ForwardPass {
            src: src.to_vec(),
            encoded,
            steps,
            loss_sum,
            tokens,
            correct,
        })
    }

    /// Gradient of `pass.loss()` (the mean) with respect to every parameter.
    pub fn backward(&self, pass: &ForwardPass) -> Gradients {
        let mut grads = Params::zeros(self.dims);
        if pass.tokens > 0 {
            self.accumulate_gradients(pass, 1.0 / pass.tokens as f64, &mut grads);
        }
        grads
    }

    /// Adds `scale · ∂(pass.loss_sum)/∂θ` into `grads`.
    pub fn accumulate_gradients(&self, pass: &ForwardPass, scale: f64, grads: &mut Gradients) {
        let p = &self.params;
        let h = self.dims.hidden;
        let enc = &pass.encoded;
        let mut d_enc_hs = vec![vec![0.0; h]; enc.hs.len()];
        let mut dh = vec![0.0; h];
        let mut dc = vec![0.0; h];

        for step in pass.steps.iter().rev() {
            let c = &step.cache;
            let mut d_features = vec![0.0; 2 * h];
            if let Some(dl) = &step.dlogits {
                let dlogits: Vec<f64> = dl.iter().map(|g| g * scale).collect();
                grads.w_out.add_outer(&dlogits, &c.features);
                axpy(1.0, &dlogits, &mut grads.b_out);
                p.w_out.matvec_t_acc(&dlogits, &mut d_features);
            }
            let (d_h_out, d_context) = d_features.split_at(h);
            axpy(1.0, d_h_out, &mut dh);
            let ag = attend_backward(&c.attn, &enc.hs, d_context, None);
            axpy(1.0, &ag.decoder_h, &mut dh);
            for (acc, g) in d_enc_hs.iter_mut().zip(&ag.encoder_hs) {
                axpy(1.0, g, acc);
            }
            let sg = lstm_step_backward(&p.dec, &c.lstm, &dh, &dc, &mut grads.dec);
            axpy(1.0, &sg.x, grads.embedding.row_mut(c.prev_id));
            dh = sg.h_prev;
            dc = sg.c_prev;
        }

        // encoder ran from the last position to the first, so unwind forward
        for t in 0..enc.hs.len() {
            let Some(cache) = &enc.caches[t] else { continue };
            axpy(1.0, &d_enc_hs[t], &mut dh);
            let sg = lstm_step_backward(&p.enc, cache, &dh, &dc, &mut grads.enc);
            axpy(1.0, &sg.x, grads.embedding.row_mut(pass.src[t]));
            dh = sg.h_prev;
            dc = sg.c_prev;
        }
    }

    /// Greedy argmax decoding from BOS; stops at EOS or after `max_len` steps.
    pub fn decode_greedy(&self, src: &[usize], max_len: usize) -> Result<Vec<usize>, ModelError> {
        Ok(self.decode_greedy_traced(src, max_len)?.ids)
    }

    pub fn decode_greedy_traced(&self, src: &[usize], max_len: usize) -> Result<GreedyOutput, ModelError> {
        let encoded = self.encode_sequence(src)?;
        let mut state = encoded.final_state.clone();
        let mut prev = BOS;
        let mut out = GreedyOutput {
            ids: Vec::new(),
            attention: Vec::new(),
        };
        for _ in 0..max_len {
            let step = self.step_decoder(prev, &state, &encoded)?;
            let next = argmax(&step.logits);
            if next == EOS {
                break;
            }
            if next != BOS {
                out.ids.push(next);
                out.attention.push(step.attention.weights);
            }
            state = step.state;
            prev = next;
        }
        Ok(out)
    }
}
