//! Global dot-product attention over encoder hidden states.
//!
//! `score_t = h_dec · h_enc[t]`, weights are the softmax over unmasked
//! scores and the context is `Σ_t weight_t · h_enc[t]`. Masked positions
//! (padding) get weight exactly zero.

use thiserror::Error;

use crate::math::{axpy, dot, Tensor1};

#[derive(Debug, Error, PartialEq)]
pub enum AttentionError {
    #[error("every source position is masked")]
    AllMasked,
    #[error("mask length {mask} does not match {states} encoder states")]
    MaskLength { mask: usize, states: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionResult {
    pub weights: Tensor1,
    pub context: Tensor1,
}

/// Forward values retained for [`attend_backward`].
#[derive(Debug, Clone)]
pub struct AttentionCache {
    pub decoder_h: Tensor1,
    pub weights: Tensor1,
    pub masked: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGrads {
    pub decoder_h: Tensor1,
    pub encoder_hs: Vec<Tensor1>,
}

/// `masked[t] == true` excludes position `t`.
pub fn attend(
    decoder_h: &[f64],
    encoder_hs: &[Tensor1],
    masked: &[bool],
) -> Result<(AttentionResult, AttentionCache), AttentionError> {
    if masked.len() != encoder_hs.len() {
        return Err(AttentionError::MaskLength {
            mask: masked.len(),
            states: encoder_hs.len(),
        });
    }
    let scores: Vec<Option<f64>> = encoder_hs
        .iter()
        .zip(masked)
        .map(|(e, &m)| (!m).then(|| dot(decoder_h, e)))
        .collect();
    let max = scores
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(AttentionError::AllMasked);
    }
    let mut weights: Vec<f64> = scores
        .iter()
        .map(|s| s.map_or(0.0, |s| (s - max).exp()))
        .collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }

    let mut context = vec![0.0; decoder_h.len()];
    for (e, &w) in encoder_hs.iter().zip(&weights) {
        if w != 0.0 {
            axpy(w, e, &mut context);
        }
    }
    let cache = AttentionCache {
        decoder_h: decoder_h.to_vec(),
        weights: weights.clone(),
        masked: masked.to_vec(),
    };
    Ok((AttentionResult { weights, context }, cache))
}

/// Gradients of the loss through the weights and context. `grad_weights`
/// may be `None` when only the context feeds downstream.
pub fn attend_backward(
    cache: &AttentionCache,
    encoder_hs: &[Tensor1],
    grad_context: &[f64],
    grad_weights: Option<&[f64]>,
) -> AttentionGrads {
    let a = &cache.weights;
    // total derivative w.r.t. each weight
    let d_weight: Vec<f64> = encoder_hs
        .iter()
        .enumerate()
        .map(|(t, e)| dot(grad_context, e) + grad_weights.map_or(0.0, |g| g[t]))
        .collect();
    let weighted_mean: f64 = a.iter().zip(&d_weight).map(|(w, d)| w * d).sum();

    let mut d_dec = vec![0.0; cache.decoder_h.len()];
    let mut d_enc = Vec::with_capacity(encoder_hs.len());
    for (t, e) in encoder_hs.iter().enumerate() {
        let mut g = vec![0.0; e.len()];
        if !cache.masked[t] {
            let d_score = a[t] * (d_weight[t] - weighted_mean);
            axpy(d_score, e, &mut d_dec);
            axpy(d_score, &cache.decoder_h, &mut g);
            axpy(a[t], grad_context, &mut g);
        }
        d_enc.push(g);
    }
    AttentionGrads {
        decoder_h: d_dec,
        encoder_hs: d_enc,
    }
}
