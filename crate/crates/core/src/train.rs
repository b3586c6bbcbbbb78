//! Length-bucketed batching, gradient clipping, SGD/Adam updates and the
//! epoch loop with best-validation checkpointing and early stopping.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::{save_checkpoint, Checkpoint, CheckpointError};
use crate::corpus::ArticlePair;
use crate::model::{Gradients, ModelError, Params, Seq2SeqModel};
use crate::rng;
use crate::text::{encode, tokenize, Vocabulary, PAD};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("non-finite loss {loss} in epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize, loss: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub seed: u64,
    pub patience: usize,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 50,
            batch_size: 32,
            clip_norm: 5.0,
            seed: 42,
            patience: 5,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return bad("epochs, batch_size and patience must be positive");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.beta1) || !unit(self.beta2) {
            return bad("beta1 and beta2 must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        Ok(())
    }
}

/// Source ids (no markers) and target ids (`BOS … EOS`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EncodedPair {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
}

pub fn encode_pair(pair: &ArticlePair, vocab: &Vocabulary) -> EncodedPair {
    EncodedPair {
        src: encode(&tokenize(&pair.article), vocab, false),
        tgt: encode(&tokenize(&pair.summary), vocab, true),
    }
}

pub fn encode_pairs(pairs: &[ArticlePair], vocab: &Vocabulary) -> Vec<EncodedPair> {
    pairs.iter().map(|p| encode_pair(p, vocab)).collect()
}

/// Rows padded with PAD to the batch maximum; masks are true exactly on PAD.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Positions of the rows in the epoch's input slice.
    pub indices: Vec<usize>,
    pub src: Vec<Vec<usize>>,
    pub tgt: Vec<Vec<usize>>,
    pub src_mask: Vec<Vec<bool>>,
    pub tgt_mask: Vec<Vec<bool>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn pad_rows(rows: Vec<&[usize]>) -> (Vec<Vec<usize>>, Vec<Vec<bool>>) {
    let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut padded = Vec::with_capacity(rows.len());
    let mut masks = Vec::with_capacity(rows.len());
    for r in rows {
        let mut p = r.to_vec();
        p.resize(width, PAD);
        masks.push(p.iter().map(|&id| id == PAD).collect());
        padded.push(p);
    }
    (padded, masks)
}

/// Shuffles with a (seed, epoch) stream, groups rows of similar source
/// length, then shuffles the order of the resulting batches.
pub fn make_batches(pairs: &[EncodedPair], batch_size: usize, seed: u64, epoch: usize) -> Vec<Batch> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let mut rng = rng::derive(seed, epoch as u64);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng);
    order.sort_by_key(|&i| pairs[i].src.len());
    let mut batches: Vec<Batch> = order
        .chunks(batch_size)
        .map(|idx| {
            let (src, src_mask) = pad_rows(idx.iter().map(|&i| pairs[i].src.as_slice()).collect());
            let (tgt, tgt_mask) = pad_rows(idx.iter().map(|&i| pairs[i].tgt.as_slice()).collect());
            Batch {
                indices: idx.to_vec(),
                src,
                tgt,
                src_mask,
                tgt_mask,
            }
        })
        .collect();
    batches.shuffle(&mut rng);
    batches
}

/// Rescales `grads` so the global L2 norm is at most `clip_norm`; returns
/// the norm before clipping.
pub fn clip_gradients(grads: &mut Gradients, clip_norm: f64) -> f64 {
    let norm = grads.sq_norm().sqrt();
    if norm > clip_norm {
        grads.scale(clip_norm / norm);
    }
    norm
}

/// One bias-corrected Adam step over a flat slice. `step` starts at 1.
#[allow(clippy::too_many_arguments)]
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) {
    assert!(step >= 1, "adam step counter starts at 1");
    let bc1 = 1.0 - beta1.powi(step as i32);
    let bc2 = 1.0 - beta2.powi(step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

pub fn sgd_update(params: &mut [f64], grads: &[f64], lr: f64) {
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    config: TrainConfig,
    step: u64,
    moments: Option<(Params, Params)>,
}

impl Optimizer {
    pub fn new(config: &TrainConfig, model: &Seq2SeqModel) -> Self {
        let moments = (config.optimizer == OptimizerKind::Adam)
            .then(|| (Params::zeros(model.dims), Params::zeros(model.dims)));
        Self {
            config: config.clone(),
            step: 0,
            moments,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, model: &mut Seq2SeqModel, grads: &Gradients) {
        self.step += 1;
        let c = &self.config;
        match &mut self.moments {
            Some((m, v)) => {
                for (((p, g), m), v) in model
                    .params
                    .tensors_mut()
                    .into_iter()
                    .zip(grads.tensors())
                    .zip(m.tensors_mut())
                    .zip(v.tensors_mut())
                {
                    adam_update(p, g, m, v, self.step, c.learning_rate, c.beta1, c.beta2, c.epsilon);
                }
            }
            None => {
                for (p, g) in model.params.tensors_mut().into_iter().zip(grads.tensors()) {
                    sgd_update(p, g, c.learning_rate);
                }
            }
        }
    }
}

/// Mean batch loss and its gradient. Loss is averaged over every non-PAD
/// target token in the batch.
pub fn batch_gradients(model: &Seq2SeqModel, batch: &Batch) -> Result<(f64, usize, Gradients), ModelError> {
    let passes = batch
        .src
        .iter()
        .zip(&batch.src_mask)
        .zip(&batch.tgt)
        .map(|((src, mask), tgt)| model.forward_masked(src, mask, tgt))
        .collect::<Result<Vec<_>, _>>()?;
    let tokens: usize = passes.iter().map(|p| p.tokens).sum();
    let loss_sum: f64 = passes.iter().map(|p| p.loss_sum).sum();
    let mut grads = Params::zeros(model.dims);
    if tokens > 0 {
        let scale = 1.0 / tokens as f64;
        for pass in &passes {
            model.accumulate_gradients(pass, scale, &mut grads);
        }
    }
    Ok((loss_sum / tokens.max(1) as f64, tokens, grads))
}

/// Token-weighted teacher-forced loss and next-token accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossSummary {
    pub loss: f64,
    pub accuracy: f64,
    pub tokens: usize,
}

pub fn evaluate_loss(model: &Seq2SeqModel, pairs: &[EncodedPair]) -> Result<LossSummary, ModelError> {
    let passes = pairs
        .par_iter()
        .map(|p| model.forward_teacher_forced(&p.src, &p.tgt).map(|f| (f.loss_sum, f.tokens, f.correct)))
        .collect::<Result<Vec<_>, _>>()?;
    let (mut loss, mut tokens, mut correct) = (0.0, 0, 0);
    for (l, t, c) in passes {
        loss += l;
        tokens += t;
        correct += c;
    }
    let denom = tokens.max(1) as f64;
    Ok(LossSummary {
        loss: loss / denom,
        accuracy: correct as f64 / denom,
        tokens,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopSignal {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best validation loss. Stops once `patience + 1` consecutive
/// epochs fail to improve on it.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn observe(&mut self, val_loss: f64) -> StopSignal {
        if val_loss < self.best {
            self.best = val_loss;
            self.bad_epochs = 0;
            StopSignal::Improved
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs > self.patience {
                StopSignal::Stop
            } else {
                StopSignal::Continue
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub best_checkpoint: Option<PathBuf>,
    pub stopped_early: bool,
    pub steps: u64,
}

/// Where [`fit`] writes `best.ckpt` and `train_report.jsonl`.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub dir: PathBuf,
    pub vocab_fingerprint: String,
}

pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const TRAIN_REPORT: &str = "train_report.jsonl";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Trains `model` in place. After the loop the best-validation parameters
/// are restored into `model`. With an empty validation set the epoch's
/// training loss drives model selection.
pub fn fit(
    model: &mut Seq2SeqModel,
    train: &[EncodedPair],
    val: &[EncodedPair],
    config: &TrainConfig,
    output: Option<&FitOutput>,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let mut report_file = match output {
        Some(out) => {
            fs::create_dir_all(&out.dir).map_err(io_err(&out.dir))?;
            let path = out.dir.join(TRAIN_REPORT);
            Some((File::create(&path).map_err(io_err(&path))?, path))
        }
        None => None,
    };

    let mut optimizer = Optimizer::new(config, model);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best_params = model.params.clone();
    let mut report = TrainReport {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        best_checkpoint: None,
        stopped_early: false,
        steps: 0,
    };

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let (mut loss_sum, mut tokens) = (0.0, 0usize);
        for (b, batch) in make_batches(train, config.batch_size, config.seed, epoch).iter().enumerate() {
            let (loss, n, mut grads) = batch_gradients(model, batch)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFinite { epoch, batch: b, loss });
            }
            clip_gradients(&mut grads, config.clip_norm);
            optimizer.update(model, &grads);
            loss_sum += loss * n as f64;
            tokens += n;
        }
        let train_loss = loss_sum / tokens.max(1) as f64;
        let val_loss = if val.is_empty() {
            train_loss
        } else {
            evaluate_loss(model, val)?.loss
        };
        if !val_loss.is_finite() {
            return Err(TrainError::NonFinite { epoch, batch: usize::MAX, loss: val_loss });
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            seconds: started.elapsed().as_secs_f64(),
        };
        if let Some((file, path)) = &mut report_file {
            let line = serde_json::to_string(&record).expect("record serializes");
            writeln!(file, "{line}").map_err(io_err(path))?;
        }
        report.epochs.push(record);

        match stopper.observe(val_loss) {
            StopSignal::Improved => {
                best_params = model.params.clone();
                report.best_epoch = epoch;
                report.best_val_loss = val_loss;
                if let Some(out) = output {
                    let path = out.dir.join(BEST_CHECKPOINT);
                    let ckpt = Checkpoint::new(model.clone(), out.vocab_fingerprint.clone(), optimizer.steps());
                    save_checkpoint(&ckpt, &path)?;
                    report.best_checkpoint = Some(path);
                }
            }
            StopSignal::Continue => {}
            StopSignal::Stop => {
                report.stopped_early = true;
                break;
            }
        }
    }
    report.steps = optimizer.steps();
    model.params = best_params;
    Ok(report)
}
