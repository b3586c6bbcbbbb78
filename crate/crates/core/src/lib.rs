//! Abstractive summarization of Bengali news with an LSTM encoder-decoder.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! ```text
//! corpus (JSONL) -> clean/filter -> tokenize -> vocabulary -> id sequences
//!     -> encoder (reversed source) -> attention decoder -> softmax loss
//!     -> backprop -> Adam -> checkpoint -> greedy decode -> overlap metrics
//! ```
//!
//! All numerics are `f64` and every gradient is derived by hand per layer;
//! [`math::grad_check`] is the finite-difference oracle used to verify them.

pub mod attention;
pub mod checkpoint;
pub mod corpus;
pub mod eval;
pub mod math;
pub mod model;
pub mod rng;
pub mod rnn;
pub mod text;
pub mod train;

pub use attention::{attend, attend_backward, AttentionCache, AttentionGrads, AttentionResult};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use corpus::{
    clean_text, compute_stats, filter_pairs, load_corpus, split_corpus, ArticlePair, CorpusError,
    CorpusStats, LengthFilter,
};
pub use eval::{
    evaluate_corpus, token_overlap_counts, ConfusionCounts, EvalError, EvalReport, MetricReport,
};
pub use math::{cross_entropy, grad_check, init_uniform, matmul, softmax, MathError, Tensor1, Tensor2};
pub use model::{Gradients, ModelDims, ModelError, Seq2SeqModel};
pub use rnn::{lstm_step, lstm_step_backward, LstmCache, LstmParams, LstmState};
pub use text::{decode, encode, tokenize, TextError, Vocabulary, BOS, EOS, PAD, UNK};
pub use train::{fit, Batch, EpochRecord, OptimizerKind, TrainConfig, TrainError, TrainReport};
