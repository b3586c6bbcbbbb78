//! Shared test oracles. Also compiled into the CLI's acceptance suite.
#![allow(dead_code)]

pub mod dd;
pub mod oracle;

use bans_core::math::grad_check;
use bans_core::model::{ModelDims, Seq2SeqModel};
use bans_core::rng::SeededRng;
use bans_core::text::{BOS, EOS};
use rand::Rng;

use dd::Dd;
use oracle::RefModel;

/// A small random model with one training pair.
pub struct Instance {
    pub model: Seq2SeqModel,
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
}

/// V ≤ 8, E ≤ 6, H ≤ 6, source and summary lengths ≤ 5.
pub fn random_instance(rng: &mut SeededRng) -> Instance {
    let dims = ModelDims {
        vocab: rng.random_range(5..=8),
        embed: rng.random_range(1..=6),
        hidden: rng.random_range(1..=6),
    };
    let mut model = Seq2SeqModel::init(dims, rng).unwrap();
    let p = &mut model.params;
    for b in p.b_out.iter_mut().chain(&mut p.enc.b).chain(&mut p.dec.b) {
        *b += rng.random_range(-0.5..0.5);
    }
    let word = |rng: &mut SeededRng| rng.random_range(4..dims.vocab);
    let src = (0..rng.random_range(1..=5)).map(|_| word(rng)).collect();
    let mut tgt = vec![BOS];
    tgt.extend((0..rng.random_range(1..=4)).map(|_| word(rng)));
    tgt.push(EOS);
    Instance { model, src, tgt }
}

pub struct GradCheck {
    /// Finite differences of the double-double reference loss.
    pub extended: f64,
    /// Finite differences of the library's own f64 loss.
    pub plain: f64,
}

/// Max relative error between backward and central differences (step
/// `eps`) over every parameter of the instance.
pub fn check_instance(inst: &Instance, eps: f64) -> GradCheck {
    let masked = vec![false; inst.src.len()];
    let pass = inst.model.forward_teacher_forced(&inst.src, &inst.tgt).unwrap();
    let analytic = inst.model.backward(&pass).flatten();
    let point = inst.model.params.flatten();

    let mut probe = inst.model.clone();
    let base = RefModel::<Dd>::from_model(&probe).loss(&inst.src, &masked, &inst.tgt).mean();
    let extended = grad_check(
        |x| {
            probe.params.set_flat(x);
            let l = RefModel::<Dd>::from_model(&probe).loss(&inst.src, &masked, &inst.tgt).mean();
            (l - base).to_f64()
        },
        &point,
        &analytic,
        eps,
    )
    .unwrap();

    let mut probe = inst.model.clone();
    let plain = grad_check(
        |x| {
            probe.params.set_flat(x);
            probe.forward_teacher_forced(&inst.src, &inst.tgt).unwrap().loss()
        },
        &point,
        &analytic,
        eps,
    )
    .unwrap();
    GradCheck { extended, plain }
}

/// `tests/data` of the core crate, reachable from any workspace member.
pub fn data_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data")
}

pub const OVERFIT_EMBED: usize = 32;
pub const OVERFIT_HIDDEN: usize = 64;
pub const OVERFIT_BATCH: usize = 4;

pub struct Overfit {
    pub teacher_forced_accuracy: f64,
    pub f1: f64,
    pub epochs: usize,
}

/// 200 epochs of Adam (library defaults) on the toy corpus, scored on the
/// training set itself.
pub fn overfit_toy_corpus(seed: u64) -> Overfit {
    use bans_core::text::{build_vocab, DEFAULT_MAX_SIZE, DEFAULT_MIN_FREQ};
    use bans_core::train::{encode_pairs, fit, TrainConfig};

    let pairs = bans_core::load_corpus(&data_dir().join("toy_corpus.jsonl")).unwrap().pairs;
    let vocab = build_vocab(&pairs, DEFAULT_MIN_FREQ, DEFAULT_MAX_SIZE);
    let dims = ModelDims {
        vocab: vocab.len(),
        embed: OVERFIT_EMBED,
        hidden: OVERFIT_HIDDEN,
    };
    let mut model = Seq2SeqModel::init(dims, &mut bans_core::rng::seeded(seed)).unwrap();
    let config = TrainConfig {
        epochs: 200,
        batch_size: OVERFIT_BATCH,
        patience: 200,
        seed,
        ..TrainConfig::default()
    };
    let encoded = encode_pairs(&pairs, &vocab);
    let report = fit(&mut model, &encoded, &[], &config, None).unwrap();
    let eval = bans_core::evaluate_corpus(&model, &vocab, &pairs, bans_core::model::DEFAULT_MAX_DECODE_LEN).unwrap();
    Overfit {
        teacher_forced_accuracy: eval.teacher_forced_accuracy,
        f1: eval.corpus.f1,
        epochs: report.epochs.len(),
    }
}
