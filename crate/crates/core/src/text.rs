//! Word-level tokenization and the token ↔ id vocabulary.
//!
//! Vocabulary file layout: one `token<TAB>frequency` line per id, starting
//! with the four reserved tokens `<pad>`, `<unk>`, `<s>`, `</s>` (ids 0–3,
//! frequency 0). Line index equals id.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::ArticlePair;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];

pub const DANDA: char = '\u{0964}';
const DANDA_STR: &str = "\u{0964}";

pub const DEFAULT_MIN_FREQ: usize = 2;
pub const DEFAULT_MAX_SIZE: usize = 30_000;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("id {id} out of range for vocabulary of size {size}")]
    IdOutOfRange { id: usize, size: usize },
    #[error("vocabulary file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("vocabulary file line {line}: {reason}")]
    Format { line: usize, reason: String },
}

/// Splits on whitespace and peels every danda off into its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        for (i, piece) in word.split(DANDA).enumerate() {
            if i > 0 {
                out.push(DANDA_STR.to_string());
            }
            if !piece.is_empty() {
                out.push(piece.to_string());
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    freqs: Vec<u64>,
}

impl Vocabulary {
    /// Only the four reserved tokens.
    pub fn reserved_only() -> Self {
        let mut v = Self {
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
            freqs: Vec::new(),
        };
        for tok in RESERVED {
            v.push(tok.to_string(), 0);
        }
        v
    }

    fn push(&mut self, token: String, freq: u64) {
        self.token_to_id.insert(token.clone(), self.id_to_token.len());
        self.id_to_token.push(token);
        self.freqs.push(freq);
    }

    /// Counts tokens of articles and summaries jointly, keeps those seen at
    /// least `min_freq` times, ranks by (frequency desc, token asc) and
    /// truncates to `max_size − 4` entries after the reserved ids.
    pub fn build(pairs: &[ArticlePair], min_freq: usize, max_size: usize) -> Self {
        assert!(min_freq >= 1, "min_freq must be at least 1");
        assert!(max_size >= RESERVED.len(), "max_size must cover the reserved tokens");
        let mut counts: HashMap<String, u64> = HashMap::new();
        for pair in pairs {
            for tok in tokenize(&pair.article).into_iter().chain(tokenize(&pair.summary)) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(tok, n)| *n >= min_freq as u64 && !RESERVED.contains(&tok.as_str()))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size - RESERVED.len());

        let mut vocab = Self::reserved_only();
        for (tok, n) in ranked {
            vocab.push(tok, n);
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn frequency(&self, id: usize) -> Option<u64> {
        self.freqs.get(id).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        for (tok, f) in self.id_to_token.iter().zip(&self.freqs) {
            s.push_str(tok);
            s.push('\t');
            s.push_str(&f.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse(contents: &str) -> Result<Self, TextError> {
        let mut vocab = Self {
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
            freqs: Vec::new(),
        };
        for (i, line) in contents.lines().enumerate() {
            let line_no = i + 1;
            let (tok, freq) = line.split_once('\t').ok_or_else(|| TextError::Format {
                line: line_no,
                reason: "expected token<TAB>frequency".into(),
            })?;
            let freq: u64 = freq.parse().map_err(|_| TextError::Format {
                line: line_no,
                reason: format!("bad frequency {freq:?}"),
            })?;
            if i < RESERVED.len() && tok != RESERVED[i] {
                return Err(TextError::Format {
                    line: line_no,
                    reason: format!("expected reserved token {}", RESERVED[i]),
                });
            }
            if tok.is_empty() || vocab.token_to_id.contains_key(tok) {
                return Err(TextError::Format {
                    line: line_no,
                    reason: format!("empty or duplicate token {tok:?}"),
                });
            }
            vocab.push(tok.to_string(), freq);
        }
        if vocab.len() < RESERVED.len() {
            return Err(TextError::Format {
                line: vocab.len() + 1,
                reason: "missing reserved tokens".into(),
            });
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<(), TextError> {
        fs::write(path, self.to_file_string()).map_err(|source| TextError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let contents = fs::read_to_string(path).map_err(|source| TextError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&contents)
    }

    /// Hex SHA-256 of the serialized vocabulary file.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_file_string().as_bytes()))
    }
}

pub fn build_vocab(pairs: &[ArticlePair], min_freq: usize, max_size: usize) -> Vocabulary {
    Vocabulary::build(pairs, min_freq, max_size)
}

pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary, add_markers: bool) -> Vec<usize> {
    let mut ids = Vec::with_capacity(tokens.len() + 2);
    if add_markers {
        ids.push(BOS);
    }
    ids.extend(tokens.iter().map(|t| vocab.id(t.as_ref()).unwrap_or(UNK)));
    if add_markers {
        ids.push(EOS);
    }
    ids
}

/// Non-reserved tokens for `ids`, in order.
pub fn decode_tokens<'v>(ids: &[usize], vocab: &'v Vocabulary) -> Result<Vec<&'v str>, TextError> {
    let mut out = Vec::with_capacity(ids.len());
    for &id in ids {
        let tok = vocab.token(id).ok_or(TextError::IdOutOfRange { id, size: vocab.len() })?;
        if id >= RESERVED.len() {
            out.push(tok);
        }
    }
    Ok(out)
}

/// Joins tokens with single spaces; a danda attaches to the previous word.
pub fn join_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut s = String::new();
    for tok in tokens {
        let tok = tok.as_ref();
        if !s.is_empty() && tok != DANDA_STR {
            s.push(' ');
        }
        s.push_str(tok);
    }
    s
}

pub fn decode(ids: &[usize], vocab: &Vocabulary) -> Result<String, TextError> {
    Ok(join_tokens(&decode_tokens(ids, vocab)?))
}
