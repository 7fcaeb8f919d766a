//! Count-based n-gram language model over discrete units.
//!
//! Probabilities use interpolated absolute discounting:
//!
//! ```text
//! P(u | h) = max(c(h,u) − d, 0) / c(h)  +  d · T(h) / c(h) · P(u | h′)
//! ```
//!
//! where `T(h)` is the number of distinct continuations of `h` and `h′`
//! drops the oldest symbol. The recursion bottoms out in the uniform
//! distribution over the `V` units plus end-of-sequence. A history never
//! seen in training backs off entirely to `P(u | h′)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus_io::{self, numbered_lines, CorpusError, LineError};
use crate::exec::Workers;
use crate::lexsem::ScoreTable;
use crate::quantize::{read_unit_file, QuantizeError, UnitSequence};

pub const DEFAULT_DISCOUNT: f64 = 0.75;
pub const MODEL_MAGIC: &str = "#unitlm-ngram v1";

const BOS_TOKEN: &str = "<s>";
const EOS_TOKEN: &str = "</s>";

#[derive(Debug, thiserror::Error)]
pub enum LmError {
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("order must be at least 1")]
    ZeroOrder,
    #[error("vocabulary size must be at least 1")]
    ZeroVocab,
    #[error("discount {0} outside (0, 1)")]
    BadDiscount(f64),
    #[error("utterance {utterance:?}: unit {unit} outside vocabulary of size {vocab_size}")]
    OutOfVocabulary {
        utterance: String,
        unit: u32,
        vocab_size: u32,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Units(#[from] QuantizeError),
}

/// Counts for one history.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct HistoryStats {
    total: u64,
    continuations: BTreeMap<u32, u64>,
}

impl HistoryStats {
    fn add(&mut self, symbol: u32, count: u64) {
        self.total += count;
        *self.continuations.entry(symbol).or_default() += count;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    vocab_size: u32,
    discount: f64,
    /// `levels[l]` maps histories of length `l` to their counts.
    levels: Vec<BTreeMap<Vec<u32>, HistoryStats>>,
}

impl NGramModel {
    fn empty(order: usize, vocab_size: u32, discount: f64) -> Result<Self, LmError> {
        if order == 0 {
            return Err(LmError::ZeroOrder);
        }
        if vocab_size == 0 {
            return Err(LmError::ZeroVocab);
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(LmError::BadDiscount(discount));
        }
        Ok(Self {
            order,
            vocab_size,
            discount,
            levels: vec![BTreeMap::new(); order],
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// End-of-sequence symbol id (`V`).
    pub fn eos(&self) -> u32 {
        self.vocab_size
    }

    /// Beginning-of-sequence padding id (`V + 1`).
    pub fn bos(&self) -> u32 {
        self.vocab_size + 1
    }

    /// Adds all n-gram counts of one sequence, every history length at once.
    fn add_top_count(&mut self, history: &[u32], symbol: u32, count: u64) {
        for l in 0..self.order {
            let h = &history[history.len() - l..];
            self.levels[l].entry(h.to_vec()).or_default().add(symbol, count);
        }
    }

    fn padded(&self, units: &[u32]) -> Vec<u32> {
        let mut p = vec![self.bos(); self.order - 1];
        p.extend_from_slice(units);
        p.push(self.eos());
        p
    }

    fn check_units(&self, seq: &UnitSequence) -> Result<(), LmError> {
        match seq.units.iter().find(|&&u| u >= self.vocab_size) {
            Some(&unit) => Err(LmError::OutOfVocabulary {
                utterance: seq.utterance_id.clone(),
                unit,
                vocab_size: self.vocab_size,
            }),
            None => Ok(()),
        }
    }

    /// `P(symbol | history)`; `history` may be shorter than `order − 1`, in
    /// which case only the levels up to its length are used.
    pub fn prob(&self, symbol: u32, history: &[u32]) -> f64 {
        let max_level = history.len().min(self.order - 1);
        let mut p = 1.0 / (self.vocab_size as f64 + 1.0);
        for l in 0..=max_level {
            let h = &history[history.len() - l..];
            if let Some(stats) = self.levels[l].get(h) {
                let c = stats.total as f64;
                let c_hu = stats.continuations.get(&symbol).copied().unwrap_or(0) as f64;
                let types = stats.continuations.len() as f64;
                p = (c_hu - self.discount).max(0.0) / c + self.discount * types / c * p;
            }
        }
        p
    }

    /// Probabilities of every unit and then end-of-sequence after `history`.
    pub fn distribution(&self, history: &[u32]) -> Vec<f64> {
        (0..=self.vocab_size).map(|u| self.prob(u, history)).collect()
    }

    /// Every history observed in training, at every length.
    pub fn observed_histories(&self) -> impl Iterator<Item = &[u32]> {
        self.levels.iter().flat_map(|lvl| lvl.keys().map(Vec::as_slice))
    }

    /// Number of distinct n-grams of the highest order.
    pub fn n_entries(&self) -> usize {
        self.levels[self.order - 1]
            .values()
            .map(|s| s.continuations.len())
            .sum()
    }
}

pub fn fit_ngram(corpus: &[UnitSequence], order: usize, discount: f64, vocab_size: u32) -> Result<NGramModel, LmError> {
    let mut model = NGramModel::empty(order, vocab_size, discount)?;
    if corpus.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    for seq in corpus {
        model.check_units(seq)?;
        let padded = model.padded(&seq.units);
        for t in (order - 1)..padded.len() {
            let history = padded[t + 1 - order..t].to_vec();
            model.add_top_count(&history, padded[t], 1);
        }
    }
    Ok(model)
}

/// Sum of `ln P(u_t | h_t)` over every unit and the final end-of-sequence.
/// With `normalize`, divided by the number of scored positions.
pub fn sequence_logprob(model: &NGramModel, seq: &UnitSequence, normalize: bool) -> Result<f64, LmError> {
    model.check_units(seq)?;
    let padded = model.padded(&seq.units);
    let order = model.order;
    let mut total = 0.0;
    for t in (order - 1)..padded.len() {
        total += model.prob(padded[t], &padded[t + 1 - order..t]).ln();
    }
    let positions = seq.units.len() + 1;
    Ok(if normalize { total / positions as f64 } else { total })
}

/// Scores utterances on the worker pool.
pub fn score_sequences(
    model: &NGramModel,
    seqs: &[UnitSequence],
    normalize: bool,
    workers: &Workers,
) -> Result<ScoreTable, LmError> {
    let scores = workers.try_map(seqs, |s| sequence_logprob(model, s, normalize))?;
    Ok(seqs
        .iter()
        .zip(scores)
        .map(|(s, v)| (s.utterance_id.clone(), v))
        .collect())
}

pub fn score_file(
    model: &NGramModel,
    unit_file: impl AsRef<Path>,
    normalize: bool,
    workers: &Workers,
) -> Result<ScoreTable, LmError> {
    let seqs = read_unit_file(unit_file)?;
    score_sequences(model, &seqs, normalize, workers)
}

fn fmt_symbol(model: &NGramModel, s: u32) -> String {
    if s == model.bos() {
        BOS_TOKEN.to_string()
    } else if s == model.eos() {
        EOS_TOKEN.to_string()
    } else {
        s.to_string()
    }
}

/// Text serialization. Only highest-order counts are stored; lower orders
/// are their marginals and are rebuilt on load.
///
/// ```text
/// #unitlm-ngram v1
/// <order> <V> <discount>
/// <history> <unit> <count>      one per n-gram, sorted by (history, unit)
/// ```
///
/// Histories are comma-separated symbols (`-` when empty), `<s>` and `</s>`
/// denote padding and end of sequence.
pub fn write_model(model: &NGramModel, path: impl AsRef<Path>) -> Result<(), LmError> {
    let mut out = format!(
        "{MODEL_MAGIC}\n{} {} {:?}\n",
        model.order, model.vocab_size, model.discount
    );
    for (h, stats) in &model.levels[model.order - 1] {
        let hist = if h.is_empty() {
            "-".to_string()
        } else {
            h.iter().map(|&s| fmt_symbol(model, s)).collect::<Vec<_>>().join(",")
        };
        for (&u, &c) in &stats.continuations {
            writeln!(out, "{hist} {} {c}", fmt_symbol(model, u)).expect("write to string");
        }
    }
    Ok(corpus_io::write_text(path.as_ref(), &out)?)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<NGramModel, LmError> {
    let path = path.as_ref();
    let text = corpus_io::read_text(path)?;
    let err = |n: usize, k: LineError| LmError::Corpus(CorpusError::line(path, n, k));
    let mut lines = numbered_lines(&text);
    match lines.next() {
        Some((_, l)) if l == MODEL_MAGIC => {}
        Some((n, l)) => {
            return Err(err(
                n,
                LineError::BadHeader {
                    expected: MODEL_MAGIC.into(),
                    found: l.into(),
                },
            ))
        }
        None => {
            return Err(CorpusError::EmptyFile {
                path: path.to_path_buf(),
            }
            .into())
        }
    }
    let (n, header) = lines
        .next()
        .ok_or_else(|| err(2, LineError::MissingHeader("order V discount".into())))?;
    let f: Vec<&str> = header.split(' ').collect();
    if f.len() != 3 {
        return Err(err(
            n,
            LineError::FieldCount {
                expected: 3,
                found: f.len(),
            },
        ));
    }
    let order: usize = f[0].parse().map_err(|_| err(n, LineError::NonInteger(f[0].into())))?;
    let vocab: u32 = f[1].parse().map_err(|_| err(n, LineError::NonInteger(f[1].into())))?;
    let discount = corpus_io::parse_f64(f[2]).map_err(|k| err(n, k))?;
    let mut model = NGramModel::empty(order, vocab, discount)?;

    let symbol = |t: &str, n: usize| -> Result<u32, LmError> {
        match t {
            BOS_TOKEN => Ok(model.bos()),
            EOS_TOKEN => Ok(model.eos()),
            _ => match t.parse::<u32>() {
                Ok(u) if u < vocab => Ok(u),
                Ok(u) => Err(err(
                    n,
                    LineError::Invalid(format!("unit {u} outside vocabulary {vocab}")),
                )),
                Err(_) => Err(err(n, LineError::NonInteger(t.into()))),
            },
        }
    };
    let mut entries = Vec::new();
    for (n, line) in lines {
        let f: Vec<&str> = line.split(' ').collect();
        if f.len() != 3 {
            return Err(err(
                n,
                LineError::FieldCount {
                    expected: 3,
                    found: f.len(),
                },
            ));
        }
        let history: Vec<u32> = if f[0] == "-" {
            Vec::new()
        } else {
            f[0].split(',').map(|t| symbol(t, n)).collect::<Result<_, _>>()?
        };
        if history.len() != order - 1 || history.contains(&model.eos()) {
            return Err(err(n, LineError::Invalid(format!("bad history {:?}", f[0]))));
        }
        let unit = symbol(f[1], n)?;
        if unit == model.bos() {
            return Err(err(n, LineError::Invalid("<s> cannot be predicted".into())));
        }
        let count: u64 = f[2].parse().map_err(|_| err(n, LineError::NonInteger(f[2].into())))?;
        if count == 0 {
            return Err(err(n, LineError::Invalid("zero count".into())));
        }
        entries.push((history, unit, count));
    }
    for (h, u, c) in entries {
        model.add_top_count(&h, u, c);
    }
    Ok(model)
}
