//! Evaluation engine for spoken language models trained without text.
//!
//! The crate scores frame-level speech representations and unit language
//! models with four zero-shot metrics:
//!
//! - ABX phonetic discriminability, within and across speakers ([`abx`]),
//! - spot-the-word and acceptability accuracy over paired stimuli ([`lexsem`]),
//! - similarity correlation between pooled word embeddings and human
//!   judgments ([`lexsem`]).
//!
//! It also provides the discrete pipeline stages needed to produce the
//! pseudo-probabilities those metrics consume: k-means quantization into
//! unit sequences ([`quantize`]) and a smoothed n-gram unit language model
//! ([`unitlm`]).
//!
//! Data-parallel loops (ABX cell scoring, k-means assignment, utterance
//! scoring) run on rayon when the `parallel` feature is enabled and fall back
//! to sequential iteration otherwise. Results are bit-identical either way:
//! every reduction happens in a fixed, sorted order on the calling thread.

pub mod abx;
pub mod corpus_io;
pub mod exec;
pub mod leaderboard;
pub mod lexsem;
pub mod matrix;
pub mod metric;
pub mod quantize;
pub mod unitlm;

pub use abx::{AbxCell, AbxDataset, AbxMode, AbxReport};
pub use corpus_io::{AbxItem, FeatureSequence, SimilarityRecord, StimulusPair};
pub use exec::Workers;
pub use lexsem::{JudgmentReport, ScoreTable, SimilarityReport, Task};
pub use matrix::FrameMatrix;
pub use metric::{FrameMetric, Pooling};
pub use quantize::{Codebook, UnitSequence};
pub use unitlm::NGramModel;

/// Default frame shift in seconds (100 Hz feature rate).
pub const DEFAULT_FRAME_SHIFT_S: f64 = 0.01;
