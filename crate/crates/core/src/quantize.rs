//! k-means codebooks and discretization of frame sequences into units.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{self, numbered_lines, parse_f64, CorpusError, FeatureSequence, LineError};
use crate::exec::Workers;
use crate::matrix::FrameMatrix;

pub const DEFAULT_K: usize = 50;
pub const DEFAULT_MAX_ITERS: usize = 100;

/// Frames per parallel work item in the assignment step.
const ASSIGN_CHUNK: usize = 512;

#[derive(Debug, thiserror::Error)]
pub enum QuantizeError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("need at least k = {k} frames, got {n}")]
    TooFewFrames { k: usize, n: usize },
    #[error("non-finite value in frame {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: frame has {found}, codebook has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unit sequence {0:?} is empty")]
    EmptyUnits(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// k centroids of dimension D and the objective reached when fitting them.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    centroids: FrameMatrix,
    inertia: f64,
}

impl Codebook {
    pub fn new(centroids: FrameMatrix, inertia: f64) -> Result<Self, QuantizeError> {
        if centroids.is_empty() {
            return Err(QuantizeError::ZeroK);
        }
        if let Some(i) = centroids.iter_rows().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(QuantizeError::NonFinite(i));
        }
        Ok(Self { centroids, inertia })
    }

    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.dim()
    }

    pub fn centroids(&self) -> &FrameMatrix {
        &self.centroids
    }

    pub fn centroid(&self, i: usize) -> &[f64] {
        self.centroids.row(i)
    }

    /// Sum of squared euclidean distances of the training frames to their
    /// nearest centroid.
    pub fn inertia(&self) -> f64 {
        self.inertia
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            max_iters: DEFAULT_MAX_ITERS,
            seed: 0,
        }
    }
}

/// Result of a fit with its per-iteration objective trace.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Inertia after the initial assignment and after every Lloyd iteration.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[inline]
fn sq_dist(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Nearest centroid by squared euclidean distance, lowest index on ties.
#[inline]
fn nearest(frame: &[f64], centroids: &FrameMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter_rows().enumerate() {
        let d = sq_dist(frame, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn assign_all(frames: &FrameMatrix, centroids: &FrameMatrix, workers: &Workers) -> (Vec<usize>, f64) {
    let n = frames.rows();
    let chunks = n.div_ceil(ASSIGN_CHUNK);
    let parts = workers.map_range(chunks, |c| {
        let end = ((c + 1) * ASSIGN_CHUNK).min(n);
        (c * ASSIGN_CHUNK..end)
            .map(|i| nearest(frames.row(i), centroids))
            .collect::<Vec<_>>()
    });
    let mut labels = Vec::with_capacity(n);
    let mut inertia = 0.0;
    for (label, d) in parts.into_iter().flatten() {
        labels.push(label);
        inertia += d;
    }
    (labels, inertia)
}

/// k-means++ seeding: first centre uniform, then each next centre drawn with
/// probability proportional to its squared distance to the nearest chosen one.
fn kmeans_pp(frames: &FrameMatrix, k: usize, rng: &mut ChaCha8Rng, workers: &Workers) -> FrameMatrix {
    let n = frames.rows();
    let mut centroids = FrameMatrix::with_dim(frames.dim()).expect("dim >= 1");
    let first = rng.random_range(0..n);
    centroids.push_row(frames.row(first)).expect("same dim");
    let mut d2 = workers.map_range(n, |i| sq_dist(frames.row(i), frames.row(first)));
    while centroids.rows() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    acc += d;
                    pick = Some(i);
                    if acc > target {
                        break;
                    }
                }
            }
            pick.expect("total > 0 implies a positive weight")
        } else {
            rng.random_range(0..n)
        };
        centroids.push_row(frames.row(pick)).expect("same dim");
        let c = frames.row(pick);
        let update = workers.map_range(n, |i| sq_dist(frames.row(i), c));
        for (cur, new) in d2.iter_mut().zip(update) {
            if new < *cur {
                *cur = new;
            }
        }
    }
    centroids
}

/// Mean of each cluster's frames, summed in frame order. Empty clusters are
/// reseeded to the frame farthest from its own (updated) centroid.
fn update_centroids(frames: &FrameMatrix, labels: &[usize], previous: &FrameMatrix) -> FrameMatrix {
    let k = previous.rows();
    let dim = frames.dim();
    let mut sums = FrameMatrix::new(vec![0.0; k * dim], dim).expect("shape");
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, v) in sums.row_mut(l).iter_mut().zip(frames.row(i)) {
            *s += v;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            let inv = count as f64;
            sums.row_mut(c).iter_mut().for_each(|s| *s /= inv);
        }
    }
    let mut taken = vec![false; frames.rows()];
    for c in (0..k).filter(|&c| counts[c] == 0) {
        let mut best: Option<(usize, f64)> = None;
        for (i, &l) in labels.iter().enumerate() {
            if taken[i] || counts[l] == 0 {
                continue;
            }
            let d = sq_dist(frames.row(i), sums.row(l));
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        if let Some((i, _)) = best {
            taken[i] = true;
            sums.row_mut(c).copy_from_slice(frames.row(i));
        }
    }
    sums
}

fn validate_frames(frames: &FrameMatrix, k: usize) -> Result<(), QuantizeError> {
    if k == 0 {
        return Err(QuantizeError::ZeroK);
    }
    if frames.rows() < k {
        return Err(QuantizeError::TooFewFrames { k, n: frames.rows() });
    }
    if let Some(i) = frames.iter_rows().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(QuantizeError::NonFinite(i));
    }
    Ok(())
}

/// Fits a codebook with k-means++ seeding and Lloyd iterations, stopping
/// when assignments no longer change or after `max_iters` updates.
///
/// The result depends only on the frame order and `config`; the worker
/// count only changes how the assignment step is scheduled.
pub fn kmeans_fit_with(
    frames: &FrameMatrix,
    config: &KMeansConfig,
    workers: &Workers,
) -> Result<KMeansFit, QuantizeError> {
    validate_frames(frames, config.k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centroids = kmeans_pp(frames, config.k, &mut rng, workers);
    let (mut labels, inertia) = assign_all(frames, &centroids, workers);
    let mut history = vec![inertia];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iters {
        centroids = update_centroids(frames, &labels, &centroids);
        let (new_labels, inertia) = assign_all(frames, &centroids, workers);
        iterations += 1;
        let last = *history.last().expect("non-empty");
        debug_assert!(
            inertia <= last + 1e-9 * last.abs().max(1.0),
            "inertia increased: {last} -> {inertia}"
        );
        history.push(inertia);
        if new_labels == labels {
            converged = true;
            break;
        }
        labels = new_labels;
    }
    let inertia = *history.last().expect("non-empty");
    Ok(KMeansFit {
        codebook: Codebook::new(centroids, inertia)?,
        inertia_history: history,
        iterations,
        converged,
    })
}

pub fn kmeans_fit(frames: &FrameMatrix, k: usize, max_iters: usize, seed: u64) -> Result<Codebook, QuantizeError> {
    kmeans_fit_with(frames, &KMeansConfig { k, max_iters, seed }, &Workers::sequential()).map(|f| f.codebook)
}

/// Stacks the frames of several sequences, in the order given.
pub fn stack_frames<'a>(seqs: impl IntoIterator<Item = &'a FeatureSequence>) -> Result<FrameMatrix, QuantizeError> {
    let mut out: Option<FrameMatrix> = None;
    for s in seqs {
        let m = out.get_or_insert_with(|| FrameMatrix::with_dim(s.dim()).expect("dim >= 1"));
        if s.dim() != m.dim() {
            return Err(QuantizeError::DimensionMismatch {
                expected: m.dim(),
                found: s.dim(),
            });
        }
        for r in s.frames().iter_rows() {
            m.push_row(r).expect("checked dim");
        }
    }
    out.ok_or(QuantizeError::TooFewFrames { k: 1, n: 0 })
}

pub fn assign(frame: &[f64], codebook: &Codebook) -> Result<usize, QuantizeError> {
    if frame.len() != codebook.dim() {
        return Err(QuantizeError::DimensionMismatch {
            expected: codebook.dim(),
            found: frame.len(),
        });
    }
    Ok(nearest(frame, &codebook.centroids).0)
}

/// Discrete pseudo-text for one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitSequence {
    pub utterance_id: String,
    pub units: Vec<u32>,
}

impl UnitSequence {
    pub fn new(utterance_id: impl Into<String>, units: Vec<u32>) -> Result<Self, QuantizeError> {
        let utterance_id = utterance_id.into();
        if units.is_empty() {
            return Err(QuantizeError::EmptyUnits(utterance_id));
        }
        Ok(Self { utterance_id, units })
    }

    pub fn dedup(&self) -> Self {
        Self {
            utterance_id: self.utterance_id.clone(),
            units: dedup_runs(&self.units),
        }
    }

    /// Re-expands units into one-hot frames of dimension `k`, so the ABX
    /// pipeline can run on discrete codes.
    pub fn to_one_hot(&self, k: usize, frame_shift_s: f64) -> Result<FeatureSequence, QuantizeError> {
        let mut data = vec![0.0; self.units.len() * k];
        for (t, &u) in self.units.iter().enumerate() {
            let u = u as usize;
            if u >= k {
                return Err(QuantizeError::DimensionMismatch {
                    expected: k,
                    found: u + 1,
                });
            }
            data[t * k + u] = 1.0;
        }
        let frames = FrameMatrix::new(data, k).map_err(|_| QuantizeError::ZeroK)?;
        Ok(FeatureSequence::new(self.utterance_id.clone(), frame_shift_s, frames)?)
    }
}

/// Collapses runs of identical adjacent units.
pub fn dedup_runs(units: &[u32]) -> Vec<u32> {
    let mut out = units.to_vec();
    out.dedup();
    out
}

pub fn discretize(seq: &FeatureSequence, codebook: &Codebook, dedup: bool) -> Result<UnitSequence, QuantizeError> {
    let units = seq
        .frames()
        .iter_rows()
        .map(|f| assign(f, codebook).map(|u| u as u32))
        .collect::<Result<Vec<_>, _>>()?;
    let units = if dedup { dedup_runs(&units) } else { units };
    UnitSequence::new(seq.utterance_id(), units)
}

/// Discretizes many utterances on the worker pool; output order matches input.
pub fn discretize_all(
    seqs: &[&FeatureSequence],
    codebook: &Codebook,
    dedup: bool,
    workers: &Workers,
) -> Result<Vec<UnitSequence>, QuantizeError> {
    workers.try_map(seqs, |s| discretize(s, codebook, dedup))
}

pub fn write_codebook(codebook: &Codebook, path: impl AsRef<Path>) -> Result<(), QuantizeError> {
    let mut out = format!("{} {}\n", codebook.k(), codebook.dim());
    for row in codebook.centroids.iter_rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(corpus_io::write_text(path.as_ref(), &out)?)
}

/// Reads a codebook file. The stored inertia is not serialized and reads back as NaN.
pub fn read_codebook(path: impl AsRef<Path>) -> Result<Codebook, QuantizeError> {
    let path = path.as_ref();
    let text = corpus_io::read_text(path)?;
    let mut lines = numbered_lines(&text);
    let (_, header) = lines.next().ok_or_else(|| CorpusError::EmptyFile {
        path: path.to_path_buf(),
    })?;
    let err = |n, k| QuantizeError::Corpus(CorpusError::line(path, n, k));
    let dims: Vec<&str> = header.split(' ').collect();
    if dims.len() != 2 {
        return Err(err(
            1,
            LineError::FieldCount {
                expected: 2,
                found: dims.len(),
            },
        ));
    }
    let parse_usize = |t: &str| t.parse::<usize>().map_err(|_| err(1, LineError::NonInteger(t.into())));
    let (k, dim) = (parse_usize(dims[0])?, parse_usize(dims[1])?);
    if dim == 0 {
        return Err(err(1, LineError::Invalid("dimension must be at least 1".into())));
    }
    let mut m = FrameMatrix::with_dim(dim).expect("dim >= 1");
    for (n, line) in lines {
        let row = line
            .split(' ')
            .map(parse_f64)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|k| err(n, k))?;
        if row.len() != dim {
            return Err(err(
                n,
                LineError::Ragged {
                    expected: dim,
                    found: row.len(),
                },
            ));
        }
        m.push_row(&row).expect("checked dim");
    }
    if m.rows() != k {
        return Err(err(
            1,
            LineError::RowCount {
                expected: k,
                found: m.rows(),
            },
        ));
    }
    Codebook::new(m, f64::NAN)
}

pub fn write_unit_file(seqs: &[UnitSequence], path: impl AsRef<Path>) -> Result<(), QuantizeError> {
    let mut out = String::new();
    for s in seqs {
        out.push_str(&s.utterance_id);
        for u in &s.units {
            write!(out, " {u}").expect("write to string");
        }
        out.push('\n');
    }
    Ok(corpus_io::write_text(path.as_ref(), &out)?)
}

pub fn read_unit_file(path: impl AsRef<Path>) -> Result<Vec<UnitSequence>, QuantizeError> {
    let path = path.as_ref();
    let text = corpus_io::read_text(path)?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (n, line) in numbered_lines(&text) {
        let err = |k| QuantizeError::Corpus(CorpusError::line(path, n, k));
        let mut fields = line.split(' ');
        let id = fields.next().unwrap_or_default();
        if id.is_empty() {
            return Err(err(LineError::EmptyField("utterance_id")));
        }
        let units = fields
            .map(|t| t.parse::<u32>().map_err(|_| err(LineError::NonInteger(t.into()))))
            .collect::<Result<Vec<_>, _>>()?;
        if units.is_empty() {
            return Err(err(LineError::NoUnits));
        }
        if !seen.insert(id.to_string()) {
            return Err(err(LineError::DuplicateId(id.into())));
        }
        out.push(UnitSequence {
            utterance_id: id.to_string(),
            units,
        });
    }
    if out.is_empty() {
        return Err(CorpusError::EmptyFile {
            path: path.to_path_buf(),
        }
        .into());
    }
    Ok(out)
}
