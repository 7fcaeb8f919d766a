//! Triphone ABX discriminability.
//!
//! For two triphone categories A and B that differ only in the centre phone,
//! the ABX score of a cell is the probability that a token `x` of A is closer
//! (by DTW) to another token `a` of A than to a token `b` of B. Cells are
//! formed per speaker (within-speaker) or per speaker pair (across-speaker,
//! where `x` comes from a different speaker than `a` and `b`), scored, and
//! averaged into one error rate:
//!
//! 1. over speaker keys within each (context, ordered phone pair),
//! 2. over contexts within each ordered phone pair,
//! 3. over the two orientations of each phone pair,
//! 4. over unordered phone pairs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus_io::{fmt_f64, AbxItem, FeatureSequence};
use crate::exec::Workers;
use crate::matrix::FrameMatrix;
use crate::metric::{dtw_distance, FrameMetric, MetricError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AbxError {
    #[error("no features for utterance {utterance:?} (item {item})")]
    MissingFeatures { utterance: String, item: usize },
    #[error("item {item} ({utterance:?}) starts at frame {start} but the utterance has {frames} frames")]
    SegmentOutOfRange {
        item: usize,
        utterance: String,
        start: usize,
        frames: usize,
    },
    #[error("features of utterance {utterance:?} have dimension {found}, expected {expected}")]
    DimensionMismatch {
        utterance: String,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("no ABX cells to aggregate")]
    NoCells,
    #[error("{scores} scores for {cells} cells")]
    ScoreCount { cells: usize, scores: usize },
    #[error("cell mode {found} does not match requested mode {expected}")]
    ModeMismatch { expected: AbxMode, found: AbxMode },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbxMode {
    Within,
    Across,
}

impl std::fmt::Display for AbxMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AbxMode::Within => "within",
            AbxMode::Across => "across",
        })
    }
}

impl std::str::FromStr for AbxMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "within" => Ok(AbxMode::Within),
            "across" => Ok(AbxMode::Across),
            _ => Err(format!("unknown ABX mode {s:?}")),
        }
    }
}

/// One ABX comparison cell. Item lists hold indices into the item list the
/// cell was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbxCell {
    pub mode: AbxMode,
    pub prev_phone: String,
    pub next_phone: String,
    pub phone_a: String,
    pub phone_b: String,
    /// Speaker of the `a` and `b` tokens (and of `x` in within mode).
    pub speaker_ax: String,
    /// Speaker of `x`; set in across mode only.
    pub speaker_x: Option<String>,
    pub a_items: Vec<usize>,
    pub b_items: Vec<usize>,
    pub x_items: Vec<usize>,
}

type CellKey<'a> = (&'a str, &'a str, &'a str, &'a str, &'a str, Option<&'a str>);

impl AbxCell {
    /// Sort key: context, phone pair, then speakers.
    pub fn key(&self) -> CellKey<'_> {
        (
            &self.prev_phone,
            &self.next_phone,
            &self.phone_a,
            &self.phone_b,
            &self.speaker_ax,
            self.speaker_x.as_deref(),
        )
    }

    /// Number of (a, b, x) triplets the cell scores.
    pub fn n_triplets(&self) -> usize {
        let ax = match self.mode {
            AbxMode::Within => self.a_items.len() * (self.a_items.len() - 1),
            AbxMode::Across => self.a_items.len() * self.x_items.len(),
        };
        ax * self.b_items.len()
    }
}

/// Cells plus the number of candidate cells dropped for lack of tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct CellEnumeration {
    pub cells: Vec<AbxCell>,
    pub skipped: usize,
}

type Context = (String, String);

pub fn build_cells(items: &[AbxItem], mode: AbxMode) -> Vec<AbxCell> {
    enumerate_cells(items, mode).cells
}

/// Enumerates all cells in lexicographic key order.
///
/// A candidate is counted as skipped when both phones occur in the context
/// for the relevant speaker(s) but the minimum token counts are not met:
/// within mode needs two A tokens, across mode needs the `a`/`b` speaker to
/// have a B token.
pub fn enumerate_cells(items: &[AbxItem], mode: AbxMode) -> CellEnumeration {
    // context -> speaker -> phone -> item indices (in input order)
    let mut index: BTreeMap<Context, BTreeMap<&str, BTreeMap<&str, Vec<usize>>>> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        index
            .entry((it.prev_phone.clone(), it.next_phone.clone()))
            .or_default()
            .entry(&it.speaker_id)
            .or_default()
            .entry(&it.center_phone)
            .or_default()
            .push(i);
    }

    let mut cells = Vec::new();
    let mut skipped = 0;
    for ((prev, next), speakers) in &index {
        let cell = |p1: &str, p2: &str, s1: &str, s2: Option<&str>, a: &[usize], b: &[usize], x: &[usize]| AbxCell {
            mode,
            prev_phone: prev.clone(),
            next_phone: next.clone(),
            phone_a: p1.to_string(),
            phone_b: p2.to_string(),
            speaker_ax: s1.to_string(),
            speaker_x: s2.map(str::to_string),
            a_items: a.to_vec(),
            b_items: b.to_vec(),
            x_items: x.to_vec(),
        };
        match mode {
            AbxMode::Within => {
                for (s, phones) in speakers {
                    for (p1, a) in phones {
                        for (p2, b) in phones {
                            if p1 == p2 {
                                continue;
                            }
                            if a.len() >= 2 {
                                cells.push(cell(p1, p2, s, None, a, b, a));
                            } else {
                                skipped += 1;
                            }
                        }
                    }
                }
            }
            AbxMode::Across => {
                let context_phones: std::collections::BTreeSet<&str> =
                    speakers.values().flat_map(|p| p.keys().copied()).collect();
                for (s1, phones1) in speakers {
                    for (p1, a) in phones1 {
                        for (s2, phones2) in speakers {
                            if s1 == s2 {
                                continue;
                            }
                            let Some(x) = phones2.get(p1) else { continue };
                            for p2 in &context_phones {
                                if p2 == p1 {
                                    continue;
                                }
                                match phones1.get(p2) {
                                    Some(b) => cells.push(cell(p1, p2, s1, Some(s2), a, b, x)),
                                    None => skipped += 1,
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    cells.sort_by(|a, b| a.key().cmp(&b.key()));
    CellEnumeration { cells, skipped }
}

/// Frame-level segments for every item, extracted once.
#[derive(Debug, Clone)]
pub struct AbxDataset {
    items: Vec<AbxItem>,
    segments: Vec<FrameMatrix>,
}

/// Frame range `[start, end)` covered by `[onset, offset)` seconds.
///
/// Frame `i` is taken to be centred at `i · shift`, so boundaries round to
/// the nearest frame. An empty range collapses to the frame nearest the
/// segment midpoint. Returns `None` when the segment starts past the end.
pub fn segment_frames(onset_s: f64, offset_s: f64, frame_shift_s: f64, n_frames: usize) -> Option<(usize, usize)> {
    let to_frame = |t: f64| (t / frame_shift_s + 0.5).floor().max(0.0) as usize;
    let start = to_frame(onset_s);
    if start >= n_frames {
        return None;
    }
    let end = to_frame(offset_s).min(n_frames);
    if end > start {
        Some((start, end))
    } else {
        let mid = to_frame(0.5 * (onset_s + offset_s)).min(n_frames - 1);
        Some((mid, mid + 1))
    }
}

impl AbxDataset {
    /// Cuts every item's segment out of its utterance's features.
    pub fn new<'f>(
        items: Vec<AbxItem>,
        features: impl Fn(&str) -> Option<&'f FeatureSequence>,
    ) -> Result<Self, AbxError> {
        let mut segments = Vec::with_capacity(items.len());
        let mut dim = None;
        for (i, it) in items.iter().enumerate() {
            let seq = features(&it.utterance_id).ok_or_else(|| AbxError::MissingFeatures {
                utterance: it.utterance_id.clone(),
                item: i,
            })?;
            let expected = *dim.get_or_insert(seq.dim());
            if seq.dim() != expected {
                return Err(AbxError::DimensionMismatch {
                    utterance: it.utterance_id.clone(),
                    expected,
                    found: seq.dim(),
                });
            }
            let (start, end) =
                segment_frames(it.onset_s, it.offset_s, seq.frame_shift_s(), seq.len()).ok_or_else(|| {
                    AbxError::SegmentOutOfRange {
                        item: i,
                        utterance: it.utterance_id.clone(),
                        start: (it.onset_s / seq.frame_shift_s() + 0.5).floor() as usize,
                        frames: seq.len(),
                    }
                })?;
            segments.push(seq.frames().slice_rows(start, end));
        }
        Ok(Self { items, segments })
    }

    pub fn from_map(items: Vec<AbxItem>, features: &BTreeMap<String, FeatureSequence>) -> Result<Self, AbxError> {
        Self::new(items, |id| features.get(id))
    }

    pub fn items(&self) -> &[AbxItem] {
        &self.items
    }

    pub fn segment(&self, item: usize) -> &FrameMatrix {
        &self.segments[item]
    }

    pub fn enumerate_cells(&self, mode: AbxMode) -> CellEnumeration {
        enumerate_cells(&self.items, mode)
    }
}

/// Success score of one cell: mean credit over its triplets, where a
/// triplet earns 1 if `d(a,x) < d(b,x)`, 0.5 on a tie and 0 otherwise.
/// In within mode `x` and `a` are always distinct tokens.
///
/// Distances are computed once per (token, token) pair; credits are counted
/// from the sorted `d(b,x)` row of each `x`.
pub fn score_cell(cell: &AbxCell, data: &AbxDataset, metric: FrameMetric) -> Result<f64, AbxError> {
    let mut dist_b = Vec::with_capacity(cell.b_items.len());
    // Counted in half-credits so the total is an exact integer.
    let mut half_credits: u64 = 0;
    let mut triplets: u64 = 0;
    for &x in &cell.x_items {
        let xs = data.segment(x);
        dist_b.clear();
        for &b in &cell.b_items {
            dist_b.push(dtw_distance(data.segment(b), xs, metric)?);
        }
        dist_b.sort_by(f64::total_cmp);
        for &a in &cell.a_items {
            if cell.mode == AbxMode::Within && a == x {
                continue;
            }
            let d_ax = dtw_distance(data.segment(a), xs, metric)?;
            let below_or_equal = dist_b.partition_point(|&d| d <= d_ax);
            let below = dist_b.partition_point(|&d| d < d_ax);
            let greater = (dist_b.len() - below_or_equal) as u64;
            let equal = (below_or_equal - below) as u64;
            half_credits += 2 * greater + equal;
            triplets += dist_b.len() as u64;
        }
    }
    if triplets == 0 {
        return Err(AbxError::NoCells);
    }
    Ok(half_credits as f64 / (2 * triplets) as f64)
}

/// Scores every cell on the worker pool; output order matches `cells`.
pub fn score_cells(
    cells: &[AbxCell],
    data: &AbxDataset,
    metric: FrameMetric,
    workers: &Workers,
) -> Result<Vec<f64>, AbxError> {
    workers.try_map(cells, |c| score_cell(c, data, metric))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhonePairError {
    pub phone_a: String,
    pub phone_b: String,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub prev_phone: String,
    pub next_phone: String,
    pub phone_a: String,
    pub phone_b: String,
    pub speaker_ax: String,
    pub speaker_x: Option<String>,
    pub n_triplets: usize,
    pub score: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbxReport {
    pub mode: AbxMode,
    pub metric: FrameMetric,
    pub error_rate: f64,
    pub n_cells: usize,
    pub n_skipped: usize,
    /// Error per ordered phone pair, after averaging speakers and contexts.
    pub per_phone_pair: Vec<PhonePairError>,
    pub cells: Vec<CellScore>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Reduces cell scores to an [`AbxReport`] in sorted key order.
pub fn aggregate(cells: &[AbxCell], scores: &[f64], mode: AbxMode) -> Result<AbxReport, AbxError> {
    if cells.len() != scores.len() {
        return Err(AbxError::ScoreCount {
            cells: cells.len(),
            scores: scores.len(),
        });
    }
    if cells.is_empty() {
        return Err(AbxError::NoCells);
    }
    if let Some(c) = cells.iter().find(|c| c.mode != mode) {
        return Err(AbxError::ModeMismatch {
            expected: mode,
            found: c.mode,
        });
    }
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&i, &j| cells[i].key().cmp(&cells[j].key()));

    let mut by_context: BTreeMap<(&str, &str, &str, &str), Vec<f64>> = BTreeMap::new();
    for &i in &order {
        let c = &cells[i];
        by_context
            .entry((&c.phone_a, &c.phone_b, &c.prev_phone, &c.next_phone))
            .or_default()
            .push(1.0 - scores[i]);
    }
    let mut by_pair: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for ((pa, pb, _, _), errs) in &by_context {
        by_pair.entry((pa, pb)).or_default().push(mean(errs));
    }
    let ordered: BTreeMap<(&str, &str), f64> = by_pair.iter().map(|(k, v)| (*k, mean(v))).collect();

    let mut unordered: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for (&(pa, pb), &e) in &ordered {
        let key = if pa < pb { (pa, pb) } else { (pb, pa) };
        unordered.entry(key).or_default().push(e);
    }
    let symmetric: Vec<f64> = unordered.values().map(|v| mean(v)).collect();
    let error_rate = mean(&symmetric);

    Ok(AbxReport {
        mode,
        metric: FrameMetric::default(),
        error_rate,
        n_cells: cells.len(),
        n_skipped: 0,
        per_phone_pair: ordered
            .iter()
            .map(|(&(a, b), &error)| PhonePairError {
                phone_a: a.to_string(),
                phone_b: b.to_string(),
                error,
            })
            .collect(),
        cells: order
            .iter()
            .map(|&i| {
                let c = &cells[i];
                CellScore {
                    prev_phone: c.prev_phone.clone(),
                    next_phone: c.next_phone.clone(),
                    phone_a: c.phone_a.clone(),
                    phone_b: c.phone_b.clone(),
                    speaker_ax: c.speaker_ax.clone(),
                    speaker_x: c.speaker_x.clone(),
                    n_triplets: c.n_triplets(),
                    score: scores[i],
                    error: 1.0 - scores[i],
                }
            })
            .collect(),
    })
}

/// Full ABX evaluation: enumerate, score and aggregate.
pub fn evaluate(
    data: &AbxDataset,
    mode: AbxMode,
    metric: FrameMetric,
    workers: &Workers,
) -> Result<AbxReport, AbxError> {
    let CellEnumeration { cells, skipped } = data.enumerate_cells(mode);
    let scores = score_cells(&cells, data, metric, workers)?;
    let mut report = aggregate(&cells, &scores, mode)?;
    report.metric = metric;
    report.n_skipped = skipped;
    Ok(report)
}

impl AbxReport {
    /// Text report: a summary line `mode error_rate n_cells`, then a TSV
    /// table of ordered phone-pair errors.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("{} {} {}\n", self.mode, fmt_f64(self.error_rate), self.n_cells);
        out.push_str("phone_a\tphone_b\terror\n");
        for p in &self.per_phone_pair {
            writeln!(out, "{}\t{}\t{}", p.phone_a, p.phone_b, fmt_f64(p.error)).expect("write to string");
        }
        out
    }
}
