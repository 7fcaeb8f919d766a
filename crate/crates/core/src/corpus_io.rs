//! Reading and writing the on-disk formats the engine consumes.
//!
//! | file | layout |
//! |------|--------|
//! | features | one frame per line, values separated by a single ASCII space, no header |
//! | ABX items | header `#file onset offset #phone prev-phone next-phone speaker`, then 7 fields per line |
//! | pair table | TSV, header `pair_id positive negative group` |
//! | similarity table | TSV, header `token_a token_b word_a word_b score dataset` |
//! | scores | `<utterance_id> <float>` per line |
//!
//! All files are UTF-8 with LF newlines. Every parse error carries the
//! offending line number (1-based, header included).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::lexsem::ScoreTable;
use crate::matrix::FrameMatrix;

pub const ITEM_HEADER: &str = "#file onset offset #phone prev-phone next-phone speaker";
pub const PAIR_HEADER: &str = "pair_id\tpositive\tnegative\tgroup";
pub const SIMILARITY_HEADER: &str = "token_a\ttoken_b\tword_a\tword_b\tscore\tdataset";

/// Problem found on a specific line of an input file.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LineError {
    #[error("row has {found} values, expected {expected} (ragged rows)")]
    Ragged { expected: usize, found: usize },
    #[error("non-numeric token {0:?}")]
    NonNumeric(String),
    #[error("non-finite value {0:?}")]
    NonFinite(String),
    #[error("bad header: expected {expected:?}, found {found:?}")]
    BadHeader { expected: String, found: String },
    #[error("missing header {0:?}")]
    MissingHeader(String),
    #[error("expected {expected} fields, found {found}")]
    FieldCount { expected: usize, found: usize },
    #[error("onset ≥ offset ({onset} ≥ {offset})")]
    OnsetNotBeforeOffset { onset: f64, offset: f64 },
    #[error("negative onset {0}")]
    NegativeOnset(f64),
    #[error("empty field {0:?}")]
    EmptyField(&'static str),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("positive and negative ids are both {0:?}")]
    SameStimulus(String),
    #[error("score {0} outside [0, 10]")]
    ScoreOutOfRange(f64),
    #[error("non-integer token {0:?}")]
    NonInteger(String),
    #[error("utterance has no units")]
    NoUnits,
    #[error("header declares {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: empty file")]
    EmptyFile { path: PathBuf },
    #[error("{path}: {kind} at line {line}")]
    Line {
        path: PathBuf,
        line: usize,
        kind: LineError,
    },
    #[error("invalid feature sequence {id:?}: {reason}")]
    InvalidSequence { id: String, reason: String },
    #[error("{path}: no feature files (*.txt) found")]
    NoFeatures { path: PathBuf },
    #[error("submission is missing task {task}: {detail}")]
    MissingTask { task: SubmissionTask, detail: String },
    #[error("submission metadata {path}: {reason}")]
    Metadata { path: PathBuf, reason: String },
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn line(path: &Path, line: usize, kind: LineError) -> Self {
        CorpusError::Line {
            path: path.to_path_buf(),
            line,
            kind,
        }
    }
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// Frame embeddings for one utterance at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    utterance_id: String,
    frame_shift_s: f64,
    frames: FrameMatrix,
}

impl FeatureSequence {
    pub fn new(utterance_id: impl Into<String>, frame_shift_s: f64, frames: FrameMatrix) -> Result<Self> {
        let utterance_id = utterance_id.into();
        let invalid = |reason: &str| CorpusError::InvalidSequence {
            id: utterance_id.clone(),
            reason: reason.to_string(),
        };
        if frames.is_empty() {
            return Err(invalid("no frames"));
        }
        if !frames.all_finite() {
            return Err(invalid("non-finite value"));
        }
        if !(frame_shift_s.is_finite() && frame_shift_s > 0.0) {
            return Err(invalid("frame shift must be positive"));
        }
        Ok(Self {
            utterance_id,
            frame_shift_s,
            frames,
        })
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows<R: AsRef<[f64]>>(utterance_id: impl Into<String>, frame_shift_s: f64, rows: &[R]) -> Result<Self> {
        let utterance_id = utterance_id.into();
        let frames = FrameMatrix::from_rows(rows).map_err(|e| CorpusError::InvalidSequence {
            id: utterance_id.clone(),
            reason: e.to_string(),
        })?;
        Self::new(utterance_id, frame_shift_s, frames)
    }

    pub fn utterance_id(&self) -> &str {
        &self.utterance_id
    }

    pub fn frame_shift_s(&self) -> f64 {
        self.frame_shift_s
    }

    pub fn frames(&self) -> &FrameMatrix {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.frames.dim()
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        self.frames.row(i)
    }

    pub fn with_frame_shift(mut self, frame_shift_s: f64) -> Result<Self> {
        if !(frame_shift_s.is_finite() && frame_shift_s > 0.0) {
            return Err(CorpusError::InvalidSequence {
                id: self.utterance_id,
                reason: "frame shift must be positive".into(),
            });
        }
        self.frame_shift_s = frame_shift_s;
        Ok(self)
    }

    /// Applies `f` to every value. Fails if the result is not finite.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.utterance_id.clone(), self.frame_shift_s, self.frames.map(f))
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CorpusError::io(path, e))
}

/// Data lines of a file: strips the single trailing LF and yields
/// `(line_number, content)`.
pub(crate) fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let lines = if body.is_empty() && text.is_empty() {
        None
    } else {
        Some(body.split('\n'))
    };
    lines.into_iter().flatten().enumerate().map(|(i, l)| (i + 1, l))
}

pub(crate) fn parse_f64(token: &str) -> Result<f64, LineError> {
    let v: f64 = token.parse().map_err(|_| LineError::NonNumeric(token.to_string()))?;
    if !v.is_finite() {
        return Err(LineError::NonFinite(token.to_string()));
    }
    Ok(v)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn read_feature_file(path: impl AsRef<Path>, frame_shift_s: f64) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let text = read_text(path)?;
    parse_features(path, &text, frame_shift_s)
}

fn parse_features(path: &Path, text: &str, frame_shift_s: f64) -> Result<FeatureSequence> {
    let mut frames: Option<FrameMatrix> = None;
    let mut row = Vec::new();
    for (line_no, line) in numbered_lines(text) {
        row.clear();
        for token in line.split(' ') {
            row.push(parse_f64(token).map_err(|k| CorpusError::line(path, line_no, k))?);
        }
        match frames.as_mut() {
            None => {
                frames = Some(FrameMatrix::from_rows(&[&row[..]]).expect("non-empty row"));
            }
            Some(m) => {
                if row.len() != m.dim() {
                    return Err(CorpusError::line(
                        path,
                        line_no,
                        LineError::Ragged {
                            expected: m.dim(),
                            found: row.len(),
                        },
                    ));
                }
                m.push_row(&row).expect("checked dimension");
            }
        }
    }
    let frames = frames.ok_or_else(|| CorpusError::EmptyFile {
        path: path.to_path_buf(),
    })?;
    FeatureSequence::new(file_stem(path), frame_shift_s, frames)
}

/// Formats a value in shortest round-trip decimal form.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_feature_file(seq: &FeatureSequence, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for row in seq.frames().iter_rows() {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{v:?}").expect("write to string");
        }
        out.push('\n');
    }
    write_text(path.as_ref(), &out)
}

/// Reads every `*.txt` file in `dir` as a feature sequence keyed by file stem.
pub fn read_feature_dir(dir: impl AsRef<Path>, frame_shift_s: f64) -> Result<BTreeMap<String, FeatureSequence>> {
    let dir = dir.as_ref();
    let mut out = BTreeMap::new();
    for path in list_files(dir, "txt")? {
        let seq = read_feature_file(&path, frame_shift_s)?;
        out.insert(seq.utterance_id().to_string(), seq);
    }
    if out.is_empty() {
        return Err(CorpusError::NoFeatures {
            path: dir.to_path_buf(),
        });
    }
    Ok(out)
}

/// Files in `dir` with the given extension, sorted by name.
fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CorpusError::io(dir, e))? {
        let path = entry.map_err(|e| CorpusError::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// One triphone occurrence in an ABX item file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbxItem {
    pub utterance_id: String,
    pub onset_s: f64,
    pub offset_s: f64,
    pub center_phone: String,
    pub prev_phone: String,
    pub next_phone: String,
    pub speaker_id: String,
}

pub fn parse_item_file(path: impl AsRef<Path>) -> Result<Vec<AbxItem>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    parse_items(path, &text)
}

fn check_header(path: &Path, lines: &mut dyn Iterator<Item = (usize, &str)>, header: &str) -> Result<()> {
    match lines.next() {
        Some((_, h)) if h == header => Ok(()),
        Some((n, h)) => Err(CorpusError::line(
            path,
            n,
            LineError::BadHeader {
                expected: header.to_string(),
                found: h.to_string(),
            },
        )),
        None => Err(CorpusError::line(path, 1, LineError::MissingHeader(header.to_string()))),
    }
}

fn parse_items(path: &Path, text: &str) -> Result<Vec<AbxItem>> {
    let mut lines = numbered_lines(text);
    check_header(path, &mut lines, ITEM_HEADER)?;
    let mut items = Vec::new();
    for (n, line) in lines {
        let err = |k| CorpusError::line(path, n, k);
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.len() != 7 {
            return Err(err(LineError::FieldCount {
                expected: 7,
                found: fields.len(),
            }));
        }
        let onset_s = parse_f64(fields[1]).map_err(err)?;
        let offset_s = parse_f64(fields[2]).map_err(err)?;
        if onset_s < 0.0 {
            return Err(err(LineError::NegativeOnset(onset_s)));
        }
        if onset_s >= offset_s {
            return Err(err(LineError::OnsetNotBeforeOffset {
                onset: onset_s,
                offset: offset_s,
            }));
        }
        items.push(AbxItem {
            utterance_id: fields[0].to_string(),
            onset_s,
            offset_s,
            center_phone: fields[3].to_string(),
            prev_phone: fields[4].to_string(),
            next_phone: fields[5].to_string(),
            speaker_id: fields[6].to_string(),
        });
    }
    Ok(items)
}

pub fn write_item_file(items: &[AbxItem], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from(ITEM_HEADER);
    out.push('\n');
    for it in items {
        writeln!(
            out,
            "{} {:?} {:?} {} {} {} {}",
            it.utterance_id, it.onset_s, it.offset_s, it.center_phone, it.prev_phone, it.next_phone, it.speaker_id
        )
        .expect("write to string");
    }
    write_text(path.as_ref(), &out)
}

/// A (word, nonword) or (grammatical, ungrammatical) stimulus pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusPair {
    pub pair_id: String,
    pub positive_id: String,
    pub negative_id: String,
    pub group: Option<String>,
}

/// Splits TSV data rows, rejecting rows with a different column count.
fn tsv_rows<'a>(
    path: &'a Path,
    text: &'a str,
    header: &'a str,
) -> Result<impl Iterator<Item = Result<(usize, Vec<&'a str>)>> + 'a> {
    let mut lines = numbered_lines(text);
    check_header(path, &mut lines, header)?;
    let ncols = header.split('\t').count();
    Ok(lines.map(move |(n, line)| {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != ncols {
            return Err(CorpusError::line(
                path,
                n,
                LineError::FieldCount {
                    expected: ncols,
                    found: fields.len(),
                },
            ));
        }
        Ok((n, fields))
    }))
}

fn non_empty<'a>(path: &Path, n: usize, value: &'a str, name: &'static str) -> Result<&'a str> {
    if value.is_empty() {
        Err(CorpusError::line(path, n, LineError::EmptyField(name)))
    } else {
        Ok(value)
    }
}

pub fn parse_pair_table(path: impl AsRef<Path>) -> Result<Vec<StimulusPair>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut seen = HashSet::new();
    let mut pairs = Vec::new();
    for row in tsv_rows(path, &text, PAIR_HEADER)? {
        let (n, f) = row?;
        let pair_id = non_empty(path, n, f[0], "pair_id")?;
        let positive = non_empty(path, n, f[1], "positive")?;
        let negative = non_empty(path, n, f[2], "negative")?;
        if positive == negative {
            return Err(CorpusError::line(path, n, LineError::SameStimulus(positive.into())));
        }
        if !seen.insert(pair_id) {
            return Err(CorpusError::line(path, n, LineError::DuplicateId(pair_id.into())));
        }
        pairs.push(StimulusPair {
            pair_id: pair_id.to_string(),
            positive_id: positive.to_string(),
            negative_id: negative.to_string(),
            group: (!f[3].is_empty()).then(|| f[3].to_string()),
        });
    }
    Ok(pairs)
}

pub fn write_pair_table(pairs: &[StimulusPair], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from(PAIR_HEADER);
    out.push('\n');
    for p in pairs {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            p.pair_id,
            p.positive_id,
            p.negative_id,
            p.group.as_deref().unwrap_or("")
        )
        .expect("write to string");
    }
    write_text(path.as_ref(), &out)
}

/// One human similarity judgment between two spoken word tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRecord {
    pub token_a_id: String,
    pub token_b_id: String,
    pub word_a: String,
    pub word_b: String,
    pub human_score: f64,
    pub dataset: String,
}

pub fn parse_similarity_table(path: impl AsRef<Path>) -> Result<Vec<SimilarityRecord>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut records = Vec::new();
    for row in tsv_rows(path, &text, SIMILARITY_HEADER)? {
        let (n, f) = row?;
        let score = parse_f64(f[4]).map_err(|k| CorpusError::line(path, n, k))?;
        if !(0.0..=10.0).contains(&score) {
            return Err(CorpusError::line(path, n, LineError::ScoreOutOfRange(score)));
        }
        records.push(SimilarityRecord {
            token_a_id: non_empty(path, n, f[0], "token_a")?.to_string(),
            token_b_id: non_empty(path, n, f[1], "token_b")?.to_string(),
            word_a: non_empty(path, n, f[2], "word_a")?.to_string(),
            word_b: non_empty(path, n, f[3], "word_b")?.to_string(),
            human_score: score,
            dataset: non_empty(path, n, f[5], "dataset")?.to_string(),
        });
    }
    Ok(records)
}

pub fn write_similarity_table(records: &[SimilarityRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from(SIMILARITY_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:?}\t{}",
            r.token_a_id, r.token_b_id, r.word_a, r.word_b, r.human_score, r.dataset
        )
        .expect("write to string");
    }
    write_text(path.as_ref(), &out)
}

pub fn read_score_file(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut table = BTreeMap::new();
    for (n, line) in numbered_lines(&text) {
        let err = |k| CorpusError::line(path, n, k);
        let fields: Vec<&str> = line.split(' ').collect();
        if fields.len() != 2 {
            return Err(err(LineError::FieldCount {
                expected: 2,
                found: fields.len(),
            }));
        }
        let id = non_empty(path, n, fields[0], "utterance_id")?;
        let score = parse_f64(fields[1]).map_err(err)?;
        if table.insert(id.to_string(), score).is_some() {
            return Err(err(LineError::DuplicateId(id.to_string())));
        }
    }
    if table.is_empty() {
        return Err(CorpusError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    Ok(ScoreTable::from_map(table).expect("scores checked finite"))
}

/// Score-file text: one `<id> <score>` line per entry, in id order.
pub fn format_score_file(scores: &ScoreTable) -> String {
    let mut out = String::new();
    for (id, v) in scores.iter() {
        writeln!(out, "{id} {v:?}").expect("write to string");
    }
    out
}

pub fn write_score_file(scores: &ScoreTable, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_score_file(scores))
}

/// The four evaluation tasks of a submission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubmissionTask {
    Phonetic,
    Lexical,
    Syntactic,
    Semantic,
}

impl SubmissionTask {
    pub const ALL: [SubmissionTask; 4] = [
        SubmissionTask::Phonetic,
        SubmissionTask::Lexical,
        SubmissionTask::Syntactic,
        SubmissionTask::Semantic,
    ];

    pub fn dir_name(self) -> &'static str {
        match self {
            SubmissionTask::Phonetic => "phonetic",
            SubmissionTask::Lexical => "lexical",
            SubmissionTask::Syntactic => "syntactic",
            SubmissionTask::Semantic => "semantic",
        }
    }
}

impl std::fmt::Display for SubmissionTask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl std::str::FromStr for SubmissionTask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SubmissionTask::ALL
            .into_iter()
            .find(|t| t.dir_name() == s)
            .ok_or_else(|| format!("unknown task {s:?}"))
    }
}

/// What a submission must contain.
#[derive(Debug, Clone, Default)]
pub struct SubmissionRequirements {
    pub required: BTreeSet<SubmissionTask>,
}

impl SubmissionRequirements {
    pub fn all() -> Self {
        Self {
            required: SubmissionTask::ALL.into_iter().collect(),
        }
    }
}

/// A validated submission directory.
///
/// Expected tree:
///
/// ```text
/// meta.json                         {"gpu_budget_hours": <number >= 0>, ...}
/// phonetic/dev-clean/*.txt
/// phonetic/dev-other/*.txt
/// lexical/dev.score
/// syntactic/dev.score
/// semantic/synthetic/dev/*.txt
/// semantic/librispeech/dev/*.txt
/// ```
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmissionLayout {
    pub root: PathBuf,
    pub tasks_present: BTreeSet<SubmissionTask>,
    pub metadata: BTreeMap<String, serde_json::Value>,
    pub gpu_budget_hours: f64,
}

pub const METADATA_FILE: &str = "meta.json";

fn check_task(root: &Path, task: SubmissionTask) -> Result<()> {
    let missing = |detail: String| CorpusError::MissingTask { task, detail };
    let feature_dirs: &[&str] = match task {
        SubmissionTask::Phonetic => &["phonetic/dev-clean", "phonetic/dev-other"],
        SubmissionTask::Semantic => &["semantic/synthetic/dev", "semantic/librispeech/dev"],
        SubmissionTask::Lexical | SubmissionTask::Syntactic => &[],
    };
    for sub in feature_dirs {
        let dir = root.join(sub);
        if !dir.is_dir() {
            return Err(missing(format!("directory {sub}/ not found")));
        }
        if list_files(&dir, "txt")?.is_empty() {
            return Err(missing(format!("directory {sub}/ has no .txt feature files")));
        }
    }
    if matches!(task, SubmissionTask::Lexical | SubmissionTask::Syntactic) {
        let rel = format!("{}/dev.score", task.dir_name());
        let file = root.join(&rel);
        if !file.is_file() {
            return Err(missing(format!("file {rel} not found")));
        }
        read_score_file(&file)?;
    }
    Ok(())
}

pub fn validate_submission(root: impl AsRef<Path>, expected: &SubmissionRequirements) -> Result<SubmissionLayout> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(CorpusError::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "submission root not found"),
        ));
    }
    let mut tasks_present = BTreeSet::new();
    for task in SubmissionTask::ALL {
        let dir = root.join(task.dir_name());
        if dir.is_dir() {
            check_task(root, task)?;
            tasks_present.insert(task);
        } else if expected.required.contains(&task) {
            return Err(CorpusError::MissingTask {
                task,
                detail: format!("directory {}/ not found", task.dir_name()),
            });
        }
    }

    let meta_path = root.join(METADATA_FILE);
    let meta_err = |reason: String| CorpusError::Metadata {
        path: meta_path.clone(),
        reason,
    };
    if !meta_path.is_file() {
        return Err(meta_err("missing".into()));
    }
    let text = read_text(&meta_path)?;
    let metadata: BTreeMap<String, serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| meta_err(format!("not a JSON object: {e}")))?;
    let budget = match metadata.get("gpu_budget_hours") {
        Some(serde_json::Value::Number(n)) => n.as_f64(),
        Some(serde_json::Value::String(s)) => s.trim().parse::<f64>().ok(),
        Some(_) => None,
        None => return Err(meta_err("gpu_budget_hours missing".into())),
    }
    .ok_or_else(|| meta_err("gpu_budget_hours is not a number".into()))?;
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(meta_err(format!(
            "gpu_budget_hours must be a nonnegative number, got {budget}"
        )));
    }
    Ok(SubmissionLayout {
        root: root.to_path_buf(),
        tasks_present,
        metadata,
        gpu_budget_hours: budget,
    })
}
