//! Markdown leaderboard rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSet {
    Dev,
    Test,
}

impl std::fmt::Display for EvalSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EvalSet::Dev => "dev",
            EvalSet::Test => "test",
        })
    }
}

/// One system's results on one evaluation set. Any score may be missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub system: String,
    /// Training budget in GPU-hours, as declared by the submitter.
    pub budget: f64,
    pub set: EvalSet,
    /// Reference rows (baselines, toplines) are never bolded.
    #[serde(default)]
    pub baseline: bool,
    #[serde(default)]
    pub abx_within_clean: Option<f64>,
    #[serde(default)]
    pub abx_within_other: Option<f64>,
    #[serde(default)]
    pub abx_across_clean: Option<f64>,
    #[serde(default)]
    pub abx_across_other: Option<f64>,
    #[serde(default)]
    pub swuggy: Option<f64>,
    #[serde(default)]
    pub sblimp: Option<f64>,
    #[serde(default)]
    pub ssimi_synth: Option<f64>,
    #[serde(default)]
    pub ssimi_libri: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LeaderboardError {
    #[error("no rows to render")]
    Empty,
    #[error("{system} ({set}): {column} = {value} out of range")]
    OutOfRange {
        system: String,
        set: EvalSet,
        column: &'static str,
        value: f64,
    },
}

#[derive(Clone, Copy)]
enum Better {
    Lower,
    Higher,
}

struct Column {
    title: &'static str,
    name: &'static str,
    get: fn(&LeaderboardRow) -> Option<f64>,
    better: Better,
    range: (f64, f64),
}

const COLUMNS: [Column; 8] = [
    Column {
        title: "ABX-with. clean",
        name: "abx_within_clean",
        get: |r| r.abx_within_clean,
        better: Better::Lower,
        range: (0.0, 1.0),
    },
    Column {
        title: "ABX-with. other",
        name: "abx_within_other",
        get: |r| r.abx_within_other,
        better: Better::Lower,
        range: (0.0, 1.0),
    },
    Column {
        title: "ABX-across clean",
        name: "abx_across_clean",
        get: |r| r.abx_across_clean,
        better: Better::Lower,
        range: (0.0, 1.0),
    },
    Column {
        title: "ABX-across other",
        name: "abx_across_other",
        get: |r| r.abx_across_other,
        better: Better::Lower,
        range: (0.0, 1.0),
    },
    Column {
        title: "sWUGGY",
        name: "swuggy",
        get: |r| r.swuggy,
        better: Better::Higher,
        range: (0.0, 1.0),
    },
    Column {
        title: "sBLIMP",
        name: "sblimp",
        get: |r| r.sblimp,
        better: Better::Higher,
        range: (0.0, 1.0),
    },
    Column {
        title: "sSIMI synth.",
        name: "ssimi_synth",
        get: |r| r.ssimi_synth,
        better: Better::Higher,
        range: (-100.0, 100.0),
    },
    Column {
        title: "sSIMI Libri.",
        name: "ssimi_libri",
        get: |r| r.ssimi_libri,
        better: Better::Higher,
        range: (-100.0, 100.0),
    },
];

impl LeaderboardRow {
    pub fn validate(&self) -> Result<(), LeaderboardError> {
        for c in &COLUMNS {
            if let Some(v) = (c.get)(self) {
                if !(v >= c.range.0 && v <= c.range.1) {
                    return Err(LeaderboardError::OutOfRange {
                        system: self.system.clone(),
                        set: self.set,
                        column: c.name,
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }
}

fn fmt_budget(b: f64) -> String {
    if b.fract() == 0.0 {
        format!("{b:.0}")
    } else {
        format!("{b:.2}")
    }
}

/// Renders one markdown table, rows sorted by (system, set), columns in
/// leaderboard order, values to two decimals. In each column the best value
/// among non-baseline rows is bold: lowest for ABX errors, highest
/// elsewhere. Values are compared after rounding, so displayed ties are
/// bolded together.
pub fn render_leaderboard(rows: &[LeaderboardRow]) -> Result<String, LeaderboardError> {
    if rows.is_empty() {
        return Err(LeaderboardError::Empty);
    }
    for r in rows {
        r.validate()?;
    }
    let mut rows: Vec<&LeaderboardRow> = rows.iter().collect();
    rows.sort_by(|a, b| (&a.system, a.set).cmp(&(&b.system, b.set)));

    let rounded = |v: f64| (v * 100.0).round() / 100.0;
    let best: Vec<Option<f64>> = COLUMNS
        .iter()
        .map(|c| {
            rows.iter()
                .filter(|r| !r.baseline)
                .filter_map(|r| (c.get)(r).map(rounded))
                .reduce(|a, b| match c.better {
                    Better::Lower => a.min(b),
                    Better::Higher => a.max(b),
                })
        })
        .collect();

    let mut out = String::from("| System | Budget | Set |");
    for c in &COLUMNS {
        write!(out, " {} |", c.title).expect("write to string");
    }
    out.push_str("\n|---|---:|---|");
    out.push_str(&"---:|".repeat(COLUMNS.len()));
    out.push('\n');
    for r in rows {
        write!(out, "| {} | {} | {} |", r.system, fmt_budget(r.budget), r.set).expect("write to string");
        for (c, b) in COLUMNS.iter().zip(&best) {
            match (c.get)(r) {
                None => out.push_str(" – |"),
                Some(v) => {
                    let cell = format!("{v:.2}");
                    if !r.baseline && Some(rounded(v)) == *b {
                        write!(out, " **{cell}** |").expect("write to string");
                    } else {
                        write!(out, " {cell} |").expect("write to string");
                    }
                }
            }
        }
        out.push('\n');
    }
    Ok(out)
}
