//! Language-model-level metrics: paired judgment accuracy (spot-the-word,
//! acceptability) and similarity correlation against human judgments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus_io::{SimilarityRecord, StimulusPair};
use crate::metric::{cosine_similarity, spearman, MetricError, PooledEmbedding};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LexsemError {
    #[error("pair {pair_id:?}: no score for utterance {utterance:?}")]
    MissingScore { pair_id: String, utterance: String },
    #[error("no stimulus pairs")]
    NoPairs,
    #[error("non-finite score for {0:?}")]
    NonFiniteScore(String),
    #[error("no embedding for token {0:?}")]
    MissingEmbedding(String),
    #[error("dataset {dataset:?} has {n} distinct word pairs, need at least 2")]
    TooFewPairs { dataset: String, n: usize },
    #[error("dataset {dataset:?}: {source}")]
    Correlation {
        dataset: String,
        #[source]
        source: MetricError,
    },
    #[error("tokens {a:?} and {b:?}: {source}")]
    Similarity {
        a: String,
        b: String,
        #[source]
        source: MetricError,
    },
    #[error("no similarity records")]
    NoRecords,
}

/// Utterance id → pseudo-probability (usually a log-probability).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreTable(BTreeMap<String, f64>);

impl ScoreTable {
    pub fn from_map(map: BTreeMap<String, f64>) -> Result<Self, LexsemError> {
        if let Some((id, _)) = map.iter().find(|(_, v)| !v.is_finite()) {
            return Err(LexsemError::NonFiniteScore(id.clone()));
        }
        Ok(Self(map))
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.0.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Applies `f` to every score; fails if a result is not finite.
    pub fn map_scores(&self, f: impl Fn(f64) -> f64) -> Result<Self, LexsemError> {
        Self::from_map(self.0.iter().map(|(k, &v)| (k.clone(), f(v))).collect())
    }
}

impl FromIterator<(String, f64)> for ScoreTable {
    /// Panics on non-finite scores; use [`ScoreTable::from_map`] for untrusted input.
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        Self::from_map(iter.into_iter().collect()).expect("finite scores")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Lexical,
    Syntactic,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Lexical => "lexical",
            Task::Syntactic => "syntactic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentReport {
    pub task: Task,
    pub accuracy: f64,
    pub n_pairs: usize,
    pub per_group: BTreeMap<String, f64>,
}

/// Credit in half-units: 2 if positive wins, 1 on a tie, 0 otherwise.
fn half_credit(pos: f64, neg: f64) -> u64 {
    if pos > neg {
        2
    } else if pos == neg {
        1
    } else {
        0
    }
}

/// Fraction of pairs where the positive stimulus scores strictly higher
/// than the negative one; ties count one half.
pub fn paired_judgment_accuracy(
    pairs: &[StimulusPair],
    scores: &ScoreTable,
    task: Task,
) -> Result<JudgmentReport, LexsemError> {
    if pairs.is_empty() {
        return Err(LexsemError::NoPairs);
    }
    let lookup = |pair: &StimulusPair, id: &str| {
        scores.get(id).ok_or_else(|| LexsemError::MissingScore {
            pair_id: pair.pair_id.clone(),
            utterance: id.to_string(),
        })
    };
    let mut total = 0u64;
    let mut groups: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for p in pairs {
        let c = half_credit(lookup(p, &p.positive_id)?, lookup(p, &p.negative_id)?);
        total += c;
        if let Some(g) = &p.group {
            let e = groups.entry(g).or_default();
            e.0 += c;
            e.1 += 1;
        }
    }
    let frac = |half: u64, n: u64| half as f64 / (2 * n) as f64;
    Ok(JudgmentReport {
        task,
        accuracy: frac(total, pairs.len() as u64),
        n_pairs: pairs.len(),
        per_group: groups
            .into_iter()
            .map(|(g, (c, n))| (g.to_string(), frac(c, n)))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCorrelation {
    /// Spearman correlation × 100.
    pub rho_x100: f64,
    /// Word pairs after collapsing duplicates.
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub per_dataset: BTreeMap<String, DatasetCorrelation>,
    /// Mean of per-dataset `rho_x100`, weighted by `n_pairs`.
    pub overall: f64,
}

/// Order-independent mean: values are sorted before summation.
fn sorted_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Correlates cosine similarity of pooled token embeddings with human
/// similarity scores, per dataset.
///
/// Records sharing the same unordered word pair within a dataset (different
/// tokens, or the same words in the other order) are collapsed first by
/// averaging both the model and the human scores.
pub fn ssimi_score(
    records: &[SimilarityRecord],
    embeddings: &BTreeMap<String, PooledEmbedding>,
) -> Result<SimilarityReport, LexsemError> {
    if records.is_empty() {
        return Err(LexsemError::NoRecords);
    }
    let embedding = |id: &str| {
        embeddings
            .get(id)
            .map(|e| e.vector.as_slice())
            .ok_or_else(|| LexsemError::MissingEmbedding(id.to_string()))
    };
    // dataset -> (word, word) -> (model sims, human scores)
    type Collapsed<'a> = BTreeMap<&'a str, BTreeMap<(&'a str, &'a str), (Vec<f64>, Vec<f64>)>>;
    let mut collapsed: Collapsed = BTreeMap::new();
    for r in records {
        let sim = cosine_similarity(embedding(&r.token_a_id)?, embedding(&r.token_b_id)?).map_err(|source| {
            LexsemError::Similarity {
                a: r.token_a_id.clone(),
                b: r.token_b_id.clone(),
                source,
            }
        })?;
        let key = if r.word_a <= r.word_b {
            (r.word_a.as_str(), r.word_b.as_str())
        } else {
            (r.word_b.as_str(), r.word_a.as_str())
        };
        let e = collapsed.entry(&r.dataset).or_default().entry(key).or_default();
        e.0.push(sim);
        e.1.push(r.human_score);
    }

    let mut per_dataset = BTreeMap::new();
    for (dataset, pairs) in collapsed {
        if pairs.len() < 2 {
            return Err(LexsemError::TooFewPairs {
                dataset: dataset.to_string(),
                n: pairs.len(),
            });
        }
        let (mut model, mut human) = (Vec::new(), Vec::new());
        for (_, (mut m, mut h)) in pairs {
            model.push(sorted_mean(&mut m));
            human.push(sorted_mean(&mut h));
        }
        let rho = spearman(&human, &model).map_err(|source| LexsemError::Correlation {
            dataset: dataset.to_string(),
            source,
        })?;
        per_dataset.insert(
            dataset.to_string(),
            DatasetCorrelation {
                rho_x100: 100.0 * rho,
                n_pairs: model.len(),
            },
        );
    }
    let n_total: usize = per_dataset.values().map(|d| d.n_pairs).sum();
    let overall = per_dataset.values().map(|d| d.rho_x100 * d.n_pairs as f64).sum::<f64>() / n_total as f64;
    Ok(SimilarityReport { per_dataset, overall })
}
