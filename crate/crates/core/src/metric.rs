//! Numeric kernels shared by the metrics: frame distances, DTW, temporal
//! pooling and rank correlation.

use serde::{Deserialize, Serialize};

use crate::matrix::FrameMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero-norm vector under {0} distance")]
    ZeroNorm(FrameMetric),
    #[error("empty sequence")]
    EmptySequence,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("correlation needs at least 2 observations, got {0}")]
    TooFew(usize),
    #[error("constant input: correlation undefined")]
    Constant,
}

/// Distance between two embedding frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameMetric {
    /// `arccos(cos θ) / π`, in `[0, 1]`.
    #[default]
    Angular,
    /// `1 − cos θ`, in `[0, 2]`.
    Cosine,
    Euclidean,
}

impl FrameMetric {
    pub fn name(self) -> &'static str {
        match self {
            FrameMetric::Angular => "angular",
            FrameMetric::Cosine => "cosine",
            FrameMetric::Euclidean => "euclidean",
        }
    }

    fn needs_norm(self) -> bool {
        !matches!(self, FrameMetric::Euclidean)
    }
}

impl std::fmt::Display for FrameMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FrameMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "angular" => Ok(FrameMetric::Angular),
            "cosine" => Ok(FrameMetric::Cosine),
            "euclidean" => Ok(FrameMetric::Euclidean),
            _ => Err(format!("unknown metric {s:?}")),
        }
    }
}

#[inline]
fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

#[inline]
fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Distance from precomputed norms. `nu`/`nv` are ignored for euclidean.
#[inline]
fn distance_with_norms(u: &[f64], v: &[f64], nu: f64, nv: f64, metric: FrameMetric) -> f64 {
    match metric {
        FrameMetric::Angular => {
            // arccos(u·v / |u||v|) evaluated as 2·atan2(‖|v|u − |u|v‖, ‖|v|u + |u|v‖),
            // which stays accurate near 0 and π and is exactly 0 for u = v.
            let (mut diff, mut sum) = (0.0, 0.0);
            for (a, b) in u.iter().zip(v) {
                let (x, y) = (nv * a, nu * b);
                diff += (x - y) * (x - y);
                sum += (x + y) * (x + y);
            }
            2.0 * diff.sqrt().atan2(sum.sqrt()) / std::f64::consts::PI
        }
        FrameMetric::Cosine => {
            let c = (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0);
            1.0 - c
        }
        FrameMetric::Euclidean => u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
    }
}

fn frame_norms(m: &FrameMatrix, metric: FrameMetric) -> Result<Vec<f64>, MetricError> {
    if !metric.needs_norm() {
        return Ok(vec![0.0; m.rows()]);
    }
    m.iter_rows()
        .map(|r| {
            let n = norm(r);
            if n > 0.0 {
                Ok(n)
            } else {
                Err(MetricError::ZeroNorm(metric))
            }
        })
        .collect()
}

pub fn frame_distance(u: &[f64], v: &[f64], metric: FrameMetric) -> Result<f64, MetricError> {
    if u.len() != v.len() {
        return Err(MetricError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (nu, nv) = if metric.needs_norm() {
        let (nu, nv) = (norm(u), norm(v));
        if nu == 0.0 || nv == 0.0 {
            return Err(MetricError::ZeroNorm(metric));
        }
        (nu, nv)
    } else {
        (0.0, 0.0)
    };
    Ok(distance_with_norms(u, v, nu, nv, metric))
}

/// Pairwise frame cost matrix, row-major `x.rows() × y.rows()`.
fn cost_matrix(x: &FrameMatrix, y: &FrameMatrix, metric: FrameMetric) -> Result<Vec<f64>, MetricError> {
    if x.dim() != y.dim() {
        return Err(MetricError::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    if x.is_empty() || y.is_empty() {
        return Err(MetricError::EmptySequence);
    }
    let nx = frame_norms(x, metric)?;
    let ny = frame_norms(y, metric)?;
    let mut cost = Vec::with_capacity(x.rows() * y.rows());
    for (xi, &nu) in x.iter_rows().zip(&nx) {
        for (yj, &nv) in y.iter_rows().zip(&ny) {
            cost.push(distance_with_norms(xi, yj, nu, nv, metric));
        }
    }
    Ok(cost)
}

/// DTW distance: the smallest mean frame cost over all monotone alignment
/// paths from `(0, 0)` to `(n−1, m−1)` with steps `(1,0)`, `(0,1)`, `(1,1)`.
///
/// Minimising the mean (rather than the sum, then dividing) needs the path
/// length as an extra DP dimension. Layer `L` holds, for every cell, the
/// smallest cost sum of a path with exactly `L` cells ending there; the
/// answer is `min_L sum_L / L`. Cost is `O(n·m·(n+m))` time, `O(n·m)` memory.
pub fn dtw_distance(x: &FrameMatrix, y: &FrameMatrix, metric: FrameMetric) -> Result<f64, MetricError> {
    let cost = cost_matrix(x, y, metric)?;
    Ok(min_mean_path_value(&cost, x.rows(), y.rows()))
}

fn min_mean_path_value(cost: &[f64], n: usize, m: usize) -> f64 {
    let mut prev = vec![f64::INFINITY; n * m];
    let mut cur = vec![f64::INFINITY; n * m];
    prev[0] = cost[0];
    let mut best = if n == 1 && m == 1 { cost[0] } else { f64::INFINITY };
    for len in 2..=(n + m - 1) {
        for i in 0..n {
            for j in 0..m {
                let idx = i * m + j;
                // A path with `len` cells reaches only cells with i + j + 1 >= len.
                if i + j + 1 < len || i.max(j) + 1 > len {
                    cur[idx] = f64::INFINITY;
                    continue;
                }
                let mut p = f64::INFINITY;
                if i > 0 && j > 0 {
                    p = p.min(prev[idx - m - 1]);
                }
                if j > 0 {
                    p = p.min(prev[idx - 1]);
                }
                if i > 0 {
                    p = p.min(prev[idx - m]);
                }
                cur[idx] = p + cost[idx];
            }
        }
        let end = cur[n * m - 1];
        if end.is_finite() {
            let mean = end / len as f64;
            if mean < best {
                best = mean;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// An optimal alignment: the mean cost and the path cells in order.
#[derive(Debug, Clone, PartialEq)]
pub struct DtwAlignment {
    pub distance: f64,
    pub path: Vec<(usize, usize)>,
}

/// Like [`dtw_distance`] but also recovers the path.
///
/// Among equally good path lengths the shortest wins; while backtracking,
/// ties between predecessors are broken diagonal first, then left
/// `(i, j−1)`, then up `(i−1, j)`. Keeps the full `(n+m) × n × m` table.
pub fn dtw_alignment(x: &FrameMatrix, y: &FrameMatrix, metric: FrameMetric) -> Result<DtwAlignment, MetricError> {
    let cost = cost_matrix(x, y, metric)?;
    let (n, m) = (x.rows(), y.rows());
    let cells = n * m;
    let max_len = n + m - 1;
    // table[(len - 1) * cells + idx]
    let mut table = vec![f64::INFINITY; max_len * cells];
    table[0] = cost[0];
    for len in 2..=max_len {
        let (done, rest) = table.split_at_mut((len - 1) * cells);
        let prev = &done[(len - 2) * cells..];
        let cur = &mut rest[..cells];
        for i in 0..n {
            for j in 0..m {
                let idx = i * m + j;
                let mut p = f64::INFINITY;
                if i > 0 && j > 0 {
                    p = p.min(prev[idx - m - 1]);
                }
                if j > 0 {
                    p = p.min(prev[idx - 1]);
                }
                if i > 0 {
                    p = p.min(prev[idx - m]);
                }
                cur[idx] = p + cost[idx];
            }
        }
    }
    let mut best_len = 0;
    let mut best = f64::INFINITY;
    for len in 1..=max_len {
        let v = table[(len - 1) * cells + cells - 1];
        if v.is_finite() && v / (len as f64) < best {
            best = v / len as f64;
            best_len = len;
        }
    }
    let mut path = Vec::with_capacity(best_len);
    let (mut i, mut j) = (n - 1, m - 1);
    path.push((i, j));
    for len in (1..best_len).rev() {
        let layer = &table[(len - 1) * cells..len * cells];
        let mut cands = Vec::with_capacity(3);
        if i > 0 && j > 0 {
            cands.push((i - 1, j - 1));
        }
        if j > 0 {
            cands.push((i, j - 1));
        }
        if i > 0 {
            cands.push((i - 1, j));
        }
        let mut pick = cands[0];
        for &c in &cands[1..] {
            if layer[c.0 * m + c.1] < layer[pick.0 * m + pick.1] {
                pick = c;
            }
        }
        (i, j) = pick;
        path.push(pick);
    }
    path.reverse();
    debug_assert_eq!(path[0], (0, 0));
    Ok(DtwAlignment { distance: best, path })
}

/// Temporal pooling over the frame axis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    #[default]
    Mean,
    Max,
    Min,
}

impl std::fmt::Display for Pooling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pooling::Mean => "mean",
            Pooling::Max => "max",
            Pooling::Min => "min",
        })
    }
}

impl std::str::FromStr for Pooling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Pooling::Mean),
            "max" => Ok(Pooling::Max),
            "min" => Ok(Pooling::Min),
            _ => Err(format!("unknown pooling {s:?}")),
        }
    }
}

/// A whole token summarised as one vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledEmbedding {
    pub token_id: String,
    pub vector: Vec<f64>,
    pub pooling: Pooling,
}

pub fn pool_frames(frames: &FrameMatrix, pooling: Pooling) -> Result<Vec<f64>, MetricError> {
    if frames.is_empty() {
        return Err(MetricError::EmptySequence);
    }
    let mut acc = frames.row(0).to_vec();
    for row in frames.iter_rows().skip(1) {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a = match pooling {
                Pooling::Mean => *a + v,
                Pooling::Max => a.max(v),
                Pooling::Min => a.min(v),
            };
        }
    }
    if pooling == Pooling::Mean {
        let t = frames.rows() as f64;
        acc.iter_mut().for_each(|a| *a /= t);
    }
    Ok(acc)
}

pub fn pool(seq: &crate::corpus_io::FeatureSequence, pooling: Pooling) -> PooledEmbedding {
    PooledEmbedding {
        token_id: seq.utterance_id().to_string(),
        vector: pool_frames(seq.frames(), pooling).expect("feature sequences are non-empty"),
        pooling,
    }
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, MetricError> {
    frame_distance(u, v, FrameMetric::Cosine).map(|d| 1.0 - d)
}

/// Average ranks (1-based); tied values share the mean of their rank span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, MetricError> {
    if xs.len() != ys.len() {
        return Err(MetricError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(MetricError::TooFew(xs.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::Constant);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, MetricError> {
    if xs.len() != ys.len() {
        return Err(MetricError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(MetricError::TooFew(xs.len()));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}
