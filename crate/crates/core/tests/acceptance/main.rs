//! Acceptance checks. Each criterion prints one `PASS`/`FAIL` line; the
//! process exits non-zero if any fails.

// `ensure!(x <= tol)` must fail on NaN, which is what the negation gives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]


use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slmeval_core::abx::{self, AbxReport};
use slmeval_core::lexsem::{paired_judgment_accuracy, ssimi_score};
use slmeval_core::matrix::FrameMatrix;
use slmeval_core::metric::{dtw_distance, frame_distance, pool, spearman};
use slmeval_core::quantize::{self, kmeans_fit_with, KMeansConfig, KMeansFit};
use slmeval_core::unitlm::{self, fit_ngram, score_sequences};
use slmeval_core::{
    AbxDataset, AbxMode, FeatureSequence, FrameMetric, JudgmentReport, Pooling, ScoreTable, SimilarityRecord,
    SimilarityReport, StimulusPair, Task, UnitSequence, Workers,
};
use synth::{gaussian_rows, AbxCorpus, AbxSpec, PatternGenerator, SHIFT};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn workers(jobs: usize) -> Workers {
    Workers::new(jobs).expect("thread pool")
}

fn abx_report(corpus: &AbxCorpus, mode: AbxMode, metric: FrameMetric, w: &Workers) -> Result<AbxReport, String> {
    let data = AbxDataset::from_map(corpus.items.clone(), &corpus.features).map_err(|e| e.to_string())?;
    abx::evaluate(&data, mode, metric, w).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- 1

const ORACLE_SPEAKERS: [&str; 3] = ["s1", "s2", "s3"];
const ORACLE_CONTEXTS: [(&str, &str); 4] = [("b", "d"), ("d", "b"), ("g", "k"), ("k", "t")];
const ORACLE_PHONES: [&str; 3] = ["a", "e", "i"];

fn oracle_corpus(trial: u64) -> AbxCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(1_000 + trial);
    let n_contexts = rng.random_range(1..=ORACLE_CONTEXTS.len());
    let spec = AbxSpec {
        speakers: &ORACLE_SPEAKERS,
        contexts: &ORACLE_CONTEXTS[..n_contexts],
        phones: &ORACLE_PHONES,
    };
    let n_items = rng.random_range(12..=40);
    synth::random_abx_corpus(&mut rng, &spec, n_items, 8)
}

const ORACLE_METRICS: [FrameMetric; 3] = [FrameMetric::Angular, FrameMetric::Euclidean, FrameMetric::Cosine];

fn abx_oracle_equivalence() -> Outcome {
    let w = workers(4);
    let mut compared = 0;
    for trial in 0..20 {
        let corpus = oracle_corpus(trial);
        let metric = ORACLE_METRICS[trial as usize % 3];
        for mode in [AbxMode::Within, AbxMode::Across] {
            let expected = oracle::cell_scores(&corpus.items, &corpus.features, mode, metric);
            if expected.is_empty() {
                ensure!(
                    abx_report(&corpus, mode, metric, &w).is_err(),
                    "trial {trial} {mode}: oracle found no triplets but the engine produced a report"
                );
                continue;
            }
            let report = abx_report(&corpus, mode, metric, &w)?;
            let got: oracle::OracleScores = report
                .cells
                .iter()
                .map(|c| {
                    let key = (
                        c.prev_phone.clone(),
                        c.next_phone.clone(),
                        c.phone_a.clone(),
                        c.phone_b.clone(),
                        c.speaker_ax.clone(),
                        c.speaker_x.clone().unwrap_or_default(),
                    );
                    (key, c.score)
                })
                .collect();
            ensure!(
                got == expected,
                "trial {trial} {mode}: cell scores differ from the oracle"
            );
            let want = oracle::error_rate(&expected);
            ensure!(
                report.error_rate == want,
                "trial {trial} {mode}: error {} vs oracle {want}",
                report.error_rate
            );
            compared += 1;
        }
    }
    Ok(format!("{compared} reports identical to the naive triplet oracle"))
}

// ---------------------------------------------------------------- 2

const BALANCED_SPEAKERS: [&str; 2] = ["s1", "s2"];
const BALANCED_CONTEXTS: [(&str, &str); 2] = [("x", "y"), ("y", "x")];
const BALANCED_PHONES: [&str; 2] = ["A", "B"];
const BALANCED: AbxSpec<'static> = AbxSpec {
    speakers: &BALANCED_SPEAKERS,
    contexts: &BALANCED_CONTEXTS,
    phones: &BALANCED_PHONES,
};

fn token_seed(speaker: &str, context: usize, token: usize) -> u64 {
    let s = speaker.bytes().fold(0u64, |h, b| h * 31 + b as u64);
    s * 1_000 + context as u64 * 100 + token as u64
}

fn abx_extremes() -> Outcome {
    let w = workers(2);
    let separated = synth::balanced_abx_corpus(&BALANCED, 3, |s, c, p, t| {
        let mut rng = ChaCha8Rng::seed_from_u64(token_seed(s, c, t) + if p == "A" { 0 } else { 7 });
        let axis = if p == "A" { 0 } else { 1 };
        gaussian_rows(&mut rng, 3 + t, 8)
            .into_iter()
            .map(|mut r| {
                r.iter_mut().for_each(|v| *v *= 0.1);
                r[axis] += 10.0;
                r
            })
            .collect()
    });
    // B tokens are exact copies of the A token with the same index.
    let copies = synth::balanced_abx_corpus(&BALANCED, 3, |s, c, _, t| {
        gaussian_rows(&mut ChaCha8Rng::seed_from_u64(token_seed(s, c, t)), 3 + t, 8)
    });
    // Every token of a speaker and context is the same template.
    let identical = synth::balanced_abx_corpus(&BALANCED, 3, |s, c, _, _| {
        gaussian_rows(&mut ChaCha8Rng::seed_from_u64(token_seed(s, c, 0)), 4, 8)
    });
    let mut got = Vec::new();
    for (name, corpus, mode, want) in [
        ("separated/within", &separated, AbxMode::Within, 0.0),
        ("separated/across", &separated, AbxMode::Across, 0.0),
        ("copies/across", &copies, AbxMode::Across, 0.5),
        ("identical/within", &identical, AbxMode::Within, 0.5),
    ] {
        let e = abx_report(corpus, mode, FrameMetric::Angular, &w)?.error_rate;
        ensure!(e == want, "{name}: error {e}, expected {want}");
        got.push(format!("{name}={e}"));
    }
    Ok(got.join(" "))
}

// ---------------------------------------------------------------- 3

fn random_pairs(rng: &mut ChaCha8Rng, n: usize, grouped: bool) -> (Vec<StimulusPair>, ScoreTable) {
    let mut pairs = Vec::with_capacity(n);
    let mut scores = BTreeMap::new();
    for i in 0..n {
        let (pos, neg) = (format!("p{i:05}"), format!("n{i:05}"));
        scores.insert(pos.clone(), -50.0 * rng.random::<f64>());
        scores.insert(neg.clone(), -50.0 * rng.random::<f64>());
        pairs.push(StimulusPair {
            pair_id: format!("pair{i:05}"),
            positive_id: pos,
            negative_id: neg,
            group: grouped.then(|| format!("g{}", i % 12)),
        });
    }
    (pairs, ScoreTable::from_map(scores).unwrap())
}

fn random_similarity(
    rng: &mut ChaCha8Rng,
    n_pairs: usize,
) -> (
    Vec<SimilarityRecord>,
    BTreeMap<String, slmeval_core::metric::PooledEmbedding>,
) {
    let n_words = 40;
    let mut seen = std::collections::BTreeSet::new();
    let mut records = Vec::new();
    let mut embeddings = BTreeMap::new();
    while records.len() < n_pairs {
        let (i, j) = (rng.random_range(0..n_words), rng.random_range(0..n_words));
        if i == j || !seen.insert((i.min(j), i.max(j))) {
            continue;
        }
        let k = records.len();
        let (ta, tb) = (format!("r{k:03}a"), format!("r{k:03}b"));
        for t in [&ta, &tb] {
            let len = rng.random_range(3..10);
            let seq = FeatureSequence::from_rows(t.clone(), SHIFT, &gaussian_rows(rng, len, 16)).unwrap();
            embeddings.insert(t.clone(), pool(&seq, Pooling::Mean));
        }
        records.push(SimilarityRecord {
            token_a_id: ta,
            token_b_id: tb,
            word_a: format!("w{i:02}"),
            word_b: format!("w{j:02}"),
            human_score: 10.0 * rng.random::<f64>(),
            dataset: "random".into(),
        });
    }
    (records, embeddings)
}

fn random_abx_corpus(seed: u64) -> AbxCorpus {
    let spec = AbxSpec {
        speakers: &["s1", "s2", "s3"],
        contexts: &[("b", "d"), ("g", "k")],
        phones: &["a", "e", "i"],
    };
    synth::balanced_abx_corpus(&spec, 5, |s, c, p, t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (token_seed(s, c, t) * 10 + p.as_bytes()[0] as u64));
        let len = rng.random_range(3..=6);
        gaussian_rows(&mut rng, len, 8)
    })
}

fn chance_levels() -> Outcome {
    let w = workers(4);
    let corpus = random_abx_corpus(0xabc);
    let within = abx_report(&corpus, AbxMode::Within, FrameMetric::Angular, &w)?.error_rate;
    let across = abx_report(&corpus, AbxMode::Across, FrameMetric::Angular, &w)?.error_rate;
    ensure!((within - 0.5).abs() <= 0.05, "ABX within {within}");
    ensure!((across - 0.5).abs() <= 0.05, "ABX across {across}");

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (pairs, scores) = random_pairs(&mut rng, 10_000, false);
    let lexical = paired_judgment_accuracy(&pairs, &scores, Task::Lexical)
        .map_err(|e| e.to_string())?
        .accuracy;
    let (pairs, scores) = random_pairs(&mut rng, 10_000, true);
    let syntactic = paired_judgment_accuracy(&pairs, &scores, Task::Syntactic)
        .map_err(|e| e.to_string())?
        .accuracy;
    ensure!((lexical - 0.5).abs() <= 0.02, "lexical accuracy {lexical}");
    ensure!((syntactic - 0.5).abs() <= 0.02, "syntactic accuracy {syntactic}");

    let (records, embeddings) = random_similarity(&mut rng, 200);
    let ssimi = ssimi_score(&records, &embeddings).map_err(|e| e.to_string())?.overall;
    ensure!(ssimi.abs() <= 15.0, "sSIMI {ssimi}");
    Ok(format!(
        "ABX within={within:.3} across={across:.3} lexical={lexical:.4} syntactic={syntactic:.4} sSIMI={ssimi:.2}"
    ))
}

// ---------------------------------------------------------------- 4

/// Minimum mean cost over every monotone path, by explicit enumeration.
fn brute_force_dtw(cost: &[Vec<f64>]) -> f64 {
    fn walk(cost: &[Vec<f64>], i: usize, j: usize, path: &mut Vec<f64>, best: &mut f64) {
        path.push(cost[i][j]);
        let (n, m) = (cost.len(), cost[0].len());
        if i + 1 == n && j + 1 == m {
            let mean = path.iter().sum::<f64>() / path.len() as f64;
            if mean < *best {
                *best = mean;
            }
        } else {
            if i + 1 < n && j + 1 < m {
                walk(cost, i + 1, j + 1, path, best);
            }
            if j + 1 < m {
                walk(cost, i, j + 1, path, best);
            }
            if i + 1 < n {
                walk(cost, i + 1, j, path, best);
            }
        }
        path.pop();
    }
    let mut best = f64::INFINITY;
    walk(cost, 0, 0, &mut Vec::new(), &mut best);
    best
}

fn dtw_brute_force() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let metric = ORACLE_METRICS[trial % 3];
        let dim = rng.random_range(1..=4);
        let (n, m) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let x = gaussian_rows(&mut rng, n, dim);
        let y = gaussian_rows(&mut rng, m, dim);
        let cost: Vec<Vec<f64>> = x
            .iter()
            .map(|u| y.iter().map(|v| frame_distance(u, v, metric).unwrap()).collect())
            .collect();
        let want = brute_force_dtw(&cost);
        let got = dtw_distance(
            &FrameMatrix::from_rows(&x).unwrap(),
            &FrameMatrix::from_rows(&y).unwrap(),
            metric,
        )
        .map_err(|e| e.to_string())?;
        let diff = (got - want).abs();
        ensure!(
            diff <= 1e-12 * want.max(1.0),
            "trial {trial} ({n}x{m}, {metric}): {got} vs {want}"
        );
        worst = worst.max(diff);
    }
    Ok(format!("200 pairs, max |diff| = {worst:.1e}"))
}

// ---------------------------------------------------------------- 5

fn spearman_fixtures() -> Outcome {
    let xs: Vec<f64> = (1..=50).map(f64::from).collect();
    let up: Vec<f64> = xs.iter().map(|x| (x / 5.0).exp()).collect();
    let down: Vec<f64> = xs.iter().map(|x| -x * x * x).collect();
    let pos = 100.0 * spearman(&xs, &up).map_err(|e| e.to_string())?;
    let neg = 100.0 * spearman(&xs, &down).map_err(|e| e.to_string())?;
    ensure!(format!("{pos:.2}") == "100.00", "increasing gave {pos}");
    ensure!(format!("{neg:.2}") == "-100.00", "decreasing gave {neg}");
    // ranks x = (1, 2.5, 2.5, 4), y = (1, 2, 3, 4): Sxy = 4.5, Sxx = 4.5, Syy = 5
    let tied = spearman(&[1.0, 2.0, 2.0, 4.0], &[10.0, 20.0, 30.0, 40.0]).map_err(|e| e.to_string())?;
    let hand = 4.5 / (4.5f64 * 5.0).sqrt();
    ensure!((tied - hand).abs() <= 1e-9, "tied fixture {tied} vs {hand}");
    Ok(format!("{pos:.2} / {neg:.2}, tied {tied:.6}"))
}

// ---------------------------------------------------------------- 6

fn kmeans_fits(w: &Workers) -> Result<Vec<KMeansFit>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    (0..50)
        .map(|i| {
            let n = rng.random_range(50..=300);
            let dim = rng.random_range(1..=5);
            let k = rng.random_range(2..=12);
            let frames = FrameMatrix::from_rows(&gaussian_rows(&mut rng, n, dim)).unwrap();
            let config = KMeansConfig {
                k,
                max_iters: 100,
                seed: i,
            };
            kmeans_fit_with(&frames, &config, w).map_err(|e| e.to_string())
        })
        .collect()
}

fn kmeans_properties() -> Outcome {
    for (i, fit) in kmeans_fits(&workers(4))?.iter().enumerate() {
        let h = &fit.inertia_history;
        ensure!(h.windows(2).all(|w| w[1] <= w[0]), "fit {i}: inertia rose: {h:?}");
    }
    // Seven distinct points, each repeated four times.
    let distinct: Vec<Vec<f64>> = (0..7)
        .flat_map(|p| vec![vec![p as f64 * 3.0, (p * p) as f64]; 4])
        .collect();
    let distinct = FrameMatrix::from_rows(&distinct).unwrap();
    let line = FrameMatrix::from_rows(&[[0.0], [1.0], [9.0], [10.0]]).unwrap();
    for seed in 0..20 {
        let cfg = KMeansConfig {
            k: 7,
            max_iters: 100,
            seed,
        };
        let fit = kmeans_fit_with(&distinct, &cfg, &Workers::sequential()).map_err(|e| e.to_string())?;
        ensure!(
            fit.codebook.inertia() == 0.0,
            "seed {seed}: k = #points left inertia {}",
            fit.codebook.inertia()
        );
        let cfg = KMeansConfig {
            k: 2,
            max_iters: 100,
            seed,
        };
        let cb = kmeans_fit_with(&line, &cfg, &Workers::sequential())
            .map_err(|e| e.to_string())?
            .codebook;
        let mut c = [cb.centroid(0)[0], cb.centroid(1)[0]];
        c.sort_by(f64::total_cmp);
        ensure!(c == [0.5, 9.5], "seed {seed}: {{0,1,9,10}} gave {c:?}");
    }
    Ok("50 monotone fits; zero inertia at k = #points; {0,1,9,10} -> {0.5, 9.5}".into())
}

// ---------------------------------------------------------------- 7

fn ngram_normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0usize;
    for m in 0..20 {
        let vocab = rng.random_range(1..=8u32);
        let order = rng.random_range(1..=4);
        let discount = rng.random_range(0.05..0.95);
        let corpus: Vec<UnitSequence> = (0..rng.random_range(1..=30))
            .map(|i| {
                let len = rng.random_range(1..=12);
                UnitSequence::new(format!("u{i}"), (0..len).map(|_| rng.random_range(0..vocab)).collect()).unwrap()
            })
            .collect();
        let model = fit_ngram(&corpus, order, discount, vocab).map_err(|e| e.to_string())?;
        let mut histories: Vec<Vec<u32>> = model.observed_histories().map(<[u32]>::to_vec).collect();
        // unseen histories, including ones mixing padding and units
        for _ in 0..10 {
            let len = rng.random_range(0..order);
            histories.push((0..len).map(|_| rng.random_range(0..=vocab + 1)).collect());
        }
        for h in &histories {
            let total: f64 = model.distribution(h).iter().sum();
            ensure!((total - 1.0).abs() <= 1e-9, "model {m} history {h:?}: sum {total}");
            checked += 1;
        }
    }
    let hand = fit_ngram(&[UnitSequence::new("u", vec![0, 1, 0, 1]).unwrap()], 1, 0.75, 2).unwrap();
    let p0 = hand.prob(0, &[]);
    ensure!((p0 - 0.4).abs() <= 1e-12, "unigram P(0) = {p0}");
    Ok(format!("{checked} distributions sum to 1; P(0) = {p0}"))
}

// ---------------------------------------------------------------- 8

const PIPELINE_SEED: u64 = 88;

struct PipelineOutput {
    codebook_file: String,
    model_file: String,
    scores: ScoreTable,
    judgment: JudgmentReport,
    similarity: SimilarityReport,
    pairs: Vec<StimulusPair>,
}

impl PipelineOutput {
    fn transcript(&self) -> String {
        format!(
            "{}\n{}\n{}\n{}\n{}",
            self.codebook_file,
            self.model_file,
            serde_json::to_string(&self.scores).unwrap(),
            serde_json::to_string(&self.judgment).unwrap(),
            serde_json::to_string(&self.similarity).unwrap()
        )
    }
}

fn sentence(generator: &PatternGenerator, rng: &mut ChaCha8Rng, id: String, states: &[usize]) -> FeatureSequence {
    let rows: Vec<Vec<f64>> = states.iter().flat_map(|&s| generator.state_segment(rng, s)).collect();
    FeatureSequence::from_rows(id, SHIFT, &rows).unwrap()
}

/// Features → k-means → units → n-gram → paired judgments, plus pooled
/// "word" embeddings → sSIMI, all on the patterned generator.
fn pipeline(w: &Workers) -> Result<PipelineOutput, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(PIPELINE_SEED);
    let generator = PatternGenerator::new(&mut rng, 8);
    let e = |e: &dyn std::fmt::Display| e.to_string();

    let train: Vec<FeatureSequence> = (0..300)
        .map(|i| {
            let len = rng.random_range(4..=8);
            let states = PatternGenerator::legal_states(&mut rng, len);
            sentence(&generator, &mut rng, format!("train{i:03}"), &states)
        })
        .collect();

    let mut test = Vec::new();
    let mut pairs = Vec::new();
    for i in 0..200 {
        let len = rng.random_range(4..=8);
        let states = PatternGenerator::legal_states(&mut rng, len);
        let order = PatternGenerator::illegal_permutation(&mut rng, &states).ok_or("no illegal permutation")?;
        let segments: Vec<Vec<Vec<f64>>> = states.iter().map(|&s| generator.state_segment(&mut rng, s)).collect();
        let (pos, neg) = (format!("good{i:03}"), format!("bad{i:03}"));
        let good: Vec<Vec<f64>> = segments.concat();
        let bad: Vec<Vec<f64>> = order.iter().flat_map(|&k| segments[k].clone()).collect();
        test.push(FeatureSequence::from_rows(pos.clone(), SHIFT, &good).unwrap());
        test.push(FeatureSequence::from_rows(neg.clone(), SHIFT, &bad).unwrap());
        pairs.push(StimulusPair {
            pair_id: format!("pair{i:03}"),
            positive_id: pos,
            negative_id: neg,
            group: None,
        });
    }

    let k = 2 * synth::N_STATES;
    let frames = quantize::stack_frames(&train).map_err(|x| e(&x))?;
    let fit = kmeans_fit_with(
        &frames,
        &KMeansConfig {
            k,
            max_iters: 100,
            seed: PIPELINE_SEED,
        },
        w,
    )
    .map_err(|x| e(&x))?;
    let codebook = fit.codebook;
    let train_refs: Vec<&FeatureSequence> = train.iter().collect();
    let train_units = quantize::discretize_all(&train_refs, &codebook, true, w).map_err(|x| e(&x))?;
    let model = fit_ngram(&train_units, 3, unitlm::DEFAULT_DISCOUNT, k as u32).map_err(|x| e(&x))?;
    let test_refs: Vec<&FeatureSequence> = test.iter().collect();
    let test_units = quantize::discretize_all(&test_refs, &codebook, true, w).map_err(|x| e(&x))?;
    let scores = score_sequences(&model, &test_units, false, w).map_err(|x| e(&x))?;
    let judgment = paired_judgment_accuracy(&pairs, &scores, Task::Syntactic).map_err(|x| e(&x))?;

    let dir = tempfile::tempdir().map_err(|x| e(&x))?;
    let (cb_path, lm_path) = (dir.path().join("codebook.txt"), dir.path().join("model.txt"));
    quantize::write_codebook(&codebook, &cb_path).map_err(|x| e(&x))?;
    unitlm::write_model(&model, &lm_path).map_err(|x| e(&x))?;
    let codebook_file = std::fs::read_to_string(&cb_path).map_err(|x| e(&x))?;
    let model_file = std::fs::read_to_string(&lm_path).map_err(|x| e(&x))?;

    // Words mix states 0 and 1 with weight p; gold similarity falls with |Δp|.
    let n_words = 20;
    let weight = |w: usize| w as f64 / (n_words - 1) as f64;
    let mut records = Vec::new();
    let mut embeddings = BTreeMap::new();
    for i in 0..n_words {
        for j in i + 1..n_words {
            let (ta, tb) = (format!("tok{i:02}_{j:02}a"), format!("tok{i:02}_{j:02}b"));
            for (t, word) in [(&ta, i), (&tb, j)] {
                let rows = generator.mixture_token(&mut rng, weight(word), 30);
                let seq = FeatureSequence::from_rows(t.clone(), SHIFT, &rows).unwrap();
                embeddings.insert(t.clone(), pool(&seq, Pooling::Mean));
            }
            records.push(SimilarityRecord {
                token_a_id: ta,
                token_b_id: tb,
                word_a: format!("w{i:02}"),
                word_b: format!("w{j:02}"),
                human_score: 10.0 * (1.0 - (weight(i) - weight(j)).abs()),
                dataset: "synthetic".into(),
            });
        }
    }
    let similarity = ssimi_score(&records, &embeddings).map_err(|x| e(&x))?;
    Ok(PipelineOutput {
        codebook_file,
        model_file,
        scores,
        judgment,
        similarity,
        pairs,
    })
}

fn end_to_end() -> Outcome {
    let out = pipeline(&workers(4))?;
    let acc = out.judgment.accuracy;
    let rho = out.similarity.overall;
    ensure!(acc >= 0.90, "syntactic accuracy {acc}");
    ensure!(rho >= 50.0, "sSIMI {rho}");
    Ok(format!(
        "accuracy {acc:.3} over {} pairs, sSIMI {rho:.2}",
        out.judgment.n_pairs
    ))
}

// ---------------------------------------------------------------- 9

fn determinism() -> Outcome {
    let run = |jobs: usize| -> Result<Vec<String>, String> {
        let w = workers(jobs);
        let mut out = Vec::new();
        for trial in 0..20 {
            let corpus = oracle_corpus(trial);
            for mode in [AbxMode::Within, AbxMode::Across] {
                let r = abx_report(&corpus, mode, FrameMetric::Angular, &w);
                out.push(r.map_or_else(|e| e, |r| serde_json::to_string(&r).unwrap()));
            }
        }
        for fit in kmeans_fits(&w)? {
            out.push(format!(
                "{:?} {:?} {} {}",
                fit.codebook.centroids().as_slice(),
                fit.inertia_history,
                fit.iterations,
                fit.converged
            ));
        }
        out.push(pipeline(&w)?.transcript());
        Ok(out)
    };
    let one = run(1)?;
    let eight = run(8)?;
    ensure!(one.len() == eight.len(), "different number of outputs");
    for (i, (a, b)) in one.iter().zip(&eight).enumerate() {
        ensure!(a == b, "output {i} differs between 1 and 8 workers");
    }
    let bytes: usize = one.iter().map(String::len).sum();
    Ok(format!(
        "{} outputs ({bytes} bytes) identical for 1 and 8 workers",
        one.len()
    ))
}

// ---------------------------------------------------------------- 10

fn invariances() -> Outcome {
    let w = workers(4);
    let mut reports = 0;
    for trial in 0..20 {
        let corpus = oracle_corpus(trial);
        let scaled = AbxCorpus {
            items: corpus.items.clone(),
            features: corpus
                .features
                .iter()
                .map(|(k, f)| (k.clone(), f.map_values(|v| v * 3.7).unwrap()))
                .collect(),
        };
        for mode in [AbxMode::Within, AbxMode::Across] {
            let (Ok(a), Ok(b)) = (
                abx_report(&corpus, mode, FrameMetric::Angular, &w),
                abx_report(&scaled, mode, FrameMetric::Angular, &w),
            ) else {
                continue;
            };
            ensure!(
                serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap(),
                "trial {trial} {mode}: scaling by 3.7 changed the report"
            );
            reports += 1;
        }
    }

    let out = pipeline(&w)?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (pairs, scores) = random_pairs(&mut rng, 2_000, true);
    for (name, pairs, scores) in [("pipeline", &out.pairs, &out.scores), ("random", &pairs, &scores)] {
        let exp = scores.map_scores(f64::exp).map_err(|e| e.to_string())?;
        for task in [Task::Lexical, Task::Syntactic] {
            let a = paired_judgment_accuracy(pairs, scores, task).map_err(|e| e.to_string())?;
            let b = paired_judgment_accuracy(pairs, &exp, task).map_err(|e| e.to_string())?;
            ensure!(a == b, "{name} {task:?}: exp changed {} -> {}", a.accuracy, b.accuracy);
        }
    }
    Ok(format!(
        "{reports} ABX reports unchanged by scaling; accuracies unchanged by exp"
    ))
}

// ----------------------------------------------------------------

fn main() {
    let criteria: [Check; 10] = [
        ("ABX matches naive triplet oracle", abx_oracle_equivalence),
        ("ABX extremes", abx_extremes),
        ("chance-level baselines", chance_levels),
        ("DTW matches brute force", dtw_brute_force),
        ("Spearman fixtures", spearman_fixtures),
        ("k-means properties", kmeans_properties),
        ("n-gram normalization", ngram_normalization),
        ("end-to-end pipeline", end_to_end),
        ("determinism across worker counts", determinism),
        ("invariances", invariances),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2}: {name} — {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2}: {name} — {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
