//! `slmeval`: run the zero-resource benchmark metrics and the unit pipeline
//! stages from the command line.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use slmeval_core::corpus_io::{self, SubmissionRequirements, SubmissionTask};
use slmeval_core::leaderboard::{render_leaderboard, LeaderboardRow};
use slmeval_core::lexsem::{paired_judgment_accuracy, ssimi_score};
use slmeval_core::metric::pool;
use slmeval_core::quantize::{self, KMeansConfig};
use slmeval_core::unitlm::{self, fit_ngram};
use slmeval_core::{abx, AbxDataset, AbxMode, FeatureSequence, FrameMetric, Pooling, Task, Workers};

#[derive(Parser, Debug)]
#[command(name = "slmeval", version, about = "Zero-resource spoken language model benchmark")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Seconds per feature frame.
    #[arg(long, global = true, default_value_t = slmeval_core::DEFAULT_FRAME_SHIFT_S)]
    frame_shift: f64,
    /// Frame dissimilarity used by ABX.
    #[arg(long, global = true, default_value = "angular",
          value_parser = PossibleValuesParser::new(["angular", "cosine", "euclidean"]))]
    metric: String,
    /// Frame pooling for similarity embeddings.
    #[arg(long, global = true, default_value = "mean",
          value_parser = PossibleValuesParser::new(["mean", "max", "min"]))]
    pooling: String,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Random seed (k-means initialisation).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Collapse runs of repeated units when quantizing or reading units for ABX.
    #[arg(long, global = true)]
    dedup: bool,
    /// Divide LM log-probabilities by the number of scored positions.
    #[arg(long, global = true)]
    normalize: bool,
}

/// Validated run configuration shared by every subcommand.
#[derive(Debug, Clone, Copy)]
struct EvalConfig {
    frame_shift_s: f64,
    metric: FrameMetric,
    pooling: Pooling,
    jobs: usize,
    seed: u64,
    dedup: bool,
    normalize_lm: bool,
}

impl TryFrom<&ConfigArgs> for EvalConfig {
    type Error = anyhow::Error;

    fn try_from(a: &ConfigArgs) -> Result<Self> {
        ensure!(a.jobs >= 1, "--jobs must be at least 1");
        ensure!(
            a.frame_shift.is_finite() && a.frame_shift > 0.0,
            "--frame-shift must be a positive number of seconds, got {}",
            a.frame_shift
        );
        Ok(Self {
            frame_shift_s: a.frame_shift,
            metric: a.metric.parse().map_err(anyhow::Error::msg)?,
            pooling: a.pooling.parse().map_err(anyhow::Error::msg)?,
            jobs: a.jobs,
            seed: a.seed,
            dedup: a.dedup,
            normalize_lm: a.normalize,
        })
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Within,
    Across,
}

impl From<ModeArg> for AbxMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Within => AbxMode::Within,
            ModeArg::Across => AbxMode::Across,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// ABX discriminability error from an item file and features (or units).
    EvalAbx {
        #[arg(long)]
        items: PathBuf,
        /// Directory of `<utterance>.txt` feature files.
        #[arg(long, required_unless_present = "units", conflicts_with = "units")]
        features: Option<PathBuf>,
        /// Unit file, re-expanded to one-hot frames of dimension `--k`.
        #[arg(long, requires = "k")]
        units: Option<PathBuf>,
        /// Codebook size for `--units`.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// JSON report path (stdout if omitted).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write the per-phone-pair table as TSV.
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
    /// Spot-the-word accuracy from a pair table and per-stimulus scores.
    EvalLexical(JudgmentArgs),
    /// Acceptability-judgment accuracy from a pair table and per-stimulus scores.
    EvalSyntactic(JudgmentArgs),
    /// Similarity correlation of pooled token embeddings with human ratings.
    EvalSemantic {
        /// Similarity table (TSV).
        #[arg(long)]
        gold: PathBuf,
        /// Directory of `<token>.txt` feature files.
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit a k-means codebook on every frame of a feature directory.
    Cluster {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = quantize::DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = quantize::DEFAULT_MAX_ITERS)]
        max_iters: usize,
        /// Codebook file to write.
        #[arg(long)]
        output: PathBuf,
    },
    /// Map every frame of a feature directory to its nearest centroid.
    Quantize {
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Unit file to write.
        #[arg(long)]
        output: PathBuf,
    },
    /// Train an n-gram model on a unit file.
    LmTrain {
        #[arg(long)]
        units: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = unitlm::DEFAULT_DISCOUNT)]
        discount: f64,
        /// Number of distinct units (defaults to the largest unit id + 1).
        #[arg(long)]
        vocab_size: Option<u32>,
        /// Train on the units as given instead of collapsing repeated runs.
        #[arg(long)]
        keep_runs: bool,
        /// Model file to write.
        #[arg(long)]
        output: PathBuf,
    },
    /// Score every sequence of a unit file with an n-gram model.
    LmScore {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        units: PathBuf,
        /// Score the units as given instead of collapsing repeated runs.
        #[arg(long)]
        keep_runs: bool,
        /// Score file to write (stdout if omitted).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a submission directory's layout and metadata.
    Validate {
        #[arg(long)]
        root: PathBuf,
        /// Tasks that must be present (default: all).
        #[arg(long, value_delimiter = ',',
              value_parser = PossibleValuesParser::new(["phonetic", "lexical", "syntactic", "semantic"]))]
        require: Vec<String>,
    },
    /// Render leaderboard rows (JSON objects or arrays) as a markdown table.
    Leaderboard {
        #[arg(long, num_args = 1.., required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct JudgmentArgs {
    /// Pair table (TSV).
    #[arg(long)]
    pairs: PathBuf,
    /// Score file: one `<stimulus-id> <log-probability>` per line.
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn read_units(path: &Path, dedup: bool) -> Result<Vec<quantize::UnitSequence>> {
    let seqs = quantize::read_unit_file(path)?;
    Ok(if dedup {
        seqs.iter().map(|s| s.dedup()).collect()
    } else {
        seqs
    })
}

fn judgment(args: &JudgmentArgs, task: Task) -> Result<()> {
    let pairs = corpus_io::parse_pair_table(&args.pairs)?;
    let scores = corpus_io::read_score_file(&args.scores)?;
    let report = paired_judgment_accuracy(&pairs, &scores, task)?;
    write_output(args.output.as_deref(), &to_json(&report)?)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = EvalConfig::try_from(&cli.config)?;
    let workers = Workers::new(cfg.jobs)?;
    match cli.command {
        Command::EvalAbx {
            items,
            features,
            units,
            k,
            mode,
            output,
            tsv,
        } => {
            let items = corpus_io::parse_item_file(&items)?;
            let feats: BTreeMap<String, FeatureSequence> = match (features, units, k) {
                (Some(dir), _, _) => corpus_io::read_feature_dir(&dir, cfg.frame_shift_s)?,
                (None, Some(path), Some(k)) => read_units(&path, cfg.dedup)?
                    .iter()
                    .map(|s| Ok((s.utterance_id.clone(), s.to_one_hot(k, cfg.frame_shift_s)?)))
                    .collect::<Result<_>>()?,
                _ => bail!("eval-abx needs --features, or --units with --k"),
            };
            let data = AbxDataset::from_map(items, &feats)?;
            let report = abx::evaluate(&data, mode.into(), cfg.metric, &workers)?;
            if let Some(path) = tsv {
                write_output(Some(&path), &report.to_tsv())?;
            }
            write_output(output.as_deref(), &to_json(&report)?)
        }
        Command::EvalLexical(args) => judgment(&args, Task::Lexical),
        Command::EvalSyntactic(args) => judgment(&args, Task::Syntactic),
        Command::EvalSemantic { gold, features, output } => {
            let records = corpus_io::parse_similarity_table(&gold)?;
            let feats = corpus_io::read_feature_dir(&features, cfg.frame_shift_s)?;
            let embeddings = feats.iter().map(|(id, f)| (id.clone(), pool(f, cfg.pooling))).collect();
            let report = ssimi_score(&records, &embeddings)?;
            write_output(output.as_deref(), &to_json(&report)?)
        }
        Command::Cluster {
            features,
            k,
            max_iters,
            output,
        } => {
            let feats = corpus_io::read_feature_dir(&features, cfg.frame_shift_s)?;
            let frames = quantize::stack_frames(feats.values())?;
            let config = KMeansConfig {
                k,
                max_iters,
                seed: cfg.seed,
            };
            let fit = quantize::kmeans_fit_with(&frames, &config, &workers)?;
            quantize::write_codebook(&fit.codebook, &output)?;
            eprintln!(
                "k-means: {} frames, k={k}, {} iterations{}, inertia {}",
                frames.rows(),
                fit.iterations,
                if fit.converged { "" } else { " (not converged)" },
                fit.codebook.inertia()
            );
            Ok(())
        }
        Command::Quantize {
            codebook,
            features,
            output,
        } => {
            let codebook = quantize::read_codebook(&codebook)?;
            let feats = corpus_io::read_feature_dir(&features, cfg.frame_shift_s)?;
            let refs: Vec<&FeatureSequence> = feats.values().collect();
            let units = quantize::discretize_all(&refs, &codebook, cfg.dedup, &workers)?;
            quantize::write_unit_file(&units, &output)?;
            Ok(())
        }
        Command::LmTrain {
            units,
            order,
            discount,
            vocab_size,
            keep_runs,
            output,
        } => {
            let corpus = read_units(&units, !keep_runs)?;
            let vocab = match vocab_size {
                Some(v) => v,
                None => corpus.iter().flat_map(|s| s.units.iter()).max().map_or(0, |m| m + 1),
            };
            let model = fit_ngram(&corpus, order, discount, vocab)?;
            unitlm::write_model(&model, &output)?;
            Ok(())
        }
        Command::LmScore {
            model,
            units,
            keep_runs,
            output,
        } => {
            let model = unitlm::read_model(&model)?;
            let seqs = read_units(&units, !keep_runs)?;
            let scores = unitlm::score_sequences(&model, &seqs, cfg.normalize_lm, &workers)?;
            write_output(output.as_deref(), &corpus_io::format_score_file(&scores))
        }
        Command::Validate { root, require } => {
            let requirements = if require.is_empty() {
                SubmissionRequirements::all()
            } else {
                SubmissionRequirements {
                    required: require
                        .iter()
                        .map(|t| t.parse::<SubmissionTask>().map_err(anyhow::Error::msg))
                        .collect::<Result<_>>()?,
                }
            };
            let layout = corpus_io::validate_submission(&root, &requirements)?;
            let tasks: Vec<String> = layout.tasks_present.iter().map(|t| t.to_string()).collect();
            println!(
                "{}: valid submission (tasks: {}; budget {} GPU-hours)",
                layout.root.display(),
                tasks.join(", "),
                layout.gpu_budget_hours
            );
            Ok(())
        }
        Command::Leaderboard { reports, output } => {
            let mut rows = Vec::new();
            for path in &reports {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let value: serde_json::Value =
                    serde_json::from_str(&text).with_context(|| format!("{}: invalid JSON", path.display()))?;
                let parsed: Vec<LeaderboardRow> = match value {
                    serde_json::Value::Array(_) => serde_json::from_value(value),
                    _ => serde_json::from_value(value).map(|r| vec![r]),
                }
                .with_context(|| format!("{}: not a leaderboard row", path.display()))?;
                rows.extend(parsed);
            }
            write_output(output.as_deref(), &render_leaderboard(&rows)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("slmeval: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
