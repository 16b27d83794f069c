//! Command-line front end: synthetic data, query building, oracles,
//! evaluation, training, inference and metric perturbation experiments.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use qfvs::metric::{evaluate_multi, MatchMode};
use qfvs::oracle::{build_oracle, CandidatePool};
use qfvs::perturb::{curve_experiment, CurveInput, PerturbMode, ReplacePool};
use qfvs::queries::{build_queries_numbered, ScenarioCounts};
use qfvs::seqdpp::{summarize, ModelParams};
use qfvs::synth::{generate, SynthConfig};
use qfvs::train::{gradient_check, split_leave_one_out, train, GradCheckConfig, TrainConfig};
use qfvs::{load_dataset, save_dataset, Dataset, Summary};

#[derive(Parser)]
#[command(name = "qfvs", version, about = "Query-focused video summarization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Build scenario-labelled queries for one video and print them as JSON.
    Queries {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        video: String,
        #[arg(long)]
        t_presence: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "15,15,15,1")]
        counts: ScenarioCounts,
    },
    /// Add oracle summaries built from the user summaries.
    Oracle {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "union")]
        pool: CandidatePool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score system summaries against the user summaries of their queries.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value = "count")]
        mode: MatchMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train with one test and one validation video held out.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        test: String,
        #[arg(long)]
        val: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: PathBuf,
    },
    /// Summarize one video for one query with a trained checkpoint.
    Summarize {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        video: String,
        #[arg(long)]
        query: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metric curve under deletion or replacement of user-summary shots.
    Perturb {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        mode: PerturbMode,
        #[arg(long, value_delimiter = ',', required = true)]
        fractions: Vec<f64>,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Replacement source: `video` or `users`.
        #[arg(long, default_value = "video")]
        pool: ReplacePool,
    },
    /// Compare analytic gradients with finite differences.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

#[derive(Debug)]
struct CliError {
    kind: String,
    message: String,
}

impl From<qfvs::Error> for CliError {
    fn from(e: qfvs::Error) -> Self {
        CliError {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError {
            kind: "io".into(),
            message: e.to_string(),
        }
    }
}

impl CliError {
    fn new(kind: &str, message: impl Into<String>) -> Self {
        CliError {
            kind: kind.into(),
            message: message.into(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// File of system summaries, as written by `summarize`.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SummaryFile {
    summaries: Vec<SummaryRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SummaryRecord {
    video: String,
    query: String,
    shots: Vec<usize>,
}

#[derive(Serialize)]
struct EvalRow<'a> {
    query: &'a str,
    video: &'a str,
    precision: f64,
    recall: f64,
    f1: f64,
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new("io", format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::new("parse", format!("{what} {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::new("io", format!("cannot write {}: {e}", path.display())))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()
        .map_err(|e| CliError::new("io", format!("cannot write {}: {e}", path.display())))
}

fn with_oracles(dataset: &Dataset, pool: CandidatePool) -> CliResult<Dataset> {
    let mut oracles = Vec::new();
    for q in &dataset.queries {
        let refs = dataset.user_summaries_for(&q.id);
        if refs.is_empty() {
            continue;
        }
        let video = dataset
            .video(&q.video)
            .ok_or_else(|| CliError::new("validation", format!("unknown video '{}'", q.video)))?;
        let (oracle, _) = build_oracle(&refs, video, pool)?;
        oracles.push(oracle);
    }
    Ok(Dataset {
        oracle_summaries: Some(oracles),
        ..dataset.clone()
    })
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen { config, out, seed } => {
            let cfg = SynthConfig {
                seed,
                ..read_json(&config, "synthetic config")?
            };
            save_dataset(&generate(&cfg)?, &out)?;
        }
        Command::Queries {
            dataset,
            video,
            t_presence,
            seed,
            counts,
        } => {
            let d = load_dataset(&dataset)?;
            let v = d
                .video(&video)
                .ok_or_else(|| CliError::new("invalid_argument", format!("unknown video '{video}'")))?;
            let first_id = d.queries_for(&video).count() + 1;
            let queries = build_queries_numbered(v, d.dictionary.len(), counts, t_presence, seed, first_id)?;
            let records: Vec<serde_json::Value> = queries
                .iter()
                .map(|q| {
                    serde_json::json!({
                        "id": q.id,
                        "video": q.video,
                        "concepts": q.concepts,
                        "scenario": q.scenario,
                    })
                })
                .collect();
            println!("{}", serde_json::to_string(&records).expect("queries serialize"));
        }
        Command::Oracle { dataset, pool, out } => {
            let d = load_dataset(&dataset)?;
            save_dataset(&with_oracles(&d, pool)?, &out)?;
        }
        Command::Eval {
            dataset,
            system,
            mode,
            out,
        } => {
            let d = load_dataset(&dataset)?;
            let file: SummaryFile = read_json(&system, "summary file")?;
            let mut rows = Vec::new();
            for rec in &file.summaries {
                let video = d
                    .video(&rec.video)
                    .ok_or_else(|| CliError::new("invalid_argument", format!("unknown video '{}'", rec.video)))?;
                let refs = d.user_summaries_for(&rec.query);
                if refs.is_empty() {
                    return Err(CliError::new(
                        "invalid_argument",
                        format!("query '{}' has no user summaries", rec.query),
                    ));
                }
                let sys = Summary::new(rec.video.clone(), rec.shots.iter().copied());
                let r = evaluate_multi(&sys, refs, video, mode)?;
                rows.push(EvalRow {
                    query: &rec.query,
                    video: &rec.video,
                    precision: r.precision,
                    recall: r.recall,
                    f1: r.f1,
                });
            }
            if !rows.is_empty() {
                let n = rows.len() as f64;
                let mean = |f: fn(&EvalRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
                let summary = EvalRow {
                    query: "mean",
                    video: "",
                    precision: mean(|r| r.precision),
                    recall: mean(|r| r.recall),
                    f1: mean(|r| r.f1),
                };
                rows.push(summary);
            }
            write_csv(&out, &rows)?;
        }
        Command::Train {
            dataset,
            test,
            val,
            config,
            out,
            log,
        } => {
            let d = load_dataset(&dataset)?;
            let cfg: TrainConfig = read_json(&config, "training config")?;
            let (d_train, d_val, _) = split_leave_one_out(&d, &test, &val)?;
            let (params, history) = train(&d_train, &d_val, &cfg)?;
            params.save(&out)?;
            write_csv(&log, &history.epochs)?;
        }
        Command::Summarize {
            checkpoint,
            dataset,
            video,
            query,
            out,
        } => {
            let params = ModelParams::load(&checkpoint)?;
            let d = load_dataset(&dataset)?;
            let v = d
                .video(&video)
                .ok_or_else(|| CliError::new("invalid_argument", format!("unknown video '{video}'")))?;
            let q = d
                .query(&query)
                .ok_or_else(|| CliError::new("invalid_argument", format!("unknown query '{query}'")))?;
            if q.video != video {
                return Err(CliError::new(
                    "video_mismatch",
                    format!("query '{query}' belongs to video '{}'", q.video),
                ));
            }
            let selection = summarize(&params, v, q)?;
            let file = SummaryFile {
                summaries: vec![SummaryRecord {
                    video,
                    query,
                    shots: selection.shots(),
                }],
            };
            let mut text = serde_json::to_string_pretty(&file).expect("summary serializes");
            text.push('\n');
            write_text(&out, &text)?;
        }
        Command::Perturb {
            dataset,
            mode,
            fractions,
            trials,
            seed,
            out,
            pool,
        } => {
            let d = load_dataset(&dataset)?;
            let mut inputs = Vec::new();
            for s in d.user_summaries.iter().filter(|s| !s.is_empty()) {
                let video = d
                    .video(&s.video)
                    .ok_or_else(|| CliError::new("validation", format!("unknown video '{}'", s.video)))?;
                let shots = match pool {
                    ReplacePool::Video => (0..video.len()).collect(),
                    ReplacePool::Users => {
                        let query = s.query.as_deref().unwrap_or_default();
                        let mut all: Vec<usize> = d
                            .user_summaries_for(query)
                            .iter()
                            .flat_map(|u| u.shots().iter().copied())
                            .collect();
                        all.sort_unstable();
                        all.dedup();
                        all
                    }
                };
                inputs.push(CurveInput {
                    video,
                    reference: s,
                    pool: shots,
                });
            }
            let rows = curve_experiment(&inputs, &fractions, trials, mode, seed)?;
            write_csv(&out, &rows)?;
        }
        Command::Gradcheck {
            config,
            seed,
            tolerance,
        } => {
            let cfg: GradCheckConfig = read_json(&config, "gradient check config")?;
            let report = gradient_check(&cfg, seed)?;
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
            if report.max_rel_error > tolerance {
                return Err(CliError::new(
                    "gradient_check_failed",
                    format!("max relative error {:e} exceeds {:e}", report.max_rel_error, tolerance),
                ));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("invalid arguments");
            report(&CliError::new("usage", first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::FAILURE
        }
    }
}

fn report(e: &CliError) {
    eprintln!("{}", serde_json::json!({ "error": e.kind, "message": e.message }));
}
