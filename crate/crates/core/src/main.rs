use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use symaug::envs::{self, EnvConfig, EnvKind};
use symaug::harness::{self, EnvOverrides, ExperimentConfig};
use symaug::io::{read_batch_file, AnyBatch};
use symaug::solver::{policy_iteration, true_performance, TabularMdp, DEFAULT_TOL};
use symaug::symmetry::{augment, augment_if_symmetric, detect_categorical, ContinuousDetector, ReportSummary};
use symaug::{estimate_pmf, KernelDensity, SpaceDescriptor};

#[derive(Parser)]
#[command(name = "symaug", version, about = "Validate alleged dynamics symmetries of offline RL batches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AugmentMode {
    /// Augment only if the detector accepts the transformation.
    Detect,
    /// Augment unconditionally.
    Always,
}

#[derive(clap::Args)]
struct DetectArgs {
    /// Batch file written by `collect`.
    batch: PathBuf,
    #[arg(long)]
    transform: String,
    /// Override the environment recorded in the batch header.
    #[arg(long)]
    env: Option<String>,
    #[arg(long, default_value_t = symaug::symmetry::DEFAULT_QUANTILE)]
    q: f64,
    #[arg(long, default_value_t = symaug::symmetry::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// JSON file with environment overrides such as `grid.side`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Collect a uniform-random-policy batch.
    Collect {
        #[arg(long)]
        env: String,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score one transformation on a batch and print the report as JSON.
    Detect(DetectArgs),
    /// Write the batch extended with its transformed copy.
    Augment {
        #[command(flatten)]
        args: DetectArgs,
        #[arg(long, value_enum, default_value_t = AugmentMode::Detect)]
        mode: AugmentMode,
    },
    /// Plan on a grid batch and score the policy on the true grid.
    Solve {
        batch: PathBuf,
        #[arg(long)]
        env: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detection sweep over sizes and replicates, as CSV.
    SweepDetect {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detection plus performance-gain sweep (grid only), as CSV.
    SweepPerf {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean and standard deviation per (env, transform, N) of a sweep CSV.
    Summarize {
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn env_config(config: Option<&Path>) -> Result<EnvConfig> {
    Ok(match config {
        Some(p) => EnvOverrides::from_file(p)
            .with_context(|| format!("cannot read config {}", p.display()))?
            .env_config(),
        None => EnvConfig::default(),
    })
}

fn load(path: &Path, env: Option<&str>) -> Result<(AnyBatch, EnvKind)> {
    let batch = read_batch_file(path).with_context(|| format!("cannot read batch {}", path.display()))?;
    let kind: EnvKind = env.unwrap_or(&batch.meta().env).parse()?;
    if kind.is_categorical() != matches!(batch, AnyBatch::Categorical(_)) {
        bail!("batch kind does not match environment {kind}");
    }
    Ok((batch, kind))
}

/// Detection report, plus the augmented batch when requested.
fn detect(args: &DetectArgs, mode: Option<AugmentMode>) -> Result<(ReportSummary, Option<AnyBatch>)> {
    let (batch, env) = load(&args.batch, args.env.as_deref())?;
    let cfg = env_config(args.config.as_deref())?;
    Ok(match batch {
        AnyBatch::Categorical(b) => {
            let k = envs::categorical_transform(env, &cfg, &args.transform)?;
            let report = detect_categorical(&b, &k, args.threshold)?;
            let augmented = mode.map(|m| match m {
                AugmentMode::Detect => augment_if_symmetric(&b, &report, &k),
                AugmentMode::Always => augment(&b, &k),
            });
            (report.summary(), augmented.map(AnyBatch::Categorical))
        }
        AnyBatch::Continuous(b) => {
            let k = envs::continuous_transform(env, &cfg, &args.transform)?;
            let kde = KernelDensity::fit(&b)?;
            let report = ContinuousDetector::new(&b, &kde, args.q)?
                .with_threshold(args.threshold)?
                .detect(&k)?;
            let augmented = mode.map(|m| match m {
                AugmentMode::Detect => augment_if_symmetric(&b, &report, &k),
                AugmentMode::Always => augment(&b, &k),
            });
            (report.summary(), augmented.map(AnyBatch::Continuous))
        }
    })
}

#[derive(Serialize)]
struct SolveReport {
    env: String,
    batch_size: usize,
    gamma: f64,
    /// Action index per state, row-major over the grid.
    policy: Vec<usize>,
    /// Value of the policy under the model it was planned on.
    #[serde(rename = "U_model")]
    u_model: f64,
    /// Value of the policy on the true grid.
    #[serde(rename = "U")]
    u: f64,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Collect {
            env,
            steps,
            seed,
            config,
            out,
        } => {
            let kind: EnvKind = env.parse()?;
            let batch = envs::collect_batch(kind, &env_config(config.as_deref())?, steps, seed)?;
            let mut w = output(out.as_deref())?;
            batch.write_jsonl(&mut w)?;
            w.flush()?;
        }
        Command::Detect(args) => {
            let (report, _) = detect(&args, None)?;
            write_json(&report, args.out.as_deref())?;
        }
        Command::Augment { args, mode } => {
            let (report, batch) = detect(&args, Some(mode))?;
            log::info!("{} nu_k={} verdict={}", report.transform, report.nu_k, report.verdict);
            let mut w = output(args.out.as_deref())?;
            batch.expect("augmented batch requested").write_jsonl(&mut w)?;
            w.flush()?;
        }
        Command::Solve {
            batch,
            env,
            config,
            tol,
            out,
        } => {
            let (batch, kind) = load(&batch, env.as_deref())?;
            let AnyBatch::Categorical(b) = batch else {
                bail!("solve needs a categorical batch, got {kind}");
            };
            let spec = env_config(config.as_deref())?.grid;
            spec.validate()?;
            if b.space() != spec.space() {
                bail!("batch space {:?} does not match the grid {:?}", b.space(), spec.space());
            }
            let SpaceDescriptor::Categorical { n_states, n_actions } = b.space() else {
                unreachable!()
            };
            let model = estimate_pmf(&b, n_states, n_actions)?;
            let planned = policy_iteration(&TabularMdp::grid(&spec, &model)?, tol)?;
            let u_model = symaug::solver::performance(&planned.value, &spec.initial_distribution())?;
            let (policy, u) = true_performance(&spec, &model, tol)?;
            write_json(
                &SolveReport {
                    env: kind.to_string(),
                    batch_size: b.len(),
                    gamma: spec.gamma,
                    policy: policy.actions,
                    u_model,
                    u,
                },
                out.as_deref(),
            )?;
        }
        Command::SweepDetect { config, out } => sweep(&config, out, false)?,
        Command::SweepPerf { config, out } => sweep(&config, out, true)?,
        Command::Summarize { csv, out } => {
            let file = File::open(&csv).with_context(|| format!("cannot open {}", csv.display()))?;
            let rows = harness::read_csv(file)?;
            harness::write_summary_csv(&harness::summarize(&rows), output(out.as_deref())?)?;
        }
    }
    Ok(())
}

fn sweep(config: &Path, out: Option<PathBuf>, perf: bool) -> Result<()> {
    let cfg = ExperimentConfig::from_file(config).with_context(|| format!("invalid config {}", config.display()))?;
    let rows = if perf {
        harness::run_perf_sweep(&cfg)?
    } else {
        harness::run_detection_sweep(&cfg)?
    };
    let errors = rows.iter().filter(|r| r.is_error()).count();
    if errors > 0 {
        log::warn!("{errors} of {} rows failed", rows.len());
    }
    harness::write_csv(&rows, output(out.as_deref().or(cfg.out.as_deref()))?)?;
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
