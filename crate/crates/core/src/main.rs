use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use drgap::baselines::ModelFamily;
use drgap::corpus::{canonical_read, canonical_write, load_dataset, make_split, DatasetId};
use drgap::exec::Execution;
use drgap::harness::{
    load_run, report, run_drgap, run_eval, run_transfer_matrix, HarnessError, PromptMode, RunConfig, RunManifest,
};
use drgap::metrics::MetricReport;

#[derive(Parser)]
#[command(name = "drgap", version, about = "Gender-bias evaluation and debiasing prompt synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a native benchmark file to canonical JSONL.
    Ingest {
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write a seeded dev/test split of a canonical corpus.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        dev_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluate the target under no prompt, a manual, CFD or external prompt.
    Eval(RunArgs),
    /// Synthesize a debiasing prompt and evaluate before and after.
    Drgap {
        #[command(flatten)]
        run: RunArgs,
        /// Pool every dataset's winner into one prompt.
        #[arg(long)]
        aggregate: bool,
        #[arg(long)]
        no_verification: bool,
        #[arg(long)]
        no_filtering: bool,
        #[arg(long)]
        no_refinement: bool,
        #[arg(long)]
        rounds: Option<u32>,
        #[arg(long)]
        demonstrations: Option<usize>,
    },
    /// Evaluate source prompts across target datasets.
    Transfer {
        #[command(flatten)]
        run: RunArgs,
        /// Source prompt as `dataset=path`; repeatable.
        #[arg(long = "source", value_name = "DATASET=PATH")]
        sources: Vec<String>,
        /// Take every `prompts/<dataset>.txt` of a finished drgap run as a source.
        #[arg(long)]
        from_run: Option<PathBuf>,
        /// Target datasets; defaults to every configured dataset.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
    },
    /// Compare finished runs.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// Run config, `.toml` or `.json`.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    run_id: Option<String>,
    /// none, manual, cfd or external (eval only).
    #[arg(long)]
    prompt_mode: Option<String>,
    /// System prompt file for `--prompt-mode external`.
    #[arg(long)]
    prompt_file: Option<PathBuf>,
    #[arg(long)]
    cfd_family: Option<String>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    dev_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Disable data-parallel evaluation.
    #[arg(long)]
    sequential: bool,
    /// Smoke test against the configured live endpoint: first dataset only,
    /// `--limit` records (default 20), one repetition; prints the metrics.
    #[arg(long)]
    live: bool,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn dataset(s: &str) -> Result<DatasetId, HarnessError> {
    s.parse().map_err(|e: drgap::corpus::CorpusError| config_err(e.to_string()))
}

impl RunArgs {
    fn load(&self) -> Result<(RunConfig, Execution), HarnessError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(id) = &self.run_id {
            cfg.run_id = Some(id.clone());
        }
        if let Some(mode) = &self.prompt_mode {
            cfg.prompt_mode = match mode.as_str() {
                "none" => PromptMode::None,
                "manual" => PromptMode::Manual,
                "cfd" => PromptMode::Cfd,
                "external" => PromptMode::External(
                    self.prompt_file
                        .clone()
                        .ok_or_else(|| config_err("--prompt-mode external needs --prompt-file"))?,
                ),
                "drgap" => PromptMode::Drgap,
                "drgap_agg" => PromptMode::DrgapAgg,
                other => return Err(config_err(format!("unknown prompt mode `{other}`"))),
            };
        }
        if let Some(f) = &self.cfd_family {
            cfg.cfd_family = Some(f.parse::<ModelFamily>()?);
        }
        if let Some(m) = self.repetitions {
            cfg.repetitions = m;
        }
        if let Some(f) = self.dev_fraction {
            cfg.dev_fraction = f;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.limit {
            cfg.limit = Some(n);
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(d) = &self.cache_dir {
            cfg.cache_dir = Some(d.clone());
        }
        if self.live {
            cfg.datasets.truncate(1);
            cfg.limit = Some(self.limit.unwrap_or(20));
            cfg.repetitions = 1;
            log::warn!("live smoke mode: {} records of `{}`", cfg.limit.unwrap_or(0), cfg.datasets.first().map(|d| d.id.as_str()).unwrap_or("?"));
        }
        let exec = if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        };
        Ok((cfg, exec))
    }
}

fn print_summary(manifest: &RunManifest, run_dir: &Path) -> Result<(), HarnessError> {
    println!("run {} -> {}", manifest.run_id, run_dir.display());
    for entry in &manifest.datasets {
        if let Some(rel) = &entry.metrics_ref {
            let path = run_dir.join(rel);
            let raw = std::fs::read(&path).map_err(|e| HarnessError::io(&path, e))?;
            let report: MetricReport = serde_json::from_slice(&raw).map_err(|e| HarnessError::BadArtifact {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            let values: Vec<String> = report.metrics.iter().map(|(k, v)| format!("{k}={v:.4}")).collect();
            println!("  {} (n={}): {}", entry.dataset_id, report.n_examples, values.join(" "));
            if let (Some(a), Some(b)) = (report.delta_acc, report.delta_bias) {
                println!("  {} delta_acc={a:.4} delta_bias={b:.4}", entry.dataset_id);
            }
        }
    }
    let s = manifest.target_stats;
    println!(
        "  target calls={} provider={} retries={} cache_hits={}",
        s.calls, s.provider_invocations, s.retries, s.cache_hits
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Ingest { dataset: d, input, output } => {
            let examples = load_dataset(dataset(&d)?, &input)?;
            canonical_write(&output, &examples)?;
            println!("{} records -> {}", examples.len(), output.display());
        }
        Command::Split {
            input,
            dev_fraction,
            seed,
            output,
        } => {
            let corpus = canonical_read(&input)?;
            let split = make_split(&corpus, dev_fraction, seed)?;
            let json = serde_json::to_string_pretty(&split).expect("split serializes");
            std::fs::write(&output, json + "\n").map_err(|e| HarnessError::io(&output, e))?;
            println!("dev {} / test {} -> {}", split.dev_ids.len(), split.test_ids.len(), output.display());
        }
        Command::Eval(args) => {
            let (cfg, exec) = args.load()?;
            let manifest = run_eval(&cfg, exec)?;
            print_summary(&manifest, &cfg.output_dir.join(&manifest.run_id))?;
        }
        Command::Drgap {
            run,
            aggregate,
            no_verification,
            no_filtering,
            no_refinement,
            rounds,
            demonstrations,
        } => {
            let (mut cfg, exec) = run.load()?;
            if aggregate {
                cfg.prompt_mode = PromptMode::DrgapAgg;
            } else if !matches!(cfg.prompt_mode, PromptMode::DrgapAgg) {
                cfg.prompt_mode = PromptMode::Drgap;
            }
            cfg.ablation.no_verification |= no_verification;
            cfg.ablation.no_filtering |= no_filtering;
            cfg.ablation.no_refinement |= no_refinement;
            if let Some(r) = rounds {
                cfg.refinement_rounds = r;
            }
            if let Some(k) = demonstrations {
                cfg.demonstrations = k;
            }
            let manifest = run_drgap(&cfg, exec)?;
            print_summary(&manifest, &cfg.output_dir.join(&manifest.run_id))?;
        }
        Command::Transfer {
            run,
            sources,
            from_run,
            targets,
        } => {
            let (cfg, exec) = run.load()?;
            let mut prompts = BTreeMap::new();
            if let Some(dir) = &from_run {
                let loaded = load_run(dir)?;
                for entry in &loaded.manifest.datasets {
                    if let Some(rel) = &entry.prompt_ref {
                        let path = dir.join(rel);
                        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
                        prompts.insert(entry.dataset_id, text);
                    }
                }
            }
            for s in &sources {
                let (d, path) = s
                    .split_once('=')
                    .ok_or_else(|| config_err(format!("--source `{s}` is not DATASET=PATH")))?;
                let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
                prompts.insert(dataset(d)?, text);
            }
            let targets: Vec<DatasetId> = if targets.is_empty() {
                cfg.datasets.iter().map(|d| d.id).collect()
            } else {
                targets.iter().map(|t| dataset(t)).collect::<Result<_, _>>()?
            };
            let (manifest, matrix) = run_transfer_matrix(&cfg, &prompts, &targets, exec)?;
            println!("run {} -> {}", manifest.run_id, cfg.output_dir.join(&manifest.run_id).display());
            print!("{}", matrix.to_csv());
        }
        Command::Report { runs, format, output } => {
            let loaded = runs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>, _>>()?;
            let table = report(&loaded)?;
            let text = match format {
                Format::Text => table.to_text(),
                Format::Csv => table.to_csv(),
                Format::Json => table.to_json() + "\n",
            };
            match output {
                Some(path) => std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
