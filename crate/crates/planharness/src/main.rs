use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use planharness::config::{load_config, RunConfig};
use planharness::dataset::{attach_extended_tests, exclude_exemplar_tasks, load_corpus, Corpus};
use planharness::error::{Error, Result};
use planharness::gateway::{Backend, CacheMode, Gateway, RemoteBackend, ReplayCache};
use planharness::pipeline::{run_suite, Pipeline};
use planharness::prompt::{lint_pack, load_pack, LintConfig};
use planharness::report::render_table;
use planharness::sandbox::SuiteKind;
use planharness::score::{read_summary, score_and_write, ScoreParams};

#[derive(Parser)]
#[command(name = "planharness", version, about = "Plan-guided code generation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override a config key: --set section.key=value (repeatable).
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Shortcut for --set backend.mode=<MODE>.
    #[arg(long)]
    backend: Option<String>,
    /// Shortcut for --set variant.k_shot=<N>.
    #[arg(long)]
    k_shot: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(mode) = &self.backend {
            overrides.push(format!("backend.mode={mode}"));
        }
        if let Some(k) = self.k_shot {
            overrides.push(format!("variant.k_shot={k}"));
        }
        load_config(&self.config, &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate candidates for every task in the corpus.
    Run(ConfigArgs),
    /// Execute recorded candidates and compute Pass@k / CodeBLEU.
    Score {
        #[command(flatten)]
        config: ConfigArgs,
        /// Test suite to evaluate against.
        #[arg(long, default_value = "hidden")]
        suite: String,
        /// Pass@k values (overrides the config's metrics.ks).
        #[arg(long = "k")]
        ks: Vec<u64>,
    },
    /// Render a markdown comparison table from scored run directories.
    /// The first directory is the baseline.
    Report { run_dirs: Vec<PathBuf> },
    /// Exemplar pack utilities.
    Packs {
        #[command(subcommand)]
        command: PacksCommand,
    },
    /// Replay cache utilities.
    Cache {
        #[command(subcommand)]
        command: CacheCommand,
    },
}

#[derive(Subcommand)]
enum PacksCommand {
    /// Check packs against the plan style guidance.
    Lint { packs: Vec<PathBuf> },
}

#[derive(Subcommand)]
enum CacheCommand {
    /// Print entry counts for a replay cache file.
    Stats {
        #[arg(long)]
        cache: PathBuf,
    },
}

fn usage_error(error: &Error) -> bool {
    matches!(error, Error::InvalidConfig { .. } | Error::InvalidPack { .. })
}

fn load_corpus_for(config: &RunConfig) -> Result<Corpus> {
    let corpus = load_corpus(&config.corpus.path, config.corpus.format)?;
    let mut corpus = match &config.corpus.extended_tests_path {
        Some(path) => {
            let (corpus, warnings) = attach_extended_tests(corpus, path)?;
            for warning in warnings {
                eprintln!("warning: {warning}");
            }
            corpus
        }
        None => corpus,
    };
    corpus.name = config.corpus.name.clone();
    let pack = load_pack(&config.pack_path)?;
    Ok(exclude_exemplar_tasks(corpus, &pack))
}

fn build_gateway(config: &RunConfig) -> Result<Gateway> {
    let cache = ReplayCache::open(&config.backend.cache_path)?;
    let backend: Option<Arc<dyn Backend>> = match config.backend.mode {
        CacheMode::Replay => None,
        CacheMode::Record | CacheMode::Passthrough => {
            let base_url = config.backend.base_url.as_ref().ok_or_else(|| {
                Error::InvalidConfig {
                    field: "backend.base_url".to_string(),
                    message: format!("required for {:?} mode", config.backend.mode),
                }
            })?;
            Some(Arc::new(RemoteBackend::new(base_url.clone())))
        }
    };
    Ok(Gateway::new(backend, cache, config.backend.mode))
}

fn cmd_run(args: &ConfigArgs) -> Result<()> {
    let config = args.load()?;
    let pack = load_pack(&config.pack_path)?;
    let corpus = load_corpus_for(&config)?;
    let gateway = Arc::new(build_gateway(&config)?);
    let pipeline = Pipeline::new(gateway, &pack, config)?;
    let run_dir = run_suite(&corpus, &pipeline)?;
    println!(
        "run complete: {} ({} tasks, {} backend calls)",
        run_dir.display(),
        corpus.evaluated_tasks().count(),
        pipeline.gateway.backend_calls()
    );
    Ok(())
}

fn parse_suite(name: &str) -> Result<SuiteKind> {
    match name {
        "hidden" => Ok(SuiteKind::Hidden),
        "extended" => Ok(SuiteKind::Extended),
        "both" => Ok(SuiteKind::Both),
        other => Err(Error::InvalidConfig {
            field: "--suite".to_string(),
            message: format!("unknown suite `{other}`; valid: hidden, extended, both"),
        }),
    }
}

fn cmd_score(args: &ConfigArgs, suite: &str, ks: &[u64]) -> Result<()> {
    let config = args.load()?;
    let corpus = load_corpus_for(&config)?;
    let params = ScoreParams {
        ks: if ks.is_empty() {
            config.metrics.ks.clone()
        } else {
            ks.to_vec()
        },
        weights: config.metrics.codebleu_weights,
        limits: config.limits,
        runner: config.runner.clone(),
        suite: parse_suite(suite)?,
        workers: config.workers,
    };
    let (scores_path, summary) =
        score_and_write(&config.run_dir, &corpus, config.variant, &params)?;
    println!("wrote {}", scores_path.display());
    for (key, value) in &summary.pass_at_k {
        println!("{key}: {:.4}", value);
    }
    println!("codebleu: {:.4}", summary.codebleu);
    Ok(())
}

fn cmd_report(run_dirs: &[PathBuf]) -> Result<()> {
    if run_dirs.is_empty() {
        return Err(Error::InvalidConfig {
            field: "run_dirs".to_string(),
            message: "at least one scored run directory is required".to_string(),
        });
    }
    let summaries = run_dirs
        .iter()
        .map(|d| read_summary(d))
        .collect::<Result<Vec<_>>>()?;
    print!("{}", render_table(&summaries)?);
    Ok(())
}

fn cmd_packs_lint(packs: &[PathBuf]) -> Result<()> {
    let lint_config = LintConfig::default();
    let mut warnings = 0usize;
    for path in packs {
        let pack = load_pack(path)?;
        let findings = lint_pack(&pack, &lint_config);
        if findings.is_empty() {
            println!("{}: clean", pack.name);
        }
        for finding in findings {
            if matches!(finding.severity, planharness::prompt::Severity::Warning) {
                warnings += 1;
            }
            println!(
                "{}: [{:?}] {} (exemplar {:?}, step {:?}): {}",
                pack.name,
                finding.severity,
                finding.rule,
                finding.exemplar,
                finding.step,
                finding.message
            );
        }
    }
    if warnings > 0 {
        println!("{warnings} warning(s)");
    }
    Ok(())
}

fn cmd_cache_stats(cache: &std::path::Path) -> Result<()> {
    let cache = ReplayCache::open(cache)?;
    println!("entries: {}", cache.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Score { config, suite, ks } => cmd_score(config, suite, ks),
        Command::Report { run_dirs } => cmd_report(run_dirs),
        Command::Packs {
            command: PacksCommand::Lint { packs },
        } => cmd_packs_lint(packs),
        Command::Cache {
            command: CacheCommand::Stats { cache },
        } => cmd_cache_stats(cache),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if usage_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
