//! Command-line interface: `gen-synth`, `train`, `explain`, `eval`, `report`.
//!
//! Exit codes: 0 success, 1 internal or numeric error, 2 usage or input
//! error.

mod config;
mod eval;
mod explain;
mod report;
mod synth;
mod targets;
mod train;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{EvalSection, ModelSection, RunConfig, TrainingSection, RUN_CONFIG_FILE};
pub use eval::{eval, EvalOutput, CURVES_FILE, SAMPLES_FILE, SUMMARY_FILE, TAU_FILE};
pub use explain::{explain, saliency_key, ExplainRequest, IndexRow, Scope, INDEX_FILE};
pub use report::{report, write_report, ReportRow};
pub use synth::{class_name, gen_synth, MANIFEST_FILE};
pub use targets::{peak_targets, prototype_targets, top_location_targets};
pub use train::{train, TrainOutput, TrainSummary, MODEL_FILE, TRAIN_LOG_FILE, TRAIN_SUMMARY_FILE};

use crate::data::{Manifest, Placement, SynthConfig};
use crate::error::{Error, Result};
use crate::model::{SimilarityKind, DEFAULT_EPSILON};
use crate::network::load_model;
use crate::saliency::Method;

#[derive(Debug, Parser)]
#[command(name = "patchviz", version, about = "Toy prototype classifiers and faithfulness checks for their part visualisations")]
pub struct Cli {
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run configuration JSON; missing fields take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = all cores). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the planted-glyph dataset with masks and a manifest.
    GenSynth(GenSynthArgs),
    /// Train, project and save a model.
    Train(TrainArgs),
    /// Write saliency maps, patches and overlays.
    Explain(ExplainArgs),
    /// Score deletion faithfulness and relevance per method.
    Eval(EvalArgs),
    /// Merge the summaries of several eval runs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlacementArg {
    Uniform,
    Border,
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    /// Training images in total.
    #[arg(long, default_value_t = 500)]
    pub train: usize,
    /// Test images in total.
    #[arg(long, default_value_t = 200)]
    pub test: usize,
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    #[arg(long, value_enum, default_value_t = PlacementArg::Uniform)]
    pub placement: PlacementArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Protopnet,
    Prototree,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Similarity function (overrides the config file).
    #[arg(long, value_enum)]
    pub similarity: Option<KindArg>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub prototypes_per_class: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScopeArg {
    Prototypes,
    Test,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated saliency methods (default: all).
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    #[arg(long, value_enum, default_value_t = ScopeArg::Prototypes)]
    pub scope: ScopeArg,
    /// Restrict the test scope to these manifest record ids.
    #[arg(long, value_delimiter = ',')]
    pub images: Vec<u64>,
    #[arg(long)]
    pub max_test_images: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated saliency methods (default: from config).
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    #[arg(long)]
    pub max_test_images: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Eval output directories.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Output CSV (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses method names; unknown names are usage errors listing the valid ones.
pub fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for name in names {
        let m: Method = name.trim().parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

/// Config precedence: `--config`, else the run config saved next to
/// `sibling` (a model file), else defaults; then `--seed`.
fn resolve_config(cli: &Cli, sibling: Option<&Path>) -> Result<RunConfig> {
    let mut cfg = match (&cli.config, sibling) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(model)) => {
            let saved = model.parent().unwrap_or(Path::new(".")).join(RUN_CONFIG_FILE);
            if saved.is_file() {
                log::info!("using {}", saved.display());
                RunConfig::load(&saved)?
            } else {
                RunConfig::default()
            }
        }
        (None, None) => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn finish(mut cfg: RunConfig, out: &Option<PathBuf>) -> Result<(RunConfig, PathBuf)> {
    let dir = match (out, &cfg.output) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => d.clone(),
        (None, None) => return Err(Error::invalid("no output directory: pass --out or set \"output\" in the config")),
    };
    cfg.output = Some(dir.clone());
    cfg.validate()?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok((cfg, dir))
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenSynth(a) => {
            let cfg = resolve_config(cli, None)?;
            let synth = SynthConfig {
                classes: a.classes,
                train: a.train,
                test: a.test,
                size: a.size,
                placement: match a.placement {
                    PlacementArg::Uniform => Placement::Uniform,
                    PlacementArg::Border => Placement::Border,
                },
                seed: cfg.seed,
            };
            if a.train < a.classes {
                return Err(Error::invalid("every class needs at least one training image"));
            }
            let (cfg, dir) = finish(cfg, &Some(a.out.clone()))?;
            let manifest = gen_synth(&synth, &dir)?;
            cfg.save(&dir)?;
            println!("{}", manifest.display());
            Ok(())
        }
        Command::Train(a) => {
            let mut cfg = resolve_config(cli, None)?;
            if let Some(kind) = a.similarity {
                let epsilon = match cfg.model.similarity {
                    SimilarityKind::Protopnet { epsilon } => epsilon,
                    SimilarityKind::Prototree => DEFAULT_EPSILON,
                };
                cfg.model.similarity = match kind {
                    KindArg::Protopnet => SimilarityKind::Protopnet { epsilon },
                    KindArg::Prototree => SimilarityKind::Prototree,
                };
            }
            if let Some(eps) = a.epsilon {
                match &mut cfg.model.similarity {
                    SimilarityKind::Protopnet { epsilon } => *epsilon = eps,
                    SimilarityKind::Prototree => {
                        return Err(Error::invalid("--epsilon only applies to the protopnet similarity"))
                    }
                }
            }
            if let Some(e) = a.epochs {
                cfg.training.epochs = e;
            }
            if let Some(lr) = a.lr {
                cfg.training.learning_rate = lr;
            }
            if let Some(p) = a.prototypes_per_class {
                cfg.model.prototypes_per_class = p;
            }
            let (cfg, dir) = finish(cfg, &a.out)?;
            let out = train(&a.manifest, &cfg, &dir)?;
            match out.summary.test_accuracy {
                Some(acc) => println!("test accuracy: {acc:.4}"),
                None => println!("test accuracy: n/a"),
            }
            Ok(())
        }
        Command::Explain(a) => {
            let mut cfg = resolve_config(cli, Some(&a.model))?;
            if !a.methods.is_empty() {
                cfg.methods = parse_methods(&a.methods)?;
            }
            if a.max_test_images.is_some() {
                cfg.eval.max_test_images = a.max_test_images;
            }
            let model = load_model(&a.model)?;
            cfg.model.similarity = model.kind;
            let (cfg, dir) = finish(cfg, &a.out)?;
            let manifest = Manifest::load(&a.manifest)?;
            let req = ExplainRequest {
                scope: match a.scope {
                    ScopeArg::Prototypes => Scope::Prototypes,
                    ScopeArg::Test => Scope::Test,
                },
                methods: &cfg.methods,
                images: (!a.images.is_empty()).then_some(a.images.as_slice()),
                max_test_images: cfg.eval.max_test_images,
            };
            let rows = explain(&model, &manifest, &cfg, &req, &dir)?;
            println!("{} patches written to {}", rows.len(), dir.display());
            Ok(())
        }
        Command::Eval(a) => {
            let mut cfg = resolve_config(cli, Some(&a.model))?;
            if !a.methods.is_empty() {
                cfg.methods = parse_methods(&a.methods)?;
            }
            if a.max_test_images.is_some() {
                cfg.eval.max_test_images = a.max_test_images;
            }
            let model = load_model(&a.model)?;
            cfg.model.similarity = model.kind;
            let (cfg, dir) = finish(cfg, &a.out)?;
            let manifest = Manifest::load(&a.manifest)?;
            let methods = cfg.methods.clone();
            let out = eval(&model, &manifest, &cfg, &methods, &dir)?;
            println!("{} samples scored; summary in {}", out.results.len(), dir.join(SUMMARY_FILE).display());
            Ok(())
        }
        Command::Report(a) => {
            let rows = report(&a.runs)?;
            match &a.out {
                Some(path) => write_report(path, &rows),
                None => {
                    let mut w = csv::WriterBuilder::new()
                        .terminator(csv::Terminator::Any(b'\n'))
                        .from_writer(std::io::stdout().lock());
                    for r in &rows {
                        w.serialize(r).map_err(|e| Error::input("<stdout>", e.to_string()))?;
                    }
                    w.flush().map_err(|e| Error::io("<stdout>", e))
                }
            }
        }
    }
}

/// Entry point used by the binary: parses arguments, sets up logging and
/// the worker pool, and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {} worker threads: {e}", cli.jobs);
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
