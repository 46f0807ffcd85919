use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mannerscope::error::Error;
use mannerscope::models::{ModelKind, TaskMode};
use mannerscope::pipeline::{
    cmd_evaluate, cmd_extract, cmd_features, cmd_report, cmd_synth_classification, cmd_synth_demo,
    cmd_synth_sisc, synth, PipelineConfig, SourceFilter,
};

/// Extracts repetitive movement patterns from multichannel recordings,
/// computes multimodal features over their occurrences, and trains and
/// evaluates predictors of per-pattern meaningfulness ratings.
#[derive(Parser)]
#[command(name = "mannerscope", version, disable_help_subcommand = true)]
struct Cli {
    /// Pipeline config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core); overrides the config value.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; overrides the config value.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn pattern dictionaries and activations for every video.
    Extract,
    /// Assemble the per-pattern feature matrix and z-score it.
    Features,
    /// Train one predictor on the joined feature/annotation dataset.
    Train(TrainArgs),
    /// Run the repeated-split evaluation protocol and weight analysis.
    Evaluate,
    /// Generate synthetic fixtures.
    Synth {
        #[command(subcommand)]
        kind: SynthCommand,
    },
    /// Pretty-print the evaluation report.
    Report,
}

#[derive(Args)]
struct TrainArgs {
    /// Model kind: lasso | max_margin | lda | neural_net.
    #[arg(long, value_parser = parse_kind)]
    kind: ModelKind,
    /// Task: classification | regression.
    #[arg(long, value_parser = parse_mode)]
    mode: TaskMode,
    /// Annotation source: self | crowd_average | all. Ratings >= 4 are the
    /// positive class; crowd ratings are mean-then-round-half-up averages.
    #[arg(long, value_parser = parse_source, default_value = "all")]
    source: SourceFilter,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Planted-pattern signal: `synthetic_signal.csv` + `ground_truth.json`.
    Sisc {
        #[arg(long, default_value_t = 3000)]
        samples: usize,
        #[arg(long, default_value_t = 6)]
        channels: usize,
        #[arg(long, default_value_t = 2)]
        patterns: usize,
        #[arg(long, default_value_t = 30)]
        pattern_len: usize,
        #[arg(long, default_value_t = 10)]
        occurrences: usize,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        #[arg(long, default_value_t = 30.0)]
        rate: f64,
    },
    /// Feature matrix with planted crowd/self rating structure:
    /// `features.csv` + `annotations.csv`.
    Classification {
        #[arg(long, default_value_t = 300)]
        rows: usize,
        #[arg(long, default_value_t = 2.0)]
        crowd_strength: f64,
        #[arg(long, default_value_t = 1.0)]
        self_strength: f64,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
    },
    /// Complete runnable project: tracks, annotations, lexicon and config.
    Demo {
        #[arg(long, default_value_t = 8)]
        videos: usize,
    },
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    ModelKind::parse(s).ok_or_else(|| format!("unknown model kind `{s}`"))
}

fn parse_mode(s: &str) -> Result<TaskMode, String> {
    TaskMode::parse(s).ok_or_else(|| format!("unknown task `{s}`"))
}

fn parse_source(s: &str) -> Result<SourceFilter, String> {
    SourceFilter::parse(s).ok_or_else(|| format!("unknown annotation source `{s}`"))
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => return Err(Error::Usage("this command needs --config <file>".into())),
    };
    apply_overrides(&mut cfg, cli);
    Ok(cfg)
}

fn apply_overrides(cfg: &mut PipelineConfig, cli: &Cli) {
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    if let Some(dir) = &cli.output_dir {
        // an explicit override is resolved against the working directory,
        // not the config file
        cfg.output_dir = std::env::current_dir()
            .map(|cwd| cwd.join(dir))
            .unwrap_or_else(|_| dir.clone());
    }
}

/// Config for synth runs, which work without a config file.
fn synth_config(cli: &Cli) -> Result<PipelineConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::standalone("out", 0),
    };
    apply_overrides(&mut cfg, cli);
    Ok(cfg)
}

fn init_threads(jobs: usize) {
    if jobs > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Extract => {
            let cfg = load_config(&cli)?;
            init_threads(cfg.jobs);
            cmd_extract(&cfg)
        }
        Command::Features => {
            let cfg = load_config(&cli)?;
            init_threads(cfg.jobs);
            cmd_features(&cfg)
        }
        Command::Train(args) => {
            let cfg = load_config(&cli)?;
            init_threads(cfg.jobs);
            mannerscope::pipeline::cmd_train(&cfg, args.kind, args.mode, args.source).map(|_| ())
        }
        Command::Evaluate => {
            let cfg = load_config(&cli)?;
            init_threads(cfg.jobs);
            cmd_evaluate(&cfg).map(|_| ())
        }
        Command::Report => {
            let cfg = load_config(&cli)?;
            let text = cmd_report(&cfg)?;
            print!("{text}");
            Ok(())
        }
        Command::Synth { kind } => {
            let cfg = synth_config(&cli)?;
            init_threads(cfg.jobs);
            let out = cfg.output_dir();
            match kind {
                SynthCommand::Sisc {
                    samples,
                    channels,
                    patterns,
                    pattern_len,
                    occurrences,
                    noise,
                    rate,
                } => {
                    let params = synth::SiscParams {
                        n_samples: *samples,
                        n_channels: *channels,
                        n_patterns: *patterns,
                        pattern_len: *pattern_len,
                        occurrences_per_pattern: *occurrences,
                        noise_sigma: *noise,
                        sample_rate_hz: *rate,
                        ..Default::default()
                    };
                    cmd_synth_sisc(&out, &params, cfg.seed)
                }
                SynthCommand::Classification {
                    rows,
                    crowd_strength,
                    self_strength,
                    noise,
                } => {
                    let params = synth::ClassificationParams {
                        rows: *rows,
                        crowd_strength: *crowd_strength,
                        self_strength: *self_strength,
                        noise: *noise,
                    };
                    cmd_synth_classification(&out, &params, cfg.seed)
                }
                SynthCommand::Demo { videos } => cmd_synth_demo(&out, cfg.seed, *videos).map(|_| ()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's default exit code is 2; this tool reserves 2 for data
            // errors and reports usage problems as 1
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.tag());
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}
