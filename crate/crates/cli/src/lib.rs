//! The `vapcue` command line: pipeline subcommands over directories of
//! samples laid out as `<system>/<condition>/<id>.<ext>`.

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
mod plot;
mod tree;

pub use config::RunConfig;

/// A missing or unreadable input. Exits with status 1.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub const EXIT_INPUT: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;

/// 2 for invalid settings or data that fails a check, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<vapcue::Error>() {
            return if e.is_validation() { EXIT_VALIDATION } else { EXIT_INPUT };
        }
        if cause.is::<InputError>() {
            return EXIT_INPUT;
        }
    }
    EXIT_INPUT
}

#[derive(Debug, Parser)]
#[command(name = "vapcue", version, about = "Turn-taking cue evaluation pipeline")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override any setting, e.g. `--set metrics.rule=all-frames`.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory (`paths.output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (`run.workers`).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract statement–question pairs from a dialog corpus.
    Extract {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Write the prompt text of every manifest pair under each condition.
    Permute {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Normalize the pause and the post-turn tail of every recording.
    Normalize {
        #[arg(long)]
        audio_dir: Option<PathBuf>,
        #[arg(long)]
        alignment_dir: Option<PathBuf>,
        /// Also write the two-channel model input.
        #[arg(long)]
        stereo: bool,
    },
    /// Lengthen, flatten and amplify the last statement word.
    Manipulate {
        #[arg(long)]
        audio_dir: Option<PathBuf>,
        #[arg(long)]
        alignment_dir: Option<PathBuf>,
    },
    /// Classify every aligned sample from its trace and build the report.
    Evaluate {
        #[arg(long)]
        alignment_dir: Option<PathBuf>,
        #[arg(long)]
        trace_dir: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Write oracle traces for voice-activity scenarios.
    OracleSim {
        #[arg(long, value_name = "FILE")]
        scenario: PathBuf,
        /// `vapt` for label distributions, `ptrace` for probability text.
        #[arg(long, default_value = "vapt", value_parser = ["vapt", "ptrace"])]
        format: String,
    },
    /// Render a spectrogram and probability plot for one sample.
    Plot {
        #[arg(long)]
        audio: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        alignment: Option<PathBuf>,
        /// Base name of the outputs; defaults to the audio file stem.
        #[arg(long)]
        name: Option<String>,
    },
    /// Rebuild the corpus report from per-sample CSV files.
    Report {
        #[arg(required = true)]
        samples: Vec<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Convert a TextGrid word tier to alignment JSON.
    Textgrid {
        input: PathBuf,
        #[arg(long, default_value = "words")]
        tier: String,
        /// Number of statement words; inferred when omitted.
        #[arg(long)]
        statement_words: Option<usize>,
        #[arg(long)]
        output: PathBuf,
    },
}

fn path_override(key: &str, path: &Option<PathBuf>) -> Option<String> {
    path.as_ref()
        .map(|p| format!("{key}={}", toml::Value::String(p.display().to_string())))
}

impl Cli {
    /// Settings from the file, then `--set`, then the dedicated flags.
    pub fn run_config(&self) -> anyhow::Result<RunConfig> {
        let mut overrides = self.overrides.clone();
        overrides.extend(path_override("paths.output_dir", &self.out));
        if let Some(w) = self.workers {
            overrides.push(format!("run.workers={w}"));
        }
        let flags: Vec<(&str, &Option<PathBuf>)> = match &self.command {
            Command::Extract { corpus, lexicon } => vec![("paths.corpus", corpus), ("paths.lexicon", lexicon)],
            Command::Permute { manifest } => vec![("paths.manifest", manifest)],
            Command::Normalize { audio_dir, alignment_dir, .. } | Command::Manipulate { audio_dir, alignment_dir } => {
                vec![("paths.audio_dir", audio_dir), ("paths.alignment_dir", alignment_dir)]
            }
            Command::Evaluate { alignment_dir, trace_dir, scores } => vec![
                ("paths.alignment_dir", alignment_dir),
                ("paths.trace_dir", trace_dir),
                ("paths.scores", scores),
            ],
            Command::Report { scores, .. } => vec![("paths.scores", scores)],
            _ => vec![],
        };
        overrides.extend(flags.into_iter().filter_map(|(k, v)| path_override(k, v)));
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = cli.run_config()?;
    match &cli.command {
        Command::Extract { .. } => commands::extract(&cfg),
        Command::Permute { .. } => commands::permute(&cfg),
        Command::Normalize { stereo, .. } => commands::normalize(&cfg, *stereo),
        Command::Manipulate { .. } => commands::manipulate(&cfg),
        Command::Evaluate { .. } => commands::evaluate(&cfg).map(|_| ()),
        Command::OracleSim { scenario, format } => commands::oracle_sim(&cfg, scenario, format == "ptrace"),
        Command::Plot { audio, trace, alignment, name } => {
            commands::plot(&cfg, audio, trace, alignment.as_deref(), name.as_deref())
        }
        Command::Report { samples, .. } => commands::report(&cfg, samples),
        Command::Textgrid { input, tier, statement_words, output } => {
            commands::textgrid(input, tier, *statement_words, output)
        }
    }
}
