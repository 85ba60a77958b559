//! `irclone`: parse, linearise, split, embed and score C/COBOL programs.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "irclone", version, about = "Cross-language code clone retrieval over a shared IR")]
struct Cli {
    /// Worker threads for file-level parallelism (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LangArg {
    C,
    Cobol,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Overflow {
    Keep,
    Drop,
    Truncate,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SbtFormat {
    /// `source_id<TAB>compact rendering` per line.
    Text,
    /// One JSON token sequence per line.
    Json,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Parse source files into IR JSON.
    Parse {
        files: Vec<PathBuf>,
        /// Force a language instead of going by file extension.
        #[arg(long, value_enum)]
        lang: Option<LangArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Normalise and linearise sources or IR JSON into an .sbt file.
    Sbt {
        /// Source files, IR JSON files or directories of either.
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum)]
        lang: Option<LangArg>,
        /// Rename user identifiers to VAR{n}/FUNC{n}.
        #[arg(long)]
        anonymize: bool,
        /// Token mapping for C units: `default`, `none` or a TSV file.
        #[arg(long, default_value = "none")]
        map: String,
        #[arg(long)]
        max_tokens: Option<usize>,
        #[arg(long, value_enum, default_value = "keep")]
        overflow: Overflow,
        #[arg(long, value_enum, default_value = "text")]
        format: SbtFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build train/val/test splits from a corpus root.
    Split {
        root: PathBuf,
        /// Split spec as JSON or key=value lines.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Overrides the seed in the spec.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate labelled clone pairs from one split of a manifest.
    Pairs {
        manifest: PathBuf,
        #[arg(long, default_value = "train")]
        split: String,
        #[arg(long, default_value_t = 1)]
        neg_ratio: usize,
        #[arg(long)]
        max_positives: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed every sequence of an .sbt file.
    Embed {
        sbt: PathBuf,
        /// `tfidf`, `subtree-hash` or `external:<shell command>`.
        #[arg(long, default_value = "tfidf")]
        backend: String,
        /// Subtree depth for the subtree-hash backend.
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Language reported for text-form sequences.
        #[arg(long, value_enum, default_value = "c")]
        lang: LangArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score embeddings on one split with MAP@R.
    Eval {
        manifest: PathBuf,
        embeddings: PathBuf,
        #[arg(long)]
        split: String,
        /// Defaults to the R of a test split.
        #[arg(long = "R", alias = "r")]
        r: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo MAP@R of random rankings.
    RandomMap {
        #[arg(long)]
        pds: usize,
        #[arg(long)]
        per_pd: usize,
        #[arg(long = "R", alias = "r")]
        r: usize,
        #[arg(long, default_value_t = 10000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(run::EXIT_CONFIG);
        }
    }
    match commands::dispatch(&cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
