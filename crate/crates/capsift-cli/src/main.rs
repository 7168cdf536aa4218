//! capsift command-line front end: ingest a Q&A corpus, learn a
//! term-capability matrix, scan binaries, and evaluate the results.
//!
//! Exit codes: 0 on success, 1 on operational failure (including any
//! per-file error in a scan batch), 2 on usage errors. Detections are
//! data, not failures.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use capsift::capability::CountingMode;
use capsift::inference::DEFAULT_THRESHOLD;
use capsift::strings::DEFAULT_MIN_STRING_LEN;

#[derive(Parser)]
#[command(
    name = "capsift",
    version,
    about = "Infer software capabilities from binaries' printable strings, \
             using term probabilities learned from programming Q&A corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a Q&A corpus (Posts.xml or JSONL) and build the inverted index
    Ingest(IngestArgs),
    /// Run capability queries against an index and learn the term matrix
    Learn(LearnArgs),
    /// Scan binaries against a matrix and report capability probabilities
    Scan(ScanArgs),
    /// Compare scores against ground-truth labels and print metrics
    Eval(EvalArgs),
    /// Tabulate recall/precision across a range of detection thresholds
    Sweep(SweepArgs),
    /// Generate a synthetic planted-capability benchmark
    Synth(SynthArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// Decide from the file extension, then the first bytes
    Auto,
    /// StackExchange Posts.xml dump
    Xml,
    /// One JSON document per line
    Jsonl,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    /// Human-readable report
    Text,
    /// One JSON report per line
    Json,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum CountingArg {
    /// Count documents containing a term (default)
    Documents,
    /// Count token occurrences
    Occurrences,
}

impl From<CountingArg> for CountingMode {
    fn from(arg: CountingArg) -> CountingMode {
        match arg {
            CountingArg::Documents => CountingMode::Documents,
            CountingArg::Occurrences => CountingMode::Occurrences,
        }
    }
}

#[derive(Args)]
pub struct IngestArgs {
    /// Corpus file to ingest
    #[arg(long)]
    pub input: PathBuf,
    /// Corpus format
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    pub format: InputFormat,
    /// Directory to write the index into
    #[arg(long)]
    pub out_index: PathBuf,
}

#[derive(Args)]
pub struct LearnArgs {
    /// Index directory from `ingest`
    #[arg(long)]
    pub index: PathBuf,
    /// Capability configuration JSON (name + query per capability)
    #[arg(long)]
    pub config: PathBuf,
    /// Matrix TSV to write
    #[arg(long)]
    pub out: PathBuf,
    /// Prior pseudo-successes (smoothing numerator)
    #[arg(long, default_value_t = 10.0)]
    pub alpha: f64,
    /// Prior pseudo-failures (smoothing denominator share)
    #[arg(long, default_value_t = 90.0)]
    pub beta: f64,
    /// What t_jc / t_jt count
    #[arg(long, value_enum, default_value_t = CountingArg::Documents)]
    pub counting: CountingArg,
}

#[derive(Args)]
pub struct ScanArgs {
    /// Term-capability matrix TSV from `learn`
    #[arg(long)]
    pub matrix: PathBuf,
    /// Binaries to scan
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Detection threshold (a capability is detected when p is strictly greater)
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Report format
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
    /// 0 = scores only, 1 = + contributing terms, 2 = + corpus evidence (needs --index)
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=2))]
    pub verbosity: u8,
    /// Index directory for evidence lookups at verbosity 2
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Worker threads (default: CAPSIFT_JOBS env var, then one per core)
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Minimum printable-string length to extract
    #[arg(long, default_value_t = DEFAULT_MIN_STRING_LEN)]
    pub min_string_len: usize,
    /// Also extract UTF-16LE (wide) strings
    #[arg(long)]
    pub wide_strings: bool,
    /// Most evidence posts listed per detected capability
    #[arg(long, default_value_t = 10)]
    pub evidence_limit: usize,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Scan reports JSONL (from `scan --format json`)
    #[arg(long, conflicts_with = "matrix")]
    pub reports: Option<PathBuf>,
    /// Matrix TSV — rescan FILES instead of reading stored reports
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Binaries to rescan (only with --matrix)
    pub files: Vec<PathBuf>,
    /// Ground-truth labels JSONL
    #[arg(long)]
    pub labels: PathBuf,
    /// Detection threshold applied to stored probabilities
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Assumed positive-class ratio for normalized precision
    #[arg(long, default_value_t = 0.5)]
    pub tp_ratio: f64,
    /// Write the metrics TSV here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Minimum printable-string length when rescanning
    #[arg(long, default_value_t = DEFAULT_MIN_STRING_LEN)]
    pub min_string_len: usize,
    /// Also extract UTF-16LE strings when rescanning
    #[arg(long)]
    pub wide_strings: bool,
    /// Worker threads when rescanning
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args)]
pub struct SweepArgs {
    /// Scan reports JSONL (from `scan --format json`)
    #[arg(long, conflicts_with = "matrix")]
    pub reports: Option<PathBuf>,
    /// Matrix TSV — rescan FILES instead of reading stored reports
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Binaries to rescan (only with --matrix)
    pub files: Vec<PathBuf>,
    /// Ground-truth labels JSONL
    #[arg(long)]
    pub labels: PathBuf,
    /// Number of evenly spaced thresholds across [0, 1]
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Write the sweep TSV here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Minimum printable-string length when rescanning
    #[arg(long, default_value_t = DEFAULT_MIN_STRING_LEN)]
    pub min_string_len: usize,
    /// Also extract UTF-16LE strings when rescanning
    #[arg(long)]
    pub wide_strings: bool,
    /// Worker threads when rescanning
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Benchmark spec JSON (shape counts and the seed)
    #[arg(long)]
    pub spec: PathBuf,
    /// Directory to write the benchmark bundle into
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(args) => commands::cmd_ingest(args),
        Command::Learn(args) => commands::cmd_learn(args),
        Command::Scan(args) => commands::cmd_scan(args),
        Command::Eval(args) => commands::cmd_eval(args),
        Command::Sweep(args) => commands::cmd_sweep(args),
        Command::Synth(args) => commands::cmd_synth(args),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
