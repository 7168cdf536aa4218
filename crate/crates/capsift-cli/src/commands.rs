//! Implementations of the six subcommands. Each returns the process exit
//! code: 0 for success, 1 for operational failure. Detection outcomes are
//! data, never failures — a clean scan of a clean binary exits 0.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use serde::Deserialize;
use serde_json::json;

use capsift::capability::{
    format_sig, learn_capability, load_capability_config, load_matrix, save_matrix,
    CapabilityData, LearningParams, TermCapabilityMatrix,
};
use capsift::corpus::{assemble_documents, ingest_jsonl, parse_stackexchange_posts};
use capsift::eval::{
    capabilities_in, generate_synthetic_benchmark, load_labels, metrics_row, threshold_sweep,
    thresholds_for_steps, LabeledSample, ScoreTable, SynthSpec,
};
use capsift::index::InvertedIndex;
use capsift::inference::{
    evidence_for_capability, render_text, scan_files_parallel, CapabilityReport, InferenceParams,
    Verbosity, DEFAULT_THRESHOLD, SNIPPET_WINDOW,
};
use capsift::strings::StringParams;

use crate::manifest::{beside, inside, RunTimer};
use crate::{
    EvalArgs, IngestArgs, InputFormat, LearnArgs, OutputFormat, ScanArgs, SweepArgs, SynthArgs,
};

enum DataFormat {
    Xml,
    Jsonl,
}

impl DataFormat {
    fn label(&self) -> &'static str {
        match self {
            DataFormat::Xml => "xml",
            DataFormat::Jsonl => "jsonl",
        }
    }
}

pub fn cmd_ingest(args: &IngestArgs) -> Result<i32> {
    let timer = RunTimer::start("ingest");
    let format = resolve_format(&args.input, args.format)?;
    let file = File::open(&args.input)
        .with_context(|| format!("opening {}", args.input.display()))?;
    let reader = BufReader::new(file);

    let index = match format {
        DataFormat::Jsonl => InvertedIndex::build(ingest_jsonl(reader))?,
        DataFormat::Xml => {
            let mut parser = parse_stackexchange_posts(reader);
            let mut assembler = assemble_documents(parser.by_ref());
            let index = InvertedIndex::build(assembler.by_ref())?;
            let orphans = assembler.orphans();
            drop(assembler);
            let stats = parser.stats();
            if stats.skipped_other_type > 0 {
                eprintln!(
                    "note: skipped {} rows that are neither questions nor answers",
                    stats.skipped_other_type
                );
            }
            if stats.row_errors > 0 {
                let example = stats
                    .row_error_sample
                    .first()
                    .map(|m| format!(" (first: {m})"))
                    .unwrap_or_default();
                eprintln!("warning: skipped {} malformed rows{example}", stats.row_errors);
            }
            if orphans > 0 {
                eprintln!(
                    "warning: {orphans} answers had no preceding question; \
                     indexed with empty title/tags"
                );
            }
            index
        }
    };

    fs::create_dir_all(&args.out_index)
        .with_context(|| format!("creating {}", args.out_index.display()))?;
    index.save(&args.out_index)?;

    let (questions, answers) = index.kind_counts();
    println!(
        "ingested {} documents ({questions} questions, {answers} answers), {} terms",
        index.doc_count(),
        index.term_count()
    );
    println!("index written to {}", args.out_index.display());
    timer.write_manifest(
        &inside(&args.out_index),
        &[&args.input],
        &[&args.out_index],
        json!({ "format": format.label() }),
    )?;
    Ok(0)
}

fn resolve_format(path: &Path, requested: InputFormat) -> Result<DataFormat> {
    match requested {
        InputFormat::Xml => Ok(DataFormat::Xml),
        InputFormat::Jsonl => Ok(DataFormat::Jsonl),
        InputFormat::Auto => {
            let ext = path
                .extension()
                .and_then(|e| e.to_str())
                .map(|e| e.to_ascii_lowercase());
            match ext.as_deref() {
                Some("xml") => Ok(DataFormat::Xml),
                Some("jsonl" | "json" | "ndjson") => Ok(DataFormat::Jsonl),
                _ => sniff_format(path),
            }
        }
    }
}

/// Look at the first non-whitespace byte: XML dumps open with `<`,
/// JSONL documents with `{`.
fn sniff_format(path: &Path) -> Result<DataFormat> {
    let mut head = [0u8; 512];
    let mut file =
        File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let n = file.read(&mut head)?;
    match head[..n].iter().find(|b| !b.is_ascii_whitespace()) {
        Some(b'<') => Ok(DataFormat::Xml),
        Some(b'{') => Ok(DataFormat::Jsonl),
        _ => bail!(
            "cannot auto-detect the format of {} — pass --format xml or --format jsonl",
            path.display()
        ),
    }
}

pub fn cmd_learn(args: &LearnArgs) -> Result<i32> {
    let timer = RunTimer::start("learn");
    let config_file = File::open(&args.config)
        .with_context(|| format!("opening {}", args.config.display()))?;
    let config = load_capability_config(BufReader::new(config_file))?;
    let index = InvertedIndex::load(&args.index)
        .with_context(|| format!("loading index {}", args.index.display()))?;
    let defaults = LearningParams { alpha: args.alpha, beta: args.beta };
    let counting = args.counting.into();

    let mut matrix = TermCapabilityMatrix::new();
    for entry in &config {
        let started = Instant::now();
        let outcome = learn_capability(&index, entry, &defaults, counting)?;
        let ms = started.elapsed().as_secs_f64() * 1000.0;
        if outcome.matched_nothing() {
            eprintln!("warning: capability '{}' matched no documents", outcome.name);
        }
        println!(
            "learned '{}': {} matching documents, {} terms, {ms:.1} ms",
            outcome.name,
            outcome.provenance.matched_doc_count,
            outcome.terms.len()
        );
        matrix.insert(outcome.name, CapabilityData::new(outcome.provenance, outcome.terms))?;
    }

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let out_file = File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut writer = BufWriter::new(out_file);
    save_matrix(&matrix, &mut writer)?;
    writer.flush()?;
    println!(
        "matrix written to {} ({} capabilities, {} entries)",
        args.out.display(),
        matrix.len(),
        matrix.entry_count()
    );
    timer.write_manifest(
        &beside(&args.out),
        &[&args.index, &args.config],
        &[&args.out],
        json!({ "alpha": args.alpha, "beta": args.beta, "counting": counting.name() }),
    )?;
    Ok(0)
}

pub fn cmd_scan(args: &ScanArgs) -> Result<i32> {
    let matrix = load_matrix_file(&args.matrix)?;
    let verbosity =
        Verbosity::from_level(args.verbosity).context("verbosity must be 0, 1, or 2")?;
    if verbosity >= Verbosity::WithSnippets && args.index.is_none() {
        bail!("evidence requires index (pass --index <dir> so terms can be traced to posts)");
    }
    let inference = InferenceParams { threshold: args.threshold, verbosity };
    inference.validate()?;
    let strings = StringParams { min_len: args.min_string_len, wide: args.wide_strings };
    let jobs = resolve_jobs(args.jobs)?;

    let mut results = scan_files_parallel(&args.files, &matrix, &inference, &strings, jobs)?;
    let index = match &args.index {
        Some(dir) if verbosity >= Verbosity::WithSnippets => Some(
            InvertedIndex::load(dir).with_context(|| format!("loading index {}", dir.display()))?,
        ),
        _ => None,
    };

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut failures = 0u64;
    for (path, result) in &mut results {
        match result {
            Ok(report) => {
                if let Some(index) = &index {
                    attach_evidence(index, &matrix, report, args.evidence_limit)?;
                }
                match args.format {
                    OutputFormat::Text => write!(out, "{}", render_text(report))?,
                    OutputFormat::Json => writeln!(out, "{}", serde_json::to_string(report)?)?,
                }
            }
            Err(e) => {
                failures += 1;
                eprintln!("error: {e}");
                if args.format == OutputFormat::Json {
                    let record =
                        json!({ "sample_id": path.display().to_string(), "error": e.to_string() });
                    writeln!(out, "{record}")?;
                }
            }
        }
    }
    if failures > 0 {
        eprintln!("{failures} of {} files could not be scanned", results.len());
        return Ok(1);
    }
    Ok(0)
}

/// Trace each detected capability's contributing terms back to corpus posts.
fn attach_evidence(
    index: &InvertedIndex,
    matrix: &TermCapabilityMatrix,
    report: &mut CapabilityReport,
    limit: usize,
) -> Result<()> {
    for cap in &mut report.capabilities {
        if !cap.detected || cap.terms.is_empty() {
            continue;
        }
        let data = matrix
            .capability(&cap.name)
            .with_context(|| format!("capability '{}' missing from matrix", cap.name))?;
        let contributing: Vec<(String, f64)> =
            cap.terms.iter().map(|t| (t.term.clone(), t.p)).collect();
        cap.evidence =
            evidence_for_capability(index, &data.provenance, &contributing, SNIPPET_WINDOW, limit)?;
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<i32> {
    let timer = RunTimer::start("eval");
    let scores = build_scores(
        args.reports.as_deref(),
        args.matrix.as_deref(),
        &args.files,
        args.min_string_len,
        args.wide_strings,
        args.jobs,
    )?;
    let labels = read_labels(&args.labels)?;

    let mut table = String::from("capability\ttpr\tfpr\trecall\tnormalized_precision\tf_score\n");
    for capability in capabilities_in(&labels) {
        let row = metrics_row(&scores, &labels, &capability, args.threshold, args.tp_ratio)?;
        table.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            row.capability,
            sig(row.tpr),
            sig(row.fpr),
            sig(row.recall),
            sig(row.normalized_precision),
            sig(row.f_score)
        ));
    }

    let mut inputs: Vec<&Path> = vec![&args.labels];
    if let Some(r) = &args.reports {
        inputs.push(r);
    }
    if let Some(m) = &args.matrix {
        inputs.push(m);
    }
    deliver_table(
        &table,
        args.out.as_deref(),
        &timer,
        &inputs,
        json!({
            "threshold": args.threshold,
            "tp_ratio": args.tp_ratio,
            "source": if args.reports.is_some() { "reports" } else { "rescan" },
        }),
        "metrics",
    )?;
    Ok(0)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let timer = RunTimer::start("sweep");
    let scores = build_scores(
        args.reports.as_deref(),
        args.matrix.as_deref(),
        &args.files,
        args.min_string_len,
        args.wide_strings,
        args.jobs,
    )?;
    let labels = read_labels(&args.labels)?;
    let thresholds = thresholds_for_steps(args.steps)?;
    let points = threshold_sweep(&scores, &labels, &thresholds)?;

    let mut table = String::from("threshold\tcapability\trecall\tnormalized_precision\tnote\n");
    for point in &points {
        let theta = sig(point.threshold);
        for cell in &point.per_capability {
            table.push_str(&format!(
                "{theta}\t{}\t{}\t{}\t{}\n",
                cell.capability,
                opt_sig(cell.recall),
                opt_sig(cell.normalized_precision),
                cell.note.as_deref().unwrap_or("")
            ));
        }
        table.push_str(&format!(
            "{theta}\t(mean)\t{}\t{}\t\n",
            opt_sig(point.mean_recall),
            opt_sig(point.mean_normalized_precision)
        ));
    }

    let mut inputs: Vec<&Path> = vec![&args.labels];
    if let Some(r) = &args.reports {
        inputs.push(r);
    }
    if let Some(m) = &args.matrix {
        inputs.push(m);
    }
    deliver_table(
        &table,
        args.out.as_deref(),
        &timer,
        &inputs,
        json!({
            "steps": args.steps,
            "source": if args.reports.is_some() { "reports" } else { "rescan" },
        }),
        "sweep",
    )?;
    Ok(0)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<i32> {
    let timer = RunTimer::start("synth");
    let spec_text = fs::read_to_string(&args.spec)
        .with_context(|| format!("reading {}", args.spec.display()))?;
    let spec: SynthSpec = serde_json::from_str(&spec_text)
        .with_context(|| format!("parsing {}", args.spec.display()))?;
    let bundle = generate_synthetic_benchmark(&spec)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let binaries_dir = args.out.join("binaries");
    if binaries_dir.exists() {
        // binaries/ is wholly owned by this command; replace it so a rerun
        // cannot leave stale fixtures from a larger previous spec behind.
        fs::remove_dir_all(&binaries_dir)
            .with_context(|| format!("clearing {}", binaries_dir.display()))?;
    }
    fs::create_dir_all(&binaries_dir)?;

    fs::write(args.out.join("corpus.jsonl"), bundle.corpus_jsonl()?)?;
    fs::write(args.out.join("capabilities.json"), bundle.config_json()?)?;
    fs::write(args.out.join("labels.jsonl"), bundle.labels_jsonl()?)?;
    for (name, bytes) in &bundle.binaries {
        let path = args.out.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }

    println!(
        "benchmark written to {}: {} documents, {} capabilities, {} binaries, {} labels",
        args.out.display(),
        bundle.documents.len(),
        bundle.config.len(),
        bundle.binaries.len(),
        bundle.labels.len()
    );
    timer.write_manifest(
        &inside(&args.out),
        &[&args.spec],
        &[&args.out],
        serde_json::to_value(&spec)?,
    )?;
    Ok(0)
}

fn sig(v: f64) -> String {
    format_sig(v, 12)
}

fn opt_sig(v: Option<f64>) -> String {
    v.map(sig).unwrap_or_else(|| "NA".to_owned())
}

/// Print a finished table to stdout, or write it to `out` (with a manifest
/// beside it) and print where it went.
fn deliver_table(
    table: &str,
    out: Option<&Path>,
    timer: &RunTimer,
    inputs: &[&Path],
    parameters: serde_json::Value,
    what: &str,
) -> Result<()> {
    match out {
        None => print!("{table}"),
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent)
                        .with_context(|| format!("creating {}", parent.display()))?;
                }
            }
            fs::write(path, table).with_context(|| format!("writing {}", path.display()))?;
            timer.write_manifest(&beside(path), inputs, &[path], parameters)?;
            println!("{what} written to {}", path.display());
        }
    }
    Ok(())
}

fn load_matrix_file(path: &Path) -> Result<TermCapabilityMatrix> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(load_matrix(BufReader::new(file))?)
}

fn read_labels(path: &Path) -> Result<Vec<LabeledSample>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(load_labels(BufReader::new(file))?)
}

/// Worker count: flag beats the CAPSIFT_JOBS environment variable beats
/// the library default (one worker per core).
fn resolve_jobs(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(jobs) = flag {
        ensure!(jobs >= 1, "--jobs must be at least 1");
        return Ok(Some(jobs));
    }
    match std::env::var("CAPSIFT_JOBS") {
        Ok(value) => {
            let jobs: usize = value
                .trim()
                .parse()
                .with_context(|| format!("CAPSIFT_JOBS must be a positive integer, got {value:?}"))?;
            ensure!(jobs >= 1, "CAPSIFT_JOBS must be at least 1, got {jobs}");
            Ok(Some(jobs))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e).context("reading CAPSIFT_JOBS"),
    }
}

/// A failed scan's stand-in line in a JSONL report stream.
#[derive(Debug, Deserialize)]
struct ScanErrorRecord {
    sample_id: String,
    error: String,
}

fn build_scores(
    reports: Option<&Path>,
    matrix: Option<&Path>,
    files: &[PathBuf],
    min_string_len: usize,
    wide_strings: bool,
    jobs: Option<usize>,
) -> Result<ScoreTable> {
    match (reports, matrix) {
        (Some(path), None) => {
            ensure!(files.is_empty(), "FILES are only used when rescanning with --matrix");
            scores_from_reports(path)
        }
        (None, Some(path)) => {
            ensure!(!files.is_empty(), "rescanning with --matrix needs binary FILES");
            scores_from_rescan(path, files, min_string_len, wide_strings, jobs)
        }
        (Some(_), Some(_)) => bail!("pass either --reports or --matrix, not both"),
        (None, None) => bail!("pass a score source: --reports <jsonl>, or --matrix <tsv> FILES..."),
    }
}

fn scores_from_reports(path: &Path) -> Result<ScoreTable> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut scores = ScoreTable::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let report: CapabilityReport = match serde_json::from_str(trimmed) {
            Ok(report) => report,
            Err(parse_err) => {
                // A scan batch that hit per-file errors leaves error records
                // in the stream; evaluating around them would silently bias
                // the metrics.
                if let Ok(record) = serde_json::from_str::<ScanErrorRecord>(trimmed) {
                    bail!(
                        "{}:{}: sample '{}' failed to scan ({}); rescan before evaluating",
                        path.display(),
                        idx + 1,
                        record.sample_id,
                        record.error
                    );
                }
                return Err(parse_err).with_context(|| {
                    format!("{}:{}: not a scan report", path.display(), idx + 1)
                });
            }
        };
        scores.add_report(&report)?;
    }
    Ok(scores)
}

fn scores_from_rescan(
    matrix_path: &Path,
    files: &[PathBuf],
    min_string_len: usize,
    wide_strings: bool,
    jobs: Option<usize>,
) -> Result<ScoreTable> {
    let matrix = load_matrix_file(matrix_path)?;
    let inference =
        InferenceParams { threshold: DEFAULT_THRESHOLD, verbosity: Verbosity::ScoresOnly };
    let strings = StringParams { min_len: min_string_len, wide: wide_strings };
    let jobs = resolve_jobs(jobs)?;
    let results = scan_files_parallel(files, &matrix, &inference, &strings, jobs)?;
    let mut scores = ScoreTable::new();
    for (path, result) in results {
        let report =
            result.with_context(|| format!("scanning {} for evaluation", path.display()))?;
        scores.add_report(&report)?;
    }
    Ok(scores)
}
