//! Accuracy metrics over labeled samples, threshold sweeps, and the
//! synthetic benchmark generator.
//!
//! The headline metric is *normalized precision*: ordinary precision
//! recomputed from the true/false positive rates at an assumed positive
//! ratio (`true_percentage`, default 0.5) instead of the test set's actual
//! ratio:
//!
//! ```text
//! NP = TP_ratio * TPR / (TP_ratio * TPR + (1 - TP_ratio) * FPR)
//! ```
//!
//! This makes results invariant to how many negatives the evaluator happened
//! to collect — duplicating every negative sample k times changes nothing,
//! bit for bit. The f-score is the harmonic mean of normalized precision
//! and recall. Metrics with empty denominators raise
//! [`Error::UndefinedMetric`] rather than silently reporting 0; threshold
//! sweeps exclude the affected capability from that point's mean and record
//! a note instead.

mod synth;

pub use synth::{generate_synthetic_benchmark, SynthBundle, SynthSpec};

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::inference::CapabilityReport;
use crate::{Error, Result};

/// Assumed positive-class ratio used by normalized precision.
pub const DEFAULT_TRUE_PERCENTAGE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

/// One ground-truth row: this sample does (or verifiably does not) have
/// this capability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledSample {
    pub sample_id: String,
    pub capability: String,
    pub label: Label,
}

/// Load a labels file: JSONL of `{"sample_id", "capability", "label"}`.
/// A repeated (sample_id, capability) pair is contradictory and fatal.
pub fn load_labels<R: BufRead>(reader: R) -> Result<Vec<LabeledSample>> {
    let mut labels = Vec::new();
    let mut seen: HashMap<(String, String), u64> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(Error::from)?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let sample: LabeledSample = serde_json::from_str(trimmed)
            .map_err(|e| Error::JsonLine { line: line_no, message: e.to_string() })?;
        let key = (sample.sample_id.clone(), sample.capability.clone());
        if let Some(first) = seen.insert(key, line_no) {
            return Err(Error::Config {
                message: format!(
                    "duplicate label for sample '{}', capability '{}' (lines {first} and {line_no})",
                    sample.sample_id, sample.capability
                ),
            });
        }
        labels.push(sample);
    }
    Ok(labels)
}

/// The sorted set of capabilities a label set covers.
pub fn capabilities_in(labels: &[LabeledSample]) -> Vec<String> {
    let set: BTreeSet<&str> = labels.iter().map(|l| l.capability.as_str()).collect();
    set.into_iter().map(str::to_owned).collect()
}

/// Standard 2x2 counts for one capability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
}

/// Count the 2x2 table for `capability`. `predictions` maps sample_id to
/// the detection decision; every labeled sample must have one.
pub fn confusion(
    predictions: &HashMap<String, bool>,
    labels: &[LabeledSample],
    capability: &str,
) -> Result<ConfusionCounts> {
    let mut counts = ConfusionCounts::default();
    let mut missing = Vec::new();
    for label in labels.iter().filter(|l| l.capability == capability) {
        let Some(&detected) = predictions.get(&label.sample_id) else {
            missing.push(label.sample_id.clone());
            continue;
        };
        match (label.label, detected) {
            (Label::Positive, true) => counts.true_positives += 1,
            (Label::Positive, false) => counts.false_negatives += 1,
            (Label::Negative, true) => counts.false_positives += 1,
            (Label::Negative, false) => counts.true_negatives += 1,
        }
    }
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::MissingPredictions {
            capability: capability.to_owned(),
            sample_ids: missing,
        });
    }
    Ok(counts)
}

/// True positive rate: `tp / (tp + fn)`.
pub fn tpr(c: &ConfusionCounts) -> Result<f64> {
    rate("tpr", c.true_positives, c.false_negatives, "no positive labels evaluated")
}

/// Recall — the same ratio as [`tpr`], kept as its own entry point because
/// reports name both.
pub fn recall(c: &ConfusionCounts) -> Result<f64> {
    rate("recall", c.true_positives, c.false_negatives, "no positive labels evaluated")
}

/// False positive rate: `fp / (fp + tn)`.
pub fn fpr(c: &ConfusionCounts) -> Result<f64> {
    rate("fpr", c.false_positives, c.true_negatives, "no negative labels evaluated")
}

fn rate(metric: &'static str, hits: u64, misses: u64, why: &str) -> Result<f64> {
    let denom = hits + misses;
    if denom == 0 {
        return Err(Error::UndefinedMetric { metric, reason: why.to_owned() });
    }
    Ok(hits as f64 / denom as f64)
}

/// Precision at an assumed positive ratio instead of the observed one.
pub fn normalized_precision(tpr: f64, fpr: f64, true_percentage: f64) -> Result<f64> {
    for (name, v) in [("tpr", tpr), ("fpr", fpr)] {
        if !(v >= 0.0 && v <= 1.0) {
            return Err(Error::Domain { message: format!("{name} must be in [0,1], got {v}") });
        }
    }
    if !(true_percentage > 0.0 && true_percentage < 1.0) {
        return Err(Error::Domain {
            message: format!("true_percentage must be in (0,1), got {true_percentage}"),
        });
    }
    if tpr == 0.0 && fpr == 0.0 {
        return Err(Error::UndefinedMetric {
            metric: "normalized_precision",
            reason: "tpr and fpr are both zero (nothing was detected)".to_owned(),
        });
    }
    let weighted_tp = true_percentage * tpr;
    Ok(weighted_tp / (weighted_tp + (1.0 - true_percentage) * fpr))
}

/// Harmonic mean of precision and recall (F1).
pub fn f_score(precision: f64, recall: f64) -> Result<f64> {
    for (name, v) in [("precision", precision), ("recall", recall)] {
        if !(v >= 0.0 && v <= 1.0) {
            return Err(Error::Domain { message: format!("{name} must be in [0,1], got {v}") });
        }
    }
    if precision == 0.0 && recall == 0.0 {
        return Err(Error::UndefinedMetric {
            metric: "f_score",
            reason: "precision and recall are both zero".to_owned(),
        });
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Stored probabilities keyed by (sample_id, capability) — what scan
/// reports boil down to for evaluation, so thresholds can be revisited
/// without rescanning binaries.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    scores: HashMap<(String, String), f64>,
}

impl ScoreTable {
    pub fn new() -> ScoreTable {
        ScoreTable::default()
    }

    pub fn insert(&mut self, sample_id: &str, capability: &str, probability: f64) -> Result<()> {
        if !(probability >= 0.0 && probability <= 1.0) {
            return Err(Error::Domain {
                message: format!("probability must be in [0,1], got {probability}"),
            });
        }
        let key = (sample_id.to_owned(), capability.to_owned());
        if self.scores.insert(key, probability).is_some() {
            return Err(Error::Config {
                message: format!(
                    "duplicate score for sample '{sample_id}', capability '{capability}'"
                ),
            });
        }
        Ok(())
    }

    /// Fold one scan report in (every capability entry it carries).
    pub fn add_report(&mut self, report: &CapabilityReport) -> Result<()> {
        for cap in &report.capabilities {
            self.insert(&report.sample_id, &cap.name, cap.probability)?;
        }
        Ok(())
    }

    pub fn get(&self, sample_id: &str, capability: &str) -> Option<f64> {
        self.scores.get(&(sample_id.to_owned(), capability.to_owned())).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Detection decisions for one capability at one threshold. Fails listing
/// the sample_ids if any labeled sample has no stored score.
fn detections(
    scores: &ScoreTable,
    labels: &[LabeledSample],
    capability: &str,
    threshold: f64,
) -> Result<HashMap<String, bool>> {
    let mut out = HashMap::new();
    let mut missing = Vec::new();
    for label in labels.iter().filter(|l| l.capability == capability) {
        match scores.get(&label.sample_id, capability) {
            Some(p) => {
                out.insert(label.sample_id.clone(), p > threshold);
            }
            None => missing.push(label.sample_id.clone()),
        }
    }
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::MissingPredictions {
            capability: capability.to_owned(),
            sample_ids: missing,
        });
    }
    Ok(out)
}

/// One capability's full metric row at a fixed threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub capability: String,
    pub tpr: f64,
    pub fpr: f64,
    pub recall: f64,
    pub normalized_precision: f64,
    pub f_score: f64,
}

/// Compute a [`MetricsRow`] from stored probabilities. Undefined metrics
/// propagate as errors — a fixed-threshold evaluation has no mean to fall
/// back to, the caller must know.
pub fn metrics_row(
    scores: &ScoreTable,
    labels: &[LabeledSample],
    capability: &str,
    threshold: f64,
    true_percentage: f64,
) -> Result<MetricsRow> {
    if !(threshold >= 0.0 && threshold <= 1.0) {
        return Err(Error::Domain {
            message: format!("threshold must be in [0,1], got {threshold}"),
        });
    }
    let predictions = detections(scores, labels, capability, threshold)?;
    let counts = confusion(&predictions, labels, capability)?;
    let tpr_v = tpr(&counts)?;
    let fpr_v = fpr(&counts)?;
    let np = normalized_precision(tpr_v, fpr_v, true_percentage)?;
    let f = f_score(np, tpr_v)?;
    Ok(MetricsRow {
        capability: capability.to_owned(),
        tpr: tpr_v,
        fpr: fpr_v,
        recall: tpr_v,
        normalized_precision: np,
        f_score: f,
    })
}

/// One capability at one sweep point; a `None` metric was undefined there
/// and `note` says why.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub capability: String,
    pub recall: Option<f64>,
    pub normalized_precision: Option<f64>,
    pub note: Option<String>,
}

/// Aggregated sweep point: unweighted means over the capabilities whose
/// metrics were defined at this threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    pub per_capability: Vec<SweepCell>,
    pub mean_recall: Option<f64>,
    pub mean_normalized_precision: Option<f64>,
}

/// Evenly spaced thresholds over [0,1] inclusive; `steps == 1` gives the
/// single point 0.0 (detect anything with any evidence).
pub fn thresholds_for_steps(steps: usize) -> Result<Vec<f64>> {
    match steps {
        0 => Err(Error::Config { message: "sweep needs at least one step".into() }),
        1 => Ok(vec![0.0]),
        n => Ok((0..n).map(|i| i as f64 / (n - 1) as f64).collect()),
    }
}

/// Re-threshold stored probabilities at each point and aggregate
/// per-capability metrics. Thresholds must be strictly increasing within
/// [0,1]. Missing scores are hard errors; undefined metrics are per-point
/// exclusions.
pub fn threshold_sweep(
    scores: &ScoreTable,
    labels: &[LabeledSample],
    thresholds: &[f64],
) -> Result<Vec<SweepPoint>> {
    if thresholds.is_empty() {
        return Err(Error::Config { message: "sweep needs at least one threshold".into() });
    }
    for pair in thresholds.windows(2) {
        if !(pair[0] < pair[1]) {
            return Err(Error::Config {
                message: format!("thresholds must be strictly increasing ({} then {})", pair[0], pair[1]),
            });
        }
    }
    if !(thresholds[0] >= 0.0 && *thresholds.last().expect("non-empty") <= 1.0) {
        return Err(Error::Config { message: "thresholds must lie within [0,1]".into() });
    }

    let capabilities = capabilities_in(labels);
    let mut points = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let mut cells = Vec::with_capacity(capabilities.len());
        for capability in &capabilities {
            let predictions = detections(scores, labels, capability, threshold)?;
            let counts = confusion(&predictions, labels, capability)?;
            let mut notes: Vec<String> = Vec::new();
            let recall_v = match recall(&counts) {
                Ok(v) => Some(v),
                Err(e) => {
                    notes.push(e.to_string());
                    None
                }
            };
            let np = match (tpr(&counts), fpr(&counts)) {
                (Ok(t), Ok(f)) => match normalized_precision(t, f, DEFAULT_TRUE_PERCENTAGE) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        notes.push(e.to_string());
                        None
                    }
                },
                (Err(e), _) | (_, Err(e)) => {
                    let msg = format!("normalized_precision is undefined: {e}");
                    if !notes.iter().any(|n| *n == msg) {
                        notes.push(msg);
                    }
                    None
                }
            };
            cells.push(SweepCell {
                capability: capability.clone(),
                recall: recall_v,
                normalized_precision: np,
                note: if notes.is_empty() { None } else { Some(notes.join("; ")) },
            });
        }
        points.push(SweepPoint {
            threshold,
            mean_recall: mean_of(cells.iter().map(|c| c.recall)),
            mean_normalized_precision: mean_of(cells.iter().map(|c| c.normalized_precision)),
            per_capability: cells,
        });
    }
    Ok(points)
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}
