//! Scoring binaries against a learned matrix: noisy-OR combination,
//! thresholding, and report assembly.
//!
//! Each capability is scored independently. The terms extracted from the
//! binary are intersected with the capability's matrix terms; the surviving
//! per-term probabilities combine through a noisy-OR gate:
//!
//! ```text
//! P(C | T_1 ... T_n) = 1 - prod(1 - P(C | T_j))
//! ```
//!
//! so a capability is at least as probable as its single most indicative
//! term, and every additional matched term can only raise the score.
//! Detection applies a strict threshold (`p > threshold`, default 0.37):
//! a threshold of 1 never fires and 0 fires on any positive evidence.

mod evidence;
mod report;

pub use evidence::{build_evidence, evidence_for_capability, Evidence, SNIPPET_WINDOW};
pub use report::{render_text, CapabilityReport, CapabilityResult, TermProbability};

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::capability::TermCapabilityMatrix;
use crate::strings::{terms_from_bytes, StringParams, TermSet};
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.37;

/// How much detail a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verbosity {
    /// Probabilities and detections only.
    ScoresOnly,
    /// Plus the contributing term list per capability.
    WithTerms,
    /// Plus per-term evidence posts (requires the document index).
    WithSnippets,
}

impl Verbosity {
    /// CLI mapping: 0, 1, 2.
    pub fn from_level(level: u8) -> Option<Verbosity> {
        match level {
            0 => Some(Verbosity::ScoresOnly),
            1 => Some(Verbosity::WithTerms),
            2 => Some(Verbosity::WithSnippets),
            _ => None,
        }
    }
}

/// Decision threshold and output detail level for a scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceParams {
    /// Strict detection cut: detected iff probability > threshold.
    pub threshold: f64,
    pub verbosity: Verbosity,
}

impl Default for InferenceParams {
    fn default() -> Self {
        InferenceParams { threshold: DEFAULT_THRESHOLD, verbosity: Verbosity::ScoresOnly }
    }
}

impl InferenceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0 && self.threshold <= 1.0) {
            return Err(Error::Domain {
                message: format!("threshold must be in [0,1], got {}", self.threshold),
            });
        }
        Ok(())
    }
}

/// One capability's score for one binary.
#[derive(Debug, Clone, PartialEq)]
pub struct CapabilityScore {
    pub capability: String,
    /// Noisy-OR combination of the contributing term probabilities.
    pub probability: f64,
    pub detected: bool,
    /// (term, P(C|T)) for every extracted term with a matrix entry, sorted
    /// by probability descending (ties: term ascending). Present even when
    /// the capability is below threshold — the score is always explainable.
    pub contributing: Vec<(String, f64)>,
}

/// Noisy-OR gate: `1 - prod(1 - p)`.
///
/// Empty input gives 0, a single input passes through exactly, any input of
/// 1.0 gives exactly 1.0, and the result never drops below the largest
/// input. Computed via `ln_1p`/`exp_m1` so thousands of tiny probabilities
/// accumulate without the catastrophic cancellation a naive product has.
pub fn noisy_or(probabilities: &[f64]) -> Result<f64> {
    let mut max_p = 0.0f64;
    for &p in probabilities {
        if !(p >= 0.0 && p <= 1.0) {
            return Err(Error::Domain {
                message: format!("noisy-OR input {p} outside [0,1]"),
            });
        }
        max_p = max_p.max(p);
    }
    match probabilities {
        [] => Ok(0.0),
        [p] => Ok(*p),
        _ if max_p >= 1.0 => Ok(1.0),
        ps => {
            let log_miss: f64 = ps.iter().map(|&p| (-p).ln_1p()).sum();
            Ok((-log_miss.exp_m1()).clamp(max_p, 1.0))
        }
    }
}

/// Score one capability against an extracted term set.
pub fn score_capability(
    terms: &TermSet,
    matrix: &TermCapabilityMatrix,
    capability: &str,
    threshold: f64,
) -> Result<CapabilityScore> {
    let data = matrix
        .capability(capability)
        .ok_or_else(|| Error::CapabilityNotFound { name: capability.to_owned() })?;
    let mut contributing: Vec<(String, f64)> = data
        .terms()
        .filter(|(term, _)| terms.contains(term))
        .map(|(term, p)| (term.to_owned(), p))
        .collect();
    contributing
        .sort_by(|a, b| b.1.partial_cmp(&a.1).expect("matrix has no NaN").then(a.0.cmp(&b.0)));
    let ps: Vec<f64> = contributing.iter().map(|(_, p)| *p).collect();
    let probability = noisy_or(&ps)?;
    Ok(CapabilityScore {
        capability: capability.to_owned(),
        probability,
        detected: probability > threshold,
        contributing,
    })
}

/// Scan raw bytes: extract strings, derive terms, score every matrix
/// capability. All-or-nothing — a report always covers every capability.
pub fn scan_binary(
    sample_id: &str,
    bytes: &[u8],
    matrix: &TermCapabilityMatrix,
    inference: &InferenceParams,
    strings: &StringParams,
) -> Result<CapabilityReport> {
    inference.validate()?;
    if matrix.is_empty() {
        return Err(Error::Config { message: "matrix contains no capabilities".into() });
    }
    let started = Instant::now();
    let terms = terms_from_bytes(bytes, strings);
    let mut capabilities = Vec::with_capacity(matrix.len());
    for name in matrix.capability_names() {
        let score = score_capability(&terms, matrix, name, inference.threshold)?;
        let include_terms = inference.verbosity >= Verbosity::WithTerms;
        capabilities.push(CapabilityResult {
            name: score.capability,
            probability: score.probability,
            detected: score.detected,
            terms: if include_terms {
                score
                    .contributing
                    .into_iter()
                    .map(|(term, p)| TermProbability { term, p })
                    .collect()
            } else {
                Vec::new()
            },
            evidence: Vec::new(),
        });
    }
    Ok(CapabilityReport {
        sample_id: sample_id.to_owned(),
        timing_ms: started.elapsed().as_secs_f64() * 1000.0,
        capabilities,
    })
}

/// Read and scan one file.
pub fn scan_file(
    path: &Path,
    matrix: &TermCapabilityMatrix,
    inference: &InferenceParams,
    strings: &StringParams,
) -> Result<CapabilityReport> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    scan_binary(&path.display().to_string(), &bytes, matrix, inference, strings)
}

/// Scan many files on a worker pool. Results come back in input order;
/// per-file failures stay per-file so one unreadable binary cannot sink a
/// batch. `jobs` of `None` uses the global default pool size.
pub fn scan_files_parallel(
    paths: &[PathBuf],
    matrix: &TermCapabilityMatrix,
    inference: &InferenceParams,
    strings: &StringParams,
    jobs: Option<usize>,
) -> Result<Vec<(PathBuf, Result<CapabilityReport>)>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config { message: format!("worker pool: {e}") })?;
    Ok(pool.install(|| {
        paths
            .par_iter()
            .map(|path| (path.clone(), scan_file(path, matrix, inference, strings)))
            .collect()
    }))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::capability::{CapabilityData, CapabilityProvenance, CountingMode};
    use std::collections::BTreeMap;

    /// The three-term worked example: privmsg 0.9, topic 0.5, channel 0.1.
    pub(crate) fn irc_matrix() -> TermCapabilityMatrix {
        matrix_of(&[("privmsg", "irc", 0.9), ("topic", "irc", 0.5), ("channel", "irc", 0.1)])
    }

    pub(crate) fn matrix_of(entries: &[(&str, &str, f64)]) -> TermCapabilityMatrix {
        let mut caps: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for (term, cap, p) in entries {
            caps.entry((*cap).to_owned()).or_default().insert((*term).to_owned(), *p);
        }
        let mut matrix = TermCapabilityMatrix::new();
        for (cap, terms) in caps {
            let provenance = CapabilityProvenance {
                query: format!("tags:{cap}"),
                matched_doc_count: 3,
                alpha: 10.0,
                beta: 90.0,
                counting: CountingMode::Documents,
            };
            matrix.insert(cap, CapabilityData::new(provenance, terms)).unwrap();
        }
        matrix
    }

    fn term_set(words: &[&str]) -> TermSet {
        let strings: Vec<crate::strings::PrintableString> = words
            .iter()
            .map(|w| crate::strings::PrintableString { offset: 0, text: (*w).to_owned() })
            .collect();
        crate::strings::terms_from_strings(&strings)
    }

    #[test]
    fn worked_example_is_0_955() {
        let p = noisy_or(&[0.9, 0.5, 0.1]).unwrap();
        assert!((p - 0.955).abs() <= 1e-12, "{p}");
    }

    #[test]
    fn identities_hold_exactly() {
        assert_eq!(noisy_or(&[]).unwrap(), 0.0);
        for p in [0.0, 0.123456, 0.37, 1.0] {
            assert_eq!(noisy_or(&[p]).unwrap(), p);
        }
        assert_eq!(noisy_or(&[0.5, 0.5]).unwrap(), 0.75);
        assert_eq!(noisy_or(&[1.0, 0.2, 0.3]).unwrap(), 1.0);
    }

    #[test]
    fn order_insensitive_and_monotone() {
        let a = noisy_or(&[0.9, 0.5, 0.1]).unwrap();
        let b = noisy_or(&[0.1, 0.9, 0.5]).unwrap();
        assert_eq!(a, b);
        // Adding a term never lowers the score.
        let more = noisy_or(&[0.9, 0.5, 0.1, 0.05]).unwrap();
        assert!(more >= a);
        // And the result never drops below the strongest term.
        assert!(noisy_or(&[0.9, 1e-9]).unwrap() >= 0.9);
    }

    #[test]
    fn domain_errors_on_bad_inputs() {
        assert!(noisy_or(&[1.1]).is_err());
        assert!(noisy_or(&[-0.1]).is_err());
        assert!(noisy_or(&[f64::NAN]).is_err());
    }

    #[test]
    fn tiny_probabilities_accumulate_accurately() {
        // 10^4 inputs of the f64 nearest 1e-4; reference computed with
        // 60-digit decimal arithmetic.
        let ps = vec![1e-4; 10_000];
        let got = noisy_or(&ps).unwrap();
        assert!((got - 0.6321389535670701).abs() <= 1e-9, "{got}");
    }

    #[test]
    fn score_matches_worked_example() {
        let matrix = irc_matrix();
        let terms = term_set(&["privmsg", "topic", "channel"]);
        let score = score_capability(&terms, &matrix, "irc", 0.37).unwrap();
        assert!((score.probability - 0.955).abs() <= 1e-12);
        assert!(score.detected);
        assert_eq!(
            score.contributing,
            vec![("privmsg".into(), 0.9), ("topic".into(), 0.5), ("channel".into(), 0.1)]
        );
    }

    #[test]
    fn disjoint_terms_score_zero_and_single_term_passes_through() {
        let matrix = irc_matrix();
        let score = score_capability(&term_set(&["unrelated"]), &matrix, "irc", 0.37).unwrap();
        assert_eq!(score.probability, 0.0);
        assert!(!score.detected);
        let score = score_capability(&term_set(&["privmsg"]), &matrix, "irc", 0.37).unwrap();
        assert_eq!(score.probability, 0.9);
    }

    #[test]
    fn unknown_capability_is_an_error() {
        let err =
            score_capability(&term_set(&["privmsg"]), &irc_matrix(), "rdp", 0.37).unwrap_err();
        assert!(matches!(err, Error::CapabilityNotFound { .. }));
    }

    #[test]
    fn scan_composes_extraction_and_scoring() {
        let matrix = irc_matrix();
        let mut bytes = vec![0u8, 0u8];
        for s in [&b"PRIVMSG"[..], &b"TOPIC"[..], &b"CHANNEL"[..]] {
            bytes.extend_from_slice(s);
            bytes.push(0x00);
        }
        let report = scan_binary(
            "fixture.bin",
            &bytes,
            &matrix,
            &InferenceParams::default(),
            &StringParams::default(),
        )
        .unwrap();
        assert_eq!(report.capabilities.len(), 1);
        let irc = &report.capabilities[0];
        assert_eq!(irc.name, "irc");
        assert!((irc.probability - 0.955).abs() <= 1e-12);
        assert!(irc.detected);
        assert!(report.timing_ms >= 0.0);
    }

    #[test]
    fn empty_file_scores_zero_everywhere() {
        let matrix = matrix_of(&[("privmsg", "irc", 0.9), ("bitblt", "screenshot", 0.4)]);
        let report = scan_binary(
            "empty.bin",
            b"",
            &matrix,
            &InferenceParams::default(),
            &StringParams::default(),
        )
        .unwrap();
        assert_eq!(report.capabilities.len(), 2);
        for cap in &report.capabilities {
            assert_eq!(cap.probability, 0.0);
            assert!(!cap.detected);
        }
    }

    #[test]
    fn capability_scores_are_independent() {
        let matrix = matrix_of(&[("privmsg", "irc", 0.9), ("bitblt", "screenshot", 0.4)]);
        let report = scan_binary(
            "x",
            b"\x00PRIVMSG\x00",
            &matrix,
            &InferenceParams::default(),
            &StringParams::default(),
        )
        .unwrap();
        let by_name: BTreeMap<&str, f64> =
            report.capabilities.iter().map(|c| (c.name.as_str(), c.probability)).collect();
        assert_eq!(by_name["irc"], 0.9);
        assert_eq!(by_name["screenshot"], 0.0);
    }

    #[test]
    fn repeated_strings_change_nothing() {
        let matrix = irc_matrix();
        let once = b"\x00PRIVMSG\x00".to_vec();
        let mut hundred = Vec::new();
        for _ in 0..100 {
            hundred.extend_from_slice(b"\x00PRIVMSG");
        }
        hundred.push(0x00);
        let params = InferenceParams::default();
        let strings = StringParams::default();
        let a = scan_binary("a", &once, &matrix, &params, &strings).unwrap();
        let b = scan_binary("b", &hundred, &matrix, &params, &strings).unwrap();
        assert_eq!(a.capabilities[0].probability, b.capabilities[0].probability);
    }

    #[test]
    fn threshold_semantics_are_strict() {
        let matrix = matrix_of(&[("privmsg", "irc", 0.37)]);
        let terms = term_set(&["privmsg"]);
        // p == threshold does not fire.
        let score = score_capability(&terms, &matrix, "irc", 0.37).unwrap();
        assert!(!score.detected);
        // threshold 1.0 never fires, 0.0 fires on any positive evidence.
        assert!(!score_capability(&terms, &matrix, "irc", 1.0).unwrap().detected);
        assert!(score_capability(&terms, &matrix, "irc", 0.0).unwrap().detected);
        // ... but a zero score does not fire even at threshold 0.
        let none = score_capability(&term_set(&["other"]), &matrix, "irc", 0.0).unwrap();
        assert!(!none.detected);
    }

    #[test]
    fn verbosity_gates_term_lists() {
        let matrix = irc_matrix();
        let bytes = b"\x00PRIVMSG\x00";
        let quiet = scan_binary(
            "x",
            bytes,
            &matrix,
            &InferenceParams { threshold: 0.37, verbosity: Verbosity::ScoresOnly },
            &StringParams::default(),
        )
        .unwrap();
        assert!(quiet.capabilities[0].terms.is_empty());
        let chatty = scan_binary(
            "x",
            bytes,
            &matrix,
            &InferenceParams { threshold: 0.37, verbosity: Verbosity::WithTerms },
            &StringParams::default(),
        )
        .unwrap();
        assert_eq!(chatty.capabilities[0].terms.len(), 1);
        assert_eq!(chatty.capabilities[0].terms[0].term, "privmsg");
    }

    #[test]
    fn bad_params_and_empty_matrix_are_rejected() {
        let err = scan_binary(
            "x",
            b"",
            &irc_matrix(),
            &InferenceParams { threshold: 1.5, verbosity: Verbosity::ScoresOnly },
            &StringParams::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
        let err = scan_binary(
            "x",
            b"",
            &TermCapabilityMatrix::new(),
            &InferenceParams::default(),
            &StringParams::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }
}
