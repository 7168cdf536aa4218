//! Report types (the JSON interchange shape) and the human-readable text
//! renderer.
//!
//! JSON reports are one object per scanned file:
//!
//! ```json
//! {"sample_id":"a.bin","timing_ms":1.9,"capabilities":[
//!   {"name":"irc","probability":0.955,"detected":true,
//!    "terms":[{"term":"privmsg","p":0.9}],
//!    "evidence":[{"term":"privmsg","p":0.9,"post_title":"...","snippet":"..."}]}]}
//! ```
//!
//! `terms` appears at verbosity 1+, `evidence` at verbosity 2 (which needs
//! the index). Every configured capability always has an entry, detected or
//! not, so downstream evaluation can re-threshold stored probabilities
//! without rescanning anything.

use serde::{Deserialize, Serialize};

use super::Evidence;
use crate::capability::format_sig;

/// One scanned binary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityReport {
    pub sample_id: String,
    pub timing_ms: f64,
    pub capabilities: Vec<CapabilityResult>,
}

/// One capability's outcome within a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityResult {
    pub name: String,
    pub probability: f64,
    pub detected: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<TermProbability>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub evidence: Vec<Evidence>,
}

/// A contributing term and its matrix probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermProbability {
    pub term: String,
    pub p: f64,
}

/// Qualitative label for a detection. Presentation only — thresholding
/// logic never consults bands. Undetected capabilities get no band, so a
/// high custom threshold cannot produce a "[ ] ... (likely)" contradiction.
fn band(result: &CapabilityResult) -> &'static str {
    if !result.detected {
        ""
    } else if result.probability > 0.75 {
        " (likely)"
    } else {
        " (somewhat likely)"
    }
}

/// Render one report as indented text:
///
/// ```text
/// == fixture.bin (1.9 ms)
/// [*] irc (likely) p=0.955
///     [-] 'privmsg' p=0.9  Why does my IRC bot disconnect?
///         [] you need to send PRIVMSG #channel :message ...
/// [ ] keylogging p=0
/// ```
///
/// Capability lines are always present; term lines appear when the report
/// carries terms, snippet blocks when it carries evidence.
pub fn render_text(report: &CapabilityReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("== {} ({:.1} ms)\n", report.sample_id, report.timing_ms));
    for cap in &report.capabilities {
        let marker = if cap.detected { "[*]" } else { "[ ]" };
        out.push_str(&format!(
            "{marker} {}{} p={}\n",
            cap.name,
            band(cap),
            format_sig(cap.probability, 4)
        ));
        for term in &cap.terms {
            let evidence = cap.evidence.iter().find(|e| e.term == term.term);
            match evidence {
                Some(e) => {
                    out.push_str(&format!(
                        "    [-] '{}' p={}  {}\n",
                        term.term,
                        format_sig(term.p, 4),
                        e.post_title
                    ));
                    if let Some(snippet) = &e.snippet {
                        for line in snippet.lines() {
                            out.push_str(&format!("        [] {line}\n"));
                        }
                    }
                }
                None => {
                    out.push_str(&format!(
                        "    [-] '{}' p={}\n",
                        term.term,
                        format_sig(term.p, 4)
                    ));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> CapabilityReport {
        CapabilityReport {
            sample_id: "fixture.bin".into(),
            timing_ms: 1.9,
            capabilities: vec![
                CapabilityResult {
                    name: "irc".into(),
                    probability: 0.955,
                    detected: true,
                    terms: vec![
                        TermProbability { term: "privmsg".into(), p: 0.9 },
                        TermProbability { term: "topic".into(), p: 0.5 },
                    ],
                    evidence: vec![Evidence {
                        term: "privmsg".into(),
                        p: 0.9,
                        post_title: "Why does my IRC bot disconnect?".into(),
                        snippet: Some("send PRIVMSG #channel :message\nevery 30s".into()),
                    }],
                },
                CapabilityResult {
                    name: "screenshot".into(),
                    probability: 0.44,
                    detected: true,
                    terms: vec![],
                    evidence: vec![],
                },
                CapabilityResult {
                    name: "keylogging".into(),
                    probability: 0.0,
                    detected: false,
                    terms: vec![],
                    evidence: vec![],
                },
            ],
        }
    }

    #[test]
    fn text_rendering_shape() {
        let text = render_text(&report());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "== fixture.bin (1.9 ms)");
        assert_eq!(lines[1], "[*] irc (likely) p=0.955");
        assert_eq!(lines[2], "    [-] 'privmsg' p=0.9  Why does my IRC bot disconnect?");
        assert_eq!(lines[3], "        [] send PRIVMSG #channel :message");
        assert_eq!(lines[4], "        [] every 30s");
        assert_eq!(lines[5], "    [-] 'topic' p=0.5");
        assert_eq!(lines[6], "[*] screenshot (somewhat likely) p=0.44");
        assert_eq!(lines[7], "[ ] keylogging p=0");
    }

    #[test]
    fn bands_track_probability_for_detections_only() {
        let mut r = report();
        r.capabilities[0].detected = false;
        let text = render_text(&r);
        assert!(text.contains("[ ] irc p=0.955"));
        assert!(!text.lines().next().unwrap_or("").contains("likely"));
    }

    #[test]
    fn json_round_trip() {
        let original = report();
        let json = serde_json::to_string(&original).unwrap();
        let parsed: CapabilityReport = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, original);
        // Empty terms/evidence vanish from the wire format.
        assert!(!json.contains("\"keylogging\",\"probability\":0.0,\"detected\":false,\"terms\""));
    }

    #[test]
    fn scores_only_reports_have_no_term_keys() {
        let r = CapabilityReport {
            sample_id: "x".into(),
            timing_ms: 0.0,
            capabilities: vec![CapabilityResult {
                name: "irc".into(),
                probability: 0.0,
                detected: false,
                terms: vec![],
                evidence: vec![],
            }],
        };
        let json = serde_json::to_string(&r).unwrap();
        assert!(!json.contains("terms"));
        assert!(!json.contains("evidence"));
    }
}
