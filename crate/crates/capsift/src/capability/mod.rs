//! Capability configuration and the Beta-Bernoulli term learner.
//!
//! A capability is a named behavior ("irc", "screenshot") defined by a boolean
//! retrieval query over the document index. Learning executes the query,
//! collects the vocabulary of the matching documents, and estimates for every
//! term j the conditional probability that the capability is present given the
//! term was observed:
//!
//! ```text
//! P(C | T_j) = (t_jc + alpha) / (t_jt + alpha + beta)
//! ```
//!
//! where `t_jc` counts the term inside the query's result set and `t_jt`
//! counts it over the whole corpus. With the default prior `alpha=10,
//! beta=90`, an unseen term scores 0.10 — a deliberate 10% floor that keeps
//! single weak terms from dominating downstream score combination.
//!
//! Counting is document-frequency by default ([`CountingMode::Documents`]:
//! each document contributes at most once per term). Token-occurrence
//! counting is available as an experiment ([`CountingMode::Occurrences`]);
//! both sides of the ratio always use the same mode.

mod matrix;

pub use matrix::{
    format_sig, load_matrix, save_matrix, CapabilityData, CapabilityProvenance,
    TermCapabilityMatrix,
};

use std::collections::{HashMap, HashSet};
use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::index::{execute_query, parse_query, Field, InvertedIndex};
use crate::{index, Error, Result};

/// One entry of a capability configuration file: a JSON array of
/// `{"name": ..., "query": ..., "alpha"?: ..., "beta"?: ...}` objects.
/// `alpha`/`beta` override the global prior for that capability only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapabilityConfigEntry {
    pub name: String,
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

/// Parse and validate a capability configuration. Every query is parsed
/// eagerly so a broken entry fails the whole load, before any learning runs.
pub fn load_capability_config<R: Read>(mut reader: R) -> Result<Vec<CapabilityConfigEntry>> {
    let mut raw = String::new();
    reader.read_to_string(&mut raw).map_err(Error::from)?;
    let entries: Vec<CapabilityConfigEntry> = serde_json::from_str(&raw)
        .map_err(|e| Error::Config { message: format!("invalid JSON: {e}") })?;

    let mut seen: HashSet<&str> = HashSet::new();
    for entry in &entries {
        if entry.name.is_empty() {
            return Err(Error::Config { message: "capability name must be non-empty".into() });
        }
        if entry.name.contains(['\t', '\n', '\r']) {
            return Err(Error::Config {
                message: format!(
                    "capability name {:?} contains tab/newline (reserved by the matrix format)",
                    entry.name
                ),
            });
        }
        if !seen.insert(&entry.name) {
            return Err(Error::Config {
                message: format!("duplicate capability: {}", entry.name),
            });
        }
        if let Err(e) = parse_query(&entry.query) {
            return Err(Error::Config {
                message: format!("capability '{}': {e}", entry.name),
            });
        }
        for (label, value) in [("alpha", entry.alpha), ("beta", entry.beta)] {
            if let Some(v) = value {
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::Config {
                        message: format!(
                            "capability '{}': {label} must be a positive finite number, got {v}",
                            entry.name
                        ),
                    });
                }
            }
        }
    }
    Ok(entries)
}

/// Prior parameters of the Beta-Bernoulli estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LearningParams {
    fn default() -> Self {
        LearningParams { alpha: 10.0, beta: 90.0 }
    }
}

impl LearningParams {
    fn validate(&self) -> Result<()> {
        for (label, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Domain {
                    message: format!("{label} must be a positive finite number, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// What one "trial" of the estimator is: a containing document, or a single
/// token occurrence. Both `t_jc` and `t_jt` always use the same mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountingMode {
    #[default]
    Documents,
    Occurrences,
}

impl CountingMode {
    pub fn name(self) -> &'static str {
        match self {
            CountingMode::Documents => "documents",
            CountingMode::Occurrences => "occurrences",
        }
    }

    pub fn from_name(name: &str) -> Option<CountingMode> {
        match name {
            "documents" => Some(CountingMode::Documents),
            "occurrences" => Some(CountingMode::Occurrences),
            _ => None,
        }
    }
}

/// The smoothed conditional probability `(t_jc + alpha) / (t_jt + alpha + beta)`.
///
/// Strictly increasing in `t_jc`, strictly decreasing in `t_jt`, and always
/// inside (0,1) for valid inputs. `(0, 0)` recovers the prior
/// `alpha / (alpha + beta)` exactly.
pub fn conditional_probability(t_jc: u64, t_jt: u64, params: &LearningParams) -> Result<f64> {
    params.validate()?;
    if t_jc > t_jt {
        return Err(Error::Domain {
            message: format!("t_jc ({t_jc}) exceeds t_jt ({t_jt}): a term cannot occur more often in the match set than in the corpus"),
        });
    }
    Ok((t_jc as f64 + params.alpha) / (t_jt as f64 + params.alpha + params.beta))
}

/// Result of learning one capability: its provenance (everything needed to
/// audit or reproduce the entries) plus the term probability table.
#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub name: String,
    pub provenance: CapabilityProvenance,
    /// term -> P(C|T). Empty when the query matched nothing.
    pub terms: BTreeMap<String, f64>,
}

impl LearnOutcome {
    /// True when the query matched zero documents; such a capability keeps
    /// its provenance but can never fire at scan time.
    pub fn matched_nothing(&self) -> bool {
        self.provenance.matched_doc_count == 0
    }
}

/// Learn one capability's term probabilities from the index.
///
/// Executes the entry's query, re-tokenizes the matching documents to count
/// `t_jc` locally (work linear in the matched documents' token count), and
/// reads `t_jt` from the index-wide statistics. Per-entry `alpha`/`beta`
/// override `defaults`. A zero-match query yields an empty term table rather
/// than an error so the rest of a configuration keeps working.
pub fn learn_capability(
    index: &InvertedIndex,
    entry: &CapabilityConfigEntry,
    defaults: &LearningParams,
    counting: CountingMode,
) -> Result<LearnOutcome> {
    let params = LearningParams {
        alpha: entry.alpha.unwrap_or(defaults.alpha),
        beta: entry.beta.unwrap_or(defaults.beta),
    };
    params.validate().map_err(|e| Error::Config {
        message: format!("capability '{}': {e}", entry.name),
    })?;

    let query = parse_query(&entry.query).map_err(|e| Error::Config {
        message: format!("capability '{}': {e}", entry.name),
    })?;
    let matched = execute_query(index, &query)?;

    // t_jc per term over the matched documents.
    let mut local: HashMap<String, u64> = HashMap::new();
    for &doc_id in &matched {
        let doc = index.document(doc_id)?;
        match counting {
            CountingMode::Documents => {
                let mut in_doc: HashSet<String> = HashSet::new();
                for field in Field::ALL {
                    in_doc.extend(index::field_terms(&doc, field));
                }
                for term in in_doc {
                    *local.entry(term).or_insert(0) += 1;
                }
            }
            CountingMode::Occurrences => {
                for field in Field::ALL {
                    for term in index::field_terms(&doc, field) {
                        *local.entry(term).or_insert(0) += 1;
                    }
                }
            }
        }
    }

    let mut terms = BTreeMap::new();
    for (term, t_jc) in local {
        let t_jt = match counting {
            CountingMode::Documents => index.combined_doc_frequency(&term),
            CountingMode::Occurrences => index.occurrence_count(&term),
        };
        let p = conditional_probability(t_jc, t_jt, &params)?;
        terms.insert(term, p);
    }

    Ok(LearnOutcome {
        name: entry.name.clone(),
        provenance: CapabilityProvenance {
            query: entry.query.clone(),
            matched_doc_count: matched.len() as u64,
            alpha: params.alpha,
            beta: params.beta,
            counting,
        },
        terms,
    })
}

/// Learn every capability of a configuration into one matrix.
pub fn learn_matrix(
    index: &InvertedIndex,
    config: &[CapabilityConfigEntry],
    defaults: &LearningParams,
    counting: CountingMode,
) -> Result<TermCapabilityMatrix> {
    let mut matrix = TermCapabilityMatrix::new();
    for entry in config {
        let outcome = learn_capability(index, entry, defaults, counting)?;
        matrix.insert(outcome.name, CapabilityData {
            provenance: outcome.provenance,
            terms: outcome.terms,
        })?;
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DocKind, Document};

    fn doc(doc_id: u64, title: &str, tags: &[&str], body: &str) -> Document {
        Document {
            doc_id,
            thread_id: doc_id,
            kind: DocKind::Question,
            title: title.to_owned(),
            tags: tags.iter().map(|s| (*s).to_owned()).collect(),
            body: body.to_owned(),
        }
    }

    fn index(docs: Vec<Document>) -> InvertedIndex {
        InvertedIndex::build(docs.into_iter().map(Ok)).unwrap()
    }

    #[test]
    fn prior_recovered_exactly_at_zero_counts() {
        let p = conditional_probability(0, 0, &LearningParams::default()).unwrap();
        assert_eq!(p, 0.1);
    }

    #[test]
    fn worked_ratios() {
        let params = LearningParams::default();
        // (90 + 10) / (100 + 100)
        assert_eq!(conditional_probability(90, 100, &params).unwrap(), 0.5);
        // (3 + 10) / (5 + 100)
        assert_eq!(conditional_probability(3, 5, &params).unwrap(), 13.0 / 105.0);
    }

    #[test]
    fn count_order_violation_is_a_domain_error() {
        let err = conditional_probability(6, 5, &LearningParams::default()).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
    }

    #[test]
    fn bad_prior_params_rejected() {
        for params in [
            LearningParams { alpha: 0.0, beta: 90.0 },
            LearningParams { alpha: 10.0, beta: -1.0 },
            LearningParams { alpha: f64::NAN, beta: 90.0 },
        ] {
            assert!(conditional_probability(1, 2, &params).is_err());
        }
    }

    #[test]
    fn config_loads_and_validates() {
        let entries = load_capability_config(
            br#"[{"name":"irc","query":"tags:irc"},
                 {"name":"rdp","query":"title:rdp AND tags:rdp","alpha":5}]"#
                .as_slice(),
        )
        .unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].name, "irc");
        assert_eq!(entries[1].alpha, Some(5.0));
    }

    #[test]
    fn config_rejects_duplicates_bad_queries_and_bad_names() {
        let err = load_capability_config(
            br#"[{"name":"irc","query":"a"},{"name":"irc","query":"b"}]"#.as_slice(),
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "capability config: duplicate capability: irc");

        let err =
            load_capability_config(br#"[{"name":"irc","query":"title:"}]"#.as_slice()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("irc") && msg.contains("position 6"), "{msg}");

        assert!(load_capability_config(br#"[{"name":"a\tb","query":"x"}]"#.as_slice()).is_err());
        assert!(load_capability_config(br#"[{"name":"","query":"x"}]"#.as_slice()).is_err());
        assert!(
            load_capability_config(br#"[{"name":"a","query":"x","alpah":1}]"#.as_slice()).is_err()
        );
        assert!(
            load_capability_config(br#"[{"name":"a","query":"x","alpha":0}]"#.as_slice()).is_err()
        );
    }

    /// Five-document fixture: the query matches docs 1-3. "privmsg" appears
    /// only in the matching docs (t_jc = t_jt = 3); "channel" appears in one
    /// matching doc but across the corpus as well.
    fn irc_fixture() -> InvertedIndex {
        index(vec![
            doc(1, "irc bot", &["irc"], "privmsg channel"),
            doc(2, "irc client", &["irc"], "privmsg"),
            doc(3, "irc logging", &["irc"], "privmsg"),
            doc(4, "sockets", &["networking"], "channel reuse"),
            doc(5, "threading", &["concurrency"], "channel select"),
        ])
    }

    #[test]
    fn learn_counts_match_and_corpus_frequencies() {
        let index = irc_fixture();
        let entry = CapabilityConfigEntry {
            name: "irc".into(),
            query: "tags:irc".into(),
            alpha: None,
            beta: None,
        };
        let out = learn_capability(
            &index,
            &entry,
            &LearningParams::default(),
            CountingMode::Documents,
        )
        .unwrap();
        assert_eq!(out.provenance.matched_doc_count, 3);
        // t_jc=3, t_jt=3 -> (3+10)/(3+100)
        assert_eq!(out.terms["privmsg"], 13.0 / 103.0);
        // t_jc=1, t_jt=3 -> (1+10)/(3+100)
        assert_eq!(out.terms["channel"], 11.0 / 103.0);
        // Vocabulary covers all fields of the matched docs.
        assert!(out.terms.contains_key("irc"));
        assert!(out.terms.contains_key("bot"));
        // Terms only outside the match set are absent.
        assert!(!out.terms.contains_key("threading"));
    }

    #[test]
    fn term_in_ten_docs_one_matching_equals_the_prior() {
        // t_jc=1, t_jt=10 -> 11/110 = 0.1: t_jc/t_jt equal to alpha/(alpha+beta)
        // leaves the estimate at the prior exactly.
        let mut docs = vec![doc(1, "", &["cap"], "widget")];
        for id in 2..=10 {
            docs.push(doc(id, "", &["other"], "widget"));
        }
        let index = index(docs);
        let entry = CapabilityConfigEntry {
            name: "cap".into(),
            query: "tags:cap".into(),
            alpha: None,
            beta: None,
        };
        let out = learn_capability(
            &index,
            &entry,
            &LearningParams::default(),
            CountingMode::Documents,
        )
        .unwrap();
        assert_eq!(out.terms["widget"], 11.0 / 110.0);
        assert_eq!(out.terms["widget"], 0.1);
    }

    #[test]
    fn zero_match_query_learns_nothing_but_keeps_provenance() {
        let index = irc_fixture();
        let entry = CapabilityConfigEntry {
            name: "ghost".into(),
            query: "tags:nonexistent".into(),
            alpha: None,
            beta: None,
        };
        let out = learn_capability(
            &index,
            &entry,
            &LearningParams::default(),
            CountingMode::Documents,
        )
        .unwrap();
        assert!(out.matched_nothing());
        assert!(out.terms.is_empty());
        assert_eq!(out.provenance.query, "tags:nonexistent");
    }

    #[test]
    fn occurrence_mode_counts_tokens_not_documents() {
        // "privmsg" twice in one matching doc, once in a non-matching doc.
        let index = index(vec![
            doc(1, "", &["irc"], "privmsg privmsg"),
            doc(2, "", &["other"], "privmsg"),
        ]);
        let entry = CapabilityConfigEntry {
            name: "irc".into(),
            query: "tags:irc".into(),
            alpha: None,
            beta: None,
        };
        let docs_mode =
            learn_capability(&index, &entry, &LearningParams::default(), CountingMode::Documents)
                .unwrap();
        // documents: t_jc=1, t_jt=2
        assert_eq!(docs_mode.terms["privmsg"], 11.0 / 102.0);
        let occ_mode = learn_capability(
            &index,
            &entry,
            &LearningParams::default(),
            CountingMode::Occurrences,
        )
        .unwrap();
        // occurrences: t_jc=2, t_jt=3
        assert_eq!(occ_mode.terms["privmsg"], 12.0 / 103.0);
        assert_eq!(occ_mode.provenance.counting, CountingMode::Occurrences);
    }

    #[test]
    fn per_entry_prior_override_is_used_and_recorded() {
        let index = irc_fixture();
        let entry = CapabilityConfigEntry {
            name: "irc".into(),
            query: "tags:irc".into(),
            alpha: Some(1.0),
            beta: Some(1.0),
        };
        let out = learn_capability(
            &index,
            &entry,
            &LearningParams::default(),
            CountingMode::Documents,
        )
        .unwrap();
        // privmsg: (3+1)/(3+2) = 0.8 under the override.
        assert_eq!(out.terms["privmsg"], 0.8);
        assert_eq!(out.provenance.alpha, 1.0);
        assert_eq!(out.provenance.beta, 1.0);
    }

    #[test]
    fn learned_probabilities_stay_inside_the_open_interval() {
        let index = irc_fixture();
        let config = load_capability_config(
            br#"[{"name":"irc","query":"tags:irc"},{"name":"net","query":"tags:networking"}]"#
                .as_slice(),
        )
        .unwrap();
        let matrix =
            learn_matrix(&index, &config, &LearningParams::default(), CountingMode::Documents)
                .unwrap();
        for (_, data) in matrix.capabilities() {
            for (_, p) in data.terms() {
                assert!(p > 0.0 && p < 1.0);
            }
        }
    }
}
