//! Evidence assembly: for a term that contributed to a detection, find a
//! matching post that shows the term in context.
//!
//! Evidence re-executes the capability's stored query against the document
//! index (the matrix alone is not enough — it has no documents in it), picks
//! the matching document containing the term with the smallest doc_id (a
//! deterministic tie-break), and cuts a snippet around the first token match
//! in the body. A term that only appears in the title or tags yields the
//! title alone. If no matching document contains the term — a stale index
//! paired with a newer matrix — the evidence carries a marker title instead
//! of failing the whole report.

use serde::{Deserialize, Serialize};

use crate::capability::CapabilityProvenance;
use crate::index::{execute_query, parse_query, InvertedIndex};
use crate::{index, Result};

/// Default snippet width in characters (half before the match, half after).
pub const SNIPPET_WINDOW: usize = 240;

const UNAVAILABLE_TITLE: &str = "(unavailable: index/matrix mismatch)";

/// One term's supporting post: where the association was learned from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub term: String,
    /// The term's matrix probability for this capability.
    pub p: f64,
    pub post_title: String,
    /// Text window around the first body match; absent when the term only
    /// appears in the title or tags.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snippet: Option<String>,
}

impl Evidence {
    /// True when no matching document contained the term (stale index).
    pub fn is_unavailable(&self) -> bool {
        self.post_title == UNAVAILABLE_TITLE
    }
}

/// Evidence for one term of one capability. Parses and runs the stored
/// query each call — building evidence for several terms of the same
/// capability is cheaper through [`evidence_for_capability`].
pub fn build_evidence(
    index: &InvertedIndex,
    provenance: &CapabilityProvenance,
    term: &str,
    probability: f64,
    window: usize,
) -> Result<Evidence> {
    let query = parse_query(&provenance.query)?;
    let matched = execute_query(index, &query)?;
    evidence_from_matched(index, &matched, term, probability, window)
}

/// Evidence for the top `limit` contributing terms of one capability,
/// executing the capability's query once.
pub fn evidence_for_capability(
    index: &InvertedIndex,
    provenance: &CapabilityProvenance,
    contributing: &[(String, f64)],
    window: usize,
    limit: usize,
) -> Result<Vec<Evidence>> {
    let query = parse_query(&provenance.query)?;
    let matched = execute_query(index, &query)?;
    contributing
        .iter()
        .take(limit)
        .map(|(term, p)| evidence_from_matched(index, &matched, term, *p, window))
        .collect()
}

fn evidence_from_matched(
    index: &InvertedIndex,
    matched: &[u64],
    term: &str,
    probability: f64,
    window: usize,
) -> Result<Evidence> {
    let containing = match index.postings(term) {
        Some(postings) => index::intersect(matched, postings.combined()),
        None => Vec::new(),
    };
    let Some(&doc_id) = containing.first() else {
        return Ok(Evidence {
            term: term.to_owned(),
            p: probability,
            post_title: UNAVAILABLE_TITLE.to_owned(),
            snippet: None,
        });
    };
    let doc = index.document(doc_id)?;
    let snippet = find_snippet(&doc.body, term, window);
    Ok(Evidence { term: term.to_owned(), p: probability, post_title: doc.title, snippet })
}

/// Cut a window of roughly `window` characters around the first token match
/// of `term` in `body`. The window is widened outward to whole alphanumeric
/// runs so the cut never splits a token, and all cuts land on UTF-8 char
/// boundaries. None when the body has no token equal to `term`.
fn find_snippet(body: &str, term: &str, window: usize) -> Option<String> {
    let (match_start, match_end) = find_token(body, term)?;
    let half = window / 2;

    let mut start = match_start;
    for (i, _) in body[..match_start].char_indices().rev().take(half) {
        start = i;
    }
    let mut end = match_end;
    for (i, c) in body[match_end..].char_indices().take(half) {
        end = match_end + i + c.len_utf8();
    }

    let bytes = body.as_bytes();
    while start > 0
        && bytes[start - 1].is_ascii_alphanumeric()
        && bytes[start].is_ascii_alphanumeric()
    {
        start -= 1;
    }
    while end < bytes.len()
        && bytes[end - 1].is_ascii_alphanumeric()
        && bytes[end].is_ascii_alphanumeric()
    {
        end += 1;
    }
    Some(body[start..end].to_owned())
}

/// Byte range of the first maximal alphanumeric run equal to `term`
/// (case-insensitively) — the same token rule the shared tokenizer applies.
fn find_token(body: &str, term: &str) -> Option<(usize, usize)> {
    let bytes = body.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_alphanumeric() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                i += 1;
            }
            if body[start..i].eq_ignore_ascii_case(term) {
                return Some((start, i));
            }
        } else {
            i += 1;
        }
    }
    None
}
