//! The term-capability matrix and its TSV interchange format.
//!
//! The matrix is the single artifact handed from the learning phase to the
//! scanning phase, so its on-disk format is a stable contract:
//!
//! ```text
//! # capsift-matrix 1
//! # capability<TAB>irc<TAB>{"query":"tags:irc","matched_doc_count":3,...}
//! channel<TAB>irc<TAB>0.106796116505
//! privmsg<TAB>irc<TAB>0.126213592233
//! ```
//!
//! Line one is the version header. Each capability gets one provenance
//! comment (JSON payload: query text, matched document count, alpha, beta,
//! counting mode) — capabilities whose query matched nothing keep their
//! provenance line even though they contribute no entries, so scans still
//! report them. Every other non-comment line is one `term  capability
//! probability` entry; entries are sorted by term then capability.
//! Probabilities are written with 12 significant digits (trailing zeros
//! trimmed), which reloads within 1e-12 of the learned value.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::CountingMode;
use crate::{Error, Result};

const VERSION_LINE: &str = "# capsift-matrix 1";
const CAPABILITY_PREFIX: &str = "# capability\t";

/// Everything needed to audit or regenerate one capability's entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityProvenance {
    pub query: String,
    pub matched_doc_count: u64,
    pub alpha: f64,
    pub beta: f64,
    pub counting: CountingMode,
}

/// One capability's slice of the matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CapabilityData {
    pub provenance: CapabilityProvenance,
    /// term -> P(C|T), all values in (0,1).
    pub(crate) terms: BTreeMap<String, f64>,
}

impl CapabilityData {
    pub fn new(provenance: CapabilityProvenance, terms: BTreeMap<String, f64>) -> CapabilityData {
        CapabilityData { provenance, terms }
    }

    /// Iterate (term, probability) in term order.
    pub fn terms(&self) -> impl Iterator<Item = (&str, f64)> {
        self.terms.iter().map(|(t, p)| (t.as_str(), *p))
    }

    pub fn probability(&self, term: &str) -> Option<f64> {
        self.terms.get(term).copied()
    }

    pub fn term_count(&self) -> u64 {
        self.terms.len() as u64
    }
}

/// P(capability | term) for every (capability, term) pair the learner saw.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermCapabilityMatrix {
    capabilities: BTreeMap<String, CapabilityData>,
}

impl TermCapabilityMatrix {
    pub fn new() -> TermCapabilityMatrix {
        TermCapabilityMatrix::default()
    }

    pub fn insert(&mut self, name: String, data: CapabilityData) -> Result<()> {
        if name.is_empty() || name.contains(['\t', '\n', '\r']) {
            return Err(Error::Config {
                message: format!("capability name {name:?} is empty or contains tab/newline"),
            });
        }
        if self.capabilities.contains_key(&name) {
            return Err(Error::Config { message: format!("duplicate capability: {name}") });
        }
        self.capabilities.insert(name, data);
        Ok(())
    }

    pub fn capability(&self, name: &str) -> Option<&CapabilityData> {
        self.capabilities.get(name)
    }

    /// Iterate capabilities in name order.
    pub fn capabilities(&self) -> impl Iterator<Item = (&str, &CapabilityData)> {
        self.capabilities.iter().map(|(n, d)| (n.as_str(), d))
    }

    pub fn capability_names(&self) -> Vec<&str> {
        self.capabilities.keys().map(String::as_str).collect()
    }

    pub fn probability(&self, capability: &str, term: &str) -> Option<f64> {
        self.capabilities.get(capability)?.probability(term)
    }

    /// Number of capabilities.
    pub fn len(&self) -> usize {
        self.capabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capabilities.is_empty()
    }

    /// Total number of (term, capability) entries.
    pub fn entry_count(&self) -> u64 {
        self.capabilities.values().map(|d| d.terms.len() as u64).sum()
    }
}

/// Format `value` with `digits` significant digits, trailing zeros trimmed:
/// `format_sig(0.9, 12)` is `"0.9"`, not `"0.900000000000"`.
pub fn format_sig(value: f64, digits: usize) -> String {
    assert!(digits >= 1, "need at least one significant digit");
    if value == 0.0 {
        return "0".to_owned();
    }
    // Round-trip through the formatter's scientific notation so digit
    // rounding is done once, correctly, then rebuild positional notation.
    let sci = format!("{:.*e}", digits - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("scientific exponent");
    let negative = mantissa.starts_with('-');
    let digit_chars: String = mantissa.chars().filter(char::is_ascii_digit).collect();

    // digit_chars spells 0.d1d2... x 10^(exp+1); place the decimal point.
    let point = exp + 1;
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if point <= 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat('0').take(point.unsigned_abs() as usize));
        out.push_str(&digit_chars);
    } else if point as usize >= digit_chars.len() {
        out.push_str(&digit_chars);
        out.extend(std::iter::repeat('0').take(point as usize - digit_chars.len()));
    } else {
        out.push_str(&digit_chars[..point as usize]);
        out.push('.');
        out.push_str(&digit_chars[point as usize..]);
    }
    if out.contains('.') {
        while out.ends_with('0') {
            out.pop();
        }
        if out.ends_with('.') {
            out.pop();
        }
    }
    out
}

/// Write the matrix in the TSV format described in the module docs.
pub fn save_matrix<W: Write>(matrix: &TermCapabilityMatrix, mut writer: W) -> Result<()> {
    let mut out = String::new();
    out.push_str(VERSION_LINE);
    out.push('\n');
    for (name, data) in matrix.capabilities() {
        let provenance = serde_json::to_string(&data.provenance)
            .map_err(|e| Error::Config { message: format!("provenance for '{name}': {e}") })?;
        out.push_str(CAPABILITY_PREFIX);
        out.push_str(name);
        out.push('\t');
        out.push_str(&provenance);
        out.push('\n');
    }
    let mut entries: Vec<(&str, &str, f64)> = Vec::new();
    for (name, data) in matrix.capabilities() {
        for (term, p) in data.terms() {
            entries.push((term, name, p));
        }
    }
    entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    for (term, capability, p) in entries {
        out.push_str(term);
        out.push('\t');
        out.push_str(capability);
        out.push('\t');
        out.push_str(&format_sig(p, 12));
        out.push('\n');
    }
    writer.write_all(out.as_bytes()).map_err(Error::from)
}

/// Load a matrix written by [`save_matrix`]. Strict: unknown capabilities,
/// bad probabilities, and malformed lines are errors with line numbers.
pub fn load_matrix<R: BufRead>(reader: R) -> Result<TermCapabilityMatrix> {
    let mut matrix = TermCapabilityMatrix::new();
    let mut saw_version = false;
    let mut entries: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(Error::from)?;
        if !saw_version {
            if line.trim_end() != VERSION_LINE {
                return Err(Error::MatrixFormat {
                    line: line_no,
                    message: format!("expected version header {VERSION_LINE:?}"),
                });
            }
            saw_version = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix(CAPABILITY_PREFIX) {
            let (name, json) = rest.split_once('\t').ok_or_else(|| Error::MatrixFormat {
                line: line_no,
                message: "capability header needs name and provenance fields".into(),
            })?;
            let provenance: CapabilityProvenance =
                serde_json::from_str(json).map_err(|e| Error::MatrixFormat {
                    line: line_no,
                    message: format!("bad provenance JSON: {e}"),
                })?;
            matrix
                .insert(name.to_owned(), CapabilityData::new(provenance, BTreeMap::new()))
                .map_err(|e| Error::MatrixFormat { line: line_no, message: e.to_string() })?;
            continue;
        }
        if line.starts_with('#') {
            continue; // free-form comment
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::MatrixFormat {
                line: line_no,
                message: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let (term, capability, p_text) = (fields[0], fields[1], fields[2]);
        let p: f64 = p_text.parse().map_err(|_| Error::MatrixFormat {
            line: line_no,
            message: format!("invalid probability {p_text:?}"),
        })?;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::MatrixFormat {
                line: line_no,
                message: format!("probability {p_text} outside the open interval (0,1)"),
            });
        }
        if matrix.capability(capability).is_none() {
            return Err(Error::MatrixFormat {
                line: line_no,
                message: format!("entry references undeclared capability '{capability}'"),
            });
        }
        let by_term = entries.entry(capability.to_owned()).or_default();
        if by_term.insert(term.to_owned(), p).is_some() {
            return Err(Error::MatrixFormat {
                line: line_no,
                message: format!("duplicate entry for term '{term}', capability '{capability}'"),
            });
        }
    }
    if !saw_version {
        return Err(Error::MatrixFormat {
            line: 1,
            message: format!("empty file; expected version header {VERSION_LINE:?}"),
        });
    }
    for (capability, terms) in entries {
        matrix
            .capabilities
            .get_mut(&capability)
            .expect("declared above")
            .terms = terms;
    }
    Ok(matrix)
}
