//! Printable-string extraction from raw binaries, and the term sets scans
//! are scored on.
//!
//! A printable string is a maximal run of ASCII bytes 0x20–0x7E. Runs
//! shorter than the configured minimum (default 5 bytes, i.e. strictly
//! longer than four) are dropped. Extraction is byte-level and format-blind:
//! no PE/ELF parsing, no unpacking — a packed or encrypted binary simply
//! yields few useful strings. Tab and newline are not printable here; they
//! terminate runs, which keeps extracted strings line-like.
//!
//! UTF-16LE ("wide") extraction is available behind a flag and off by
//! default. The term set fed to inference is the tokenizer output over all
//! extracted strings, deduplicated — scoring is set-based, so repeating a
//! string a hundred times changes nothing.

use std::collections::BTreeSet;
use std::io::Read;

use crate::index::tokenize;
use crate::Result;

/// Default minimum kept run length ("greater than length four").
pub const DEFAULT_MIN_STRING_LEN: usize = 5;

/// Extraction knobs shared by the scan entry points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StringParams {
    /// Minimum run length to keep, in characters.
    pub min_len: usize,
    /// Also extract UTF-16LE strings (printable ASCII code units).
    pub wide: bool,
}

impl Default for StringParams {
    fn default() -> Self {
        StringParams { min_len: DEFAULT_MIN_STRING_LEN, wide: false }
    }
}

/// One maximal printable run: where it started and what it said.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrintableString {
    /// Byte offset of the run's first byte in the input.
    pub offset: u64,
    pub text: String,
}

fn is_printable(b: u8) -> bool {
    (0x20..=0x7e).contains(&b)
}

/// Incremental extractor: feed byte chunks in order, collect the finished
/// runs at the end. Memory is bounded by the longest single run plus the
/// output, never by the input size.
#[derive(Debug)]
pub struct StringExtractor {
    min_len: usize,
    next_offset: u64,
    run_start: u64,
    run: Vec<u8>,
    out: Vec<PrintableString>,
}

impl StringExtractor {
    pub fn new(min_len: usize) -> StringExtractor {
        StringExtractor {
            min_len,
            next_offset: 0,
            run_start: 0,
            run: Vec::new(),
            out: Vec::new(),
        }
    }

    pub fn push(&mut self, chunk: &[u8]) {
        for &b in chunk {
            if is_printable(b) {
                if self.run.is_empty() {
                    self.run_start = self.next_offset;
                }
                self.run.push(b);
            } else {
                self.flush_run();
            }
            self.next_offset += 1;
        }
    }

    fn flush_run(&mut self) {
        if self.run.len() >= self.min_len {
            let text = String::from_utf8(std::mem::take(&mut self.run))
                .expect("printable ASCII is valid UTF-8");
            self.out.push(PrintableString { offset: self.run_start, text });
        } else {
            self.run.clear();
        }
    }

    pub fn finish(mut self) -> Vec<PrintableString> {
        self.flush_run();
        self.out
    }
}

/// All maximal printable-ASCII runs of at least `min_len` bytes, in offset
/// order.
pub fn extract_printable_strings(bytes: &[u8], min_len: usize) -> Vec<PrintableString> {
    let mut extractor = StringExtractor::new(min_len);
    extractor.push(bytes);
    extractor.finish()
}

/// Streaming variant of [`extract_printable_strings`] for large files.
pub fn extract_printable_strings_from_reader<R: Read>(
    mut reader: R,
    min_len: usize,
) -> Result<Vec<PrintableString>> {
    let mut extractor = StringExtractor::new(min_len);
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        extractor.push(&buf[..n]);
    }
    Ok(extractor.finish())
}

/// UTF-16LE runs whose code units are all printable ASCII: alternating
/// `printable, 0x00` byte pairs, at least `min_len` characters long. The
/// offset is the first byte of the first pair. Debug/experimental aid;
/// scans only use this when wide extraction is switched on.
pub fn extract_wide_strings(bytes: &[u8], min_len: usize) -> Vec<PrintableString> {
    let mut out = Vec::new();
    let mut i = 0usize;
    while i + 1 < bytes.len() {
        if is_printable(bytes[i]) && bytes[i + 1] == 0 {
            let start = i;
            let mut chars = Vec::new();
            while i + 1 < bytes.len() && is_printable(bytes[i]) && bytes[i + 1] == 0 {
                chars.push(bytes[i]);
                i += 2;
            }
            if chars.len() >= min_len {
                out.push(PrintableString {
                    offset: start as u64,
                    text: String::from_utf8(chars).expect("printable ASCII is valid UTF-8"),
                });
            }
        } else {
            i += 1;
        }
    }
    out
}

/// The deduplicated term set of a binary, plus how many strings produced it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermSet {
    terms: BTreeSet<String>,
    source_count: u64,
}

impl TermSet {
    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(term)
    }

    /// Iterate terms in sorted order.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of printable strings the terms were derived from.
    pub fn source_count(&self) -> u64 {
        self.source_count
    }
}

/// Tokenize every string through the shared document tokenizer and union the
/// results. Order-insensitive: permuting the input yields an equal set.
pub fn terms_from_strings<'a, I>(strings: I) -> TermSet
where
    I: IntoIterator<Item = &'a PrintableString>,
{
    let mut set = TermSet::default();
    for s in strings {
        set.source_count += 1;
        set.terms.extend(tokenize(&s.text));
    }
    set
}

/// Extract per `params` and derive the term set in one step — the exact
/// front half of a scan.
pub fn terms_from_bytes(bytes: &[u8], params: &StringParams) -> TermSet {
    let mut strings = extract_printable_strings(bytes, params.min_len);
    if params.wide {
        strings.extend(extract_wide_strings(bytes, params.min_len));
    }
    terms_from_strings(&strings)
}
