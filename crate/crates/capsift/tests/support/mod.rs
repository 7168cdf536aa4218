//! Independent reference implementations backing the acceptance suite.
//!
//! Everything here recomputes results with plain loops over plain data —
//! no inverted index, no postings intersection, no chunked extraction —
//! so agreement with the library is evidence, not tautology. Only the
//! shared data types ([`Document`], [`Query`], [`Field`]) are reused.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use capsift::corpus::{DocKind, Document};
use capsift::index::{Field, Query};

/// Character-level reimplementation of the shared tokenizer: maximal ASCII
/// alphanumeric runs, lowercased.
pub fn reference_tokenize(text: &str) -> Vec<String> {
    let mut terms = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_ascii_alphanumeric() {
            current.push(ch.to_ascii_lowercase());
        } else if !current.is_empty() {
            terms.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        terms.push(current);
    }
    terms
}

pub fn reference_field_terms(doc: &Document, field: Field) -> Vec<String> {
    match field {
        Field::Title => reference_tokenize(&doc.title),
        Field::Tags => doc.tags.iter().flat_map(|t| reference_tokenize(t)).collect(),
        Field::Body => reference_tokenize(&doc.body),
    }
}

/// Query semantics as a per-document predicate (NOT is plain negation
/// here; the generator only builds shapes the set-difference engine
/// accepts, where the two agree).
pub fn oracle_matches(doc: &Document, query: &Query) -> bool {
    match query {
        Query::FieldTerm(field, term) => {
            reference_field_terms(doc, *field).iter().any(|t| t == term)
        }
        Query::AnyFieldTerm(term) => Field::ALL
            .iter()
            .any(|f| reference_field_terms(doc, *f).iter().any(|t| t == term)),
        Query::And(a, b) => oracle_matches(doc, a) && oracle_matches(doc, b),
        Query::Or(a, b) => oracle_matches(doc, a) || oracle_matches(doc, b),
        Query::Not(inner) => !oracle_matches(doc, inner),
    }
}

/// Evaluate a query by scanning every document.
pub fn oracle_execute(docs: &[Document], query: &Query) -> Vec<u64> {
    let mut ids: Vec<u64> =
        docs.iter().filter(|d| oracle_matches(d, query)).map(|d| d.doc_id).collect();
    ids.sort_unstable();
    ids
}

/// Full-scan, index-free learner: find matching documents with the
/// predicate oracle, count per-term statistics with plain loops, and apply
/// the smoothed ratio directly.
pub fn brute_force_learn(
    docs: &[Document],
    query: &Query,
    alpha: f64,
    beta: f64,
    occurrences: bool,
) -> BTreeMap<String, f64> {
    struct Bag {
        matched: bool,
        counts: HashMap<String, u64>,
    }
    let bags: Vec<Bag> = docs
        .iter()
        .map(|doc| {
            let mut counts = HashMap::new();
            for field in Field::ALL {
                for term in reference_field_terms(doc, field) {
                    *counts.entry(term).or_insert(0) += 1;
                }
            }
            Bag { matched: oracle_matches(doc, query), counts }
        })
        .collect();

    let mut numerators: BTreeMap<String, u64> = BTreeMap::new();
    for bag in bags.iter().filter(|b| b.matched) {
        for (term, count) in &bag.counts {
            let add = if occurrences { *count } else { 1 };
            *numerators.entry(term.clone()).or_insert(0) += add;
        }
    }

    let mut out = BTreeMap::new();
    for (term, t_jc) in numerators {
        let t_jt: u64 = bags
            .iter()
            .map(|b| match b.counts.get(&term) {
                Some(count) if occurrences => *count,
                Some(_) => 1,
                None => 0,
            })
            .sum();
        out.insert(term, (t_jc as f64 + alpha) / (t_jt as f64 + alpha + beta));
    }
    out
}

/// Scalar printable-string reference: one byte at a time, one state bit.
pub fn reference_extract(bytes: &[u8], min_len: usize) -> Vec<(u64, String)> {
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    for i in 0..=bytes.len() {
        let printable = i < bytes.len() && (0x20..=0x7e).contains(&bytes[i]);
        match (printable, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(start)) => {
                if i - start >= min_len {
                    let text = String::from_utf8(bytes[start..i].to_vec())
                        .expect("printable ASCII is UTF-8");
                    out.push((start as u64, text));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    out
}

/// Random lowercase alphanumeric words (first char alphabetic), distinct.
pub fn random_vocab(rng: &mut ChaCha12Rng, size: usize) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut vocab = Vec::with_capacity(size);
    while vocab.len() < size {
        let len = rng.random_range(2..=8);
        let mut word = String::with_capacity(len);
        word.push((b'a' + rng.random_range(0..26u8)) as char);
        for _ in 1..len {
            let c = rng.random_range(0..36u8);
            word.push(if c < 26 { (b'a' + c) as char } else { (b'0' + c - 26) as char });
        }
        if seen.insert(word.clone()) {
            vocab.push(word);
        }
    }
    vocab
}

/// A random corpus over `vocab`: mostly questions, some answers, assorted
/// field lengths including empty ones.
pub fn random_docs(rng: &mut ChaCha12Rng, n_docs: usize, vocab: &[String]) -> Vec<Document> {
    let mut docs = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let doc_id = i as u64 + 1;
        let is_answer = doc_id > 1 && rng.random_range(0..5u8) == 0;
        let (kind, thread_id) = if is_answer {
            (DocKind::Answer, rng.random_range(1..doc_id))
        } else {
            (DocKind::Question, doc_id)
        };
        docs.push(Document {
            doc_id,
            thread_id,
            kind,
            title: pick_words(rng, vocab, 6).join(" "),
            tags: pick_words(rng, vocab, 3),
            body: pick_words(rng, vocab, 60).join(" "),
        });
    }
    docs
}

fn pick_words(rng: &mut ChaCha12Rng, vocab: &[String], max: usize) -> Vec<String> {
    let k = rng.random_range(0..=max);
    (0..k).map(|_| vocab[rng.random_range(0..vocab.len())].clone()).collect()
}

/// Random query ASTs the set-difference engine accepts: NOT only ever
/// appears as a direct child of AND with a positive sibling.
pub struct QueryGen<'a> {
    pub vocab: &'a [String],
    /// Words guaranteed absent from the corpus, to exercise empty postings.
    pub absent: &'a [String],
}

impl QueryGen<'_> {
    pub fn random_query(&self, rng: &mut ChaCha12Rng, depth: u8) -> Query {
        if depth == 0 || rng.random_range(0..10u8) < 4 {
            return self.leaf(rng);
        }
        let a = self.random_query(rng, depth - 1);
        let b = self.random_query(rng, depth - 1);
        match rng.random_range(0..10u8) {
            0..=3 => Query::Or(Box::new(a), Box::new(b)),
            4 => Query::And(Box::new(Query::Not(Box::new(a))), Box::new(b)),
            5 => Query::And(Box::new(a), Box::new(Query::Not(Box::new(b)))),
            _ => Query::And(Box::new(a), Box::new(b)),
        }
    }

    fn leaf(&self, rng: &mut ChaCha12Rng) -> Query {
        let term = if !self.absent.is_empty() && rng.random_range(0..10u8) == 0 {
            self.absent[rng.random_range(0..self.absent.len())].clone()
        } else {
            self.vocab[rng.random_range(0..self.vocab.len())].clone()
        };
        match rng.random_range(0..4u8) {
            0 => Query::AnyFieldTerm(term),
            1 => Query::FieldTerm(Field::Title, term),
            2 => Query::FieldTerm(Field::Tags, term),
            _ => Query::FieldTerm(Field::Body, term),
        }
    }
}

/// Render an AST back to query text, randomly choosing explicit `AND` or
/// adjacency for conjunctions. Compound operands self-parenthesize, so
/// precedence never changes the shape.
pub fn render_query(query: &Query, rng: &mut ChaCha12Rng) -> String {
    match query {
        Query::AnyFieldTerm(term) => term.clone(),
        Query::FieldTerm(field, term) => format!("{}:{term}", field.name()),
        Query::And(a, b) => {
            let op = if rng.random_range(0..2u8) == 0 { " AND " } else { " " };
            format!("({}{op}{})", render_query(a, rng), render_query(b, rng))
        }
        Query::Or(a, b) => {
            format!("({} OR {})", render_query(a, rng), render_query(b, rng))
        }
        Query::Not(inner) => format!("NOT {}", render_query(inner, rng)),
    }
}
