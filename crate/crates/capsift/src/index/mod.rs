//! Field-aware inverted index over [`Document`]s, plus the boolean query
//! engine and the on-disk index format.
//!
//! The index stores, per term: one sorted doc_id posting list per field
//! (title/tags/body), the combined cross-field list (their union), and the
//! total number of token occurrences. Document-level and occurrence-level
//! statistics are therefore both available; which one feeds the learner is a
//! runtime choice ([`crate::capability::CountingMode`]).

mod disk;
mod query;
mod tokenize;

pub use query::{execute_query, parse_query, Query};
pub use tokenize::tokenize;

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::corpus::{DocKind, Document};
use crate::{Error, Result};

/// The three indexed document fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Field {
    Title,
    Tags,
    Body,
}

impl Field {
    pub const ALL: [Field; 3] = [Field::Title, Field::Tags, Field::Body];

    pub fn name(self) -> &'static str {
        match self {
            Field::Title => "title",
            Field::Tags => "tags",
            Field::Body => "body",
        }
    }

    pub fn from_name(name: &str) -> Option<Field> {
        match name {
            "title" => Some(Field::Title),
            "tags" => Some(Field::Tags),
            "body" => Some(Field::Body),
            _ => None,
        }
    }
}

/// Per-term posting data. All lists are strictly sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TermPostings {
    title: Vec<u64>,
    tags: Vec<u64>,
    body: Vec<u64>,
    /// Union of the three field lists.
    combined: Vec<u64>,
    /// Total token occurrences across all documents and fields.
    occurrences: u64,
}

impl TermPostings {
    pub fn field(&self, field: Field) -> &[u64] {
        match field {
            Field::Title => &self.title,
            Field::Tags => &self.tags,
            Field::Body => &self.body,
        }
    }

    pub fn combined(&self) -> &[u64] {
        &self.combined
    }

    pub fn occurrences(&self) -> u64 {
        self.occurrences
    }

    fn finalize(title: Vec<u64>, tags: Vec<u64>, body: Vec<u64>, occurrences: u64) -> TermPostings {
        let mut p = TermPostings { title, tags, body, combined: Vec::new(), occurrences };
        p.title.sort_unstable();
        p.title.dedup();
        p.tags.sort_unstable();
        p.tags.dedup();
        p.body.sort_unstable();
        p.body.dedup();
        p.combined = union(&union(&p.title, &p.tags), &p.body);
        p
    }
}

#[derive(Debug)]
pub struct InvertedIndex {
    doc_count: u64,
    question_count: u64,
    answer_count: u64,
    postings: BTreeMap<String, TermPostings>,
    docs: DocStore,
}

#[derive(Debug)]
enum DocStore {
    /// Documents held in memory, sorted by doc_id.
    Memory(Vec<Document>),
    /// Documents read lazily from an index directory.
    Disk(disk::DiskDocs),
}

impl InvertedIndex {
    /// Build an index from a document stream. The stream may arrive in any
    /// doc_id order; a repeated doc_id is fatal.
    pub fn build<I>(docs: I) -> Result<InvertedIndex>
    where
        I: IntoIterator<Item = Result<Document>>,
    {
        struct Draft {
            title: Vec<u64>,
            tags: Vec<u64>,
            body: Vec<u64>,
            occurrences: u64,
        }
        let mut drafts: HashMap<String, Draft> = HashMap::new();
        let mut stored: Vec<Document> = Vec::new();
        let mut seen: HashMap<u64, ()> = HashMap::new();
        let mut question_count = 0u64;
        let mut answer_count = 0u64;

        for doc in docs {
            let doc = doc?;
            match seen.entry(doc.doc_id) {
                Entry::Occupied(_) => {
                    return Err(Error::DuplicateDocId {
                        doc_id: doc.doc_id,
                        first_line: None,
                        second_line: None,
                    });
                }
                Entry::Vacant(v) => v.insert(()),
            };
            match doc.kind {
                DocKind::Question => question_count += 1,
                DocKind::Answer => answer_count += 1,
            }
            for field in Field::ALL {
                for term in field_terms(&doc, field) {
                    let draft = drafts.entry(term).or_insert_with(|| Draft {
                        title: Vec::new(),
                        tags: Vec::new(),
                        body: Vec::new(),
                        occurrences: 0,
                    });
                    draft.occurrences += 1;
                    let list = match field {
                        Field::Title => &mut draft.title,
                        Field::Tags => &mut draft.tags,
                        Field::Body => &mut draft.body,
                    };
                    // One document is processed at a time, so suppressing
                    // consecutive repeats keeps each list duplicate-free.
                    if list.last() != Some(&doc.doc_id) {
                        list.push(doc.doc_id);
                    }
                }
            }
            stored.push(doc);
        }

        stored.sort_unstable_by_key(|d| d.doc_id);
        let postings = drafts
            .into_iter()
            .map(|(term, d)| (term, TermPostings::finalize(d.title, d.tags, d.body, d.occurrences)))
            .collect();
        Ok(InvertedIndex {
            doc_count: stored.len() as u64,
            question_count,
            answer_count,
            postings,
            docs: DocStore::Memory(stored),
        })
    }

    pub fn doc_count(&self) -> u64 {
        self.doc_count
    }

    /// (questions, answers)
    pub fn kind_counts(&self) -> (u64, u64) {
        (self.question_count, self.answer_count)
    }

    pub fn term_count(&self) -> u64 {
        self.postings.len() as u64
    }

    pub fn postings(&self, term: &str) -> Option<&TermPostings> {
        self.postings.get(term)
    }

    /// Number of documents containing `term` in any field; 0 if unknown.
    pub fn combined_doc_frequency(&self, term: &str) -> u64 {
        self.postings.get(term).map_or(0, |p| p.combined.len() as u64)
    }

    /// Total token occurrences of `term` corpus-wide; 0 if unknown.
    pub fn occurrence_count(&self, term: &str) -> u64 {
        self.postings.get(term).map_or(0, |p| p.occurrences)
    }

    /// Read-only statistics snapshot: document count plus per-term combined
    /// document frequencies.
    pub fn corpus_stats(&self) -> CorpusStats<'_> {
        CorpusStats { index: self }
    }

    /// Fetch one document by id.
    pub fn document(&self, doc_id: u64) -> Result<Document> {
        match &self.docs {
            DocStore::Memory(docs) => docs
                .binary_search_by_key(&doc_id, |d| d.doc_id)
                .map(|i| docs[i].clone())
                .map_err(|_| Error::IndexFormat { message: format!("unknown doc_id {doc_id}") }),
            DocStore::Disk(disk) => disk.get(doc_id),
        }
    }

    /// Stream every stored document in doc_id order.
    pub fn documents(&self) -> Box<dyn Iterator<Item = Result<Document>> + '_> {
        match &self.docs {
            DocStore::Memory(docs) => Box::new(docs.iter().cloned().map(Ok)),
            DocStore::Disk(disk) => disk.iter(),
        }
    }

    /// Write the index as a versioned directory (see `disk` docs for layout).
    pub fn save(&self, dir: &Path) -> Result<()> {
        disk::save(self, dir)
    }

    /// Load an index directory written by [`InvertedIndex::save`].
    /// Postings are loaded eagerly; documents are read on demand.
    pub fn load(dir: &Path) -> Result<InvertedIndex> {
        disk::load(dir)
    }

    fn postings_map(&self) -> &BTreeMap<String, TermPostings> {
        &self.postings
    }

    /// Directory backing a disk-loaded index; None for in-memory indexes.
    fn backing_dir(&self) -> Option<&Path> {
        match &self.docs {
            DocStore::Memory(_) => None,
            DocStore::Disk(d) => Some(d.dir()),
        }
    }

    fn from_parts(
        question_count: u64,
        answer_count: u64,
        doc_count: u64,
        postings: BTreeMap<String, TermPostings>,
        docs: disk::DiskDocs,
    ) -> InvertedIndex {
        InvertedIndex {
            doc_count,
            question_count,
            answer_count,
            postings,
            docs: DocStore::Disk(docs),
        }
    }
}

/// Snapshot view over index-wide statistics.
pub struct CorpusStats<'a> {
    index: &'a InvertedIndex,
}

impl CorpusStats<'_> {
    pub fn doc_count(&self) -> u64 {
        self.index.doc_count
    }

    pub fn combined_doc_frequency(&self, term: &str) -> u64 {
        self.index.combined_doc_frequency(term)
    }

    /// Iterate (term, combined document frequency) in term order.
    pub fn terms(&self) -> impl Iterator<Item = (&str, u64)> {
        self.index
            .postings
            .iter()
            .map(|(t, p)| (t.as_str(), p.combined.len() as u64))
    }
}

/// Tokenize one field of a document. Tag tokens come from tokenizing each
/// raw tag (so the tag `c++` indexes the term `c`). The learner re-tokenizes
/// matched documents through this same function, so learned vocabularies and
/// indexed vocabularies can never drift apart.
pub(crate) fn field_terms(doc: &Document, field: Field) -> Vec<String> {
    match field {
        Field::Title => tokenize(&doc.title),
        Field::Tags => doc.tags.iter().flat_map(|t| tokenize(t)).collect(),
        Field::Body => tokenize(&doc.body),
    }
}

/// Merge two sorted duplicate-free id lists into their sorted union.
pub(crate) fn union(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Sorted intersection of two sorted duplicate-free id lists.
pub(crate) fn intersect(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Sorted set difference `a \ b` of two sorted duplicate-free id lists.
pub(crate) fn difference(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(a.len());
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j >= b.len() || b[j] != x {
            out.push(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DocKind;

    pub(crate) fn doc(doc_id: u64, title: &str, tags: &[&str], body: &str) -> Document {
        Document {
            doc_id,
            thread_id: doc_id,
            kind: DocKind::Question,
            title: title.to_owned(),
            tags: tags.iter().map(|s| (*s).to_owned()).collect(),
            body: body.to_owned(),
        }
    }

    fn build(docs: Vec<Document>) -> InvertedIndex {
        InvertedIndex::build(docs.into_iter().map(Ok)).unwrap()
    }

    #[test]
    fn document_frequency_not_occurrence_frequency() {
        let index = build(vec![doc(1, "", &[], "privmsg privmsg")]);
        let p = index.postings("privmsg").unwrap();
        assert_eq!(p.field(Field::Body), &[1]);
        assert_eq!(index.combined_doc_frequency("privmsg"), 1);
        assert_eq!(index.occurrence_count("privmsg"), 2);
    }

    #[test]
    fn combined_frequency_unions_fields() {
        let index = build(vec![doc(1, "rdp", &[], ""), doc(2, "", &["rdp"], "")]);
        assert_eq!(index.combined_doc_frequency("rdp"), 2);
        let p = index.postings("rdp").unwrap();
        assert_eq!(p.field(Field::Title), &[1]);
        assert_eq!(p.field(Field::Tags), &[2]);
        assert_eq!(p.combined(), &[1, 2]);
    }

    #[test]
    fn same_term_in_two_fields_of_one_doc_counts_once() {
        let index = build(vec![doc(3, "rdp", &["rdp"], "rdp rdp")]);
        assert_eq!(index.combined_doc_frequency("rdp"), 1);
        assert_eq!(index.occurrence_count("rdp"), 4);
    }

    #[test]
    fn empty_stream_builds_empty_index() {
        let index = build(vec![]);
        assert_eq!(index.doc_count(), 0);
        assert_eq!(index.term_count(), 0);
        assert_eq!(index.combined_doc_frequency("anything"), 0);
    }

    #[test]
    fn duplicate_doc_id_is_fatal() {
        let err = InvertedIndex::build(vec![Ok(doc(1, "", &[], "a")), Ok(doc(1, "", &[], "b"))])
            .unwrap_err();
        assert!(matches!(err, Error::DuplicateDocId { doc_id: 1, .. }));
    }

    #[test]
    fn out_of_order_ids_still_sorted_postings() {
        let index = build(vec![doc(9, "", &[], "x"), doc(2, "", &[], "x"), doc(5, "", &[], "x")]);
        assert_eq!(index.postings("x").unwrap().field(Field::Body), &[2, 5, 9]);
        assert_eq!(index.document(5).unwrap().doc_id, 5);
        assert!(index.document(4).is_err());
    }

    #[test]
    fn tags_are_tokenized() {
        let index = build(vec![doc(1, "", &["c++", "win-api"], "")]);
        assert_eq!(index.combined_doc_frequency("c"), 1);
        assert_eq!(index.combined_doc_frequency("win"), 1);
        assert_eq!(index.combined_doc_frequency("api"), 1);
    }

    #[test]
    fn corpus_stats_views() {
        let index = build(vec![doc(1, "rdp", &[], ""), doc(2, "", &["rdp"], ""), doc(3, "", &[], "c")]);
        let stats = index.corpus_stats();
        assert_eq!(stats.doc_count(), 3);
        assert_eq!(stats.combined_doc_frequency("rdp"), 2);
        let all: Vec<_> = stats.terms().collect();
        assert_eq!(all, vec![("c", 1), ("rdp", 2)]);
    }

    #[test]
    fn set_helpers() {
        assert_eq!(union(&[1, 3], &[2, 3, 4]), vec![1, 2, 3, 4]);
        assert_eq!(intersect(&[1, 3, 5], &[3, 4, 5]), vec![3, 5]);
        assert_eq!(difference(&[1, 2, 3], &[2]), vec![1, 3]);
        assert_eq!(union(&[], &[]), Vec::<u64>::new());
        assert_eq!(intersect(&[1], &[]), Vec::<u64>::new());
        assert_eq!(difference(&[], &[1]), Vec::<u64>::new());
    }
}
