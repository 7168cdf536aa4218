//! On-disk index format: a versioned directory.
//!
//! ```text
//! <dir>/
//!   VERSION        "capsift-index 1\n" — checked verbatim on load
//!   meta.json      document/term counts
//!   postings.bin   per-term posting lists (layout below)
//!   docs.jsonl     one normalized Document per line, ascending doc_id
//!   docs.idx       random-access map doc_id → byte offset into docs.jsonl
//! ```
//!
//! `postings.bin` (all integers little-endian):
//!
//! ```text
//!   magic "CSIF", u32 format version (1), u64 term count, then per term
//!   (ascending by term bytes):
//!     u32 term byte length, term (UTF-8)
//!     u64 total token occurrences
//!     3 × field list (title, tags, body): u32 length, length × u64 doc_id
//! ```
//!
//! `docs.idx`: magic "CSDX", u32 version (1), u64 count, then count ×
//! (u64 doc_id, u64 offset), ascending by doc_id.
//!
//! Combined cross-field lists are recomputed from the three field lists at
//! load, so the union invariant holds by construction. Posting lists are
//! validated to be strictly increasing; any structural problem is an
//! [`Error::IndexFormat`], never a silent partial load.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{union, InvertedIndex, TermPostings};
use crate::corpus::Document;
use crate::{Error, Result};

const VERSION_LINE: &str = "capsift-index 1";
const POSTINGS_MAGIC: &[u8; 4] = b"CSIF";
const DOCS_IDX_MAGIC: &[u8; 4] = b"CSDX";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Meta {
    format_version: u32,
    doc_count: u64,
    question_count: u64,
    answer_count: u64,
    term_count: u64,
}

fn bad(message: impl Into<String>) -> Error {
    Error::IndexFormat { message: message.into() }
}

pub(super) fn save(index: &InvertedIndex, dir: &Path) -> Result<()> {
    if let Some(own_dir) = index.backing_dir() {
        let same = match (fs::canonicalize(own_dir), fs::canonicalize(dir)) {
            (Ok(a), Ok(b)) => a == b,
            _ => false,
        };
        if same {
            return Err(bad("cannot save an index into the directory backing it"));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    // docs.jsonl + docs.idx — documents stream out in ascending doc_id order.
    let docs_path = dir.join("docs.jsonl");
    let mut offsets: Vec<(u64, u64)> = Vec::new();
    {
        let file = File::create(&docs_path).map_err(|e| Error::io(&docs_path, e))?;
        let mut w = CountingWriter { inner: BufWriter::new(file), written: 0 };
        for doc in index.documents() {
            let doc = doc?;
            offsets.push((doc.doc_id, w.written));
            let line = serde_json::to_string(&doc)
                .map_err(|e| bad(format!("serializing doc {}: {e}", doc.doc_id)))?;
            w.write_all(line.as_bytes()).map_err(|e| Error::io(&docs_path, e))?;
            w.write_all(b"\n").map_err(|e| Error::io(&docs_path, e))?;
        }
        w.inner.flush().map_err(|e| Error::io(&docs_path, e))?;
    }

    let idx_path = dir.join("docs.idx");
    {
        let file = File::create(&idx_path).map_err(|e| Error::io(&idx_path, e))?;
        let mut w = BufWriter::new(file);
        let inner = (|| -> std::io::Result<()> {
            w.write_all(DOCS_IDX_MAGIC)?;
            w.write_all(&FORMAT_VERSION.to_le_bytes())?;
            w.write_all(&(offsets.len() as u64).to_le_bytes())?;
            for (doc_id, offset) in &offsets {
                w.write_all(&doc_id.to_le_bytes())?;
                w.write_all(&offset.to_le_bytes())?;
            }
            w.flush()
        })();
        inner.map_err(|e| Error::io(&idx_path, e))?;
    }

    let postings_path = dir.join("postings.bin");
    {
        let file = File::create(&postings_path).map_err(|e| Error::io(&postings_path, e))?;
        let mut w = BufWriter::new(file);
        let inner = (|| -> std::io::Result<()> {
            w.write_all(POSTINGS_MAGIC)?;
            w.write_all(&FORMAT_VERSION.to_le_bytes())?;
            w.write_all(&(index.postings_map().len() as u64).to_le_bytes())?;
            for (term, postings) in index.postings_map() {
                w.write_all(&(term.len() as u32).to_le_bytes())?;
                w.write_all(term.as_bytes())?;
                w.write_all(&postings.occurrences().to_le_bytes())?;
                for field in super::Field::ALL {
                    let list = postings.field(field);
                    w.write_all(&(list.len() as u32).to_le_bytes())?;
                    for id in list {
                        w.write_all(&id.to_le_bytes())?;
                    }
                }
            }
            w.flush()
        })();
        inner.map_err(|e| Error::io(&postings_path, e))?;
    }

    let (question_count, answer_count) = index.kind_counts();
    let meta = Meta {
        format_version: FORMAT_VERSION,
        doc_count: index.doc_count(),
        question_count,
        answer_count,
        term_count: index.term_count(),
    };
    let meta_path = dir.join("meta.json");
    let meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    fs::write(&meta_path, meta_json + "\n").map_err(|e| Error::io(&meta_path, e))?;

    let version_path = dir.join("VERSION");
    fs::write(&version_path, format!("{VERSION_LINE}\n")).map_err(|e| Error::io(&version_path, e))?;
    Ok(())
}

struct CountingWriter<W> {
    inner: W,
    written: u64,
}

impl<W: Write> CountingWriter<W> {
    fn write_all(&mut self, buf: &[u8]) -> std::io::Result<()> {
        self.inner.write_all(buf)?;
        self.written += buf.len() as u64;
        Ok(())
    }
}

pub(super) fn load(dir: &Path) -> Result<InvertedIndex> {
    let version_path = dir.join("VERSION");
    let version = fs::read_to_string(&version_path).map_err(|e| Error::io(&version_path, e))?;
    if version.trim_end() != VERSION_LINE {
        return Err(bad(format!(
            "unsupported index version {:?} (expected {VERSION_LINE:?})",
            version.trim_end()
        )));
    }

    let meta_path = dir.join("meta.json");
    let meta_raw = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: Meta =
        serde_json::from_str(&meta_raw).map_err(|e| bad(format!("meta.json: {e}")))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(bad(format!("unsupported meta format_version {}", meta.format_version)));
    }
    if meta.question_count + meta.answer_count != meta.doc_count {
        return Err(bad("meta.json kind counts do not sum to doc_count"));
    }

    let postings = load_postings(&dir.join("postings.bin"), &meta)?;
    let idx = load_docs_idx(&dir.join("docs.idx"), &meta)?;
    let docs_path = dir.join("docs.jsonl");
    let file = File::open(&docs_path).map_err(|e| Error::io(&docs_path, e))?;
    let docs = DiskDocs {
        dir: dir.to_path_buf(),
        path: docs_path,
        reader: Mutex::new(BufReader::new(file)),
        idx,
    };
    Ok(InvertedIndex::from_parts(
        meta.question_count,
        meta.answer_count,
        meta.doc_count,
        postings,
        docs,
    ))
}

fn load_postings(path: &Path, meta: &Meta) -> Result<BTreeMap<String, TermPostings>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "postings.bin magic")?;
    if &magic != POSTINGS_MAGIC {
        return Err(bad("postings.bin: bad magic"));
    }
    if read_u32(&mut r, "postings.bin version")? != FORMAT_VERSION {
        return Err(bad("postings.bin: unsupported version"));
    }
    let term_count = read_u64(&mut r, "postings.bin term count")?;
    if term_count != meta.term_count {
        return Err(bad(format!(
            "postings.bin holds {term_count} terms but meta.json says {}",
            meta.term_count
        )));
    }

    let mut postings = BTreeMap::new();
    let mut prev_term: Option<String> = None;
    for _ in 0..term_count {
        let len = read_u32(&mut r, "term length")? as usize;
        let mut buf = vec![0u8; len];
        read_exact(&mut r, &mut buf, "term bytes")?;
        let term = String::from_utf8(buf).map_err(|_| bad("term is not valid UTF-8"))?;
        if let Some(prev) = &prev_term {
            if *prev >= term {
                return Err(bad(format!("terms out of order: {prev:?} then {term:?}")));
            }
        }
        let occurrences = read_u64(&mut r, "occurrence count")?;
        let mut lists: [Vec<u64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for list in &mut lists {
            let n = read_u32(&mut r, "posting list length")? as usize;
            let mut ids = Vec::with_capacity(n);
            let mut prev: Option<u64> = None;
            for _ in 0..n {
                let id = read_u64(&mut r, "posting doc_id")?;
                if prev.is_some_and(|p| p >= id) {
                    return Err(bad(format!("posting list for {term:?} is not strictly sorted")));
                }
                prev = Some(id);
                ids.push(id);
            }
            *list = ids;
        }
        let [title, tags, body] = lists;
        let combined = union(&union(&title, &tags), &body);
        if combined.is_empty() {
            return Err(bad(format!("term {term:?} has no postings")));
        }
        prev_term = Some(term.clone());
        postings.insert(term, TermPostings { title, tags, body, combined, occurrences });
    }
    // A trailing byte means the file doesn't match its own term count.
    let mut probe = [0u8; 1];
    if r.read(&mut probe).map_err(|e| Error::io(path, e))? != 0 {
        return Err(bad("postings.bin has trailing data"));
    }
    Ok(postings)
}

fn load_docs_idx(path: &Path, meta: &Meta) -> Result<Vec<(u64, u64)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "docs.idx magic")?;
    if &magic != DOCS_IDX_MAGIC {
        return Err(bad("docs.idx: bad magic"));
    }
    if read_u32(&mut r, "docs.idx version")? != FORMAT_VERSION {
        return Err(bad("docs.idx: unsupported version"));
    }
    let count = read_u64(&mut r, "docs.idx count")?;
    if count != meta.doc_count {
        return Err(bad(format!(
            "docs.idx holds {count} documents but meta.json says {}",
            meta.doc_count
        )));
    }
    let mut idx = Vec::with_capacity(count as usize);
    let mut prev: Option<u64> = None;
    for _ in 0..count {
        let doc_id = read_u64(&mut r, "docs.idx doc_id")?;
        let offset = read_u64(&mut r, "docs.idx offset")?;
        if prev.is_some_and(|p| p >= doc_id) {
            return Err(bad("docs.idx is not sorted by doc_id"));
        }
        prev = Some(doc_id);
        idx.push((doc_id, offset));
    }
    Ok(idx)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| bad(format!("truncated reading {what}: {e}")))
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

/// Lazy document access into an index directory's docs.jsonl.
#[derive(Debug)]
pub(super) struct DiskDocs {
    dir: PathBuf,
    path: PathBuf,
    reader: Mutex<BufReader<File>>,
    /// (doc_id, byte offset), ascending by doc_id.
    idx: Vec<(u64, u64)>,
}

impl DiskDocs {
    pub(super) fn dir(&self) -> &Path {
        &self.dir
    }

    pub(super) fn get(&self, doc_id: u64) -> Result<Document> {
        let slot = self
            .idx
            .binary_search_by_key(&doc_id, |&(id, _)| id)
            .map_err(|_| bad(format!("unknown doc_id {doc_id}")))?;
        let offset = self.idx[slot].1;
        let mut line = String::new();
        {
            let mut reader = self.reader.lock().expect("doc reader poisoned");
            reader
                .seek(SeekFrom::Start(offset))
                .map_err(|e| Error::io(&self.path, e))?;
            reader.read_line(&mut line).map_err(|e| Error::io(&self.path, e))?;
        }
        let doc: Document = serde_json::from_str(line.trim_end())
            .map_err(|e| bad(format!("docs.jsonl at offset {offset}: {e}")))?;
        if doc.doc_id != doc_id {
            return Err(bad(format!(
                "docs.idx points offset {offset} at doc {}, expected {doc_id}",
                doc.doc_id
            )));
        }
        Ok(doc)
    }

    pub(super) fn iter(&self) -> Box<dyn Iterator<Item = Result<Document>> + '_> {
        let file = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) => return Box::new(std::iter::once(Err(Error::io(&self.path, e)))),
        };
        let reader = BufReader::new(file);
        let path = self.path.clone();
        Box::new(reader.lines().map(move |line| {
            let line = line.map_err(|e| Error::io(&path, e))?;
            serde_json::from_str::<Document>(&line).map_err(|e| bad(format!("docs.jsonl: {e}")))
        }))
    }
}
