//! JSONL corpus ingestion: one [`Document`] object per line, bodies already
//! plain text. This is the interchange format for synthetic corpora and for
//! re-ingesting a normalized dump.
//!
//! Unlike the XML path, every problem here is fatal: a JSONL corpus is a
//! machine-written artifact, so a bad line means the producer is broken and
//! silently dropping records would corrupt downstream statistics.

use std::collections::HashMap;
use std::io::BufRead;

use super::Document;
use crate::{Error, Result};

/// Stream validated documents out of a JSONL reader. Blank lines are
/// permitted and skipped; everything else must parse.
pub fn ingest_jsonl<R: BufRead>(reader: R) -> JsonlReader<R> {
    JsonlReader { reader, line_no: 0, seen: HashMap::new(), line: String::new(), fused: false }
}

pub struct JsonlReader<R> {
    reader: R,
    /// 1-based line number of the line in `line`.
    line_no: u64,
    /// doc_id → line number where it first appeared.
    seen: HashMap<u64, u64>,
    line: String,
    fused: bool,
}

impl<R: BufRead> Iterator for JsonlReader<R> {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.fused {
            return None;
        }
        loop {
            self.line.clear();
            self.line_no += 1;
            match self.reader.read_line(&mut self.line) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.fused = true;
                    return Some(Err(e.into()));
                }
            }
            let trimmed = self.line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let result = parse_line(&mut self.seen, self.line_no, trimmed);
            if result.is_err() {
                self.fused = true;
            }
            return Some(result);
        }
    }
}

fn parse_line(seen: &mut HashMap<u64, u64>, line_no: u64, line: &str) -> Result<Document> {
    let doc: Document = serde_json::from_str(line)
        .map_err(|e| Error::JsonLine { line: line_no, message: e.to_string() })?;
    doc.validate().map_err(|message| Error::JsonLine { line: line_no, message })?;
    if let Some(&first) = seen.get(&doc.doc_id) {
        return Err(Error::DuplicateDocId {
            doc_id: doc.doc_id,
            first_line: Some(first),
            second_line: Some(line_no),
        });
    }
    seen.insert(doc.doc_id, line_no);
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DocKind;

    #[test]
    fn parses_valid_lines() {
        let input = concat!(
            r#"{"doc_id":1,"thread_id":1,"kind":"question","title":"irc bot","tags":["irc"],"body":"PRIVMSG ..."}"#,
            "\n\n",
            r#"{"doc_id":2,"thread_id":1,"kind":"answer","title":"irc bot","tags":["irc"],"body":"use TOPIC"}"#,
            "\n",
        );
        let docs: Vec<_> = ingest_jsonl(input.as_bytes()).map(Result::unwrap).collect();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].doc_id, 1);
        assert_eq!(docs[0].kind, DocKind::Question);
        assert_eq!(docs[0].tags, vec!["irc"]);
        assert_eq!(docs[1].kind, DocKind::Answer);
    }

    #[test]
    fn missing_field_reports_line_number() {
        let input = "{\"doc_id\":1,\"thread_id\":1,\"kind\":\"question\",\"title\":\"\",\"tags\":[],\"body\":\"\"}\n{\"doc_id\":2}\n";
        let results: Vec<_> = ingest_jsonl(input.as_bytes()).collect();
        assert!(results[0].is_ok());
        match results[1].as_ref().unwrap_err() {
            Error::JsonLine { line: 2, message } => assert!(message.contains("missing field")),
            other => panic!("unexpected: {other:?}"),
        }
        assert_eq!(results.len(), 2, "stream fuses after a fatal error");
    }

    #[test]
    fn duplicate_doc_id_names_both_lines() {
        let line = r#"{"doc_id":1,"thread_id":1,"kind":"question","title":"","tags":[],"body":""}"#;
        let input = format!("{line}\n\n{line}\n");
        let results: Vec<_> = ingest_jsonl(input.as_bytes()).collect();
        match results[1].as_ref().unwrap_err() {
            Error::DuplicateDocId { doc_id: 1, first_line: Some(1), second_line: Some(3) } => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn invariant_violations_are_line_errors() {
        let bad_tag = r#"{"doc_id":1,"thread_id":1,"kind":"question","title":"","tags":["Bad Tag"],"body":""}"#;
        let results: Vec<_> = ingest_jsonl(bad_tag.as_bytes()).collect();
        assert!(matches!(results[0], Err(Error::JsonLine { line: 1, .. })));

        let bad_thread = r#"{"doc_id":5,"thread_id":6,"kind":"question","title":"","tags":[],"body":""}"#;
        let results: Vec<_> = ingest_jsonl(bad_thread.as_bytes()).collect();
        assert!(matches!(results[0], Err(Error::JsonLine { line: 1, .. })));
    }

    #[test]
    fn invalid_json_is_fatal() {
        let input = "not json\n";
        let results: Vec<_> = ingest_jsonl(input.as_bytes()).collect();
        assert!(matches!(results[0], Err(Error::JsonLine { line: 1, .. })));
    }
}
