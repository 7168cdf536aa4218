//! Streaming parser for StackExchange `Posts.xml` dumps.
//!
//! The dump format is a flat sequence of `<row .../>` elements under a
//! `<posts>` root. Rows are consumed one event at a time with a reused
//! buffer, so memory stays bounded no matter how large the dump is.
//!
//! Error policy: a malformed document (bad XML syntax, truncation) is fatal
//! and reported with its byte offset; a structurally fine row that is missing
//! a required attribute (or has an unparseable number) is skipped and
//! counted, because real dumps contain the occasional damaged row and one
//! of them should not abort a multi-gigabyte ingest.

use std::io::BufRead;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{PostType, RawPost};
use crate::{Error, Result};

/// How many row-level error messages are retained verbatim for diagnostics.
const ROW_ERROR_SAMPLE_CAP: usize = 20;

/// Counters accumulated while streaming a dump.
#[derive(Debug, Default, Clone)]
pub struct XmlStats {
    /// `<row>` elements seen, of any post type.
    pub rows: u64,
    /// Rows with a PostTypeId other than question (1) or answer (2).
    pub skipped_other_type: u64,
    /// Rows skipped because a required attribute was missing or malformed.
    pub row_errors: u64,
    /// Up to [`ROW_ERROR_SAMPLE_CAP`] messages describing skipped rows.
    pub row_error_sample: Vec<String>,
}

/// Stream question/answer rows out of a `Posts.xml`-style document.
pub fn parse_stackexchange_posts<R: BufRead>(reader: R) -> PostsXmlParser<R> {
    PostsXmlParser {
        reader: Reader::from_reader(reader),
        buf: Vec::new(),
        stats: XmlStats::default(),
        fused: false,
    }
}

pub struct PostsXmlParser<R: BufRead> {
    reader: Reader<R>,
    buf: Vec<u8>,
    stats: XmlStats,
    fused: bool,
}

impl<R: BufRead> PostsXmlParser<R> {
    pub fn stats(&self) -> &XmlStats {
        &self.stats
    }

    fn record_row_error(&mut self, message: String) {
        self.stats.row_errors += 1;
        if self.stats.row_error_sample.len() < ROW_ERROR_SAMPLE_CAP {
            self.stats.row_error_sample.push(message);
        }
    }
}

enum RowOutcome {
    Post(RawPost),
    OtherType,
    Bad(String),
}

impl<R: BufRead> Iterator for PostsXmlParser<R> {
    type Item = Result<RawPost>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.fused {
            return None;
        }
        loop {
            self.buf.clear();
            let event = match self.reader.read_event_into(&mut self.buf) {
                Ok(event) => event,
                Err(e) => {
                    self.fused = true;
                    return Some(Err(Error::XmlParse {
                        offset: self.reader.buffer_position() as u64,
                        message: e.to_string(),
                    }));
                }
            };
            match event {
                Event::Eof => return None,
                Event::Empty(ref e) | Event::Start(ref e) if e.name().as_ref() == b"row" => {
                    self.stats.rows += 1;
                    match parse_row(e) {
                        RowOutcome::Post(post) => return Some(Ok(post)),
                        RowOutcome::OtherType => self.stats.skipped_other_type += 1,
                        RowOutcome::Bad(msg) => {
                            let msg = format!(
                                "row near byte {}: {msg}",
                                self.reader.buffer_position()
                            );
                            self.record_row_error(msg);
                        }
                    }
                }
                _ => {}
            }
        }
    }
}

fn parse_row(e: &BytesStart<'_>) -> RowOutcome {
    let mut id = None;
    let mut post_type_id = None;
    let mut parent_id = None;
    let mut title = None;
    let mut tags = None;
    let mut body = None;

    for attr in e.attributes() {
        let attr = match attr {
            Ok(attr) => attr,
            Err(e) => return RowOutcome::Bad(format!("bad attribute: {e}")),
        };
        let key = attr.key.as_ref();
        if !matches!(key, b"Id" | b"PostTypeId" | b"ParentId" | b"Title" | b"Tags" | b"Body") {
            continue;
        }
        let value = match attr.unescape_value() {
            Ok(v) => v.into_owned(),
            Err(e) => return RowOutcome::Bad(format!("bad attribute value: {e}")),
        };
        match key {
            b"Id" => id = Some(value),
            b"PostTypeId" => post_type_id = Some(value),
            b"ParentId" => parent_id = Some(value),
            b"Title" => title = Some(value),
            b"Tags" => tags = Some(value),
            b"Body" => body = Some(value),
            _ => unreachable!(),
        }
    }

    let post_type = match post_type_id.as_deref() {
        None => return RowOutcome::Bad("missing PostTypeId".to_owned()),
        Some("1") => PostType::Question,
        Some("2") => PostType::Answer,
        Some(other) => match other.parse::<u64>() {
            Ok(_) => return RowOutcome::OtherType,
            Err(_) => return RowOutcome::Bad(format!("unparseable PostTypeId {other:?}")),
        },
    };
    let id = match id.as_deref().map(str::parse::<u64>) {
        Some(Ok(id)) => id,
        Some(Err(_)) => return RowOutcome::Bad(format!("unparseable Id {:?}", id.unwrap())),
        None => return RowOutcome::Bad("missing Id".to_owned()),
    };
    let body = match body {
        Some(body) => body,
        None => return RowOutcome::Bad(format!("row {id}: missing Body")),
    };
    let parent_id = match (post_type, parent_id.as_deref().map(str::parse::<u64>)) {
        (PostType::Answer, Some(Ok(pid))) => Some(pid),
        (PostType::Answer, Some(Err(_))) => {
            return RowOutcome::Bad(format!("row {id}: unparseable ParentId"));
        }
        (PostType::Answer, None) => {
            return RowOutcome::Bad(format!("answer row {id}: missing ParentId"));
        }
        (PostType::Question, _) => None,
    };
    if post_type == PostType::Question && title.is_none() {
        return RowOutcome::Bad(format!("question row {id}: missing Title"));
    }

    RowOutcome::Post(RawPost { post_type, id, parent_id, raw_title: title, raw_tags: tags, raw_body: body })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_all(xml: &str) -> (Vec<Result<RawPost>>, XmlStats) {
        let mut parser = parse_stackexchange_posts(xml.as_bytes());
        let posts: Vec<_> = parser.by_ref().collect();
        (posts, parser.stats().clone())
    }

    #[test]
    fn question_row_maps_attributes() {
        let xml = r#"<posts>
            <row Id="7" PostTypeId="1" Title="Capturing screenshot" Tags="&lt;winapi&gt;" Body="&lt;p&gt;hi&lt;/p&gt;"/>
        </posts>"#;
        let (posts, stats) = parse_all(xml);
        let post = posts.into_iter().next().unwrap().unwrap();
        assert_eq!(
            post,
            RawPost {
                post_type: PostType::Question,
                id: 7,
                parent_id: None,
                raw_title: Some("Capturing screenshot".to_owned()),
                raw_tags: Some("<winapi>".to_owned()),
                raw_body: "<p>hi</p>".to_owned(),
            }
        );
        assert_eq!(stats.rows, 1);
        assert_eq!(stats.row_errors, 0);
    }

    #[test]
    fn answer_row_requires_parent() {
        let xml = r#"<posts>
            <row Id="9" PostTypeId="2" ParentId="7" Body="b"/>
            <row Id="10" PostTypeId="2" Body="no parent"/>
        </posts>"#;
        let (posts, stats) = parse_all(xml);
        assert_eq!(posts.len(), 1);
        let post = posts[0].as_ref().unwrap();
        assert_eq!(post.id, 9);
        assert_eq!(post.parent_id, Some(7));
        assert_eq!(stats.row_errors, 1);
        assert!(stats.row_error_sample[0].contains("missing ParentId"));
    }

    #[test]
    fn other_post_types_are_skipped_and_counted() {
        let xml = r#"<posts>
            <row Id="11" PostTypeId="4" Body="tag wiki"/>
            <row Id="12" PostTypeId="1" Title="t" Body="b"/>
        </posts>"#;
        let (posts, stats) = parse_all(xml);
        assert_eq!(posts.len(), 1);
        assert_eq!(stats.rows, 2);
        assert_eq!(stats.skipped_other_type, 1);
    }

    #[test]
    fn malformed_xml_is_fatal_with_offset() {
        let xml = r#"<posts><row Id="1" PostTypeId="1" Title="t" Body="b"/></wrong>"#;
        let (posts, _) = parse_all(xml);
        assert_eq!(posts.len(), 2);
        assert!(posts[0].is_ok());
        match posts[1].as_ref().unwrap_err() {
            Error::XmlParse { offset, .. } => assert!(*offset > 0),
            other => panic!("expected XmlParse, got {other:?}"),
        }
    }

    #[test]
    fn fatal_error_fuses_the_stream() {
        let xml = "<posts><row Id=\"1\" PostTypeId=\"1\" Title=\"t\" Body=\"b\"/><&&";
        let mut parser = parse_stackexchange_posts(xml.as_bytes());
        assert!(parser.next().unwrap().is_ok());
        assert!(parser.next().unwrap().is_err());
        assert!(parser.next().is_none());
    }

    #[test]
    fn missing_required_attributes_are_row_errors() {
        let xml = r#"<posts>
            <row PostTypeId="1" Title="no id" Body="b"/>
            <row Id="2" PostTypeId="1" Body="no title"/>
            <row Id="3" PostTypeId="1" Title="no body"/>
            <row Id="x" PostTypeId="1" Title="bad id" Body="b"/>
            <row Id="5" PostTypeId="zzz" Body="bad type"/>
        </posts>"#;
        let (posts, stats) = parse_all(xml);
        assert!(posts.is_empty());
        assert_eq!(stats.row_errors, 5);
        assert_eq!(stats.rows, 5);
    }
}
