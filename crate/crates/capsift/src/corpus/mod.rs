//! Corpus ingestion: raw Q&A dumps in (StackExchange `Posts.xml` or plain
//! JSONL) → normalized [`Document`] streams out.

mod html;
mod jsonl;
mod xml;

pub use html::strip_html_to_text;
pub use jsonl::{ingest_jsonl, JsonlReader};
pub use xml::{parse_stackexchange_posts, PostsXmlParser, XmlStats};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::Result;

/// One indexed Q&A post. Answers carry their parent question's title and
/// tags so field queries like `title:rdp` also select answer bodies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: u64,
    /// The question's doc_id; equals `doc_id` for questions.
    pub thread_id: u64,
    pub kind: DocKind,
    pub title: String,
    /// Lowercase tag strings without whitespace or angle brackets
    /// (e.g. `c++`, `winapi`).
    pub tags: Vec<String>,
    /// Plain text — HTML is stripped during ingestion.
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocKind {
    Question,
    Answer,
}

impl Document {
    /// Check the invariants that ingestion promises downstream consumers.
    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if self.kind == DocKind::Question && self.thread_id != self.doc_id {
            return Err(format!(
                "question doc_id {} must equal its thread_id (got {})",
                self.doc_id, self.thread_id
            ));
        }
        for tag in &self.tags {
            if tag.is_empty() {
                return Err("empty tag".to_owned());
            }
            if tag.chars().any(|c| c.is_whitespace() || c == '<' || c == '>') {
                return Err(format!("tag {tag:?} contains whitespace or angle brackets"));
            }
            if tag.chars().any(|c| c.is_ascii_uppercase()) {
                return Err(format!("tag {tag:?} is not lowercase"));
            }
        }
        Ok(())
    }
}

/// A `Posts.xml` row that survived type filtering, before thread assembly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPost {
    pub post_type: PostType,
    pub id: u64,
    /// Present on answers: the parent question's id.
    pub parent_id: Option<u64>,
    pub raw_title: Option<String>,
    /// Angle-bracket delimited, e.g. `<winapi><c++>`.
    pub raw_tags: Option<String>,
    /// HTML body as found in the dump.
    pub raw_body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostType {
    Question,
    Answer,
}

/// Turn raw posts into [`Document`]s: strip bodies, split tags, and give
/// answers their parent question's title/tags.
///
/// Single pass: question metadata is collected as questions stream by, so an
/// answer whose question never appeared (or appeared later — dumps order
/// questions first) is emitted with empty title/tags and counted in
/// [`Assembler::orphans`].
pub fn assemble_documents<I>(raw_posts: I) -> Assembler<I::IntoIter>
where
    I: IntoIterator<Item = Result<RawPost>>,
{
    Assembler {
        raw: raw_posts.into_iter(),
        question_meta: HashMap::new(),
        orphans: 0,
        orphan_sample: Vec::new(),
        fused: false,
    }
}

pub struct Assembler<I> {
    raw: I,
    question_meta: HashMap<u64, (String, Vec<String>)>,
    orphans: u64,
    orphan_sample: Vec<u64>,
    fused: bool,
}

/// How many orphan answer ids are retained for diagnostics.
const ORPHAN_SAMPLE_CAP: usize = 100;

impl<I> Assembler<I> {
    /// Count of answers whose parent question was never seen before them.
    pub fn orphans(&self) -> u64 {
        self.orphans
    }

    /// Up to [`ORPHAN_SAMPLE_CAP`] doc_ids of orphaned answers.
    pub fn orphan_sample(&self) -> &[u64] {
        &self.orphan_sample
    }
}

impl<I: Iterator<Item = Result<RawPost>>> Iterator for Assembler<I> {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.fused {
            return None;
        }
        let post = match self.raw.next()? {
            Ok(post) => post,
            Err(e) => {
                self.fused = true;
                return Some(Err(e));
            }
        };
        let body = strip_html_to_text(&post.raw_body);
        let doc = match post.post_type {
            PostType::Question => {
                let title = post.raw_title.unwrap_or_default();
                let tags = split_tags(post.raw_tags.as_deref().unwrap_or(""));
                self.question_meta.insert(post.id, (title.clone(), tags.clone()));
                Document {
                    doc_id: post.id,
                    thread_id: post.id,
                    kind: DocKind::Question,
                    title,
                    tags,
                    body,
                }
            }
            PostType::Answer => {
                let parent_id = post.parent_id.expect("answer row always has parent_id");
                let (title, tags) = match self.question_meta.get(&parent_id) {
                    Some((t, tags)) => (t.clone(), tags.clone()),
                    None => {
                        self.orphans += 1;
                        if self.orphan_sample.len() < ORPHAN_SAMPLE_CAP {
                            self.orphan_sample.push(post.id);
                        }
                        (String::new(), Vec::new())
                    }
                };
                Document {
                    doc_id: post.id,
                    thread_id: parent_id,
                    kind: DocKind::Answer,
                    title,
                    tags,
                    body,
                }
            }
        };
        Some(Ok(doc))
    }
}

/// Split `<winapi><c++>` into `["winapi", "c++"]`, lowercasing defensively.
fn split_tags(raw: &str) -> Vec<String> {
    let mut tags = Vec::new();
    let mut current: Option<String> = None;
    for ch in raw.chars() {
        match ch {
            '<' => current = Some(String::new()),
            '>' => {
                if let Some(tag) = current.take() {
                    if !tag.is_empty() {
                        tags.push(tag.to_lowercase());
                    }
                }
            }
            _ => {
                if let Some(tag) = current.as_mut() {
                    tag.push(ch);
                }
            }
        }
    }
    tags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn question(id: u64, title: &str, tags: &str, body: &str) -> Result<RawPost> {
        Ok(RawPost {
            post_type: PostType::Question,
            id,
            parent_id: None,
            raw_title: Some(title.to_owned()),
            raw_tags: Some(tags.to_owned()),
            raw_body: body.to_owned(),
        })
    }

    fn answer(id: u64, parent: u64, body: &str) -> Result<RawPost> {
        Ok(RawPost {
            post_type: PostType::Answer,
            id,
            parent_id: Some(parent),
            raw_title: None,
            raw_tags: None,
            raw_body: body.to_owned(),
        })
    }

    #[test]
    fn questions_map_directly() {
        let posts = vec![question(7, "Capturing screenshot", "<winapi>", "<p>hi</p>")];
        let docs: Vec<_> = assemble_documents(posts).map(Result::unwrap).collect();
        assert_eq!(
            docs,
            vec![Document {
                doc_id: 7,
                thread_id: 7,
                kind: DocKind::Question,
                title: "Capturing screenshot".to_owned(),
                tags: vec!["winapi".to_owned()],
                body: "hi".to_owned(),
            }]
        );
    }

    #[test]
    fn answers_inherit_parent_title_and_tags() {
        let posts = vec![
            question(7, "Capturing screenshot", "<winapi>", "q"),
            answer(9, 7, "<p>use <code>BitBlt</code></p>"),
        ];
        let docs: Vec<_> = assemble_documents(posts).map(Result::unwrap).collect();
        assert_eq!(docs.len(), 2);
        let ans = &docs[1];
        assert_eq!(ans.doc_id, 9);
        assert_eq!(ans.thread_id, 7);
        assert_eq!(ans.kind, DocKind::Answer);
        assert_eq!(ans.title, docs[0].title);
        assert_eq!(ans.tags, docs[0].tags);
        assert_eq!(ans.body, "use BitBlt");
    }

    #[test]
    fn orphan_answers_get_empty_metadata_and_are_counted() {
        let posts = vec![answer(5, 999, "stranded")];
        let mut asm = assemble_documents(posts);
        let doc = asm.next().unwrap().unwrap();
        assert_eq!(doc.title, "");
        assert!(doc.tags.is_empty());
        assert_eq!(doc.thread_id, 999);
        assert!(asm.next().is_none());
        assert_eq!(asm.orphans(), 1);
        assert_eq!(asm.orphan_sample(), &[5]);
    }

    #[test]
    fn output_count_matches_input_count() {
        let posts = vec![
            question(1, "a", "", "x"),
            answer(2, 1, "y"),
            question(3, "b", "<t>", "z"),
            answer(4, 3, "w"),
            answer(5, 3, "v"),
        ];
        let n = posts.len();
        assert_eq!(assemble_documents(posts).count(), n);
    }

    #[test]
    fn tag_splitting() {
        assert_eq!(split_tags("<winapi><c++>"), vec!["winapi", "c++"]);
        assert_eq!(split_tags("<WinAPI>"), vec!["winapi"]);
        assert_eq!(split_tags(""), Vec::<String>::new());
        assert_eq!(split_tags("<><a>"), vec!["a"]);
    }

    #[test]
    fn validate_rejects_bad_tags_and_thread_ids() {
        let mut doc = Document {
            doc_id: 1,
            thread_id: 1,
            kind: DocKind::Question,
            title: String::new(),
            tags: vec!["ok".to_owned()],
            body: String::new(),
        };
        assert!(doc.validate().is_ok());
        doc.tags = vec!["has space".to_owned()];
        assert!(doc.validate().is_err());
        doc.tags = vec!["UPPER".to_owned()];
        assert!(doc.validate().is_err());
        doc.tags = vec![];
        doc.thread_id = 2;
        assert!(doc.validate().is_err());
    }
}
