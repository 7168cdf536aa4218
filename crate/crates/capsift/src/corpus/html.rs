//! Lenient HTML-to-text stripping for Q&A post bodies.
//!
//! The output is the literal text content: tags removed, block-level tag
//! boundaries collapsed to a single newline, and entities decoded. Entity
//! decoding runs as one left-to-right pass *after* tag removal, so decoded
//! angle brackets are always literal text — `a &amp;&lt;b&gt;` becomes
//! `a &<b>` and the `<b>` is data, never re-parsed as a tag. A consequence
//! is that stripping is idempotent only on text that doesn't encode
//! tag-shaped content; that trade is deliberate (it prevents entity-encoded
//! input from smuggling markup through the stripper).
//!
//! `<code>` and `<pre>` content is kept verbatim: tags nested inside are
//! still dropped, but no newline injection or other rewriting happens there,
//! because API symbols and code snippets live in those blocks.

/// Tags whose boundaries become a single newline in the output.
const BLOCK_TAGS: &[&str] = &[
    "address", "article", "aside", "blockquote", "br", "dd", "details", "div", "dl", "dt",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6",
    "header", "hr", "li", "nav", "ol", "p", "pre", "section", "summary", "table", "tbody", "td",
    "tfoot", "th", "thead", "tr", "ul",
];

/// How far past a `<` we look for the closing `>` before deciding the `<`
/// was literal text after all.
const MAX_TAG_SPAN: usize = 1024;

/// Longest entity body (between `&` and `;`) we attempt to decode.
const MAX_ENTITY_LEN: usize = 32;

/// Strip HTML down to plain text. See the module docs for the exact rules.
pub fn strip_html_to_text(html: &str) -> String {
    decode_entities(&strip_tags(html))
}

struct TagScan {
    /// Byte index just past the closing `>` (or `-->`).
    end: usize,
    /// Lowercased element name; empty for comments/doctype/PI constructs.
    name: String,
    closing: bool,
    self_closing: bool,
}

fn strip_tags(html: &str) -> String {
    let bytes = html.as_bytes();
    let mut out = String::with_capacity(html.len());
    let mut pending_break = false;
    let mut code_depth = 0usize;
    let mut pre_depth = 0usize;
    let mut i = 0;

    while i < bytes.len() {
        if bytes[i] == b'<' {
            if let Some(tag) = scan_tag(bytes, i) {
                let verbatim_before = code_depth > 0 || pre_depth > 0;
                if !tag.name.is_empty() && !tag.self_closing {
                    track_depth(&tag, &mut code_depth, &mut pre_depth);
                }
                let verbatim_after = code_depth > 0 || pre_depth > 0;
                // A block tag produces a break only when its outside edge is
                // outside every verbatim region: opening <pre> breaks (its
                // outside is before the region), a <p> *inside* a pre doesn't.
                let outside = if tag.closing { !verbatim_after } else { !verbatim_before };
                if outside && is_block(&tag.name) {
                    pending_break = true;
                }
                i = tag.end;
                continue;
            }
            // No closing '>' in range (or not a tag start at all): literal.
        }
        let len = utf8_len(bytes[i]);
        emit(&mut out, &html[i..i + len], &mut pending_break);
        i += len;
    }
    out
}

fn track_depth(tag: &TagScan, code_depth: &mut usize, pre_depth: &mut usize) {
    let depth = match tag.name.as_str() {
        "code" => code_depth,
        "pre" => pre_depth,
        _ => return,
    };
    if tag.closing {
        *depth = depth.saturating_sub(1);
    } else {
        *depth += 1;
    }
}

fn is_block(name: &str) -> bool {
    !name.is_empty() && BLOCK_TAGS.binary_search(&name).is_ok()
}

/// Copy one literal character, folding any pending block boundary into a
/// single newline. Whitespace arriving while a break is pending is absorbed
/// so `</p>\n  <p>` still yields exactly one newline.
fn emit(out: &mut String, ch: &str, pending_break: &mut bool) {
    if *pending_break {
        if matches!(ch, " " | "\t" | "\n" | "\r") {
            return;
        }
        *pending_break = false;
        if !out.is_empty() {
            out.push('\n');
        }
    }
    out.push_str(ch);
}

/// Try to read a tag-like construct starting at `bytes[start] == '<'`.
/// Returns `None` when the `<` should be treated as literal text: the next
/// character doesn't begin markup, or no `>` closes the tag within
/// [`MAX_TAG_SPAN`] bytes. Quoted attribute values may contain `>` freely.
fn scan_tag(bytes: &[u8], start: usize) -> Option<TagScan> {
    let next = *bytes.get(start + 1)?;
    if bytes[start..].starts_with(b"<!--") {
        let rel = find_subslice(&bytes[start + 4..], b"-->")?;
        return Some(TagScan {
            end: start + 4 + rel + 3,
            name: String::new(),
            closing: false,
            self_closing: false,
        });
    }
    if !(next.is_ascii_alphabetic() || next == b'/' || next == b'!' || next == b'?') {
        return None;
    }
    let limit = bytes.len().min(start + MAX_TAG_SPAN + 1);
    let mut quote: Option<u8> = None;
    let mut gt = None;
    for (j, &b) in bytes.iter().enumerate().take(limit).skip(start + 1) {
        match quote {
            Some(q) => {
                if b == q {
                    quote = None;
                }
            }
            None => match b {
                b'"' | b'\'' => quote = Some(b),
                b'>' => {
                    gt = Some(j);
                    break;
                }
                _ => {}
            },
        }
    }
    let gt = gt?;
    let mut k = start + 1;
    let closing = bytes[k] == b'/';
    if closing {
        k += 1;
    }
    let name_start = k;
    while k < gt && bytes[k].is_ascii_alphanumeric() {
        k += 1;
    }
    let name = String::from_utf8(bytes[name_start..k].to_ascii_lowercase()).expect("ascii");
    let self_closing = gt > start + 1 && bytes[gt - 1] == b'/';
    Some(TagScan { end: gt + 1, name, closing, self_closing })
}

fn find_subslice(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

fn utf8_len(lead: u8) -> usize {
    match lead {
        0x00..=0x7f => 1,
        0xc0..=0xdf => 2,
        0xe0..=0xef => 3,
        _ => 4,
    }
}

/// One left-to-right entity-decoding pass: the five core named entities,
/// `&nbsp;`, and decimal/hex numeric references. Anything unrecognized stays
/// literal, and decoded output is never rescanned (`&amp;lt;` → `&lt;`).
fn decode_entities(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'&' {
            if let Some((ch, end)) = scan_entity(bytes, i) {
                out.push(ch);
                i = end;
                continue;
            }
        }
        let len = utf8_len(bytes[i]);
        out.push_str(&text[i..i + len]);
        i += len;
    }
    out
}

fn scan_entity(bytes: &[u8], start: usize) -> Option<(char, usize)> {
    let limit = bytes.len().min(start + MAX_ENTITY_LEN + 2);
    let semi = bytes[start + 1..limit].iter().position(|&b| b == b';')? + start + 1;
    let body = &bytes[start + 1..semi];
    let ch = match body {
        b"amp" => '&',
        b"lt" => '<',
        b"gt" => '>',
        b"quot" => '"',
        b"apos" => '\'',
        b"nbsp" => '\u{00a0}',
        _ if body.first() == Some(&b'#') => {
            let digits = &body[1..];
            let value = if digits.first().is_some_and(|&b| b == b'x' || b == b'X') {
                u32::from_str_radix(std::str::from_utf8(&digits[1..]).ok()?, 16).ok()?
            } else if digits.is_empty() {
                return None;
            } else {
                std::str::from_utf8(digits).ok()?.parse::<u32>().ok()?
            };
            char::from_u32(value)?
        }
        _ => return None,
    };
    Some((ch, semi + 1))
}
