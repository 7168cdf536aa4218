//! Boolean field queries over the inverted index.
//!
//! Grammar (operators are case-sensitive uppercase; positions in errors are
//! 0-based byte offsets into the query text):
//!
//! ```text
//! expr   := clause (("AND" | "OR") clause)*
//! clause := ["NOT"] atom
//! atom   := [field ":"] token | "(" expr ")"
//! field  := "title" | "tags" | "body"
//! ```
//!
//! Adjacent clauses without an operator are an implicit AND, and AND binds
//! tighter than OR (`a OR b c` is `a OR (b AND c)`). Bare tokens match any
//! field. Token text runs through the shared tokenizer, so a value that
//! splits into several terms (`title:win_api`) becomes an implicit AND of
//! one `FieldTerm` per term.
//!
//! NOT is set difference: it is only meaningful next to a positive operand
//! of an AND (`a AND NOT b`). The parser accepts NOT anywhere the grammar
//! allows; evaluation rejects shapes with no bounded result set (a bare NOT,
//! `NOT a OR b`, `NOT a AND NOT b`) with [`Error::UnboundedNot`].

use super::{difference, intersect, union, tokenize, Field, InvertedIndex};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    FieldTerm(Field, String),
    AnyFieldTerm(String),
    And(Box<Query>, Box<Query>),
    Or(Box<Query>, Box<Query>),
    Not(Box<Query>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    FieldValue(Field, String),
    And,
    Or,
    Not,
    LParen,
    RParen,
}

struct Lexed {
    tok: Tok,
    /// Byte offset where this token starts (for `FieldValue`, where the
    /// value after the colon starts — that's where a bad value is).
    pos: usize,
}

fn err(position: usize, message: impl Into<String>) -> Error {
    Error::QueryParse { position, message: message.into() }
}

fn lex(text: &str) -> Result<Vec<Lexed>> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if b == b'(' {
            toks.push(Lexed { tok: Tok::LParen, pos: i });
            i += 1;
            continue;
        }
        if b == b')' {
            toks.push(Lexed { tok: Tok::RParen, pos: i });
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'(' && bytes[i] != b')'
        {
            i += 1;
        }
        let word = &text[start..i];
        let tok = match word {
            "AND" => Tok::And,
            "OR" => Tok::Or,
            "NOT" => Tok::Not,
            _ => match word.split_once(':') {
                Some((field_name, value)) => {
                    let field = Field::from_name(field_name)
                        .ok_or_else(|| err(start, format!("unknown field '{field_name}'")))?;
                    let value_pos = start + field_name.len() + 1;
                    if value.is_empty() {
                        return Err(err(value_pos, format!("expected a term after '{field_name}:'")));
                    }
                    toks.push(Lexed { tok: Tok::FieldValue(field, value.to_owned()), pos: value_pos });
                    continue;
                }
                None => Tok::Word(word.to_owned()),
            },
        };
        toks.push(Lexed { tok, pos: start });
    }
    Ok(toks)
}

/// Parse query text into an AST. See the module docs for the grammar.
pub fn parse_query(text: &str) -> Result<Query> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(err(0, "empty query"));
    }
    let mut parser = Parser { toks, pos: 0, end: text.len() };
    let query = parser.expr()?;
    if let Some(t) = parser.peek() {
        return Err(err(t.pos, "unexpected token after end of expression"));
    }
    Ok(query)
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
    /// Byte length of the source, for errors at end of input.
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Lexed> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<&Lexed> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end, |t| t.pos)
    }

    fn expr(&mut self) -> Result<Query> {
        let mut lhs = self.and_chain()?;
        while matches!(self.peek().map(|t| &t.tok), Some(Tok::Or)) {
            self.next();
            let rhs = self.and_chain()?;
            lhs = Query::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_chain(&mut self) -> Result<Query> {
        let mut lhs = self.clause()?;
        loop {
            match self.peek().map(|t| &t.tok) {
                Some(Tok::And) => {
                    self.next();
                    let rhs = self.clause()?;
                    lhs = Query::And(Box::new(lhs), Box::new(rhs));
                }
                // Implicit AND between adjacent clauses.
                Some(Tok::Word(_) | Tok::FieldValue(..) | Tok::Not | Tok::LParen) => {
                    let rhs = self.clause()?;
                    lhs = Query::And(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn clause(&mut self) -> Result<Query> {
        if matches!(self.peek().map(|t| &t.tok), Some(Tok::Not)) {
            self.next();
            let atom = self.atom()?;
            return Ok(Query::Not(Box::new(atom)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Query> {
        let at = self.here();
        let Some(lexed) = self.next() else {
            return Err(err(at, "unexpected end of query"));
        };
        let (tok, pos) = (lexed.tok.clone(), lexed.pos);
        match tok {
            Tok::Word(word) => terms_query(&word, None, pos),
            Tok::FieldValue(field, value) => terms_query(&value, Some(field), pos),
            Tok::LParen => {
                let open = pos;
                let inner = self.expr()?;
                match self.next().map(|t| &t.tok) {
                    Some(Tok::RParen) => Ok(inner),
                    _ => Err(err(open, "unbalanced parenthesis: '(' is never closed")),
                }
            }
            Tok::RParen => Err(err(pos, "unexpected ')'")),
            Tok::And | Tok::Or => Err(err(pos, "dangling operator")),
            Tok::Not => Err(err(pos, "NOT must be followed by a term or '('")),
        }
    }
}

/// Lower a raw word/field value into term queries, AND-folding when the
/// tokenizer splits it into several terms.
fn terms_query(raw: &str, field: Option<Field>, pos: usize) -> Result<Query> {
    let terms = tokenize(raw);
    let mut iter = terms.into_iter().map(|t| match field {
        Some(f) => Query::FieldTerm(f, t),
        None => Query::AnyFieldTerm(t),
    });
    let first = iter.next().ok_or_else(|| err(pos, format!("no indexable term in {raw:?}")))?;
    Ok(iter.fold(first, |acc, q| Query::And(Box::new(acc), Box::new(q))))
}

/// Evaluate a query to the sorted set of matching doc_ids.
///
/// Terms absent from the index yield the empty set (not an error); NOT in a
/// position with no bounded meaning yields [`Error::UnboundedNot`].
pub fn execute_query(index: &InvertedIndex, query: &Query) -> Result<Vec<u64>> {
    match query {
        Query::FieldTerm(field, term) => Ok(index
            .postings(term)
            .map(|p| p.field(*field).to_vec())
            .unwrap_or_default()),
        Query::AnyFieldTerm(term) => Ok(index
            .postings(term)
            .map(|p| p.combined().to_vec())
            .unwrap_or_default()),
        Query::Or(a, b) => Ok(union(&execute_query(index, a)?, &execute_query(index, b)?)),
        Query::And(a, b) => match (a.as_ref(), b.as_ref()) {
            (Query::Not(_), Query::Not(_)) => Err(Error::UnboundedNot),
            (Query::Not(neg), pos) => {
                Ok(difference(&execute_query(index, pos)?, &execute_query(index, neg)?))
            }
            (pos, Query::Not(neg)) => {
                Ok(difference(&execute_query(index, pos)?, &execute_query(index, neg)?))
            }
            (a, b) => Ok(intersect(&execute_query(index, a)?, &execute_query(index, b)?)),
        },
        Query::Not(_) => Err(Error::UnboundedNot),
    }
}
