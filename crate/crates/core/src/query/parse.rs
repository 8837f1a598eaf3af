//! Recursive-descent parser for the episodic query language.
//!
//! ```text
//! query    = find | when | whereis | state | feeling | describe ;
//! find     = "FIND" "EPISODES" ["WHERE" conds] ["ORDER" "BY" ("TIME"|"RELEVANCE")] ["LIMIT" integer] ;
//! when     = "WHEN" conds ;
//! whereis  = "WHERE-IS" ident ["AT" integer] ;
//! state    = "STATE" "OF" ident ["FIELD" ident] ["AT" integer] ;
//! feeling  = "FEELING" ["WHERE" conds] ;
//! describe = "DESCRIBE" (integer | "LAST" ["WHERE" conds]) ;
//! conds    = cond {"AND" cond} ;
//! cond     = "KIND" "=" ("context"|"task"|"capability") | "LABEL" "~" quoted
//!          | "LOCATION" "=" ident | "ENTITY" "=" ident
//!          | "EMOTION" "=" group [">=" integer] | "DURING" "[" integer "," integer "]" ;
//! ```
//!
//! Keywords and enumerated values are case-insensitive; identifiers keep
//! their case.

use super::{Condition, DescribeTarget, KindFilter, Order, Query, QueryError};
use crate::model::{EmotionGroup, EpisodeId, Intensity, Timestamp};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Int(u64),
    Str(String),
    Eq,
    Tilde,
    Ge,
    LBracket,
    RBracket,
    Comma,
    Eof,
}

fn is_word_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

fn syntax(position: usize, expected: &[&str]) -> QueryError {
    QueryError::Syntax { position, expected: expected.iter().map(|s| s.to_string()).collect() }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, QueryError> {
    let mut out = Vec::new();
    let mut it = src.char_indices().peekable();
    while let Some(&(pos, c)) = it.peek() {
        if c.is_whitespace() {
            it.next();
            continue;
        }
        let tok = match c {
            '=' => {
                it.next();
                Tok::Eq
            }
            '~' => {
                it.next();
                Tok::Tilde
            }
            '[' => {
                it.next();
                Tok::LBracket
            }
            ']' => {
                it.next();
                Tok::RBracket
            }
            ',' => {
                it.next();
                Tok::Comma
            }
            '>' => {
                it.next();
                match it.next() {
                    Some((_, '=')) => Tok::Ge,
                    _ => return Err(syntax(pos, &[">="])),
                }
            }
            '"' => {
                it.next();
                let mut s = String::new();
                loop {
                    match it.next() {
                        None => return Err(syntax(pos, &["closing quote"])),
                        Some((_, '"')) => break,
                        Some((_, '\\')) => match it.next() {
                            Some((_, ch @ ('"' | '\\'))) => s.push(ch),
                            _ => return Err(syntax(pos, &["escape \\\" or \\\\"])),
                        },
                        Some((_, ch)) => s.push(ch),
                    }
                }
                Tok::Str(s)
            }
            d if d.is_ascii_digit() => {
                let mut end = pos;
                while let Some(&(i, ch)) = it.peek() {
                    if !ch.is_ascii_digit() {
                        break;
                    }
                    end = i + ch.len_utf8();
                    it.next();
                }
                if it.peek().is_some_and(|&(_, ch)| is_word_char(ch)) {
                    return Err(syntax(pos, &["integer"]));
                }
                let n = src[pos..end].parse().map_err(|_| syntax(pos, &["integer"]))?;
                Tok::Int(n)
            }
            w if is_word_start(w) => {
                let mut end = pos;
                while let Some(&(i, ch)) = it.peek() {
                    if !is_word_char(ch) {
                        break;
                    }
                    end = i + ch.len_utf8();
                    it.next();
                }
                Tok::Word(src[pos..end].to_string())
            }
            _ => return Err(syntax(pos, &["keyword", "identifier", "integer", "quoted string"])),
        };
        out.push((pos, tok));
    }
    out.push((src.len(), Tok::Eof));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].1.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    /// Error at the current token. A premature end of input is reported at
    /// the last token read, where the dangling construct starts.
    fn error(&self, expected: &[&str]) -> QueryError {
        let pos = match self.peek() {
            Tok::Eof if self.i > 0 => self.toks[self.i - 1].0,
            _ => self.toks[self.i].0,
        };
        syntax(pos, expected)
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(&[kw]))
        }
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<(), QueryError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[name]))
        }
    }

    fn ident(&mut self) -> Result<String, QueryError> {
        match self.peek() {
            Tok::Word(w) => {
                let w = w.clone();
                self.bump();
                Ok(w)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn integer(&mut self) -> Result<u64, QueryError> {
        match self.peek() {
            Tok::Int(n) => {
                let n = *n;
                self.bump();
                Ok(n)
            }
            _ => Err(self.error(&["integer"])),
        }
    }

    fn one_of<T: Copy>(&mut self, options: &[(&str, T)]) -> Result<T, QueryError> {
        if let Tok::Word(w) = self.peek() {
            if let Some(&(_, v)) = options.iter().find(|(name, _)| w.eq_ignore_ascii_case(name)) {
                self.bump();
                return Ok(v);
            }
        }
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        Err(self.error(&names))
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        let q = if self.eat_keyword("FIND") {
            self.expect_keyword("EPISODES")?;
            let conds = if self.eat_keyword("WHERE") { self.conds()? } else { Vec::new() };
            let order = if self.eat_keyword("ORDER") {
                self.expect_keyword("BY")?;
                Some(self.one_of(&[("TIME", Order::Time), ("RELEVANCE", Order::Relevance)])?)
            } else {
                None
            };
            let limit = if self.eat_keyword("LIMIT") { Some(self.integer()? as usize) } else { None };
            Query::FindEpisodes { conds, order, limit }
        } else if self.eat_keyword("WHEN") {
            Query::When { conds: self.conds()? }
        } else if self.eat_keyword("WHERE-IS") {
            let entity = self.ident()?;
            let at = self.opt_at()?;
            Query::WhereIs { entity, at }
        } else if self.eat_keyword("STATE") {
            self.expect_keyword("OF")?;
            let entity = self.ident()?;
            let field = if self.eat_keyword("FIELD") { Some(self.ident()?) } else { None };
            let at = self.opt_at()?;
            Query::StateOf { entity, field, at }
        } else if self.eat_keyword("FEELING") {
            let conds = if self.eat_keyword("WHERE") { self.conds()? } else { Vec::new() };
            Query::Feeling { conds }
        } else if self.eat_keyword("DESCRIBE") {
            if self.eat_keyword("LAST") {
                let conds = if self.eat_keyword("WHERE") { self.conds()? } else { Vec::new() };
                Query::Describe(DescribeTarget::Last(conds))
            } else if let Tok::Int(n) = self.peek() {
                let id = EpisodeId(*n);
                self.bump();
                Query::Describe(DescribeTarget::Episode(id))
            } else {
                return Err(self.error(&["integer", "LAST"]));
            }
        } else {
            return Err(self.error(&["FIND", "WHEN", "WHERE-IS", "STATE", "FEELING", "DESCRIBE"]));
        };
        if *self.peek() != Tok::Eof {
            return Err(self.error(&["end of input"]));
        }
        Ok(q)
    }

    fn opt_at(&mut self) -> Result<Option<Timestamp>, QueryError> {
        if self.eat_keyword("AT") {
            Ok(Some(Timestamp(self.integer()?)))
        } else {
            Ok(None)
        }
    }

    fn conds(&mut self) -> Result<Vec<Condition>, QueryError> {
        let mut out = vec![self.cond()?];
        while self.eat_keyword("AND") {
            out.push(self.cond()?);
        }
        Ok(out)
    }

    fn cond(&mut self) -> Result<Condition, QueryError> {
        if self.eat_keyword("KIND") {
            self.expect(Tok::Eq, "=")?;
            let k = self.one_of(&[
                ("context", KindFilter::Context),
                ("task", KindFilter::Task),
                ("capability", KindFilter::Capability),
            ])?;
            Ok(Condition::Kind(k))
        } else if self.eat_keyword("LABEL") {
            self.expect(Tok::Tilde, "~")?;
            match self.peek() {
                Tok::Str(s) => {
                    let s = s.clone();
                    self.bump();
                    Ok(Condition::Label(s))
                }
                _ => Err(self.error(&["quoted string"])),
            }
        } else if self.eat_keyword("LOCATION") {
            self.expect(Tok::Eq, "=")?;
            Ok(Condition::Location(self.ident()?))
        } else if self.eat_keyword("ENTITY") {
            self.expect(Tok::Eq, "=")?;
            Ok(Condition::Entity(self.ident()?))
        } else if self.eat_keyword("EMOTION") {
            self.expect(Tok::Eq, "=")?;
            let group = self.one_of(&EmotionGroup::ALL.map(|g| (g.as_str(), g)))?;
            let min = if *self.peek() == Tok::Ge {
                self.bump();
                let at = self.i;
                let n = self.integer()?;
                let lvl = u8::try_from(n).ok().and_then(|n| Intensity::new(n).ok());
                match lvl {
                    Some(l) => Some(l),
                    None => return Err(syntax(self.toks[at].0, &["intensity 0..=3"])),
                }
            } else {
                None
            };
            Ok(Condition::Emotion { group, min })
        } else if self.eat_keyword("DURING") {
            self.expect(Tok::LBracket, "[")?;
            let from = self.integer()?;
            self.expect(Tok::Comma, ",")?;
            let to = self.integer()?;
            self.expect(Tok::RBracket, "]")?;
            Ok(Condition::During { from: Timestamp(from), to: Timestamp(to) })
        } else {
            Err(self.error(&["KIND", "LABEL", "LOCATION", "ENTITY", "EMOTION", "DURING"]))
        }
    }
}

pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let toks = lex(text)?;
    Parser { toks, i: 0 }.query()
}

/// Whether `s` can be printed as a bare identifier.
pub fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(is_word_start) && chars.all(is_word_char)
}
