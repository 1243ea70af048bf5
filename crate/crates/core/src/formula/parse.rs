use std::fmt;

use crate::error::{Error, Result};
use crate::glm::Family;

/// Left-hand side of a random term: `(1|g)` or `(x|g)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RandomExpr {
    Intercept,
    Column(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RandomTerm {
    pub expr: RandomExpr,
    pub group: String,
}

impl RandomTerm {
    /// Name of the fixed effect this random term varies.
    pub fn fixed_counterpart(&self) -> &str {
        match &self.expr {
            RandomExpr::Intercept => super::INTERCEPT,
            RandomExpr::Column(c) => c,
        }
    }
}

impl fmt::Display for RandomTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.expr {
            RandomExpr::Intercept => write!(f, "(1|{})", self.group),
            RandomExpr::Column(c) => write!(f, "({}|{})", c, self.group),
        }
    }
}

/// A parsed model formula.
///
/// `fixed_terms` lists predictor columns in formula order; the intercept is
/// carried by `has_intercept`. Whether a column is numeric or categorical is
/// only known once a table is attached (see [`super::build_design`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub response: String,
    pub fixed_terms: Vec<String>,
    pub has_intercept: bool,
    pub random_terms: Vec<RandomTerm>,
    pub family: Family,
}

impl ModelSpec {
    pub fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    pub fn has_fixed(&self, name: &str) -> bool {
        if name == super::INTERCEPT {
            self.has_intercept
        } else {
            self.fixed_terms.iter().any(|t| t == name)
        }
    }

    /// Every column the model reads, response first, without duplicates.
    pub fn used_columns(&self) -> Vec<&str> {
        let mut out: Vec<&str> = vec![self.response.as_str()];
        for t in &self.fixed_terms {
            if !out.contains(&t.as_str()) {
                out.push(t);
            }
        }
        for r in &self.random_terms {
            if let RandomExpr::Column(c) = &r.expr {
                if !out.contains(&c.as_str()) {
                    out.push(c);
                }
            }
            if !out.contains(&r.group.as_str()) {
                out.push(&r.group);
            }
        }
        out
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ~ ", self.response)?;
        let mut items: Vec<String> = Vec::new();
        if !self.has_intercept {
            items.push("0".into());
        } else if self.fixed_terms.is_empty() {
            items.push("1".into());
        }
        items.extend(self.fixed_terms.iter().cloned());
        items.extend(self.random_terms.iter().map(|r| r.to_string()));
        write!(f, "{}", items.join(" + "))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Zero,
    One,
    Tilde,
    Plus,
    Minus,
    LParen,
    RParen,
    Bar,
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_' || c == b'.'
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'.'
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'~' => Tok::Tilde,
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'|' => Tok::Bar,
            b'0' | b'1' if !bytes.get(i + 1).copied().is_some_and(is_ident_char) => {
                if c == b'0' {
                    Tok::Zero
                } else {
                    Tok::One
                }
            }
            c if is_ident_start(c) => {
                while i < bytes.len() && is_ident_char(bytes[i]) {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(syntax(i, format!("unexpected character `{ch}`")));
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

fn syntax(offset: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        offset,
        message: message.into(),
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let off = self.offset();
        match self.next() {
            Some(t) if t == want => Ok(()),
            _ => Err(syntax(off, format!("expected {what}"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        let off = self.offset();
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            _ => Err(syntax(off, format!("expected {what}"))),
        }
    }
}

/// Parses `response ~ [0 +] term (+ term)* (+ (expr|group))* [- 1]`.
pub fn parse_formula(text: &str) -> Result<ModelSpec> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        end: text.len(),
    };
    let response = p.ident("response name")?;
    p.expect(Tok::Tilde, "`~`")?;

    let mut has_intercept = true;
    let mut explicit_one = false;
    let mut fixed_terms: Vec<String> = Vec::new();
    let mut random_terms: Vec<RandomTerm> = Vec::new();
    let mut first = true;
    let mut saw_item = false;

    loop {
        let off = p.offset();
        match p.next() {
            Some(Tok::Zero) if first => {
                has_intercept = false;
            }
            Some(Tok::Zero) => return Err(syntax(off, "`0` is only allowed as the first term")),
            Some(Tok::One) => {
                if !has_intercept {
                    return Err(syntax(off, "intercept both removed and requested"));
                }
                if explicit_one {
                    return Err(Error::DuplicateTerm("1".into()));
                }
                explicit_one = true;
                saw_item = true;
            }
            Some(Tok::Ident(name)) => {
                if name == response {
                    return Err(Error::ResponseAsPredictor(name));
                }
                if fixed_terms.contains(&name) {
                    return Err(Error::DuplicateTerm(name));
                }
                fixed_terms.push(name);
                saw_item = true;
            }
            Some(Tok::LParen) => {
                let expr_off = p.offset();
                let expr = match p.next() {
                    Some(Tok::One) => RandomExpr::Intercept,
                    Some(Tok::Ident(name)) => {
                        if name == response {
                            return Err(Error::ResponseAsPredictor(name));
                        }
                        RandomExpr::Column(name)
                    }
                    _ => return Err(syntax(expr_off, "expected `1` or a column name")),
                };
                p.expect(Tok::Bar, "`|`")?;
                let group = p.ident("grouping column")?;
                if group == response {
                    return Err(Error::ResponseAsPredictor(group));
                }
                p.expect(Tok::RParen, "`)`")?;
                let term = RandomTerm { expr, group };
                if random_terms.contains(&term) {
                    return Err(Error::DuplicateTerm(term.to_string()));
                }
                random_terms.push(term);
                saw_item = true;
            }
            Some(Tok::Minus) => {
                let one_off = p.offset();
                if p.next() != Some(Tok::One) {
                    return Err(syntax(one_off, "only `- 1` may be subtracted"));
                }
                if explicit_one || !has_intercept {
                    return Err(syntax(off, "intercept both removed and requested"));
                }
                has_intercept = false;
                if p.peek().is_some() {
                    return Err(syntax(p.offset(), "`- 1` must end the formula"));
                }
                break;
            }
            _ => return Err(syntax(off, "expected a term")),
        }
        first = false;
        match p.peek() {
            None => break,
            Some(Tok::Plus) => {
                p.next();
            }
            Some(Tok::Minus) => {}
            Some(_) => return Err(syntax(p.offset(), "expected `+`")),
        }
    }

    if !saw_item || (!has_intercept && fixed_terms.is_empty()) {
        return Err(syntax(text.len(), "model has no fixed terms"));
    }

    Ok(ModelSpec {
        response,
        fixed_terms,
        has_intercept,
        random_terms,
        family: Family::Gaussian,
    })
}
