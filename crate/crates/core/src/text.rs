//! Shared tokenizer for the guard and formula grammars.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Syntax error with a byte position into the source text.
#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    pub pos: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(pos: usize, message: impl Into<String>) -> Self {
        ParseError { pos, message: message.into() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: {}", self.pos, self.message)
    }
}

impl core::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Amp,
    Pipe,
    Bang,
    Arrow,
    Le,
    Ge,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(v) => write!(f, "`{v}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Pipe => f.write_str("`|`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Le => f.write_str("`<=`"),
            Tok::Ge => f.write_str("`>=`"),
        }
    }
}

pub(crate) struct Tokens {
    toks: Vec<(usize, Tok)>,
    cursor: usize,
    end: usize,
}

impl Tokens {
    pub fn lex(src: &str) -> Result<Tokens, ParseError> {
        let bytes = src.as_bytes();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            match c {
                b' ' | b'\t' | b'\r' | b'\n' => i += 1,
                b'(' => {
                    toks.push((i, Tok::LParen));
                    i += 1;
                }
                b')' => {
                    toks.push((i, Tok::RParen));
                    i += 1;
                }
                b'[' => {
                    toks.push((i, Tok::LBracket));
                    i += 1;
                }
                b']' => {
                    toks.push((i, Tok::RBracket));
                    i += 1;
                }
                b',' => {
                    toks.push((i, Tok::Comma));
                    i += 1;
                }
                b';' => {
                    toks.push((i, Tok::Semi));
                    i += 1;
                }
                b'&' => {
                    toks.push((i, Tok::Amp));
                    i += 1;
                }
                b'|' => {
                    toks.push((i, Tok::Pipe));
                    i += 1;
                }
                b'!' => {
                    toks.push((i, Tok::Bang));
                    i += 1;
                }
                b'-' if bytes.get(i + 1) == Some(&b'>') => {
                    toks.push((i, Tok::Arrow));
                    i += 2;
                }
                b'<' if bytes.get(i + 1) == Some(&b'=') => {
                    toks.push((i, Tok::Le));
                    i += 2;
                }
                b'>' if bytes.get(i + 1) == Some(&b'=') => {
                    toks.push((i, Tok::Ge));
                    i += 2;
                }
                b'-' | b'0'..=b'9' | b'.' => {
                    let start = i;
                    i += 1;
                    while i < bytes.len() {
                        let b = bytes[i];
                        let in_number = matches!(b, b'0'..=b'9' | b'.' | b'e' | b'E')
                            || (matches!(b, b'+' | b'-')
                                && matches!(bytes[i - 1], b'e' | b'E'));
                        if !in_number {
                            break;
                        }
                        i += 1;
                    }
                    let lexeme = &src[start..i];
                    let value: f64 = lexeme.parse().map_err(|_| {
                        ParseError::new(start, format_invalid_number(lexeme))
                    })?;
                    toks.push((start, Tok::Number(value)));
                }
                b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                    let start = i;
                    while i < bytes.len()
                        && matches!(bytes[i], b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'_')
                    {
                        i += 1;
                    }
                    toks.push((start, Tok::Ident(src[start..i].to_string())));
                }
                _ => {
                    return Err(ParseError::new(i, format_unexpected_char(src, i)));
                }
            }
        }
        Ok(Tokens { toks, cursor: 0, end: src.len() })
    }

    pub fn pos(&self) -> usize {
        self.toks.get(self.cursor).map(|(p, _)| *p).unwrap_or(self.end)
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.cursor).map(|(_, t)| t)
    }

    pub fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.cursor).map(|(_, t)| t.clone());
        if t.is_some() {
            self.cursor += 1;
        }
        t
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.cursor += 1;
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        let pos = self.pos();
        match self.next() {
            Some(t) if t == tok => Ok(()),
            Some(t) => Err(ParseError::new(pos, alloc::format!("expected {tok}, found {t}"))),
            None => Err(ParseError::new(pos, alloc::format!("expected {tok}, found end of input"))),
        }
    }

    pub fn expect_number(&mut self) -> Result<f64, ParseError> {
        let pos = self.pos();
        match self.next() {
            Some(Tok::Number(v)) => Ok(v),
            Some(t) => Err(ParseError::new(pos, alloc::format!("expected a number, found {t}"))),
            None => Err(ParseError::new(pos, "expected a number, found end of input")),
        }
    }

    pub fn expect_end(&self) -> Result<(), ParseError> {
        if self.cursor == self.toks.len() {
            Ok(())
        } else {
            Err(ParseError::new(self.pos(), "unexpected trailing input"))
        }
    }
}

fn format_invalid_number(lexeme: &str) -> String {
    alloc::format!("invalid number `{lexeme}`")
}

fn format_unexpected_char(src: &str, i: usize) -> String {
    let ch = src[i..].chars().next().unwrap_or('?');
    alloc::format!("unexpected character `{ch}`")
}
