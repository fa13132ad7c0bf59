use std::fmt;
use std::sync::Arc;

use super::types::SourceLocation;
use super::{FrontendError, Phase};

/// Headers that may be included; they contribute nothing to the program.
pub const INCLUDE_WHITELIST: &[&str] = &["cassert", "utility"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Int(u64),
    Char(u8),
    Punct(&'static str),
    /// A whitelisted `#include`; the parser skips it.
    Include(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub loc: SourceLocation,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        matches!(&self.kind, TokenKind::Punct(q) if *q == p)
    }

    pub fn is_ident(&self, s: &str) -> bool {
        matches!(&self.kind, TokenKind::Ident(i) if i == s)
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "'{s}'"),
            TokenKind::Int(v) => write!(f, "'{v}'"),
            TokenKind::Char(c) => write!(f, "character literal {c}"),
            TokenKind::Punct(p) => write!(f, "'{p}'"),
            TokenKind::Include(h) => write!(f, "#include <{h}>"),
        }
    }
}

// longest first
const PUNCTS: &[&str] = &[
    "<<=", ">>=", "...", "->", "::", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "{", "}", "(",
    ")", "[", "]", ";", ",", ".", "<", ">", "+", "-", "*", "/", "%", "&", "|", "^", "!", "~", "?", ":", "=",
];

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
    file: Arc<str>,
}

impl<'a> Lexer<'a> {
    fn loc(&self) -> SourceLocation {
        SourceLocation::new(self.file.clone(), self.line, self.col)
    }

    fn peek(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek(0)?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else if c & 0xC0 != 0x80 {
            // count UTF-8 scalar values, not bytes
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, loc: SourceLocation, msg: impl Into<String>) -> FrontendError {
        FrontendError::new(Phase::Lex, msg, loc)
    }

    fn skip_trivia(&mut self) -> Result<(), FrontendError> {
        loop {
            match (self.peek(0), self.peek(1)) {
                (Some(c), _) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                (Some(b'/'), Some(b'/')) => {
                    while let Some(c) = self.peek(0) {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                (Some(b'/'), Some(b'*')) => {
                    let start = self.loc();
                    self.bump();
                    self.bump();
                    loop {
                        match (self.peek(0), self.peek(1)) {
                            (Some(b'*'), Some(b'/')) => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            (Some(_), _) => {
                                self.bump();
                            }
                            (None, _) => return Err(self.error(start, "unterminated comment")),
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn directive(&mut self) -> Result<Token, FrontendError> {
        let loc = self.loc();
        let start = self.pos;
        while let Some(c) = self.peek(0) {
            if c == b'\n' {
                break;
            }
            self.bump();
        }
        let text = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
        let rest = text[1..].trim_start();
        let Some(arg) = rest.strip_prefix("include") else {
            return Err(self.error(loc, format!("unsupported preprocessor directive '{}'", text.trim())));
        };
        let arg = arg.trim();
        let header = arg.strip_prefix('<').and_then(|a| a.strip_suffix('>')).or_else(|| arg.strip_prefix('"').and_then(|a| a.strip_suffix('"')));
        match header {
            Some(h) if INCLUDE_WHITELIST.contains(&h.trim()) => Ok(Token { kind: TokenKind::Include(h.trim().to_string()), loc }),
            Some(h) => Err(self.error(loc, format!("unsupported header <{}>", h.trim()))),
            None => Err(self.error(loc, "malformed #include")),
        }
    }

    fn number(&mut self) -> Result<Token, FrontendError> {
        let loc = self.loc();
        let start = self.pos;
        let radix = if self.peek(0) == Some(b'0') && matches!(self.peek(1), Some(b'x' | b'X')) {
            self.bump();
            self.bump();
            16
        } else {
            10
        };
        let digits_start = self.pos;
        while let Some(c) = self.peek(0) {
            if (radix == 16 && c.is_ascii_hexdigit()) || (radix == 10 && c.is_ascii_digit()) || c == b'\'' {
                self.bump();
            } else {
                break;
            }
        }
        let digits: String = String::from_utf8_lossy(&self.src[digits_start..self.pos]).chars().filter(|c| *c != '\'').collect();
        // integer suffixes carry no meaning here
        while let Some(c) = self.peek(0) {
            if matches!(c, b'l' | b'L' | b'u' | b'U') {
                self.bump();
            } else {
                break;
            }
        }
        if matches!(self.peek(0), Some(b'.' | b'e' | b'E')) || self.peek(0).is_some_and(|c| c.is_ascii_alphanumeric()) {
            let text = String::from_utf8_lossy(&self.src[start..=self.pos]).into_owned();
            return Err(self.error(loc, format!("unsupported numeric literal '{text}'")));
        }
        let value = u64::from_str_radix(&digits, radix).map_err(|_| self.error(loc.clone(), "integer literal out of range"))?;
        Ok(Token { kind: TokenKind::Int(value), loc })
    }

    fn char_lit(&mut self) -> Result<Token, FrontendError> {
        let loc = self.loc();
        self.bump();
        let c = match self.bump() {
            Some(b'\\') => match self.bump() {
                Some(b'n') => b'\n',
                Some(b't') => b'\t',
                Some(b'r') => b'\r',
                Some(b'0') => 0,
                Some(b'\\') => b'\\',
                Some(b'\'') => b'\'',
                Some(b'"') => b'"',
                _ => return Err(self.error(loc, "unsupported escape sequence")),
            },
            Some(b'\'') | None => return Err(self.error(loc, "empty character literal")),
            Some(c) if c.is_ascii() => c,
            Some(_) => return Err(self.error(loc, "non-ASCII character literal")),
        };
        if self.bump() != Some(b'\'') {
            return Err(self.error(loc, "unterminated character literal"));
        }
        Ok(Token { kind: TokenKind::Char(c), loc })
    }

    fn next_token(&mut self) -> Result<Option<Token>, FrontendError> {
        self.skip_trivia()?;
        let Some(c) = self.peek(0) else { return Ok(None) };
        let loc = self.loc();
        if c == b'#' {
            return self.directive().map(Some);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while self.peek(0).is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
                self.bump();
            }
            let s = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
            return Ok(Some(Token { kind: TokenKind::Ident(s), loc }));
        }
        if c.is_ascii_digit() {
            return self.number().map(Some);
        }
        if c == b'\'' {
            return self.char_lit().map(Some);
        }
        if c == b'"' {
            return Err(self.error(loc, "string literals are not supported"));
        }
        for p in PUNCTS {
            if self.src[self.pos..].starts_with(p.as_bytes()) {
                for _ in 0..p.len() {
                    self.bump();
                }
                return Ok(Some(Token { kind: TokenKind::Punct(p), loc }));
            }
        }
        let ch = std::str::from_utf8(&self.src[self.pos..]).ok().and_then(|s| s.chars().next()).map(|c| c.to_string()).unwrap_or_else(|| format!("\\x{c:02x}"));
        Err(self.error(loc, format!("unknown character '{ch}'")))
    }
}

/// Splits MiniCxx source text into tokens. There is no end-of-input token.
pub fn lex(source: &str, file: &str) -> Result<Vec<Token>, FrontendError> {
    let mut lexer = Lexer { src: source.as_bytes(), pos: 0, line: 1, col: 1, file: Arc::from(file) };
    let mut tokens = Vec::new();
    while let Some(tok) = lexer.next_token()? {
        tokens.push(tok);
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_program_has_nine_tokens() {
        let toks = lex("int main(){return 0;}", "t.cpp").unwrap();
        assert_eq!(toks.len(), 9);
        assert!(toks.last().unwrap().is_punct("}"));
        assert_eq!(toks[6].kind, TokenKind::Int(0));
    }

    #[test]
    fn rejects_unlisted_header() {
        let err = lex("#include <iostream>\nint main(){}", "t.cpp").unwrap_err();
        assert!(err.message.contains("unsupported header"), "{}", err.message);
        assert_eq!(err.loc.line, 1);
    }

    #[test]
    fn whitelisted_headers_are_noops() {
        let toks = lex("#include <cassert>\n#include <utility>\nint x;", "t.cpp").unwrap();
        assert!(matches!(toks[0].kind, TokenKind::Include(_)));
        assert!(matches!(toks[1].kind, TokenKind::Include(_)));
        assert!(toks[2].is_ident("int"));
        assert_eq!(toks[2].loc.line, 3);
    }

    #[test]
    fn unknown_character_reports_location() {
        let err = lex("int x = 1;\n  @", "t.cpp").unwrap_err();
        assert!(err.message.contains("unknown character '@'"));
        assert_eq!((err.loc.line, err.loc.column), (2, 3));
    }

    #[test]
    fn polymorphism_keywords() {
        let src = include_str!("../../../../corpus/example_polymorphism.cpp");
        let toks = lex(src, "poly.cpp").unwrap();
        for kw in ["virtual", "override", "new", "delete"] {
            assert!(toks.iter().any(|t| t.is_ident(kw)), "missing {kw}");
        }
    }

    #[test]
    fn longest_punctuator_wins() {
        let toks = lex("a->b >>= c::d ...", "t.cpp").unwrap();
        let puncts: Vec<_> = toks
            .iter()
            .filter_map(|t| match t.kind {
                TokenKind::Punct(p) => Some(p),
                _ => None,
            })
            .collect();
        assert_eq!(puncts, vec!["->", ">>=", "::", "..."]);
    }

    #[test]
    fn comments_and_columns() {
        let toks = lex("/* a\n b */ x // tail\n  y", "t.cpp").unwrap();
        assert_eq!((toks[0].loc.line, toks[0].loc.column), (2, 7));
        assert_eq!((toks[1].loc.line, toks[1].loc.column), (3, 3));
    }
}
