//! Lexing, parsing and type checking of MiniCxx sources.

pub mod ast;
pub mod erase;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod typecheck;
pub mod typed;
pub mod types;

use std::fmt;

pub use types::{Cv, FunctionType, SourceLocation, ThrowSpec, TypeError, TypeRepr, TypeTag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Lex,
    Syntax,
    Template,
    Type,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Lex => "lexical",
            Phase::Syntax => "syntax",
            Phase::Template => "template",
            Phase::Type => "type",
        })
    }
}

/// A diagnostic that stops the pipeline before verification.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{}:{}:{}: {phase} error: {message}", loc.file, loc.line, loc.column)]
pub struct FrontendError {
    pub phase: Phase,
    pub message: String,
    pub loc: SourceLocation,
}

impl FrontendError {
    pub fn new(phase: Phase, message: impl Into<String>, loc: SourceLocation) -> Self {
        FrontendError { phase, message: message.into(), loc }
    }
}

/// Lexes and parses a source file into an untyped syntax tree.
pub fn parse_source(source: &str, file: &str) -> Result<ast::TranslationUnit, FrontendError> {
    let tokens = lexer::lex(source, file)?;
    parser::parse(tokens, file)
}
