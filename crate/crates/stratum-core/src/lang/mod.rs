//! The pipeline specification language: AST, parser, and canonical printer.
//!
//! Sources use the `.stratum` extension (UTF-8). The grammar is documented in
//! `docs/grammar.md` at the repository root.

mod ast;
mod lexer;
mod parser;
mod printer;

pub use ast::{
    is_identifier, Component, ComponentKind, Flow, GpuRequirement, ModelRef, ParseError,
    PipelineSpec, TierHint,
};
pub use parser::parse;
pub use printer::pretty_print;
