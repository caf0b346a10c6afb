//! A small, deterministic object language used as the substrate for program
//! fixtures and their unit tests.
//!
//! The language is deliberately tiny: classes with typed fields and methods,
//! a builtin `List`, string/integer/float/boolean primitives, `for`/`if`/`while`
//! control flow, and `throw` with a message. Test files are flat `test name() { .. }`
//! functions plus `import` lines that bring a check framework into scope.
//!
//! Everything that is normally a source of natural nondeterminism (clock reads,
//! random numbers, the working directory, object identity hashes) is virtualized
//! behind an [`interp::ExecEnv`] plus a seeded entropy stream, so a run is a pure
//! function of `(program, test, env, seed)`.

pub mod ast;
pub mod error;
pub mod interp;
pub mod parser;
pub mod render;
pub mod token;

pub use ast::*;
pub use error::{LangError, ParseError};
