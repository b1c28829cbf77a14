//! A source-to-source loop transformation engine.
//!
//! Programs in a small structured loop language carry `#pragma xform`
//! directives. The engine parses them ([`frontend`]), names and resolves
//! loops ([`ir`]), checks legality against dependences ([`deps`],
//! [`legality`]), rewrites the loop tree ([`transforms`]), prints the result
//! ([`emit`]) and cross-checks semantics with a reference interpreter
//! ([`interp`]).

pub mod affine;
pub mod ast;
pub mod cli;
pub mod deps;
pub mod directive;
pub mod emit;
pub mod frontend;
pub mod interp;
pub mod ir;
pub mod legality;
pub mod transforms;
