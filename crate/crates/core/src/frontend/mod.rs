//! Parser for the loop language and its `#pragma xform` directives.
//!
//! Grammar summary:
//!
//! ```text
//! program  := decl* stmt*
//! decl     := "array" ID "[" INT ("," INT)* "]" ("init" ("zero"|"random"))? ";"
//!           | "maybe_alias" "(" ID "," ID ")" ";"
//!           | "param" ID "=" INT "opaque"? ";"
//! stmt     := pragma* ("parallel")? forloop | pragma* whileloop | ifstmt | assign | "{" stmt* "}"
//! forloop  := "for" "(" ID "=" expr ";" ID "<" expr ";" ID "+=" INT ")" stmt
//! assign   := tag? ID "[" expr ("," expr)* "]" ("="|"+=") expr ";"
//! tag      := "@" "s" INT "(" (expr ("," expr)*)? ")"
//! pragma   := "#pragma" "xform" ("loop" "(" ID ("," ID)* ")")? KIND clause* modifier*
//! ```
//!
//! Array subscripts may also be written C-style, `A[i][j]`. Tags are only
//! produced by the emitter for transformed code; they pin a statement's id
//! and original iteration vector.

mod lexer;
mod parser;

use thiserror::Error;

use crate::ast::Program;
use crate::directive::Directive;

pub use parser::parse_directive_at;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// Parses a whole program, attaching each pragma stack to the loop that
/// follows it.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    parser::Parser::new(text)?.program()
}

/// Parses a single `#pragma xform ...` line.
pub fn parse_directive(line: &str) -> Result<Directive, ParseError> {
    parse_directive_at(line, 1, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{Expr, Stmt};
    use crate::directive::{ClauseItem, Request, SafetyMode, TransformKind, UnrollFactor};

    #[test]
    fn minimal_program() {
        let p = parse_program("array A[12]; for (i = 0; i < 12; i += 1) A[i] = i;").unwrap();
        assert_eq!(p.body.len(), 1);
        let Stmt::For(f) = &p.body[0] else { panic!() };
        assert_eq!(f.var, "i");
        assert_eq!(f.step, 1);
        let a = p.assigns();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].id.to_string(), "s0");
        assert_eq!(a[0].iter, vec![Expr::var("i")]);
    }

    #[test]
    fn tile_sizes_directive() {
        let d = parse_directive("#pragma xform tile sizes(16,1,1024)").unwrap();
        assert_eq!(d.kind, TransformKind::Tile);
        assert!(d.targets.is_empty());
        assert_eq!(
            d.clause("sizes").unwrap().args,
            Some(vec![ClauseItem::Int(16), ClauseItem::Int(1), ClauseItem::Int(1024)])
        );
    }

    #[test]
    fn dgemm_tile_directive() {
        let d = parse_directive(
            "#pragma xform loop(i,j,k) tile sizes(64,2048,256) floor_ids(i1,j1,k1) tile_ids(i2,j2,k2) peel(rectangular)",
        )
        .unwrap();
        assert_eq!(d.targets, vec!["i", "j", "k"]);
        assert_eq!(d.clauses.len(), 4);
    }

    #[test]
    fn unroll_and_jam_directive() {
        let d = parse_directive("#pragma xform loop(i2) unrollingandjam factor(4)").unwrap();
        assert_eq!(d.kind, TransformKind::UnrollAndJam);
        assert_eq!(d.request().unwrap(), Request::UnrollAndJam { factor: 4, floor_id: None });
    }

    #[test]
    fn interchange_directive() {
        let d = parse_directive("#pragma xform interchange permutation(j1,k1,i1,j2,i2)").unwrap();
        let Request::Interchange { permutation } = d.request().unwrap() else { panic!() };
        assert_eq!(permutation.len(), 5);
    }

    #[test]
    fn unknown_kind_rejected() {
        let e = parse_directive("#pragma xform frobnicate").unwrap_err();
        assert!(e.message.contains("unknown transformation"), "{e}");
    }

    #[test]
    fn clause_errors() {
        assert!(parse_directive("#pragma xform unroll factor(1)").is_err());
        assert!(parse_directive("#pragma xform unroll colour(3)").is_err());
        assert!(parse_directive("#pragma xform tile sizes(2) sizes(3)").is_err());
        assert!(parse_directive("#pragma xform tile sizes(a)").is_err());
        assert!(parse_directive("#pragma omp tile sizes(2)").is_err());
    }

    #[test]
    fn modifiers() {
        let d = parse_directive("#pragma xform reverse force required").unwrap();
        assert_eq!(d.mode, Some(SafetyMode::Force));
        assert!(d.required);
        let d = parse_directive("#pragma xform unroll full").unwrap();
        assert_eq!(d.request().unwrap(), Request::Unroll { factor: UnrollFactor::Full, floor_id: None });
        assert!(parse_directive("#pragma xform unroll fallback force").is_err());
    }

    #[test]
    fn stack_order_is_bottom_up() {
        let src = "array A[4];\n#pragma xform parallel\n#pragma xform stripmine size(2)\nfor (i = 0; i < 4; i += 1) A[i] = 1;";
        let p = parse_program(src).unwrap();
        let Stmt::For(f) = &p.body[0] else { panic!() };
        assert_eq!(f.pragmas[0].kind, TransformKind::StripMine);
        assert_eq!(f.pragmas[1].kind, TransformKind::Parallel);
        assert_eq!(f.pragmas[0].line, 3);
    }

    #[test]
    fn non_canonical_loops_rejected() {
        for src in [
            "array A[4]; for (i = 3; i < 4; i -= 1) A[i] = 0;",
            "array A[4]; for (i = 0; i <= 3; i += 1) A[i] = 0;",
            "array A[4]; for (i = 0; j < 4; i += 1) A[i] = 0;",
            "array A[4]; for (i = 0; i < 4; i += 0) A[i] = 0;",
        ] {
            let e = parse_program(src).unwrap_err();
            assert!(e.message.contains("canonical"), "{src}: {e}");
        }
    }

    #[test]
    fn diagnostics_carry_position() {
        let e = parse_program("array A[4];\nfor (i = 0; i < 4; i += 1)\n  A[i] = ;").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.col > 1);
    }

    #[test]
    fn scoping_and_shapes_checked() {
        assert!(parse_program("array A[4]; A[k] = 1;").is_err());
        assert!(parse_program("array A[4]; for (i = 0; i < 4; i += 1) B[i] = 1;").is_err());
        assert!(parse_program("array A[4,4]; for (i = 0; i < 4; i += 1) A[i] = 1;").is_err());
        assert!(parse_program(
            "array A[4]; for (i = 0; i < 4; i += 1) for (i = 0; i < 4; i += 1) A[i] = 1;"
        )
        .is_err());
        assert!(parse_program("array A[0];").is_err());
    }

    #[test]
    fn params_and_alias() {
        let p = parse_program(
            "param N = 8; param M = 3 opaque; array A[8] init random; array B[8]; maybe_alias(A, B);\nfor (i = 0; i < N; i += 1) B[i] = A[i] + M;",
        )
        .unwrap();
        assert_eq!(p.known_params(), vec![("N".to_string(), 8)]);
        assert_eq!(p.alias_pairs(), vec![("A".to_string(), "B".to_string())]);
    }

    #[test]
    fn both_subscript_styles_agree() {
        let a = parse_program("array A[3,3]; A[1][2] = 0;").unwrap();
        let b = parse_program("array A[3][3]; A[1, 2] = 0;").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn statement_ids_in_preorder() {
        let p = parse_program(
            "array A[4]; array B[4];\nfor (i = 0; i < 4; i += 1) { A[i] = 1; if (i < 2) { B[i] = 2; } }\nB[0] = 3;",
        )
        .unwrap();
        let ids: Vec<String> = p.assigns().iter().map(|a| a.id.to_string()).collect();
        assert_eq!(ids, vec!["s0", "s1", "s2"]);
        assert!(p.assigns()[2].iter.is_empty());
    }
}
