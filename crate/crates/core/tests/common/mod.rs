//! Helpers shared by the integration tests: corpus loading, directive
//! injection and trace comparison.

#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use xform::ast::{Program, Stmt, StmtId};
use xform::directive::SafetyMode;
use xform::emit::{emit_program, EmitOptions};
use xform::frontend::parse_program;
use xform::interp::{run, Address, RunOptions, Trace};
use xform::ir::build_loop_tree;
use xform::legality::Verdict;
use xform::transforms::{transform, Applied, ApplyOptions};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("corpus")
}

/// `(file stem, source text)` for every corpus program, sorted by name.
pub fn corpus_sources() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "loop"))
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

pub fn corpus() -> Vec<(String, Program)> {
    corpus_sources()
        .into_iter()
        .map(|(n, s)| {
            let p = parse_program(&s).unwrap_or_else(|e| panic!("{n}: {e}"));
            (n, p)
        })
        .collect()
}

pub fn emit(p: &Program) -> String {
    emit_program(p, &EmitOptions::default())
}

/// Source of `p` with directive lines (written top to bottom) placed before
/// its first top-level loop.
pub fn with_pragmas(p: &Program, pragmas: &[String]) -> String {
    let text = emit(&p.without_pragmas());
    let mut out = String::new();
    let mut placed = false;
    for line in text.lines() {
        if !placed && line.starts_with("for (") {
            for d in pragmas {
                out.push_str("#pragma xform ");
                out.push_str(d);
                out.push('\n');
            }
            placed = true;
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

pub fn apply_text(src: &str, mode: SafetyMode) -> Applied {
    let p = parse_program(src).unwrap_or_else(|e| panic!("{e}\n{src}"));
    let opts = ApplyOptions {
        mode,
        ..ApplyOptions::default()
    };
    transform(&p, &opts).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

pub fn apply(p: &Program, pragmas: &[String], mode: SafetyMode) -> Applied {
    apply_text(&with_pragmas(p, pragmas), mode)
}

pub fn trace(p: &Program) -> Trace {
    run(p, &RunOptions::seeded(7)).expect("program runs").1
}

/// Statement, iteration vector, reads and writes of one executed instance.
pub type Event = (StmtId, Vec<i64>, Vec<Address>, Vec<Address>);

/// Trace records without the program-position field, which legitimately
/// changes when code is copied.
pub fn events(t: &Trace) -> Vec<Event> {
    t.records
        .iter()
        .map(|r| (r.stmt, r.iter.clone(), r.reads.clone(), r.writes.clone()))
        .collect()
}

/// Shape of a program's first top-level loop.
pub struct FirstLoop {
    /// Perfectly nested band below and including the loop, at most 3 deep.
    pub band: Vec<String>,
    pub trip: Option<i64>,
    pub body_len: usize,
}

pub fn first_loop(p: &Program) -> FirstLoop {
    let tree = build_loop_tree(p);
    let band = tree
        .perfect_chain(0, 3)
        .into_iter()
        .map(|i| tree.nodes[i].name.clone())
        .collect();
    let Some(Stmt::For(f)) = p.body.iter().find(|s| matches!(s, Stmt::For(_))) else {
        panic!("program has no top-level for loop");
    };
    let params = p.known_params();
    let value = |e: &xform::ast::Expr| {
        xform::affine::eval_const(e, &|v| params.iter().find(|(n, _)| n == v).map(|(_, x)| *x))
    };
    let trip = match (value(&f.lower), value(&f.upper)) {
        (Some(l), Some(u)) => Some(((u - l).max(0) + f.step - 1) / f.step),
        _ => None,
    };
    FirstLoop {
        band,
        trip,
        body_len: f.body.len(),
    }
}

/// Order-preserving directives applicable to any first loop.
pub fn order_preserving(p: &Program) -> Vec<Vec<String>> {
    let f = first_loop(p);
    [
        "stripmine size(3)".to_string(),
        "stripmine size(5)".to_string(),
        "tile sizes(4)".to_string(),
        "unroll full".to_string(),
        "unroll factor(3)".to_string(),
        "peel first(2)".to_string(),
        "peel last(3)".to_string(),
        "peel multiple(4)".to_string(),
        format!("collapse depth({})", f.band.len()),
    ]
    .into_iter()
    .map(|d| vec![d])
    .collect()
}

/// Reordering directives. Parameters are chosen from the first loop's
/// shape so most of them apply.
pub fn reordering(p: &Program) -> Vec<Vec<String>> {
    let f = first_loop(p);
    let d = f.band.len();
    let mut out = Vec::new();
    let sizes = |s: i64| vec![s.to_string(); d].join(",");
    out.push(vec![format!("tile sizes({})", sizes(4))]);
    out.push(vec![format!("tile sizes({}) peel(rectangular)", sizes(5))]);
    if d >= 2 {
        let mut perm = f.band.clone();
        perm.reverse();
        out.push(vec![format!("interchange permutation({})", perm.join(","))]);
        out.push(vec!["unrollingandjam factor(2)".to_string()]);
    }
    if let Some(t) = f.trip {
        if let Some(c) = [3, 2, 4].into_iter().find(|c| t > 1 && t % c == 0) {
            out.push(vec![format!("stripemine count({c})")]);
        }
    }
    out.push(vec!["reverse".to_string()]);
    out.push(vec!["distribute".to_string()]);
    if f.body_len >= 2 {
        let base = f.band[0].replace('#', "_");
        let parts: Vec<String> = (0..f.body_len).map(|k| format!("{base}_d{k}")).collect();
        out.push(vec![format!("loop({}) fuse", parts.join(",")), "distribute".to_string()]);
    }
    if matches!(p.body.as_slice(), [Stmt::For(_), Stmt::For(_), ..]) {
        out.push(vec!["fuse".to_string()]);
    }
    out.push(vec!["parallel".to_string()]);
    out
}

/// True when every step either applied or was structurally impossible.
pub fn applied_or_impossible(a: &Applied) -> bool {
    a.reports
        .iter()
        .all(|r| r.applied || matches!(r.verdict, Verdict::Impossible(_)))
}

pub fn all_applied(a: &Applied) -> bool {
    a.reports.iter().all(|r| r.applied)
}
