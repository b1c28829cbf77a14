//! Command-line driver: parse, plan, apply, then emit and verify.
//!
//! Exit codes: 0 on success (possibly with warnings), 1 on parse, plan or
//! hard errors, 2 when verification finds a semantic difference.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::deps::{compute_dependences, DEFAULT_MAX_ENUM};
use crate::directive::SafetyMode;
use crate::emit::{emit_program, EmitOptions};
use crate::frontend::parse_program;
use crate::interp::{equivalent, run, RunOptions};
use crate::ir::build_loop_tree;
use crate::transforms::{transform, ApplyOptions, TransformError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SafetyArg {
    Default,
    Fallback,
    Force,
}

impl From<SafetyArg> for SafetyMode {
    fn from(a: SafetyArg) -> SafetyMode {
        match a {
            SafetyArg::Default => SafetyMode::Default,
            SafetyArg::Fallback => SafetyMode::Fallback,
            SafetyArg::Force => SafetyMode::Force,
        }
    }
}

/// Applies `#pragma xform` loop transformations to a program.
#[derive(Debug, Clone, Parser)]
#[command(name = "xform", version)]
pub struct RunConfig {
    /// Input program.
    pub input: PathBuf,
    /// Safety mode for directives without their own modifier.
    #[arg(long, value_enum, default_value = "default")]
    pub safety: SafetyArg,
    /// Treat every directive as `required`.
    #[arg(long)]
    pub required: bool,
    /// Compare final memories of original and output over N seeded trials.
    #[arg(long, value_name = "N")]
    pub verify: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the transformed program; `-` is stdout.
    #[arg(long, value_name = "PATH")]
    pub emit: Option<String>,
    /// Write the output program's trace as CSV.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Print the loop tree of the output program.
    #[arg(long)]
    pub dump_tree: bool,
    /// Print the dependences of the input program.
    #[arg(long)]
    pub deps: bool,
    /// Precede generated loops with a comment naming their directive.
    #[arg(long)]
    pub annotate: bool,
    /// Statement-instance cap for exact dependence enumeration.
    #[arg(long, value_name = "K", default_value_t = DEFAULT_MAX_ENUM)]
    pub max_enum: usize,
}

/// Runs the driver on `args` (including the program name) and returns the
/// exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 1;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match execute(&config, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn execute(c: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, String> {
    let path = c.input.display();
    let text = fs::read_to_string(&c.input).map_err(|e| format!("cannot read {path}: {e}"))?;
    let source = parse_program(&text).map_err(|e| format!("{path}:{e}"))?;
    let io = |e: std::io::Error| e.to_string();

    if c.deps {
        let plain = source.without_pragmas();
        match compute_dependences(&plain, &plain.body, c.max_enum) {
            Ok(d) => write!(out, "{d}").map_err(io)?,
            Err(e) => writeln!(err, "warning: dependences unavailable: {e}").map_err(io)?,
        }
    }

    let opts = ApplyOptions {
        mode: c.safety.into(),
        required: c.required,
        max_enum: c.max_enum,
    };
    let applied = match transform(&source, &opts) {
        Ok(a) => a,
        Err(TransformError::Plan(e)) => return Err(format!("{path}:{e}")),
        Err(TransformError::Apply(e)) => {
            for w in e.reports.iter().filter_map(|r| r.warning()) {
                writeln!(err, "{w}").map_err(io)?;
            }
            writeln!(err, "{}", e.message).map_err(io)?;
            return Ok(1);
        }
    };
    for w in applied.warnings() {
        writeln!(err, "{w}").map_err(io)?;
    }

    if c.dump_tree {
        write!(out, "{}", build_loop_tree(&applied.program).dump()).map_err(io)?;
    }

    let emit_opts = EmitOptions {
        annotate: c.annotate,
        origins: applied.origins.clone(),
        ..EmitOptions::default()
    };
    let emitted = emit_program(&applied.program, &emit_opts);
    let target = match &c.emit {
        Some(t) => Some(t.as_str()),
        None if !c.dump_tree && !c.deps => Some("-"),
        None => None,
    };
    match target {
        Some("-") => write!(out, "{emitted}").map_err(io)?,
        Some(p) => fs::write(p, &emitted).map_err(|e| format!("cannot write {p}: {e}"))?,
        None => {}
    }

    if let Some(p) = &c.trace {
        let (_, trace) = run(&applied.program, &RunOptions::seeded(c.seed)).map_err(|e| format!("trace run failed: {e}"))?;
        let mut file = fs::File::create(p).map_err(|e| format!("cannot write {}: {e}", p.display()))?;
        trace.write_csv(&mut file).map_err(io)?;
    }

    if let Some(n) = c.verify {
        let original = source.without_pragmas();
        match equivalent(&original, &applied.program, n, c.seed) {
            Ok(r) => match r.divergence {
                Some(d) => {
                    writeln!(err, "verification failed: {d}").map_err(io)?;
                    return Ok(2);
                }
                None => writeln!(err, "verified: {} runs agree", r.runs).map_err(io)?,
            },
            Err(e) => {
                // A fault only in the output is a semantic difference.
                let opts = RunOptions {
                    record_trace: false,
                    ..RunOptions::seeded(c.seed)
                };
                if run(&original, &opts).is_ok() {
                    writeln!(err, "verification failed: transformed program: {e}").map_err(io)?;
                    return Ok(2);
                }
                return Err(format!("original program failed: {e}"));
            }
        }
    }
    Ok(0)
}
