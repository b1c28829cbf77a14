//! End-to-end tests of the `xform` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use xform::frontend::parse_program;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn xform(args: &[&str]) -> Run {
    let Output { status, stdout, stderr } = Command::new(env!("CARGO_BIN_EXE_xform")).args(args).output().unwrap();
    Run {
        code: status.code().unwrap(),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const DIAGONAL: &str = "array A[8, 8] init random;
#pragma xform interchange permutation(j,i)
for (i = 1; i < 8; i += 1)
  for (j = 0; j < 7; j += 1)
    A[i, j] = A[i - 1, j + 1];
";

#[test]
fn valid_pipeline_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let src = "array A[16] init random; array B[16];\n#pragma xform loop(i_t) unroll full\n#pragma xform stripmine size(4)\nfor (i = 0; i < 16; i += 1) B[i] = A[i] * A[i];\n";
    let f = write(dir.path(), "sq.loop", src);
    let r = xform(&[f.to_str().unwrap(), "--verify", "100"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.contains("verified: 100 runs agree"), "{}", r.stderr);
    assert!(r.stderr.lines().all(|l| !l.starts_with("warning")), "{}", r.stderr);
    let out = parse_program(&r.stdout).unwrap();
    assert_eq!(out.assigns().len(), 4);
}

#[test]
fn invalid_interchange_in_default_mode_is_caught_by_verification() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "diag.loop", DIAGONAL);
    let r = xform(&[f.to_str().unwrap(), "--verify", "5", "--seed", "9"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("verification failed: A["), "{}", r.stderr);
}

#[test]
fn fallback_keeps_original_and_warns() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "diag.loop", DIAGONAL);
    let r = xform(&[f.to_str().unwrap(), "--safety", "fallback", "--verify", "5"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(
        r.stderr.lines().next().unwrap(),
        "warning: interchange on loop 'i' (line 2): invalid: flow dependence s0->s0 (1,-1) on A would be violated"
    );
    let kept = parse_program(&r.stdout).unwrap();
    assert_eq!(kept, parse_program(DIAGONAL).unwrap().without_pragmas());
}

#[test]
fn directive_modifier_overrides_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let src = DIAGONAL.replace("permutation(j,i)", "permutation(j,i) fallback");
    let f = write(dir.path(), "diag.loop", &src);
    let r = xform(&[f.to_str().unwrap(), "--safety", "default", "--verify", "5"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.starts_with("warning: interchange"), "{}", r.stderr);
}

#[test]
fn required_on_impossible_transformation_is_a_hard_error() {
    let dir = tempfile::tempdir().unwrap();
    let src = "array A[2] init random;\n#pragma xform reverse required\nwhile (A[0] > 0)\n  A[0] = A[0] - 1;\n";
    let f = write(dir.path(), "w.loop", src);
    let r = xform(&[f.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.starts_with("error: reverse on loop 'while' (line 2): impossible"), "{}", r.stderr);
    assert!(r.stdout.is_empty());
    let g = write(dir.path(), "w2.loop", &src.replace(" required", ""));
    let lenient = xform(&[g.to_str().unwrap()]);
    assert_eq!(lenient.code, 0);
    assert!(lenient.stderr.starts_with("warning: reverse on loop 'while' (line 2): impossible"), "{}", lenient.stderr);
}

#[test]
fn global_required_flag() {
    let dir = tempfile::tempdir().unwrap();
    let src = "array A[12];\n#pragma xform stripemine count(5)\nfor (i = 0; i < 12; i += 1) A[i] = i;\n";
    let f = write(dir.path(), "s.loop", src);
    assert_eq!(xform(&[f.to_str().unwrap()]).code, 0);
    let r = xform(&[f.to_str().unwrap(), "--required"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("error: stripemine on loop 'i' (line 2): impossible"), "{}", r.stderr);
}

#[test]
fn parse_errors_report_position() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.loop", "array A[4];\n#pragma xform frobnicate\nfor (i = 0; i < 4; i += 1) A[i] = 0;\n");
    let r = xform(&[f.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.starts_with("error: "), "{}", r.stderr);
    assert!(r.stderr.contains("bad.loop:2:"), "{}", r.stderr);
    assert_eq!(xform(&["/nonexistent/x.loop"]).code, 1);
}

#[test]
fn dump_tree_and_deps() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "diag.loop", &DIAGONAL.replace("interchange permutation(j,i)", "tile sizes(4,4)"));
    let r = xform(&[f.to_str().unwrap(), "--dump-tree", "--deps"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines[0], "flow s0->s0 (1,-1) exact");
    assert_eq!(
        &lines[1..],
        [
            "i_f [0,7) step=4 generated(d0)",
            "  j_f [0,7) step=4 generated(d0)",
            "    i_t [i_f,min(i_f + 4, 7)) step=1 generated(d0)",
            "      j_t [j_f,min(j_f + 4, 7)) step=1 generated(d0)",
        ]
    );
}

#[test]
fn tiled_loop_golden_output() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "t.loop", "array A[10];\n#pragma xform tile sizes(4)\nfor (i = 0; i < 10; i += 1)\n  A[i] = i;\n");
    let out = dir.path().join("out.loop");
    let r = xform(&[f.to_str().unwrap(), "--emit", out.to_str().unwrap(), "--annotate"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    let golden = "array A[10];

// from: tile(i)
for (i_f = 0; i_f < 10; i_f += 4) {
  // from: tile(i)
  for (i_t = i_f; i_t < min(i_f + 4, 10); i_t += 1) {
    @s0(i_t) A[i_t] = i_t;
  }
}
";
    assert_eq!(text, golden);
    assert!(parse_program(&text).is_ok());
}

#[test]
fn trace_is_written_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "r.loop", "array A[3];\n#pragma xform reverse\nfor (i = 0; i < 3; i += 1) A[i] = i;\n");
    let csv = dir.path().join("trace.csv");
    let r = xform(&[f.to_str().unwrap(), "--trace", csv.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text, "stmt,iter_vec,reads,writes\ns0,2,,A:2\ns0,1,,A:1\ns0,0,,A:0\n");
}

#[test]
fn identical_invocations_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "diag.loop", DIAGONAL);
    let a = xform(&[f.to_str().unwrap(), "--verify", "3", "--deps", "--emit", "-"]);
    let b = xform(&[f.to_str().unwrap(), "--verify", "3", "--deps", "--emit", "-"]);
    assert_eq!((a.code, &a.stdout, &a.stderr), (b.code, &b.stdout, &b.stderr));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(xform(&[]).code, 1);
    assert_eq!(xform(&["x.loop", "--safety", "sometimes"]).code, 1);
    assert_eq!(xform(&["--help"]).code, 0);
}
