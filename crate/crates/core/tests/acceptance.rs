//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line
//! for each; exits non-zero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use xform::ast::{Program, StmtId};
use xform::deps::{brute_force_dependences, compute_dependences, DepKind, Dependence, Dist, StmtRef, DEFAULT_MAX_ENUM, ORACLE_MAX_ENUM};
use xform::directive::SafetyMode;
use xform::frontend::parse_program;
use xform::interp::{equivalent, run, same_instances, ParallelOrder, RunOptions};
use xform::ir::build_loop_tree;
use xform::legality::{resolve, Action, RtcCondition, Verdict, Witness};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Expected action shape, written out independently of the resolver.
#[derive(Debug, PartialEq, Eq)]
enum Want {
    Transform,
    Rtc,
    Keep,
    Error,
}

fn shape(a: &Action) -> Want {
    match a {
        Action::Transform => Want::Transform,
        Action::TransformWithRtc(_) => Want::Rtc,
        Action::KeepOriginal(_) => Want::Keep,
        Action::HardError(_) => Want::Error,
    }
}

fn safety_matrix() -> Outcome {
    let dep = Dependence {
        kind: DepKind::Flow,
        src: StmtRef { id: StmtId(0), site: 0 },
        sink: StmtRef { id: StmtId(0), site: 0 },
        loops: vec!["i".into()],
        distance: vec![Dist::Const(1)],
        array: "A".into(),
    };
    let mut rtc = RtcCondition::default();
    rtc.add("A", "B");
    let verdicts = [
        ("always", Verdict::AlwaysValid),
        ("rtc", Verdict::ValidWithRtc(rtc)),
        ("invalid", Verdict::Invalid(Witness { dep })),
        ("impossible", Verdict::Impossible("no domain".into())),
    ];
    use SafetyMode::*;
    use Want::*;
    // Rows: default, fallback, force.
    let table: BTreeMap<&str, [Want; 3]> = [
        ("always", [Transform, Transform, Transform]),
        ("rtc", [Transform, Rtc, Keep]),
        ("invalid", [Transform, Keep, Keep]),
        ("impossible", [Keep, Keep, Keep]),
    ]
    .into_iter()
    .collect();
    let mut cells = 0;
    for (name, v) in &verdicts {
        for (m, mode) in [Default, Fallback, Force].into_iter().enumerate() {
            for required in [false, true] {
                let mut want = &table[name][m];
                if required && *want == Keep {
                    want = &Error;
                }
                let got = shape(&resolve(v, mode, required));
                check(got == *want, || format!("{name} {mode:?} required={required}: got {got:?}, want {want:?}"))?;
                cells += 1;
            }
        }
    }
    Ok(format!("{cells} cells"))
}

fn fig1_orders() -> Result<(), String> {
    let twelve = |d: &str| format!("array A[12];\n#pragma xform {d}\nfor (i = 0; i < 12; i += 1) A[i] = i;\n");
    let strip = apply_text(&twelve("stripmine size(3)"), SafetyMode::Default);
    // Group iterations by the floor loop's value.
    let tree = build_loop_tree(&strip.program);
    check(tree.nodes.len() == 2 && tree.nodes[0].name == "i_f", || tree.dump())?;
    let order: Vec<i64> = trace(&strip.program).records.iter().map(|r| r.iter[0]).collect();
    let groups: Vec<Vec<i64>> = order.chunks(3).map(|c| c.to_vec()).collect();
    let want: Vec<Vec<i64>> = (0..4).map(|g| (3 * g..3 * g + 3).collect()).collect();
    check(groups == want, || format!("strip groups {groups:?}"))?;
    let stripe = apply_text(&twelve("stripemine count(3)"), SafetyMode::Default);
    let order: Vec<i64> = trace(&stripe.program).records.iter().map(|r| r.iter[0]).collect();
    check(order == [0, 4, 8, 1, 5, 9, 2, 6, 10, 3, 7, 11], || format!("stripe order {order:?}"))
}

fn order_preservation() -> Outcome {
    fig1_orders()?;
    let corpus = corpus();
    check(corpus.len() >= 15, || format!("corpus has {} programs", corpus.len()))?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (name, p) in &corpus {
        let original = events(&trace(p));
        for ds in order_preserving(p) {
            let a = apply(p, &ds, SafetyMode::Fallback);
            check(applied_or_impossible(&a), || format!("{name} {ds:?}: {:?}", a.reports))?;
            if !all_applied(&a) {
                continue;
            }
            let got = events(&trace(&a.program));
            check(got == original, || format!("{name} {ds:?}: trace differs\n{}", emit(&a.program)))?;
            let kind = ds[0].split_whitespace().next().unwrap().to_string();
            *counts.entry(kind).or_default() += 1;
        }
    }
    for (d, n) in &counts {
        check(*n >= 15, || format!("{d} applied to only {n} programs"))?;
    }
    let summary: Vec<String> = counts.iter().map(|(d, n)| format!("{d} x{n}")).collect();
    Ok(format!("{} programs; {}", corpus.len(), summary.join(", ")))
}

fn instance_bijection() -> Outcome {
    let mut applied = 0;
    let mut per_kind: BTreeMap<String, usize> = BTreeMap::new();
    for (name, p) in &corpus() {
        let original = trace(p);
        for ds in reordering(p) {
            let a = apply(p, &ds, SafetyMode::Default);
            check(applied_or_impossible(&a), || format!("{name} {ds:?}: {:?}", a.reports))?;
            if !all_applied(&a) {
                continue;
            }
            let t = run(&a.program, &RunOptions::seeded(7)).map_err(|e| format!("{name} {ds:?}: {e}"))?.1;
            check(same_instances(&original, &t), || format!("{name} {ds:?}: instances differ"))?;
            applied += 1;
            let kind = ds[0].split_whitespace().find(|w| !w.starts_with("loop(")).unwrap().to_string();
            *per_kind.entry(kind).or_default() += 1;
        }
    }
    for kind in ["tile", "interchange", "stripemine", "reverse", "distribute", "fuse"] {
        let n = per_kind.get(kind).copied().unwrap_or(0);
        check(n >= 3, || format!("{kind} applied to only {n} programs"))?;
    }
    Ok(format!("{applied} applications"))
}

fn oracle_equivalence() -> Outcome {
    let mut valid = 0;
    let mut rtc = 0;
    for (name, p) in &corpus() {
        let plain = p.without_pragmas();
        let mut sets = order_preserving(p);
        sets.extend(reordering(p));
        for ds in sets {
            let a = apply(p, &ds, SafetyMode::Fallback);
            let r = equivalent(&plain, &a.program, 100, 1000).map_err(|e| format!("{name} {ds:?}: {e}"))?;
            check(r.is_equivalent(), || format!("{name} {ds:?}: {:?}\n{}", r.divergence, emit(&a.program)))?;
            for rep in a.reports.iter().filter(|r| r.applied) {
                match rep.action {
                    Action::TransformWithRtc(_) => rtc += 1,
                    _ if rep.verdict == Verdict::AlwaysValid => valid += 1,
                    _ => {}
                }
            }
        }
    }
    check(rtc > 0, || "no runtime-checked application was exercised".into())?;

    // The invalid interchange applied in default mode must be caught.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("diag.loop");
    let src = "array A[13, 13] init random;\n#pragma xform interchange permutation(j,i)\nfor (i = 1; i < 13; i += 1)\n  for (j = 0; j < 12; j += 1)\n    A[i, j] = A[i - 1, j + 1] + 1;\n";
    std::fs::write(&path, src).map_err(|e| e.to_string())?;
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let args = ["xform", path.to_str().unwrap(), "--verify", "10"];
    let code = xform::cli::main_with(args, &mut out, &mut err);
    check(code == 2, || format!("exit {code}: {}", String::from_utf8_lossy(&err)))?;
    Ok(format!("{valid} always-valid and {rtc} runtime-checked applications agree over 100 trials; invalid interchange exits 2"))
}

fn dependence_soundness() -> Outcome {
    let mut exact = 0;
    let mut conservative = 0;
    for (name, p) in &corpus() {
        let plain = p.without_pragmas();
        // Statements outside any while loop.
        let stmts: Vec<_> = plain.body.iter().filter(|s| !s.contains_while()).cloned().collect();
        let oracle = match brute_force_dependences(&plain, &stmts, ORACLE_MAX_ENUM) {
            Ok(o) => o,
            Err(e) => return Err(format!("{name}: oracle failed: {e}")),
        };
        let d = compute_dependences(&plain, &stmts, 100_000).map_err(|e| format!("{name}: {e}"))?;
        if d.is_exact() {
            check(d.deps == oracle.deps, || format!("{name}: exact set differs\n{d}--\n{oracle}"))?;
            exact += 1;
        } else {
            check(d.covers(&oracle), || format!("{name}: conservative set misses\n{d}--\n{oracle}"))?;
            conservative += 1;
        }
    }
    let diag = parse_program("array A[13, 13] init random;\nfor (i = 1; i < 13; i += 1)\n  for (j = 0; j < 12; j += 1)\n    A[i, j] = A[i - 1, j + 1] + 1;\n").unwrap();
    let d = compute_dependences(&diag, &diag.body, DEFAULT_MAX_ENUM).map_err(|e| e.to_string())?;
    check(
        d.to_string().contains("flow s0->s0 (1,-1) exact"),
        || d.to_string(),
    )?;
    let a = apply(&diag, &["interchange permutation(j,i) fallback".into()], SafetyMode::Default);
    check(matches!(a.reports[0].verdict, Verdict::Invalid(_)), || format!("{:?}", a.reports[0]))?;
    Ok(format!("{exact} exact, {conservative} conservative"))
}

fn composition() -> Outcome {
    let corpus = corpus();
    let mut tile_strip = 0;
    let mut fuse_dist = 0;
    let mut unroll = 0;
    for (name, p) in &corpus {
        for s in [3, 4, 5] {
            let a = apply(p, &[format!("tile sizes({s})")], SafetyMode::Default);
            let b = apply(p, &[format!("stripmine size({s})")], SafetyMode::Default);
            check(a.program == b.program, || format!("{name}: tile({s}) differs from stripmine({s})"))?;
        }
        tile_strip += 1;

        let f = first_loop(p);
        if f.body_len >= 2 {
            let base = f.band[0].replace('#', "_");
            let parts: Vec<String> = (0..f.body_len).map(|k| format!("{base}_d{k}")).collect();
            let ds = vec![format!("loop({}) fuse", parts.join(",")), "distribute".into()];
            let a = apply(p, &ds, SafetyMode::Default);
            check(all_applied(&a), || format!("{name}: {:?}", a.reports))?;
            check(a.program == p.without_pragmas(), || format!("{name}: fuse after distribute changed the program\n{}", emit(&a.program)))?;
            fuse_dist += 1;
        }

        if f.trip.is_some_and(|t| t > 0 && t % 4 == 0) {
            let a = apply(p, &["unroll factor(4)".into()], SafetyMode::Default);
            let base = f.band[0].replace('#', "_");
            let b = apply(
                p,
                &[format!("loop({base}_t) unroll full"), "stripmine size(4)".into()],
                SafetyMode::Default,
            );
            check(all_applied(&a) && all_applied(&b), || format!("{name}: {:?} {:?}", a.reports, b.reports))?;
            check(events(&trace(&a.program)) == events(&trace(&b.program)), || format!("{name}: unroll traces differ"))?;
            unroll += 1;
        }
    }
    check(tile_strip >= 3 && fuse_dist >= 3 && unroll >= 3, || format!("too few programs: {tile_strip} {fuse_dist} {unroll}"))?;
    Ok(format!("tile/strip on {tile_strip}, fuse/distribute on {fuse_dist}, unroll on {unroll} programs"))
}

fn simd_decomposition() -> Outcome {
    let src = |pragmas: &str| format!("array A[10]; array B[10] init random;\n{pragmas}for (i = 0; i < 10; i += 1)\n  A[i] = B[i] * 3 + i;\n");
    let original = parse_program(&src("")).unwrap();
    let mark_after = apply_text(
        &src("#pragma xform loop(i_f) parallel\n#pragma xform stripmine size(4)\n"),
        SafetyMode::Fallback,
    );
    let mark_first = apply_text(
        &src("#pragma xform loop(i) stripmine size(4)\n#pragma xform parallel\n"),
        SafetyMode::Fallback,
    );
    for a in [&mark_after, &mark_first] {
        check(all_applied(a), || format!("{:?}", a.reports))?;
        let r = equivalent(&original, &a.program, 20, 5).map_err(|e| e.to_string())?;
        check(r.is_equivalent(), || format!("{:?}", r.divergence))?;
    }
    let reversed = |p: &Program| {
        let opts = RunOptions {
            parallel: ParallelOrder::Reversed,
            ..RunOptions::seeded(5)
        };
        run(p, &opts).map_err(|e| e.to_string())
    };
    let base = run(&original, &RunOptions::seeded(5)).unwrap().0;
    let (m1, t1) = reversed(&mark_after.program)?;
    let (m2, t2) = reversed(&mark_first.program)?;
    check(m1.cells == base.cells && m2.cells == base.cells, || "parallel order changed the result".into())?;
    check(events(&t1) != events(&t2), || "the two decompositions produced the same trace".into())?;
    Ok("both orders equivalent at n=10 with distinct traces".into())
}

const DGEMM: &str = "param M = 16; param N = 16; param K = 16;
array A[16, 16] init random; array B[16, 16] init random; array C[16, 16];
#pragma xform loop(i2) unrollingandjam factor(4)
#pragma xform loop(j2) unrollingandjam factor(8)
#pragma xform interchange permutation(j1,k1,i1,j2,i2)
#pragma xform loop(i,j,k) tile sizes(4,4,4) floor_ids(i1,j1,k1) tile_ids(i2,j2,k2) peel(rectangular)
for (i = 0; i < M; i += 1)
  for (j = 0; j < N; j += 1)
    for (k = 0; k < K; k += 1)
      C[i, j] += A[i, k] * B[k, j];
";

fn dgemm() -> Outcome {
    let start = Instant::now();
    let p = parse_program(DGEMM).map_err(|e| e.to_string())?;
    let a = apply_text(DGEMM, SafetyMode::Fallback);
    check(all_applied(&a), || format!("{:?}", a.reports))?;
    check(
        a.reports.iter().all(|r| r.verdict == Verdict::AlwaysValid),
        || format!("{:?}", a.reports),
    )?;
    let copies = a.program.assigns().len();
    check(copies == 32, || format!("{copies} jammed copies"))?;
    let r = equivalent(&p.without_pragmas(), &a.program, 20, 3).map_err(|e| e.to_string())?;
    check(r.is_equivalent(), || format!("{:?}", r.divergence))?;
    let secs = start.elapsed().as_secs_f64();
    check(secs < 30.0, || format!("took {secs:.1}s"))?;
    Ok(format!("4 directives, 32 copies, verified in {secs:.1}s"))
}

fn round_trip() -> Outcome {
    let mut outputs = 0;
    for (name, src) in corpus_sources() {
        let p = parse_program(&src).unwrap();
        let text = emit(&p);
        let q = parse_program(&text).map_err(|e| format!("{name}: {e}\n{text}"))?;
        check(q == p, || format!("{name}: reparse differs"))?;
        check(emit(&q) == text, || format!("{name}: emit is not stable"))?;
        let mut sets = order_preserving(&p);
        sets.extend(reordering(&p));
        for ds in sets {
            for mode in [SafetyMode::Default, SafetyMode::Fallback] {
                let a = apply(&p, &ds, mode);
                let text = emit(&a.program);
                let q = parse_program(&text).map_err(|e| format!("{name} {ds:?}: {e}\n{text}"))?;
                check(q == a.program, || format!("{name} {ds:?}: transformed output does not reparse equal\n{text}"))?;
                outputs += 1;
            }
        }
    }
    let a = apply_text(DGEMM, SafetyMode::Default);
    let text = emit(&a.program);
    check(parse_program(&text).ok().as_ref() == Some(&a.program), || "dgemm output does not reparse equal".into())?;
    Ok(format!("{} programs, {} transformed outputs", corpus_sources().len(), outputs + 1))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("safety matrix", safety_matrix),
        ("order preservation", order_preservation),
        ("instance bijection", instance_bijection),
        ("oracle equivalence", oracle_equivalence),
        ("dependence soundness", dependence_soundness),
        ("composition identities", composition),
        ("simd-style decomposition", simd_decomposition),
        ("dgemm pipeline", dgemm),
        ("round trip", round_trip),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let ms = start.elapsed().as_millis();
        match result {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail}; {ms} ms)", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
