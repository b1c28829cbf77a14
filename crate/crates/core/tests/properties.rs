//! Property tests over randomly generated loop nests.

mod common;

use proptest::prelude::*;

use common::{apply_text, emit, events};
use xform::deps::{brute_force_dependences, compute_dependences, ORACLE_MAX_ENUM};
use xform::directive::SafetyMode;
use xform::frontend::parse_program;
use xform::interp::{equivalent, run, same_instances, RunOptions};

#[derive(Debug, Clone)]
struct Loop {
    var: &'static str,
    lower: i64,
    trip: i64,
    step: i64,
}

#[derive(Debug, Clone)]
struct Access {
    array: &'static str,
    coeffs: Vec<i64>,
    offset: i64,
}

#[derive(Debug, Clone)]
struct Statement {
    target: Access,
    source: Access,
    accumulate: bool,
    constant: i64,
}

#[derive(Debug, Clone)]
struct Nest {
    loops: Vec<Loop>,
    body: Vec<Statement>,
    alias: bool,
}

impl Access {
    fn text(&self, loops: &[Loop]) -> String {
        let mut s = self.offset.to_string();
        for (c, l) in self.coeffs.iter().zip(loops) {
            match c {
                0 => {}
                1 => s.push_str(&format!(" + {}", l.var)),
                -1 => s.push_str(&format!(" - {}", l.var)),
                c => s.push_str(&format!(" + {c} * {}", l.var)),
            }
        }
        format!("{}[{s}]", self.array)
    }
}

impl Nest {
    fn source(&self, pragmas: &[String]) -> String {
        let mut s = String::from("array A[100] init random;\narray B[100] init random;\n");
        if self.alias {
            s.push_str("maybe_alias(A, B);\n");
        }
        for p in pragmas {
            s.push_str(&format!("#pragma xform {p}\n"));
        }
        for l in &self.loops {
            let upper = l.lower + l.trip * l.step;
            s.push_str(&format!("for ({v} = {}; {v} < {upper}; {v} += {})\n", l.lower, l.step, v = l.var));
        }
        s.push_str("{\n");
        for st in &self.body {
            let op = if st.accumulate { "+=" } else { "=" };
            s.push_str(&format!(
                "  {} {op} {} + {};\n",
                st.target.text(&self.loops),
                st.source.text(&self.loops),
                st.constant
            ));
        }
        s.push_str("}\n");
        s
    }
}

fn access(depth: usize) -> impl Strategy<Value = Access> {
    (
        prop_oneof![Just("A"), Just("B")],
        proptest::collection::vec(-1i64..=2, depth),
        40i64..55,
    )
        .prop_map(|(array, coeffs, offset)| Access { array, coeffs, offset })
}

fn nest() -> impl Strategy<Value = Nest> {
    (1usize..=2)
        .prop_flat_map(|depth| {
            let loops = proptest::collection::vec((0i64..3, 0i64..6, 1i64..3), depth).prop_map(|ls| {
                ls.into_iter()
                    .zip(["i", "j"])
                    .map(|((lower, trip, step), var)| Loop { var, lower, trip, step })
                    .collect::<Vec<_>>()
            });
            let stmt = (access(depth), access(depth), any::<bool>(), -5i64..5).prop_map(|(target, source, accumulate, constant)| Statement {
                target,
                source,
                accumulate,
                constant,
            });
            (loops, proptest::collection::vec(stmt, 1..=2), proptest::bool::weighted(0.25))
        })
        .prop_map(|(loops, body, alias)| Nest { loops, body, alias })
}

/// Directives that may reorder iterations, for a nest of the given depth.
fn reordering(depth: usize) -> impl Strategy<Value = Vec<String>> {
    let mut options = vec![
        vec!["reverse".to_string()],
        vec!["stripemine count(2)".to_string()],
        vec!["parallel".to_string()],
        vec!["distribute".to_string()],
    ];
    if depth == 2 {
        options.push(vec!["interchange permutation(j,i)".to_string()]);
        options.push(vec!["tile sizes(2,3)".to_string()]);
        options.push(vec!["tile sizes(3,2) peel(rectangular)".to_string()]);
        options.push(vec!["unrollingandjam factor(2)".to_string()]);
        options.push(vec!["loop(j) reverse".to_string()]);
        options.push(vec!["loop(i_f, j_f) interchange permutation(j_f, i_f)".to_string(), "tile sizes(2,2)".to_string()]);
    }
    proptest::sample::select(options)
}

fn nest_and_reordering() -> impl Strategy<Value = (Nest, Vec<String>)> {
    nest().prop_flat_map(|n| {
        let depth = n.loops.len();
        (Just(n), reordering(depth))
    })
}

fn order_preserving() -> impl Strategy<Value = String> {
    prop_oneof![
        (1i64..6).prop_map(|s| format!("stripmine size({s})")),
        (2i64..5).prop_map(|s| format!("unroll factor({s})")),
        Just("unroll full".to_string()),
        (0i64..4).prop_map(|k| format!("peel first({k})")),
        (0i64..4).prop_map(|k| format!("peel last({k})")),
        (1i64..4).prop_map(|k| format!("peel multiple({k})")),
        Just("collapse depth(1)".to_string()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 96,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn emit_parse_round_trip(n in nest()) {
        let p = parse_program(&n.source(&[])).unwrap();
        let text = emit(&p);
        let q = parse_program(&text).unwrap();
        prop_assert_eq!(&q, &p);
        prop_assert_eq!(emit(&q), text);
    }

    #[test]
    fn exact_dependences_match_brute_force(n in nest()) {
        let p = parse_program(&n.source(&[])).unwrap();
        let d = compute_dependences(&p, &p.body, ORACLE_MAX_ENUM).unwrap();
        let o = brute_force_dependences(&p, &p.body, ORACLE_MAX_ENUM).unwrap();
        prop_assert!(d.is_exact());
        prop_assert_eq!(&d.deps, &o.deps, "\n{}\n--\n{}", d, o);
    }

    #[test]
    fn interpreter_is_deterministic(n in nest(), seed in 0u64..1000) {
        let p = parse_program(&n.source(&[])).unwrap();
        let a = run(&p, &RunOptions::seeded(seed)).unwrap();
        let b = run(&p, &RunOptions::seeded(seed)).unwrap();
        prop_assert_eq!(a.0.cells, b.0.cells);
        prop_assert_eq!(a.1, b.1);
    }

    #[test]
    fn order_preserving_transforms_keep_the_trace(n in nest(), d in order_preserving()) {
        let original = parse_program(&n.source(&[])).unwrap();
        let a = apply_text(&n.source(std::slice::from_ref(&d)), SafetyMode::Default);
        prop_assume!(a.reports.iter().all(|r| r.applied));
        let t0 = run(&original, &RunOptions::seeded(1)).unwrap().1;
        let t1 = run(&a.program, &RunOptions::seeded(1)).unwrap().1;
        prop_assert_eq!(events(&t0), events(&t1), "{}", emit(&a.program));
    }

    /// Whatever fallback mode emits computes the same result as the input.
    #[test]
    fn fallback_output_is_equivalent((n, ds) in nest_and_reordering()) {
        let original = parse_program(&n.source(&[])).unwrap();
        let a = apply_text(&n.source(&ds), SafetyMode::Fallback);
        let r = equivalent(&original, &a.program, 3, 17).unwrap();
        prop_assert!(r.is_equivalent(), "{:?}\n{:?}\n{}", r.divergence, a.reports, emit(&a.program));
        let text = emit(&a.program);
        prop_assert_eq!(&parse_program(&text).unwrap(), &a.program);
    }

    /// Reordering transforms applied unconditionally keep every instance.
    #[test]
    fn default_mode_preserves_instances((n, ds) in nest_and_reordering()) {
        let original = parse_program(&n.source(&[])).unwrap();
        let a = apply_text(&n.source(&ds), SafetyMode::Default);
        prop_assume!(a.reports.iter().all(|r| r.applied));
        let t0 = run(&original, &RunOptions::seeded(2)).unwrap().1;
        let t1 = run(&a.program, &RunOptions::seeded(2)).unwrap().1;
        prop_assert!(same_instances(&t0, &t1), "{}", emit(&a.program));
    }
}
