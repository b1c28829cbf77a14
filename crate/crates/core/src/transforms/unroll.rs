//! Full and partial unrolling, and unroll-and-jam.

use super::*;
use crate::directive::UnrollFactor;

/// Copy `c` of `body` for logical iteration `floor + c`, guarded unless
/// the copy always runs.
fn copy(f: &ForLoop, body: &[Stmt], floor: &str, c: i64, trips: &Expr, guarded: bool) -> Vec<Stmt> {
    let t = add(Expr::var(floor), Expr::Int(c));
    let mut out = subst_stmts(body, &[(f.var.clone(), physical(f, t.clone()))]);
    if c > 0 {
        rename_copies(&mut out, &format!("u{c}"));
    }
    if guarded && c > 0 {
        vec![Stmt::If(IfStmt {
            cond: Expr::bin(BinOp::Lt, t, trips.clone()),
            then_body: out,
            else_body: None,
        })]
    } else {
        out
    }
}

pub(super) fn unroll(ctx: &Ctx) -> Prep {
    let Request::Unroll { factor, .. } = &ctx.step.request else {
        unreachable!()
    };
    let name = ctx.step.first_target();
    let (idx, f) = ctx.domain_loop(name)?;
    let t = trip(f);
    let path = ctx.tree.nodes[idx].path.clone();
    let replacement = match factor {
        UnrollFactor::Full => {
            let trips = ctx.concrete(&t).ok_or_else(|| {
                format!(
                    "full unrolling needs a constant trip count; loop '{name}' runs {} times",
                    crate::emit::expr(&t)
                )
            })?;
            if trips > MAX_UNROLL_COPIES {
                return Err(format!("full unrolling of {trips} iterations exceeds the limit of {MAX_UNROLL_COPIES} copies"));
            }
            let mut out = Vec::new();
            for c in 0..trips.max(0) {
                let mut body = subst_stmts(&f.body, &[(f.var.clone(), physical(f, Expr::Int(c)))]);
                if c > 0 {
                    rename_copies(&mut body, &format!("u{c}"));
                }
                out.extend(body);
            }
            out
        }
        UnrollFactor::Partial(k) => {
            let [floor] = ctx.step.produces.as_slice() else {
                return Err("could not name the generated loop".into());
            };
            let guarded = !ctx.concrete(&t).is_some_and(|n| n % k == 0);
            let body: Vec<Stmt> = (0..*k).flat_map(|c| copy(f, &f.body, floor, c, &t, guarded)).collect();
            vec![new_loop(floor, Expr::Int(0), t.clone(), *k, f.parallel, body, floor, ctx.origin())]
        }
    };
    Ok(Prepared {
        path,
        len: 1,
        replacement,
        check: Check::OrderPreserving,
        analyze_result: false,
        parts_loop: None,
    })
}

pub(super) fn unroll_and_jam(ctx: &Ctx) -> Prep {
    let Request::UnrollAndJam { factor, .. } = &ctx.step.request else {
        unreachable!()
    };
    let k = *factor;
    let name = ctx.step.first_target();
    let (idx, f) = ctx.domain_loop(name)?;
    let mut chain = vec![idx];
    while let Some(c) = ctx.tree.nodes[*chain.last().unwrap()].perfect_child {
        if ctx.tree.nodes[c].is_while() {
            break;
        }
        chain.push(c);
    }
    if chain.len() < 2 {
        return Err(format!(
            "unroll-and-jam needs a loop perfectly nested inside '{name}'; its body is not a single loop"
        ));
    }
    for &c in &chain {
        ctx.domain_loop(&ctx.name(c))?;
    }
    ctx.rectangular(&chain)?;
    let [floor] = ctx.step.produces.as_slice() else {
        return Err("could not name the generated loop".into());
    };
    let t = trip(f);
    let guarded = !ctx.concrete(&t).is_some_and(|n| n % k == 0);
    let innermost = ctx.node_for(*chain.last().unwrap());
    let mut nest: Vec<Stmt> = (0..k)
        .flat_map(|c| copy(f, &innermost.body, floor, c, &t, guarded))
        .collect();
    for &c in chain[1..].iter().rev() {
        let l = ctx.node_for(c);
        let mut header = l.clone();
        header.body = nest;
        nest = vec![Stmt::For(header)];
    }
    let replacement = vec![new_loop(floor, Expr::Int(0), t, k, f.parallel, nest, floor, ctx.origin())];
    let check = if k == 1 {
        Check::OrderPreserving
    } else {
        Check::UnrollAndJam {
            target: name.to_string(),
            chain: chain.iter().map(|&c| ctx.name(c)).collect(),
            span: k * f.step,
        }
    };
    Ok(Prepared {
        path: ctx.tree.nodes[idx].path.clone(),
        len: 1,
        replacement,
        check,
        analyze_result: false,
        parts_loop: None,
    })
}
