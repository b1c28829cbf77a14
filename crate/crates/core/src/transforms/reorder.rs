//! Interchange, reversal and parallel marking.

use super::*;

pub(super) fn interchange(ctx: &Ctx) -> Prep {
    let Request::Interchange { permutation } = &ctx.step.request else {
        unreachable!()
    };
    let k = permutation.len();
    let band = ctx.named_band(&ctx.step.explicit, k)?;
    let names: Vec<String> = band.iter().map(|&i| ctx.name(i)).collect();
    let mut sorted_band = names.clone();
    let mut sorted_perm = permutation.clone();
    sorted_band.sort();
    sorted_perm.sort();
    if sorted_band != sorted_perm {
        return Err(format!(
            "permutation ({}) does not match the nest ({})",
            permutation.join(", "),
            names.join(", ")
        ));
    }
    let identity = names == *permutation;
    let rank = |n: &str| permutation.iter().position(|p| p == n).unwrap();
    for &i in &band {
        for &o in &band {
            let var = &ctx.node_for(o).var;
            let f = ctx.node_for(i);
            let depends = i != o && (f.lower.mentions_var(var) || f.upper.mentions_var(var));
            if depends && rank(&ctx.name(o)) > rank(&ctx.name(i)) {
                return Err(format!(
                    "bounds of loop '{}' depend on '{}', which would move inside it (non-rectangular domain)",
                    ctx.name(i),
                    ctx.name(o)
                ));
            }
        }
    }
    let innermost = ctx.node_for(*band.last().unwrap());
    let mut nest = innermost.body.clone();
    for n in permutation.iter().rev() {
        let pos = names.iter().position(|x| x == n).unwrap();
        let mut header = ctx.node_for(band[pos]).clone();
        header.body = nest;
        nest = vec![Stmt::For(header)];
    }
    let check = if identity {
        Check::OrderPreserving
    } else {
        Check::Permute {
            band: names,
            order: permutation.clone(),
        }
    };
    Ok(Prepared {
        path: ctx.tree.nodes[band[0]].path.clone(),
        len: 1,
        replacement: nest,
        check,
        analyze_result: false,
        parts_loop: None,
    })
}

pub(super) fn reverse(ctx: &Ctx) -> Prep {
    let name = ctx.step.first_target();
    let (idx, f) = ctx.domain_loop(name)?;
    let [r] = ctx.step.produces.as_slice() else {
        return Err("could not name the generated loop".into());
    };
    let t = trip(f);
    let back = sub(sub(t.clone(), Expr::Int(1)), Expr::var(r));
    let body = subst_stmts(&f.body, &[(f.var.clone(), physical(f, back))]);
    Ok(Prepared {
        path: ctx.tree.nodes[idx].path.clone(),
        len: 1,
        replacement: vec![new_loop(r, Expr::Int(0), t, 1, f.parallel, body, r, ctx.origin())],
        check: Check::Reverse {
            target: name.to_string(),
        },
        analyze_result: false,
        parts_loop: None,
    })
}

pub(super) fn parallel(ctx: &Ctx) -> Prep {
    let name = ctx.step.first_target();
    let (idx, f) = ctx.for_loop(name)?;
    let mut marked = f.clone();
    marked.parallel = true;
    Ok(Prepared {
        path: ctx.tree.nodes[idx].path.clone(),
        len: 1,
        replacement: vec![Stmt::For(marked)],
        check: Check::Parallel {
            target: name.to_string(),
        },
        analyze_result: false,
        parts_loop: None,
    })
}
