//! Collapsing a perfect band into one loop.

use super::*;

pub(super) fn collapse(ctx: &Ctx) -> Prep {
    let k = ctx.step.targets.len().max(1);
    let band = ctx.named_band(&ctx.step.explicit, k)?;
    ctx.rectangular(&band)?;
    let [c] = ctx.step.produces.as_slice() else {
        return Err("could not name the generated loop".into());
    };
    let loops: Vec<&ForLoop> = band.iter().map(|&i| ctx.node_for(i)).collect();
    let trips: Vec<Expr> = loops
        .iter()
        .map(|f| {
            let t = trip(f);
            match ctx.concrete(&t) {
                Some(n) => Expr::Int(n.max(0)),
                None => simplify(&Expr::max(t, Expr::Int(0))),
            }
        })
        .collect();
    // Iteration `c` of the collapsed loop: dimension d is
    // (c / product of inner trips) % trip_d.
    let mut map = Vec::new();
    let mut inner = Expr::Int(1);
    for d in (0..k).rev() {
        let mut t = simplify(&Expr::bin(BinOp::Div, Expr::var(c), inner.clone()));
        if d > 0 {
            t = simplify(&Expr::bin(BinOp::Rem, t, trips[d].clone()));
        }
        map.push((loops[d].var.clone(), physical(loops[d], t)));
        inner = mul(inner, trips[d].clone());
    }
    let body = subst_stmts(&loops[k - 1].body, &map);
    let parallel = loops.iter().all(|f| f.parallel);
    Ok(Prepared {
        path: ctx.tree.nodes[band[0]].path.clone(),
        len: 1,
        replacement: vec![new_loop(c, Expr::Int(0), inner, 1, parallel, body, c, ctx.origin())],
        check: Check::OrderPreserving,
        analyze_result: false,
        parts_loop: None,
    })
}
