//! Loop distribution and fusion.

use std::collections::BTreeMap;

use super::*;
use crate::ir::loop_vars;

/// Part index of every statement site below a loop body, in preorder.
fn site_parts(groups: &[Vec<Stmt>]) -> Vec<usize> {
    groups
        .iter()
        .enumerate()
        .flat_map(|(p, g)| g.iter().flat_map(|s| s.assigns()).map(move |_| p))
        .collect()
}

pub(super) fn distribute(ctx: &Ctx) -> Prep {
    let Request::Distribute { parts, .. } = &ctx.step.request else {
        unreachable!()
    };
    let name = ctx.step.first_target();
    let (idx, f) = ctx.domain_loop(name)?;
    let m = f.body.len();
    let groups: Vec<Vec<usize>> = match parts {
        None => (0..m).map(|j| vec![j]).collect(),
        Some(parts) => {
            let mut owner = BTreeMap::new();
            for (j, s) in f.body.iter().enumerate() {
                for a in s.assigns() {
                    owner.insert(a.id.to_string(), j);
                }
            }
            let mut groups = Vec::new();
            for part in parts {
                let mut g = Vec::new();
                for id in part {
                    let j = *owner
                        .get(id)
                        .ok_or_else(|| format!("statement id '{id}' is not in the body of loop '{name}'"))?;
                    if !g.contains(&j) {
                        g.push(j);
                    }
                }
                g.sort_unstable();
                groups.push(g);
            }
            let flat: Vec<usize> = groups.iter().flatten().copied().collect();
            if flat != (0..m).collect::<Vec<_>>() {
                return Err(format!(
                    "parts must cover the {m} statements of loop '{name}' once each, in order"
                ));
            }
            groups
        }
    };
    let ids = &ctx.step.produces;
    if ids.len() != groups.len() {
        return Err(format!(
            "{} part ids for {} parts of loop '{name}'",
            ids.len(),
            groups.len()
        ));
    }
    let bodies: Vec<Vec<Stmt>> = groups
        .iter()
        .map(|g| g.iter().map(|&j| f.body[j].clone()).collect())
        .collect();
    let local = site_parts(&bodies);
    let replacement = bodies
        .into_iter()
        .zip(ids)
        .map(|(body, id)| {
            let mut part = f.clone();
            part.body = body;
            part.meta.name = Some(id.clone());
            part.meta.origin = ctx.origin();
            Stmt::For(part)
        })
        .collect();
    let (check, parts_loop) = if groups.len() <= 1 {
        (Check::OrderPreserving, None)
    } else {
        (
            Check::Parts {
                target: name.to_string(),
                parts: Vec::new(),
            },
            Some((name.to_string(), local)),
        )
    };
    Ok(Prepared {
        path: ctx.tree.nodes[idx].path.clone(),
        len: 1,
        replacement,
        check,
        analyze_result: false,
        parts_loop,
    })
}

pub(super) fn fuse(ctx: &Ctx) -> Prep {
    let names = &ctx.step.targets;
    let loops: Vec<(usize, &ForLoop)> = names.iter().map(|n| ctx.domain_loop(n)).collect::<Result<_, _>>()?;
    let first_path = &ctx.tree.nodes[loops[0].0].path;
    let (&first_idx, parent) = first_path.split_last().unwrap();
    for (k, (i, _)) in loops.iter().enumerate().skip(1) {
        let p = &ctx.tree.nodes[*i].path;
        let adjacent = p.len() == first_path.len() && p[..p.len() - 1] == *parent && p[p.len() - 1] == first_idx + k;
        if !adjacent {
            return Err(format!(
                "loops '{}' and '{}' are not adjacent siblings",
                names[k - 1], names[k]
            ));
        }
    }
    let head = loops[0].1;
    for (k, (_, f)) in loops.iter().enumerate().skip(1) {
        let same = simplify(&f.lower) == simplify(&head.lower)
            && simplify(&f.upper) == simplify(&head.upper)
            && f.step == head.step;
        if !same {
            return Err(format!(
                "loops '{}' and '{}' have different iteration domains",
                names[0], names[k]
            ));
        }
        if f.var != head.var && loop_vars(&f.body).contains(&head.var) {
            return Err(format!(
                "fusing '{}' into '{}' would capture variable '{}'",
                names[k], names[0], head.var
            ));
        }
    }
    let [fused_id] = ctx.step.produces.as_slice() else {
        return Err("could not name the generated loop".into());
    };
    let bodies: Vec<Vec<Stmt>> = loops
        .iter()
        .map(|(_, f)| {
            if f.var == head.var {
                f.body.clone()
            } else {
                subst_stmts(&f.body, &[(f.var.clone(), Expr::var(&head.var))])
            }
        })
        .collect();
    let local = site_parts(&bodies);
    let mut fused = head.clone();
    fused.body = bodies.into_iter().flatten().collect();
    fused.parallel = loops.iter().all(|(_, f)| f.parallel);
    fused.meta.name = Some(fused_id.clone());
    fused.meta.origin = ctx.origin();
    Ok(Prepared {
        path: first_path.clone(),
        len: loops.len(),
        replacement: vec![Stmt::For(fused)],
        check: Check::Parts {
            target: fused_id.clone(),
            parts: Vec::new(),
        },
        analyze_result: true,
        parts_loop: Some((fused_id.clone(), local)),
    })
}
