//! Strip-mining, stripe-mining and tiling.

use super::*;
use crate::directive::TilePeel;
use crate::legality::TileDim;

/// One tiled dimension in logical coordinates.
struct Dim {
    var: String,
    trip: Expr,
    size: i64,
    floor: String,
    tile: String,
}

impl Dim {
    /// Tile loop upper bound for a full-or-partial tile.
    fn clamped_end(&self, ctx: &Ctx) -> Expr {
        let end = add(Expr::var(&self.floor), Expr::Int(self.size));
        let divisible = ctx.concrete(&self.trip).is_some_and(|t| t % self.size == 0);
        if divisible || self.size == 1 {
            end
        } else {
            min(end, self.trip.clone())
        }
    }

    /// End of the last full tile, `(trip / size) * size`.
    fn full_end(&self, ctx: &Ctx) -> Expr {
        match ctx.concrete(&self.trip) {
            Some(t) => Expr::Int(t.max(0) / self.size * self.size),
            None => mul(
                simplify(&Expr::bin(BinOp::Div, self.trip.clone(), Expr::Int(self.size))),
                Expr::Int(self.size),
            ),
        }
    }
}

pub(super) fn tile(ctx: &Ctx) -> Prep {
    let (sizes, peel) = match &ctx.step.request {
        Request::Tile { sizes, peel, .. } => (sizes.clone(), *peel),
        Request::StripMine { size, .. } => (vec![*size], TilePeel::None),
        _ => unreachable!(),
    };
    let k = sizes.len();
    let band = ctx.named_band(&ctx.step.explicit, k)?;
    ctx.rectangular(&band)?;
    let (floors, tiles) = ctx.step.produces.split_at(k.min(ctx.step.produces.len()));
    if floors.len() != k || tiles.len() != k {
        return Err("could not name the generated loops".into());
    }
    let loops: Vec<&ForLoop> = band.iter().map(|&i| ctx.node_for(i)).collect();
    let dims: Vec<Dim> = loops
        .iter()
        .zip(&sizes)
        .enumerate()
        .map(|(d, (f, &size))| Dim {
            var: f.var.clone(),
            trip: trip(f),
            size,
            floor: floors[d].clone(),
            tile: tiles[d].clone(),
        })
        .collect();
    let map: Vec<(String, Expr)> = loops
        .iter()
        .zip(&dims)
        .map(|(f, d)| (d.var.clone(), physical(f, Expr::var(&d.tile))))
        .collect();
    let inner = &loops[k - 1].body;
    let body = subst_stmts(inner, &map);
    let parallel: Vec<bool> = loops.iter().map(|f| f.parallel).collect();
    let origin = ctx.origin();

    let replacement = if peel == TilePeel::Rectangular {
        rectangular_nests(ctx, &dims, &parallel, &body)
    } else {
        let mut nest = body;
        for (d, dim) in dims.iter().enumerate().rev() {
            let lo = Expr::var(&dim.floor);
            nest = vec![new_loop(&dim.tile, lo, dim.clamped_end(ctx), 1, parallel[d], nest, &dim.tile, origin)];
        }
        for (d, dim) in dims.iter().enumerate().rev() {
            nest = vec![new_loop(&dim.floor, Expr::Int(0), dim.trip.clone(), dim.size, parallel[d], nest, &dim.floor, origin)];
        }
        nest
    };

    let tile_dims = dims
        .iter()
        .map(|d| TileDim {
            unit: d.size == 1,
            whole: ctx.concrete(&d.trip).is_some_and(|t| t <= d.size),
        })
        .collect();
    let names: Vec<String> = band.iter().map(|&i| ctx.name(i)).collect();
    let check = if k == 1 {
        // A single strip-mined loop keeps its order.
        Check::OrderPreserving
    } else {
        Check::Tile {
            band: names,
            dims: tile_dims,
            rectangular: peel == TilePeel::Rectangular,
        }
    };
    Ok(Prepared {
        path: ctx.tree.nodes[band[0]].path.clone(),
        len: 1,
        replacement,
        check,
        analyze_result: false,
        parts_loop: None,
    })
}

/// Full tiles first, then every combination of partial dimensions, outer
/// dimensions varying slowest. Nests that are provably empty are skipped.
fn rectangular_nests(ctx: &Ctx, dims: &[Dim], parallel: &[bool], body: &[Stmt]) -> Vec<Stmt> {
    let k = dims.len();
    let origin = ctx.origin();
    let mut out = Vec::new();
    let mut named = false;
    for mask in 0..(1usize << k) {
        let partial = |d: usize| mask & (1 << (k - 1 - d)) != 0;
        let empty = dims.iter().enumerate().any(|(d, dim)| {
            let full = ctx.concrete(&dim.full_end(ctx));
            let trip = ctx.concrete(&dim.trip);
            match (full, trip, partial(d)) {
                (Some(f), _, false) => f <= 0,
                (Some(f), Some(t), true) => f >= t,
                _ => false,
            }
        });
        if empty {
            continue;
        }
        let suffix = if named { Some(format!("rem{mask}")) } else { None };
        let label = |n: &str| match &suffix {
            Some(s) => format!("{n}@{s}"),
            None => n.to_string(),
        };
        let mut nest = body.to_vec();
        if suffix.is_some() {
            rename_copies(&mut nest, &format!("rem{mask}"));
        }
        for (d, dim) in dims.iter().enumerate().rev() {
            let lo = Expr::var(&dim.floor);
            let hi = if partial(d) {
                dim.trip.clone()
            } else {
                add(Expr::var(&dim.floor), Expr::Int(dim.size))
            };
            nest = vec![new_loop(&dim.tile, lo, hi, 1, parallel[d], nest, &label(&dim.tile), origin)];
        }
        for (d, dim) in dims.iter().enumerate().rev() {
            let (lo, hi) = if partial(d) {
                (dim.full_end(ctx), dim.trip.clone())
            } else {
                (Expr::Int(0), dim.full_end(ctx))
            };
            nest = vec![new_loop(&dim.floor, lo, hi, dim.size, parallel[d], nest, &label(&dim.floor), origin)];
        }
        named = true;
        out.extend(nest);
    }
    out
}

pub(super) fn stripe_mine(ctx: &Ctx) -> Prep {
    let Request::StripeMine { count, .. } = &ctx.step.request else {
        unreachable!()
    };
    let count = *count;
    let name = ctx.step.first_target();
    let (idx, f) = ctx.domain_loop(name)?;
    let t = trip(f);
    let trips = ctx
        .concrete(&t)
        .ok_or_else(|| format!("stripe-mining needs a constant trip count; loop '{name}' runs {} times", crate::emit::expr(&t)))?;
    if trips <= 0 || trips % count != 0 {
        return Err(format!("trip count {trips} of loop '{name}' is not a positive multiple of the stripe count {count}"));
    }
    let stride = trips / count;
    let [outer, inner] = ctx.step.produces.as_slice() else {
        return Err("could not name the generated loops".into());
    };
    let body = subst_stmts(&f.body, &[(f.var.clone(), physical(f, Expr::var(inner)))]);
    let origin = ctx.origin();
    let inner_loop = new_loop(inner, Expr::var(outer), t, stride, f.parallel, body, inner, origin);
    let outer_loop = new_loop(outer, Expr::Int(0), Expr::Int(stride), 1, f.parallel, vec![inner_loop], outer, origin);
    let check = if stride == 1 || count == 1 {
        Check::OrderPreserving
    } else {
        Check::Stripe {
            target: name.to_string(),
            span: stride * f.step,
        }
    };
    Ok(Prepared {
        path: ctx.tree.nodes[idx].path.clone(),
        len: 1,
        replacement: vec![outer_loop],
        check,
        analyze_result: false,
        parts_loop: None,
    })
}
