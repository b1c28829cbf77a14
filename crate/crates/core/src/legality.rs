//! Legality verdicts and their resolution under the safety modes.
//!
//! A transformation is described by how it reorders the iterations of the
//! loops it touches ([`Check`]). Every dependence is expanded into concrete
//! sign vectors (`*` becomes `-`, `0` or `+`, keeping only vectors whose
//! source runs first) and mapped onto the new loop order; a dependence is
//! violated when some image is lexicographically negative.

use std::fmt;

use crate::ast::{BinOp, Expr};
use crate::deps::{Dependence, DependenceSet, Dist};
use crate::directive::SafetyMode;

/// Conjunction of array-disjointness tests.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RtcCondition {
    pub pairs: Vec<(String, String)>,
}

impl RtcCondition {
    pub fn add(&mut self, a: &str, b: &str) {
        let p = (a.to_string(), b.to_string());
        if !self.pairs.contains(&p) {
            self.pairs.push(p);
        }
    }

    pub fn to_expr(&self) -> Expr {
        let mut it = self.pairs.iter().map(|(a, b)| Expr::Disjoint(a.clone(), b.clone()));
        let first = it.next().unwrap_or(Expr::Int(1));
        it.fold(first, |acc, e| Expr::bin(BinOp::And, acc, e))
    }

    /// Reads back a condition produced by [`to_expr`](Self::to_expr).
    pub fn from_expr(e: &Expr) -> Option<RtcCondition> {
        let mut out = RtcCondition::default();
        fn go(e: &Expr, out: &mut RtcCondition) -> bool {
            match e {
                Expr::Disjoint(a, b) => {
                    out.add(a, b);
                    true
                }
                Expr::Binary(BinOp::And, l, r) => go(l, out) && go(r, out),
                _ => false,
            }
        }
        go(e, &mut out).then_some(out)
    }
}

impl fmt::Display for RtcCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::emit::expr(&self.to_expr()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub dep: Dependence,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = &self.dep;
        let v: Vec<String> = d.distance.iter().map(|x| x.to_string()).collect();
        write!(
            f,
            "{} dependence {}->{} ({}) on {} would be violated",
            d.kind,
            d.src.id,
            d.sink.id,
            v.join(","),
            d.array
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    AlwaysValid,
    ValidWithRtc(RtcCondition),
    Invalid(Witness),
    Impossible(String),
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::AlwaysValid => "always valid",
            Verdict::ValidWithRtc(_) => "valid with runtime check",
            Verdict::Invalid(_) => "invalid",
            Verdict::Impossible(_) => "impossible",
        }
    }

    pub fn detail(&self) -> String {
        match self {
            Verdict::AlwaysValid => "no dependence is violated".into(),
            Verdict::ValidWithRtc(c) => format!("valid only if {c}"),
            Verdict::Invalid(w) => w.to_string(),
            Verdict::Impossible(r) => r.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Transform,
    TransformWithRtc(RtcCondition),
    KeepOriginal(String),
    HardError(String),
}

/// Table of outcomes per verdict and safety mode; `required` turns every
/// kept-original warning into a hard error.
pub fn resolve(v: &Verdict, mode: SafetyMode, required: bool) -> Action {
    let keep = |why: String| {
        if required {
            Action::HardError(why)
        } else {
            Action::KeepOriginal(why)
        }
    };
    let why = format!("{}: {}", v.label(), v.detail());
    match (v, mode) {
        (Verdict::AlwaysValid, _) => Action::Transform,
        (Verdict::ValidWithRtc(_), SafetyMode::Default) => Action::Transform,
        (Verdict::ValidWithRtc(c), SafetyMode::Fallback) => Action::TransformWithRtc(c.clone()),
        (Verdict::ValidWithRtc(_), SafetyMode::Force) => {
            keep(format!("{why}; force mode does not accept a runtime check"))
        }
        (Verdict::Invalid(_), SafetyMode::Default) => Action::Transform,
        (Verdict::Invalid(_), SafetyMode::Fallback | SafetyMode::Force) => keep(why),
        (Verdict::Impossible(_), _) => keep(why),
    }
}

/// One loop of a tiled band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileDim {
    /// Tile size 1: the floor loop carries everything.
    pub unit: bool,
    /// The tile covers the whole extent: the floor loop runs once.
    pub whole: bool,
}

/// How a transformation reorders iterations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Check {
    /// Execution order is unchanged.
    OrderPreserving,
    /// `band` (outermost first) is reordered to `order`.
    Permute { band: Vec<String>, order: Vec<String> },
    Reverse { target: String },
    /// Iterations of `target` may run in any order.
    Parallel { target: String },
    /// Distances of `target` that are multiples of `span` keep their order.
    Stripe { target: String, span: i64 },
    Tile {
        band: Vec<String>,
        dims: Vec<TileDim>,
        /// Partial tiles run after all full tiles.
        rectangular: bool,
    },
    /// `target` is strip-mined by `span` (factor times step) and its point
    /// loop moved inside `chain`'s innermost loop.
    UnrollAndJam {
        target: String,
        chain: Vec<String>,
        span: i64,
    },
    /// All iterations of part `k` run before those of part `k + 1`; `parts`
    /// gives the part of each statement site below `target`.
    Parts { target: String, parts: Vec<usize> },
}

/// Sign-level verdict from the dependence set.
pub fn classify(check: &Check, deps: &DependenceSet) -> Verdict {
    if *check == Check::OrderPreserving {
        return Verdict::AlwaysValid;
    }
    if let Some(d) = deps.deps.iter().find(|d| violates(check, d)) {
        return Verdict::Invalid(Witness { dep: d.clone() });
    }
    let mut cond = RtcCondition::default();
    for a in &deps.alias {
        if violates(check, &a.dep) {
            cond.add(&a.pair.0, &a.pair.1);
        }
    }
    if cond.pairs.is_empty() {
        Verdict::AlwaysValid
    } else {
        Verdict::ValidWithRtc(cond)
    }
}

/// Concrete sign vectors a dependence stands for, keeping only those with
/// the source first: lexicographically positive, or zero with the source
/// statement textually before the sink.
fn expansions(d: &Dependence) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for c in &d.distance {
        let choices: Vec<i64> = match c {
            Dist::Const(v) => vec![*v],
            Dist::Star => vec![-1, 0, 1],
        };
        out = out
            .into_iter()
            .flat_map(|prefix| {
                choices.iter().map(move |&x| {
                    let mut v = prefix.clone();
                    v.push(x);
                    v
                })
            })
            .collect();
    }
    out.retain(|v| match lex_sign(v) {
        0 => d.src.site < d.sink.site,
        s => s > 0,
    });
    out
}

fn lex_sign(v: &[i64]) -> i64 {
    v.iter().find(|x| **x != 0).map_or(0, |x| x.signum())
}

fn violates(check: &Check, d: &Dependence) -> bool {
    let star_at = |name: &str| d.at(name) == Some(Dist::Star);
    expansions(d).iter().any(|v| match check {
        Check::OrderPreserving => false,
        Check::Permute { band, order } => {
            let Some(pos) = positions(d, band) else { return false };
            let mut w = v.clone();
            for (k, name) in order.iter().enumerate() {
                let from = band.iter().position(|b| b == name).unwrap();
                w[pos[k]] = v[pos[from]];
            }
            lex_sign(&w) < 0
        }
        Check::Reverse { target } => {
            let Some(k) = d.loops.iter().position(|l| l == target) else { return false };
            let mut w = v.clone();
            w[k] = -w[k];
            lex_sign(&w) < 0
        }
        Check::Parallel { target } => {
            let Some(k) = d.loops.iter().position(|l| l == target) else { return false };
            v[..k].iter().all(|x| *x == 0) && v[k] != 0
        }
        Check::Stripe { target, span } => {
            let Some(k) = d.loops.iter().position(|l| l == target) else { return false };
            v[..k].iter().all(|x| *x == 0) && v[k] != 0 && (star_at(target) || v[k] % span != 0)
        }
        Check::Tile { band, dims, rectangular } => {
            let Some(pos) = positions(d, band) else { return false };
            if v[..pos[0]].iter().any(|x| *x != 0) {
                return false;
            }
            let mut slots = Vec::new();
            let levels = if *rectangular { 3 } else { 2 };
            for level in 0..levels {
                for (i, dim) in dims.iter().enumerate() {
                    let kind = match (levels - level, dim.unit, dim.whole) {
                        // tile level
                        (1, true, _) => Slot::Zero,
                        (1, false, _) => Slot::Last,
                        // floor level
                        (2, _, true) => Slot::Zero,
                        (2, true, false) => Slot::Last,
                        (2, false, false) => Slot::Cand,
                        // box level (full tiles before partial ones)
                        (_, true, _) | (_, _, true) => Slot::Zero,
                        _ => Slot::Cand,
                    };
                    slots.push((i, kind));
                }
            }
            let band_vals: Vec<i64> = pos.iter().map(|&p| v[p]).collect();
            let inner: Vec<i64> = v[pos[pos.len() - 1] + 1..].to_vec();
            can_be_negative(&slots, &band_vals, &inner)
        }
        Check::UnrollAndJam { target, chain, span } => {
            let Some(pos) = positions(d, chain) else { return false };
            if v[..pos[0]].iter().any(|x| *x != 0) {
                return false;
            }
            // Distances at least one strip apart stay with the floor loop.
            let far = !star_at(target) && v[pos[0]].abs() >= *span;
            let mut slots = vec![(0, if far { Slot::Last } else { Slot::Cand })];
            for i in 1..chain.len() {
                slots.push((i, Slot::Last));
            }
            slots.push((0, if far { Slot::Zero } else { Slot::Last }));
            let band_vals: Vec<i64> = pos.iter().map(|&p| v[p]).collect();
            let inner: Vec<i64> = v[pos[pos.len() - 1] + 1..].to_vec();
            can_be_negative(&slots, &band_vals, &inner)
        }
        Check::Parts { target, parts } => {
            let Some(k) = d.loops.iter().position(|l| l == target) else { return false };
            if v[..k].iter().any(|x| *x != 0) {
                return false;
            }
            let (Some(ps), Some(pk)) = (parts.get(d.src.site), parts.get(d.sink.site)) else {
                return false;
            };
            ps > pk
        }
    })
}

/// Indices of `band` within the dependence's loops, when it encloses both
/// ends.
fn positions(d: &Dependence, band: &[String]) -> Option<Vec<usize>> {
    band.iter().map(|b| d.loops.iter().position(|l| l == b)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    /// Always zero.
    Zero,
    /// May carry the component's sign first, or stay zero.
    Cand,
    /// Must carry the sign if no earlier slot did.
    Last,
}

/// Whether the new vector can be lexicographically negative. Every band
/// component is spread over its slots: zeros until one slot takes the
/// component's sign, arbitrary values afterwards.
fn can_be_negative(slots: &[(usize, Slot)], band: &[i64], inner: &[i64]) -> bool {
    fn go(k: usize, slots: &[(usize, Slot)], band: &[i64], shown: &mut Vec<bool>, inner: &[i64]) -> bool {
        if k == slots.len() {
            // The whole band part is zero; the inner loops decide.
            return lex_sign(inner) < 0;
        }
        let (c, slot) = slots[k];
        let sign = band[c].signum();
        let mut options: Vec<(i64, bool)> = Vec::new();
        match (slot, shown[c], sign) {
            (Slot::Zero, _, _) | (_, false, 0) => options.push((0, false)),
            (_, true, _) => options.extend([(-1, true), (0, true), (1, true)]),
            (Slot::Cand, false, s) => options.extend([(0, false), (s, true)]),
            (Slot::Last, false, s) => options.push((s, true)),
        }
        for (val, now_shown) in options {
            if val < 0 {
                return true;
            }
            if val > 0 {
                continue;
            }
            let before = shown[c];
            shown[c] = now_shown;
            let neg = go(k + 1, slots, band, shown, inner);
            shown[c] = before;
            if neg {
                return true;
            }
        }
        false
    }
    go(0, slots, band, &mut vec![false; band.len()], inner)
}
