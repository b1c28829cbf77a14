//! The transformation catalog and the pipeline that applies it.
//!
//! Each directive is resolved against the current tree, prepared into a
//! replacement for a contiguous run of statements, classified, resolved
//! against its safety mode, and then either spliced in (possibly behind a
//! runtime check) or skipped with a warning.
//!
//! Loops are rewritten over their logical iteration space: iteration `t`
//! of `for (v = lb; v < ub; v += s)` is `v = lb + t * s`, for `t` in
//! `[0, trip)`.

mod collapse;
mod fission;
mod peel;
mod reorder;
mod tile;
mod unroll;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::affine::{eval_const, simplify, substitute};
use crate::ast::*;
use crate::deps::{compute_dependences, DepError, DEFAULT_MAX_ENUM};
use crate::directive::{Request, SafetyMode, TransformKind};
use crate::ir::{assign_names, build_loop_tree, stmt_at, vec_at_mut, LoopTree, Path, PlannedDirective, PlannedPipeline, ResolveError};
use crate::legality::{classify, resolve, Action, Check, RtcCondition, Verdict};

/// Largest number of body copies full unrolling will produce.
pub const MAX_UNROLL_COPIES: i64 = 4096;

#[derive(Debug, Clone)]
pub struct ApplyOptions {
    /// Mode for directives without their own modifier.
    pub mode: SafetyMode,
    /// Treat every directive as `required`.
    pub required: bool,
    pub max_enum: usize,
}

impl Default for ApplyOptions {
    fn default() -> Self {
        ApplyOptions {
            mode: SafetyMode::Default,
            required: false,
            max_enum: DEFAULT_MAX_ENUM,
        }
    }
}

/// Outcome of one pipeline step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub index: usize,
    pub kind: TransformKind,
    pub loop_name: String,
    pub line: usize,
    pub verdict: Verdict,
    pub action: Action,
    pub applied: bool,
}

impl Report {
    fn message(&self, why: &str) -> String {
        format!("{} on loop '{}' (line {}): {}", self.kind, self.loop_name, self.line, why)
    }

    /// `warning: ...` line when the transformation was skipped.
    pub fn warning(&self) -> Option<String> {
        match &self.action {
            Action::KeepOriginal(why) => Some(format!("warning: {}", self.message(why))),
            _ => None,
        }
    }

    pub fn error(&self) -> Option<String> {
        match &self.action {
            Action::HardError(why) => Some(format!("error: {}", self.message(why))),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct ApplyError {
    pub message: String,
    /// Reports of the steps up to and including the failing one.
    pub reports: Vec<Report>,
}

#[derive(Debug, Clone)]
pub struct Applied {
    pub program: Program,
    pub reports: Vec<Report>,
    /// Generated loop variable -> directive description, for annotations.
    pub origins: BTreeMap<String, String>,
}

impl Applied {
    pub fn warnings(&self) -> Vec<String> {
        self.reports.iter().filter_map(Report::warning).collect()
    }
}

/// A transformation ready to be spliced in.
pub(crate) struct Prepared {
    /// First statement of the replaced run.
    pub path: Path,
    /// Number of sibling statements replaced.
    pub len: usize,
    pub replacement: Vec<Stmt>,
    pub check: Check,
    /// Analyze dependences on the program with the replacement already in
    /// place (fusion) instead of the original.
    pub analyze_result: bool,
    /// Loop (by name) whose statement numbering [`Check::Parts`] refers to.
    pub parts_loop: Option<(String, Vec<usize>)>,
}

pub(crate) type Prep = Result<Prepared, String>;

/// Read-only view of the program at one pipeline step.
pub(crate) struct Ctx<'a> {
    pub prog: &'a Program,
    pub tree: &'a LoopTree,
    pub step: &'a PlannedDirective,
    pub params: Vec<(String, i64)>,
}

impl Ctx<'_> {
    pub fn origin(&self) -> Option<usize> {
        Some(self.step.index)
    }

    /// Node index of a named loop, which must be a `for` loop.
    pub fn for_loop(&self, name: &str) -> Result<(usize, &ForLoop), String> {
        let idx = self.tree.resolve(name).map_err(|e| e.to_string())?;
        match stmt_at(&self.prog.body, &self.tree.nodes[idx].path) {
            Some(Stmt::For(f)) => Ok((idx, f)),
            Some(Stmt::While(_)) => Err(format!(
                "{} needs a canonical for loop; '{name}' is a while loop without an iteration domain",
                self.step.directive.kind
            )),
            _ => Err(format!("'{name}' is not a loop")),
        }
    }

    /// Like [`for_loop`](Self::for_loop) and also requires bounds that do
    /// not read memory.
    pub fn domain_loop(&self, name: &str) -> Result<(usize, &ForLoop), String> {
        let (i, f) = self.for_loop(name)?;
        if f.lower.reads_memory() || f.upper.reads_memory() {
            return Err(format!("bounds of loop '{name}' depend on array contents"));
        }
        Ok((i, f))
    }

    pub fn concrete(&self, e: &Expr) -> Option<i64> {
        eval_const(e, &|v| self.params.iter().find(|(n, _)| n == v).map(|(_, x)| *x))
    }

    /// Perfectly nested band of `len` loops starting at `start`.
    pub fn band(&self, start: &str, len: usize) -> Result<Vec<usize>, String> {
        let (i, _) = self.for_loop(start)?;
        let chain = self.tree.perfect_chain(i, len);
        if chain.len() < len {
            let names: Vec<&str> = chain.iter().map(|&c| self.tree.nodes[c].name.as_str()).collect();
            return Err(format!(
                "{} needs {len} perfectly nested loops below '{start}' but only {} found ({}); the nest would first need to be made perfect (nestify), which is not supported",
                self.step.directive.kind,
                chain.len(),
                names.join(", ")
            ));
        }
        for &c in &chain {
            self.domain_loop(&self.tree.nodes[c].name)?;
        }
        Ok(chain)
    }

    /// Band named explicitly, or extended from its first loop.
    pub fn named_band(&self, names: &[String], len: usize) -> Result<Vec<usize>, String> {
        let start = names.first().ok_or("no target loop")?;
        let chain = self.band(start, len)?;
        if names.len() > 1 {
            for (k, n) in names.iter().enumerate() {
                if self.tree.nodes[chain[k]].name != *n {
                    return Err(format!(
                        "loop '{n}' is not perfectly nested at depth {} below '{start}'",
                        k + 1
                    ));
                }
            }
        }
        Ok(chain)
    }

    pub fn node_for(&self, idx: usize) -> &ForLoop {
        match stmt_at(&self.prog.body, &self.tree.nodes[idx].path) {
            Some(Stmt::For(f)) => f,
            _ => unreachable!("node {idx} is not a for loop"),
        }
    }

    pub fn name(&self, idx: usize) -> String {
        self.tree.nodes[idx].name.clone()
    }

    /// Fails when a bound of a loop in `inner` mentions a variable of
    /// `outer`.
    pub fn rectangular(&self, band: &[usize]) -> Result<(), String> {
        for (k, &i) in band.iter().enumerate() {
            let f = self.node_for(i);
            for &o in &band[..k] {
                let var = &self.node_for(o).var;
                if f.lower.mentions_var(var) || f.upper.mentions_var(var) {
                    return Err(format!(
                        "bounds of loop '{}' depend on '{}' (non-rectangular domain)",
                        self.name(i),
                        self.name(o)
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Logical trip count of a loop.
pub(crate) fn trip(f: &ForLoop) -> Expr {
    let span = Expr::bin(BinOp::Sub, f.upper.clone(), f.lower.clone());
    if f.step == 1 {
        simplify(&span)
    } else {
        simplify(&Expr::bin(
            BinOp::Div,
            Expr::bin(BinOp::Add, span, Expr::Int(f.step - 1)),
            Expr::Int(f.step),
        ))
    }
}

/// `lb + t * step` for the logical iteration `t`.
pub(crate) fn physical(f: &ForLoop, t: Expr) -> Expr {
    simplify(&Expr::bin(
        BinOp::Add,
        f.lower.clone(),
        Expr::bin(BinOp::Mul, t, Expr::Int(f.step)),
    ))
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    simplify(&Expr::bin(BinOp::Add, a, b))
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    simplify(&Expr::bin(BinOp::Sub, a, b))
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    simplify(&Expr::bin(BinOp::Mul, a, b))
}

pub(crate) fn min(a: Expr, b: Expr) -> Expr {
    simplify(&Expr::min(a, b))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn new_loop(var: &str, lower: Expr, upper: Expr, step: i64, parallel: bool, body: Vec<Stmt>, name: &str, origin: Option<usize>) -> Stmt {
    Stmt::For(ForLoop {
        var: var.to_string(),
        lower,
        upper,
        step,
        parallel,
        pragmas: Vec::new(),
        body,
        meta: LoopMeta {
            name: Some(name.to_string()),
            origin,
        },
    })
}

pub(crate) fn subst_expr(e: &Expr, map: &[(String, Expr)]) -> Expr {
    substitute(e, map)
}

/// Substitutes variables in every expression of the statements, including
/// statement tags.
pub(crate) fn subst_stmts(stmts: &[Stmt], map: &[(String, Expr)]) -> Vec<Stmt> {
    stmts.iter().map(|s| subst_stmt(s, map)).collect()
}

fn subst_stmt(s: &Stmt, map: &[(String, Expr)]) -> Stmt {
    let e = |x: &Expr| subst_expr(x, map);
    match s {
        Stmt::Assign(a) => Stmt::Assign(Assign {
            id: a.id,
            iter: a.iter.iter().map(e).collect(),
            target: ArrayRef {
                array: a.target.array.clone(),
                indices: a.target.indices.iter().map(e).collect(),
            },
            op: a.op,
            value: e(&a.value),
        }),
        Stmt::For(f) => Stmt::For(ForLoop {
            var: f.var.clone(),
            lower: e(&f.lower),
            upper: e(&f.upper),
            step: f.step,
            parallel: f.parallel,
            pragmas: f.pragmas.clone(),
            body: subst_stmts(&f.body, map),
            meta: f.meta.clone(),
        }),
        Stmt::While(w) => Stmt::While(WhileLoop {
            cond: e(&w.cond),
            pragmas: w.pragmas.clone(),
            body: subst_stmts(&w.body, map),
        }),
        Stmt::If(i) => Stmt::If(IfStmt {
            cond: e(&i.cond),
            then_body: subst_stmts(&i.then_body, map),
            else_body: i.else_body.as_ref().map(|b| subst_stmts(b, map)),
        }),
        Stmt::Block(b) => Stmt::Block(subst_stmts(b, map)),
    }
}

/// Marks loops inside copied code so their names stay unique.
pub(crate) fn rename_copies(stmts: &mut [Stmt], suffix: &str) {
    crate::ir::for_each_for_mut(stmts, &mut |f| {
        if let Some(n) = &f.meta.name {
            f.meta.name = Some(format!("{n}@{suffix}"));
        }
    });
}

fn prepare(ctx: &Ctx) -> Prep {
    match &ctx.step.request {
        Request::Tile { .. } | Request::StripMine { .. } => tile::tile(ctx),
        Request::StripeMine { .. } => tile::stripe_mine(ctx),
        Request::Unroll { .. } => unroll::unroll(ctx),
        Request::UnrollAndJam { .. } => unroll::unroll_and_jam(ctx),
        Request::Interchange { .. } => reorder::interchange(ctx),
        Request::Reverse { .. } => reorder::reverse(ctx),
        Request::Parallel => reorder::parallel(ctx),
        Request::Peel { .. } => peel::peel(ctx),
        Request::Collapse { .. } => collapse::collapse(ctx),
        Request::Distribute { .. } => fission::distribute(ctx),
        Request::Fuse { .. } => fission::fuse(ctx),
    }
}

/// Path of the outermost `for` loop enclosing `path` without crossing a
/// `while` loop.
fn nest_root(body: &[Stmt], path: &[usize]) -> Path {
    let mut root = path.to_vec();
    for k in (1..path.len()).rev() {
        match stmt_at(body, &path[..k]) {
            Some(Stmt::For(_)) => root = path[..k].to_vec(),
            Some(Stmt::While(_)) => break,
            _ => {}
        }
    }
    root
}

fn count_assigns_before(root: &Stmt, target: &Stmt) -> Option<usize> {
    fn go(s: &Stmt, target: *const Stmt, n: &mut usize) -> bool {
        if std::ptr::eq(s, target) {
            return true;
        }
        if let Stmt::Assign(_) = s {
            *n += 1;
        }
        s.child_lists().into_iter().any(|l| l.iter().any(|c| go(c, target, n)))
    }
    let mut n = 0;
    go(root, target, &mut n).then_some(n)
}

fn splice(body: &mut Vec<Stmt>, path: &[usize], len: usize, with: Vec<Stmt>) {
    let (list, idx) = vec_at_mut(body, path).expect("valid splice path");
    list.splice(idx..idx + len, with);
}

fn verdict_for(ctx: &Ctx, prepared: &Prepared, max_enum: usize) -> Verdict {
    if prepared.check == Check::OrderPreserving {
        return Verdict::AlwaysValid;
    }
    let mut candidate;
    let prog: &Program = if prepared.analyze_result {
        candidate = ctx.prog.clone();
        splice(&mut candidate.body, &prepared.path, prepared.len, prepared.replacement.clone());
        &candidate
    } else {
        ctx.prog
    };
    let root_path = nest_root(&prog.body, &prepared.path);
    let Some(root) = stmt_at(&prog.body, &root_path) else {
        return Verdict::Impossible("transformed loop not found".into());
    };
    let deps = match compute_dependences(prog, std::slice::from_ref(root), max_enum) {
        Ok(d) => d,
        Err(DepError::WhileInNest) => {
            return Verdict::Impossible("the loop nest contains a while loop, so dependences cannot be analyzed".into())
        }
        Err(e) => return Verdict::Impossible(format!("dependence analysis failed: {e}")),
    };
    let mut check = prepared.check.clone();
    if let (Check::Parts { parts, .. }, Some((loop_name, local))) = (&mut check, &prepared.parts_loop) {
        let tree = build_loop_tree(prog);
        let Some(node) = tree.find(loop_name) else {
            return Verdict::Impossible(format!("loop '{loop_name}' not found"));
        };
        let target = stmt_at(&prog.body, &node.path).unwrap();
        let Some(offset) = count_assigns_before(root, target) else {
            return Verdict::Impossible("loop outside its nest".into());
        };
        let total = root.assigns().len();
        *parts = vec![0; total];
        for (k, p) in local.iter().enumerate() {
            parts[offset + k] = *p;
        }
    }
    classify(&check, &deps)
}

/// Wraps the transformed statements in a disjointness check, or extends
/// the check the statements already sit in.
fn guard(body: &mut Vec<Stmt>, prepared: Prepared, cond: &RtcCondition) {
    let (last, prefix) = prepared.path.split_last().expect("non-empty path");
    if !prefix.is_empty() {
        if let Some(Stmt::If(i)) = crate::ir::stmt_at_mut(body, prefix) {
            let in_then = *last < i.then_body.len();
            if in_then && i.then_body.len() == prepared.len {
                if let Some(mut existing) = RtcCondition::from_expr(&i.cond) {
                    for (a, b) in &cond.pairs {
                        existing.add(a, b);
                    }
                    i.cond = existing.to_expr();
                    i.then_body = prepared.replacement;
                    return;
                }
            }
        }
    }
    let (list, idx) = vec_at_mut(body, &prepared.path).expect("valid path");
    let mut original: Vec<Stmt> = list[idx..idx + prepared.len].to_vec();
    rename_copies(&mut original, "orig");
    let wrapped = Stmt::If(IfStmt {
        cond: cond.to_expr(),
        then_body: prepared.replacement,
        else_body: Some(original),
    });
    list.splice(idx..idx + prepared.len, [wrapped]);
}

fn unresolved_reason(plan: &PlannedPipeline, applied: &[bool], err: &ResolveError) -> String {
    if let ResolveError::NotFound(name) = err {
        if let Some(&by) = plan.producers.get(name) {
            if !applied.get(by).copied().unwrap_or(false) {
                let d = &plan.steps[by].directive;
                return format!(
                    "loop '{name}' was not produced because directive #{by} ({} at line {}) was not applied",
                    d.kind, d.line
                );
            }
        }
    }
    err.to_string()
}

/// Runs the planned pipeline. Pragmas are dropped from the output.
pub fn apply_pipeline(source: &Program, plan: &PlannedPipeline, opts: &ApplyOptions) -> Result<Applied, ApplyError> {
    let mut prog = source.without_pragmas();
    assign_names(&mut prog);
    let params = prog.known_params();
    let mut reports = Vec::new();
    let mut applied = Vec::new();
    for step in &plan.steps {
        let tree = build_loop_tree(&prog);
        let d = &step.directive;
        let mode = d.mode.unwrap_or(opts.mode);
        let required = d.required || opts.required;
        let mut names: Vec<&String> = step.explicit.iter().collect();
        if let Request::Interchange { permutation } = &step.request {
            names.extend(permutation);
        }
        if let Request::Fuse { .. } = &step.request {
            names.extend(&step.targets);
        }
        let missing = names
            .iter()
            .find_map(|n| tree.resolve(n).err())
            .map(|e| unresolved_reason(plan, &applied, &e));
        let ctx = Ctx {
            prog: &prog,
            tree: &tree,
            step,
            params: params.clone(),
        };
        let prepared = match missing {
            Some(reason) => Err(reason),
            None => prepare(&ctx),
        };
        let (verdict, prepared) = match prepared {
            Ok(p) => (verdict_for(&ctx, &p, opts.max_enum), Some(p)),
            Err(reason) => (Verdict::Impossible(reason), None),
        };
        let action = resolve(&verdict, mode, required);
        let mut report = Report {
            index: step.index,
            kind: d.kind,
            loop_name: step.first_target().to_string(),
            line: d.line,
            verdict,
            action: action.clone(),
            applied: false,
        };
        match (action, prepared) {
            (Action::Transform, Some(p)) => {
                splice(&mut prog.body, &p.path, p.len, p.replacement);
                report.applied = true;
            }
            (Action::TransformWithRtc(cond), Some(p)) => {
                guard(&mut prog.body, p, &cond);
                report.applied = true;
            }
            (Action::HardError(_), _) => {
                let message = report.error().unwrap_or_default();
                reports.push(report);
                return Err(ApplyError { message, reports });
            }
            _ => {}
        }
        applied.push(report.applied);
        reports.push(report);
    }
    let mut origins = BTreeMap::new();
    let tree = build_loop_tree(&prog);
    for n in &tree.nodes {
        if let (crate::ir::Origin::Generated(d), crate::ir::LoopKind::For { var, .. }) = (n.origin, &n.kind) {
            origins
                .entry(var.clone())
                .or_insert_with(|| plan.steps[d].describe());
        }
    }
    Ok(Applied {
        program: prog,
        reports,
        origins,
    })
}

/// Parses nothing; plans and applies the directives already attached to
/// `source`.
pub fn transform(source: &Program, opts: &ApplyOptions) -> Result<Applied, TransformError> {
    let tree = build_loop_tree(source);
    let stacks = crate::ir::collect_stacks(source, &tree);
    let plan = crate::ir::plan_pipeline(source, &tree, &stacks)?;
    Ok(apply_pipeline(source, &plan, opts)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error(transparent)]
    Plan(#[from] crate::ir::PlanError),
    #[error(transparent)]
    Apply(#[from] ApplyError),
}
