//! Named loop tree and pipeline planning.
//!
//! Loops are named after their induction variable; repeated names get
//! `#2`, `#3`, ... in preorder. `while` loops are named `while`, `while#2`.
//! Once names are assigned they travel with the loop in [`LoopMeta`], so a
//! transformed tree keeps the names of untouched loops. Names containing
//! `@` mark internal copies (runtime-check fallbacks, peeled or partial
//! nests, unrolled copies) and cannot be written in a directive.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write;

use thiserror::Error;

use crate::ast::*;
use crate::directive::{Directive, PeelSpec, Request, UnrollFactor};
use crate::emit::expr;

/// Position of a statement: index into the top-level body, then into the
/// concatenated child lists of each enclosing statement.
pub type Path = Vec<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Source,
    /// Produced by the pipeline directive with this index.
    Generated(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoopKind {
    For {
        var: String,
        lower: Expr,
        upper: Expr,
        step: i64,
        parallel: bool,
    },
    While,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopNode {
    pub name: String,
    pub kind: LoopKind,
    pub path: Path,
    pub origin: Origin,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub depth: usize,
    /// The body is exactly one `for` loop.
    pub perfect_child: Option<usize>,
}

impl LoopNode {
    pub fn is_while(&self) -> bool {
        self.kind == LoopKind::While
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopHandle {
    pub name: String,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("no loop named '{0}'")]
    NotFound(String),
    #[error("loop '{name}' was replaced by directive #{by}")]
    Replaced { name: String, by: usize },
    #[error("loop name '{0}' is ambiguous")]
    Duplicate(String),
}

/// Loops of a program in preorder.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LoopTree {
    pub nodes: Vec<LoopNode>,
}

impl LoopTree {
    pub fn find(&self, name: &str) -> Option<&LoopNode> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Unique lookup.
    pub fn resolve(&self, name: &str) -> Result<usize, ResolveError> {
        let mut hits = self.nodes.iter().enumerate().filter(|(_, n)| n.name == name);
        match (hits.next(), hits.next()) {
            (Some((i, _)), None) => Ok(i),
            (None, _) => Err(ResolveError::NotFound(name.to_string())),
            _ => Err(ResolveError::Duplicate(name.to_string())),
        }
    }

    /// `start` followed by perfectly nested descendants, at most `len`
    /// loops.
    pub fn perfect_chain(&self, start: usize, len: usize) -> Vec<usize> {
        let mut chain = vec![start];
        while chain.len() < len {
            match self.nodes[*chain.last().unwrap()].perfect_child {
                Some(c) => chain.push(c),
                None => break,
            }
        }
        chain
    }

    /// Indented listing, one loop per line: `name [lb,ub) step=k origin`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            for _ in 0..n.depth {
                out.push_str("  ");
            }
            let origin = match n.origin {
                Origin::Source => "source".to_string(),
                Origin::Generated(d) => format!("generated(d{d})"),
            };
            match &n.kind {
                LoopKind::For {
                    lower, upper, step, parallel, ..
                } => {
                    let _ = write!(out, "{} [{},{}) step={} {}", n.name, expr(lower), expr(upper), step, origin);
                    if *parallel {
                        out.push_str(" parallel");
                    }
                }
                LoopKind::While => {
                    let _ = write!(out, "{} [?,?) step=? {}", n.name, origin);
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the loop tree, using names already stored in loop metadata and
/// deriving the rest from induction variables.
pub fn build_loop_tree(p: &Program) -> LoopTree {
    let mut b = TreeBuilder {
        tree: LoopTree::default(),
        counts: HashMap::new(),
    };
    b.walk(&p.body, &mut Vec::new(), None, 0);
    b.tree
}

struct TreeBuilder {
    tree: LoopTree,
    counts: HashMap<String, usize>,
}

impl TreeBuilder {
    fn fresh(&mut self, base: &str) -> String {
        let c = self.counts.entry(base.to_string()).or_insert(0);
        *c += 1;
        if *c == 1 {
            base.to_string()
        } else {
            format!("{base}#{c}")
        }
    }

    fn walk(&mut self, list: &[Stmt], path: &mut Path, parent: Option<usize>, depth: usize) {
        for (i, s) in list.iter().enumerate() {
            path.push(i);
            self.stmt(s, path, parent, depth);
            path.pop();
        }
    }

    fn stmt(&mut self, s: &Stmt, path: &mut Path, parent: Option<usize>, depth: usize) {
        let (name, kind, origin) = match s {
            Stmt::For(f) => {
                let name = match &f.meta.name {
                    Some(n) => n.clone(),
                    None => self.fresh(&f.var),
                };
                let origin = f.meta.origin.map_or(Origin::Source, Origin::Generated);
                let kind = LoopKind::For {
                    var: f.var.clone(),
                    lower: f.lower.clone(),
                    upper: f.upper.clone(),
                    step: f.step,
                    parallel: f.parallel,
                };
                (name, kind, origin)
            }
            Stmt::While(_) => (self.fresh("while"), LoopKind::While, Origin::Source),
            other => {
                let mut offset = 0;
                for l in other.child_lists() {
                    for (i, c) in l.iter().enumerate() {
                        path.push(offset + i);
                        self.stmt(c, path, parent, depth);
                        path.pop();
                    }
                    offset += l.len();
                }
                return;
            }
        };
        let idx = self.tree.nodes.len();
        self.tree.nodes.push(LoopNode {
            name,
            kind,
            path: path.clone(),
            origin,
            parent,
            children: Vec::new(),
            depth,
            perfect_child: None,
        });
        if let Some(p) = parent {
            self.tree.nodes[p].children.push(idx);
        }
        let body = match s {
            Stmt::For(f) => &f.body,
            Stmt::While(w) => &w.body,
            _ => unreachable!(),
        };
        self.walk(body, path, Some(idx), depth + 1);
        if let (Stmt::For(_), [Stmt::For(_)]) = (s, body.as_slice()) {
            self.tree.nodes[idx].perfect_child = self.tree.nodes[idx].children.first().copied();
        }
    }
}

/// Stores the derived names into every `for` loop's metadata.
pub fn assign_names(p: &mut Program) {
    let tree = build_loop_tree(p);
    for n in &tree.nodes {
        if let Some(Stmt::For(f)) = stmt_at_mut(&mut p.body, &n.path) {
            f.meta.name = Some(n.name.clone());
        }
    }
}

pub fn stmt_at<'a>(body: &'a [Stmt], path: &[usize]) -> Option<&'a Stmt> {
    let (first, rest) = path.split_first()?;
    let mut s = body.get(*first)?;
    for &i in rest {
        s = child_at(s, i)?;
    }
    Some(s)
}

fn child_at(s: &Stmt, mut i: usize) -> Option<&Stmt> {
    for l in s.child_lists() {
        if i < l.len() {
            return l.get(i);
        }
        i -= l.len();
    }
    None
}

pub fn stmt_at_mut<'a>(body: &'a mut [Stmt], path: &[usize]) -> Option<&'a mut Stmt> {
    let (list, idx) = list_at_mut(body, path)?;
    list.get_mut(idx)
}

/// The statement list holding the statement at `path`, and its index
/// there.
pub fn list_at_mut<'a>(body: &'a mut [Stmt], path: &[usize]) -> Option<(&'a mut [Stmt], usize)> {
    let (last, prefix) = path.split_last()?;
    if prefix.is_empty() {
        return (*last < body.len()).then_some((body, *last));
    }
    let parent = stmt_at_mut(body, prefix)?;
    let mut i = *last;
    for l in parent.child_lists_mut() {
        if i < l.len() {
            return Some((l.as_mut_slice(), i));
        }
        i -= l.len();
    }
    None
}

/// Like [`list_at_mut`] but yields the owning vector so statements can be
/// spliced in.
pub fn vec_at_mut<'a>(body: &'a mut Vec<Stmt>, path: &[usize]) -> Option<(&'a mut Vec<Stmt>, usize)> {
    let (last, prefix) = path.split_last()?;
    if prefix.is_empty() {
        return (*last < body.len()).then_some((body, *last));
    }
    let parent = stmt_at_mut(body, prefix)?;
    let mut i = *last;
    for l in parent.child_lists_mut() {
        if i < l.len() {
            return Some((l, i));
        }
        i -= l.len();
    }
    None
}

pub fn for_each_for_mut(body: &mut [Stmt], f: &mut dyn FnMut(&mut ForLoop)) {
    for s in body {
        if let Stmt::For(l) = s {
            f(l);
        }
        for l in s.child_lists_mut() {
            for_each_for_mut(l, f);
        }
    }
}

/// Every variable name bound by a `for` loop.
pub fn loop_vars(body: &[Stmt]) -> BTreeSet<String> {
    fn go(body: &[Stmt], out: &mut BTreeSet<String>) {
        for s in body {
            if let Stmt::For(f) = s {
                out.insert(f.var.clone());
            }
            for l in s.child_lists() {
                go(l, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(body, &mut out);
    out
}

/// Default names for generated loops are derived from this.
pub fn base_name(loop_name: &str) -> String {
    loop_name.replace('#', "_")
}

/// The directive stack attached to one loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectiveStack {
    pub loop_name: String,
    /// Bottom-up: index 0 applies first.
    pub directives: Vec<Directive>,
}

/// Stacks in loop preorder.
pub fn collect_stacks(p: &Program, tree: &LoopTree) -> Vec<DirectiveStack> {
    tree.nodes
        .iter()
        .filter_map(|n| {
            let pragmas = match stmt_at(&p.body, &n.path)? {
                Stmt::For(f) => &f.pragmas,
                Stmt::While(w) => &w.pragmas,
                _ => return None,
            };
            (!pragmas.is_empty()).then(|| DirectiveStack {
                loop_name: n.name.clone(),
                directives: pragmas.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct PlanError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedDirective {
    pub index: usize,
    pub directive: Directive,
    pub request: Request,
    /// Loop the pragma stack was written on.
    pub attached: String,
    /// Resolved target names, outermost first. For multi-loop kinds this is
    /// the whole band when it could be determined while planning; the
    /// transform re-derives it from the actual tree.
    pub targets: Vec<String>,
    /// Names as written in `loop(...)`, or the implicit head.
    pub explicit: Vec<String>,
    pub consumes: Vec<String>,
    pub produces: Vec<String>,
}

impl PlannedDirective {
    pub fn first_target(&self) -> &str {
        self.targets.first().map(String::as_str).unwrap_or(&self.attached)
    }

    /// Short description used in origin comments, e.g. `tile(i,j)`.
    pub fn describe(&self) -> String {
        format!("{}({})", self.directive.kind.keyword(), self.targets.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PlannedPipeline {
    pub steps: Vec<PlannedDirective>,
    /// Generated name -> producing step.
    pub producers: BTreeMap<String, usize>,
}

/// Name resolution state while planning.
#[derive(Debug, Clone, Default)]
pub struct NameState {
    live: BTreeMap<String, Origin>,
    consumed: BTreeMap<String, usize>,
    taken: BTreeSet<String>,
    /// Symbolic perfect child of each live loop, when known.
    child: HashMap<String, Option<String>>,
    /// Next sibling statement when it is a loop (source loops only).
    sibling: HashMap<String, Option<String>>,
    /// Number of top-level statements in the body (source loops only).
    body_len: HashMap<String, usize>,
}

pub fn resolve_loop_name(state: &NameState, name: &str) -> Result<LoopHandle, ResolveError> {
    if let Some(o) = state.live.get(name) {
        return Ok(LoopHandle {
            name: name.to_string(),
            origin: *o,
        });
    }
    match state.consumed.get(name) {
        Some(&by) => Err(ResolveError::Replaced {
            name: name.to_string(),
            by,
        }),
        None => Err(ResolveError::NotFound(name.to_string())),
    }
}

impl NameState {
    pub fn from_tree(p: &Program, tree: &LoopTree) -> NameState {
        let mut s = NameState::default();
        s.taken.extend(p.global_names());
        s.taken.extend(loop_vars(&p.body));
        for (i, n) in tree.nodes.iter().enumerate() {
            s.live.insert(n.name.clone(), n.origin);
            s.taken.insert(n.name.clone());
            s.child
                .insert(n.name.clone(), n.perfect_child.map(|c| tree.nodes[c].name.clone()));
            let sibling = next_sibling_loop(p, tree, i);
            s.sibling.insert(n.name.clone(), sibling);
            if let Some(Stmt::For(f)) = stmt_at(&p.body, &n.path) {
                s.body_len.insert(n.name.clone(), f.body.len());
            }
        }
        s
    }

    fn chain(&self, start: &str, len: usize) -> Vec<String> {
        let mut out = vec![start.to_string()];
        while out.len() < len {
            match self.child.get(out.last().unwrap()).cloned().flatten() {
                Some(c) => out.push(c),
                None => break,
            }
        }
        out
    }

    fn replace_child_refs(&mut self, old: &str, new: Option<&str>) {
        for v in self.child.values_mut() {
            if v.as_deref() == Some(old) {
                *v = new.map(str::to_string);
            }
        }
    }
}

fn next_sibling_loop(p: &Program, tree: &LoopTree, idx: usize) -> Option<String> {
    let path = &tree.nodes[idx].path;
    let (last, prefix) = path.split_last()?;
    let mut next = prefix.to_vec();
    next.push(last + 1);
    match stmt_at(&p.body, &next)? {
        Stmt::For(_) | Stmt::While(_) => tree.nodes.iter().find(|n| n.path == next).map(|n| n.name.clone()),
        _ => None,
    }
}

/// Orders every directive (loops in preorder, each stack bottom-up) and
/// checks that each one names loops that exist at its position.
pub fn plan_pipeline(p: &Program, tree: &LoopTree, stacks: &[DirectiveStack]) -> Result<PlannedPipeline, PlanError> {
    let mut state = NameState::from_tree(p, tree);
    let mut plan = PlannedPipeline::default();
    for stack in stacks {
        let mut head = Some(stack.loop_name.clone());
        for d in &stack.directives {
            let step = plan_one(&mut state, &plan, d, &stack.loop_name, &mut head, plan.steps.len())?;
            for name in &step.produces {
                plan.producers.insert(name.clone(), step.index);
            }
            plan.steps.push(step);
        }
    }
    Ok(plan)
}

fn plan_one(
    state: &mut NameState,
    plan: &PlannedPipeline,
    d: &Directive,
    attached: &str,
    head: &mut Option<String>,
    index: usize,
) -> Result<PlannedDirective, PlanError> {
    let err = |message: String| PlanError { line: d.line, message };
    let request = d.request().map_err(|e| err(e.to_string()))?;
    let explicit: Vec<String> = if d.targets.is_empty() {
        match head {
            Some(h) => vec![h.clone()],
            None => {
                return Err(err(format!(
                    "{} has no loop(...) target and the loop it follows was already replaced (ambiguous empty target)",
                    d.kind
                )))
            }
        }
    } else {
        d.targets.clone()
    };
    let resolve = |name: &str| -> Result<LoopHandle, PlanError> {
        resolve_loop_name(state, name).map_err(|e| {
            let mut message = e.to_string();
            if let ResolveError::Replaced { by, .. } = &e {
                message = format!(
                    "loop '{name}' was replaced by directive #{by} ({} at line {})",
                    plan.steps[*by].directive.kind, plan.steps[*by].directive.line
                );
            }
            err(message)
        })
    };
    for t in &explicit {
        resolve(t)?;
    }
    let single = |what: &str| -> Result<String, PlanError> {
        if explicit.len() != 1 {
            return Err(err(format!("{what} applies to exactly one loop, got {}", explicit.len())));
        }
        Ok(explicit[0].clone())
    };
    let base = |n: &str| base_name(n);
    let mut consumes = Vec::new();
    let mut produces = Vec::new();
    let targets: Vec<String>;
    let result_head: Option<String>;
    let mut child_updates: Vec<(String, Option<String>)> = Vec::new();
    match &request {
        Request::Tile {
            sizes,
            floor_ids,
            tile_ids,
            ..
        } => {
            let k = sizes.len();
            targets = band(state, &explicit, k).map_err(|m| err(format!("tile: {m}")))?;
            let floors: Vec<String> = match floor_ids {
                Some(ids) => ids.clone(),
                None => targets.iter().map(|t| format!("{}_f", base(t))).collect(),
            };
            let tiles: Vec<String> = match tile_ids {
                Some(ids) => ids.clone(),
                None => targets.iter().map(|t| format!("{}_t", base(t))).collect(),
            };
            consumes = targets.clone();
            let all: Vec<String> = floors.iter().chain(&tiles).cloned().collect();
            let below = targets.last().and_then(|l| state.child.get(l).cloned().flatten());
            for w in all.windows(2) {
                child_updates.push((w[0].clone(), Some(w[1].clone())));
            }
            child_updates.push((all.last().unwrap().clone(), below));
            produces = all;
            result_head = floors.first().cloned();
        }
        Request::StripMine { floor_id, tile_id, .. } => {
            let l = single("stripmine")?;
            let f = floor_id.clone().unwrap_or_else(|| format!("{}_f", base(&l)));
            let t = tile_id.clone().unwrap_or_else(|| format!("{}_t", base(&l)));
            child_updates.push((f.clone(), Some(t.clone())));
            child_updates.push((t.clone(), state.child.get(&l).cloned().flatten()));
            targets = vec![l.clone()];
            consumes = vec![l];
            produces = vec![f.clone(), t];
            result_head = Some(f);
        }
        Request::StripeMine { outer_id, inner_id, .. } => {
            let l = single("stripemine")?;
            let o = outer_id.clone().unwrap_or_else(|| format!("{}_f", base(&l)));
            let i = inner_id.clone().unwrap_or_else(|| format!("{}_t", base(&l)));
            child_updates.push((o.clone(), Some(i.clone())));
            child_updates.push((i.clone(), state.child.get(&l).cloned().flatten()));
            targets = vec![l.clone()];
            consumes = vec![l];
            produces = vec![o.clone(), i];
            result_head = Some(o);
        }
        Request::Unroll { factor, floor_id } => {
            let l = single("unroll")?;
            targets = vec![l.clone()];
            consumes = vec![l.clone()];
            match factor {
                UnrollFactor::Full => result_head = None,
                UnrollFactor::Partial(_) => {
                    let f = floor_id.clone().unwrap_or_else(|| format!("{}_f", base(&l)));
                    child_updates.push((f.clone(), None));
                    produces = vec![f.clone()];
                    result_head = Some(f);
                }
            }
        }
        Request::UnrollAndJam { floor_id, .. } => {
            let l = single("unrollingandjam")?;
            let f = floor_id.clone().unwrap_or_else(|| format!("{}_f", base(&l)));
            child_updates.push((f.clone(), state.child.get(&l).cloned().flatten()));
            targets = vec![l.clone()];
            consumes = vec![l];
            produces = vec![f.clone()];
            result_head = Some(f);
        }
        Request::Interchange { permutation } => {
            for n in permutation {
                resolve(n)?;
            }
            let k = permutation.len();
            if explicit.len() > 1 && explicit.len() != k {
                return Err(err(format!(
                    "interchange names {} loops but the permutation has {k}",
                    explicit.len()
                )));
            }
            let distinct: BTreeSet<&String> = permutation.iter().collect();
            if distinct.len() != k {
                return Err(err("interchange permutation repeats a loop".into()));
            }
            targets = if explicit.len() == k {
                explicit.clone()
            } else {
                state.chain(&explicit[0], k)
            };
            if targets.len() == k && targets.iter().collect::<BTreeSet<_>>() == distinct {
                let below = state.child.get(targets.last().unwrap()).cloned().flatten();
                let outer_ref = targets[0].clone();
                for w in permutation.windows(2) {
                    child_updates.push((w[0].clone(), Some(w[1].clone())));
                }
                child_updates.push((permutation.last().unwrap().clone(), below));
                state.replace_child_refs(&outer_ref, Some(&permutation[0]));
            }
            result_head = permutation.first().cloned();
        }
        Request::Peel {
            spec,
            prologue_id,
            main_id,
            epilogue_id,
        } => {
            let l = single("peel")?;
            let main = main_id.clone().unwrap_or_else(|| format!("{}_main", base(&l)));
            let below = state.child.get(&l).cloned().flatten();
            let pro = prologue_id.clone().unwrap_or_else(|| format!("{}_pro", base(&l)));
            let epi = epilogue_id.clone().unwrap_or_else(|| format!("{}_epi", base(&l)));
            produces = match spec {
                PeelSpec::First(_) => vec![pro, main.clone()],
                PeelSpec::Last(_) | PeelSpec::Multiple(_) => vec![main.clone(), epi],
            };
            for n in &produces {
                child_updates.push((n.clone(), None));
            }
            child_updates.push((main.clone(), below));
            targets = vec![l.clone()];
            consumes = vec![l];
            result_head = Some(main);
        }
        Request::Collapse { depth, collapsed_id } => {
            let k = depth.unwrap_or(if explicit.len() > 1 { explicit.len() } else { 2 });
            if explicit.len() > 1 && explicit.len() != k {
                return Err(err(format!("collapse depth {k} but {} loops named", explicit.len())));
            }
            targets = band(state, &explicit, k).map_err(|m| err(format!("collapse: {m}")))?;
            let c = collapsed_id.clone().unwrap_or_else(|| {
                let parts: Vec<String> = targets.iter().map(|t| base(t)).collect();
                format!("{}_c", parts.join("_"))
            });
            child_updates.push((c.clone(), targets.last().and_then(|l| state.child.get(l).cloned().flatten())));
            consumes = targets.clone();
            produces = vec![c.clone()];
            result_head = Some(c);
        }
        Request::Distribute { parts, ids } => {
            let l = single("distribute")?;
            let n = match (parts, ids) {
                (Some(p), _) => p.len(),
                (None, Some(ids)) => ids.len(),
                (None, None) => *state.body_len.get(&l).ok_or_else(|| {
                    err(format!(
                        "distribute on generated loop '{l}' needs a parts(...) or ids(...) clause"
                    ))
                })?,
            };
            if let (Some(p), Some(ids)) = (parts, ids) {
                if p.len() != ids.len() {
                    return Err(err("distribute: ids must name one loop per part".into()));
                }
            }
            produces = match ids {
                Some(ids) => ids.clone(),
                None => (0..n).map(|k| format!("{}_d{k}", base(&l))).collect(),
            };
            for p in &produces {
                child_updates.push((p.clone(), None));
            }
            targets = vec![l.clone()];
            consumes = vec![l];
            result_head = (produces.len() == 1).then(|| produces[0].clone());
        }
        Request::Fuse { fused_id } => {
            targets = if explicit.len() >= 2 {
                explicit.clone()
            } else {
                let next = state.sibling.get(&explicit[0]).cloned().flatten().ok_or_else(|| {
                    err(format!(
                        "fuse: loop '{}' has no following sibling loop; name the loops with loop(...)",
                        explicit[0]
                    ))
                })?;
                resolve(&next)?;
                vec![explicit[0].clone(), next]
            };
            let f = fused_id.clone().unwrap_or_else(|| format!("{}_fused", base(&targets[0])));
            child_updates.push((f.clone(), None));
            consumes = targets.clone();
            produces = vec![f.clone()];
            result_head = Some(f);
        }
        Request::Reverse { reversed_id } => {
            let l = single("reverse")?;
            let r = reversed_id.clone().unwrap_or_else(|| format!("{}_r", base(&l)));
            child_updates.push((r.clone(), state.child.get(&l).cloned().flatten()));
            state.replace_child_refs(&l, Some(&r));
            targets = vec![l.clone()];
            consumes = vec![l];
            produces = vec![r.clone()];
            result_head = Some(r);
        }
        Request::Parallel => {
            let l = single("parallel")?;
            targets = vec![l.clone()];
            result_head = Some(l);
        }
    }
    let mut seen = BTreeSet::new();
    for n in &produces {
        if !seen.insert(n) || state.taken.contains(n) {
            return Err(err(format!("generated loop id '{n}' is already in use")));
        }
    }
    for c in &consumes {
        state.live.remove(c);
        state.consumed.insert(c.clone(), index);
        state.child.remove(c);
        state.replace_child_refs(c, None);
    }
    for n in &produces {
        state.live.insert(n.clone(), Origin::Generated(index));
        state.taken.insert(n.clone());
    }
    for (k, v) in child_updates {
        state.child.insert(k, v);
    }
    if let Some(first) = targets.first() {
        if head.as_deref() == Some(first.as_str()) || consumes.iter().any(|c| Some(c) == head.as_ref()) {
            *head = result_head;
        }
    }
    Ok(PlannedDirective {
        index,
        directive: d.clone(),
        request,
        attached: attached.to_string(),
        targets,
        explicit,
        consumes,
        produces,
    })
}

/// Loops of a `k`-deep band: the names given, or the first name extended
/// by its perfect chain.
fn band(state: &NameState, explicit: &[String], k: usize) -> Result<Vec<String>, String> {
    if explicit.len() == k {
        return Ok(explicit.to_vec());
    }
    if explicit.len() != 1 {
        return Err(format!("{} loops named but {k} required", explicit.len()));
    }
    Ok(state.chain(&explicit[0], k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directive::TransformKind;
    use crate::frontend::parse_program;

    fn planned(src: &str) -> Result<PlannedPipeline, PlanError> {
        let p = parse_program(src).unwrap();
        let tree = build_loop_tree(&p);
        let stacks = collect_stacks(&p, &tree);
        plan_pipeline(&p, &tree, &stacks)
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
      C[i][j] += A[i][k] * B[k][j];
";

    #[test]
    fn names_and_disambiguation() {
        let p = parse_program(
            "array A[4]; for (i = 0; i < 4; i += 1) for (j = 0; j < 4; j += 1) A[j] = 0;\nfor (i = 0; i < 4; i += 1) A[i] = 1;\nwhile (A[0] < 0) A[0] = 0;",
        )
        .unwrap();
        let t = build_loop_tree(&p);
        let names: Vec<&str> = t.nodes.iter().map(|n| n.name.as_str()).collect();
        assert_eq!(names, vec!["i", "j", "i#2", "while"]);
        assert_eq!(t.nodes[1].parent, Some(0));
        assert_eq!(t.nodes[0].perfect_child, Some(1));
        assert!(t.nodes[3].is_while());
        assert_eq!(t.dump().lines().nth(1).unwrap(), "  j [0,4) step=1 source");
    }

    #[test]
    fn dgemm_nest_preorder() {
        let p = parse_program(DGEMM).unwrap();
        let t = build_loop_tree(&p);
        let names: Vec<&str> = t.nodes.iter().map(|n| n.name.as_str()).collect();
        assert_eq!(names, vec!["i", "j", "k"]);
        assert_eq!(t.perfect_chain(0, 5), vec![0, 1, 2]);
    }

    #[test]
    fn dgemm_pipeline_resolves_generated_names() {
        let plan = planned(DGEMM).unwrap();
        let kinds: Vec<TransformKind> = plan.steps.iter().map(|s| s.directive.kind).collect();
        assert_eq!(
            kinds,
            vec![
                TransformKind::Tile,
                TransformKind::Interchange,
                TransformKind::UnrollAndJam,
                TransformKind::UnrollAndJam
            ]
        );
        assert_eq!(plan.steps[0].consumes, vec!["i", "j", "k"]);
        assert_eq!(plan.steps[1].targets, vec!["i1", "j1", "k1", "i2", "j2"]);
        assert_eq!(plan.steps[2].targets, vec!["j2"]);
        assert_eq!(plan.producers["i2"], 0);
    }

    #[test]
    fn interchange_with_explicit_outer() {
        let plan = planned(
            "array A[4,4];\n#pragma xform loop(i) interchange permutation(j,i)\nfor (i = 0; i < 4; i += 1) for (j = 0; j < 4; j += 1) A[i][j] = 0;",
        )
        .unwrap();
        assert_eq!(plan.steps[0].targets, vec!["i", "j"]);
    }

    #[test]
    fn resolution_errors() {
        let e = planned("array A[4];\n#pragma xform loop(q) unroll\nfor (i = 0; i < 4; i += 1) A[i] = 0;").unwrap_err();
        assert!(e.message.contains("no loop named 'q'"), "{e}");
        let e = planned(
            "array A[4];\n#pragma xform loop(i) reverse\n#pragma xform stripmine size(2)\nfor (i = 0; i < 4; i += 1) A[i] = 0;",
        )
        .unwrap_err();
        assert!(e.message.contains("replaced"), "{e}");
        let e = planned(
            "array A[4];\n#pragma xform reverse\n#pragma xform unroll full\nfor (i = 0; i < 4; i += 1) A[i] = 0;",
        )
        .unwrap_err();
        assert!(e.message.contains("ambiguous"), "{e}");
        let e = planned(
            "array A[4];\n#pragma xform stripmine size(2) floor_id(A)\nfor (i = 0; i < 4; i += 1) A[i] = 0;",
        )
        .unwrap_err();
        assert!(e.message.contains("already in use"), "{e}");
    }

    #[test]
    fn empty_target_follows_result() {
        let plan = planned(
            "array A[8];\n#pragma xform parallel\n#pragma xform stripmine size(4)\nfor (i = 0; i < 8; i += 1) A[i] = 0;",
        )
        .unwrap();
        assert_eq!(plan.steps[1].targets, vec!["i_f"]);
    }

    #[test]
    fn paths_address_statements() {
        let mut p = parse_program(
            "array A[4]; for (i = 0; i < 4; i += 1) { if (i < 2) { A[i] = 0; } else { for (j = 0; j < 1; j += 1) A[j] = 1; } }",
        )
        .unwrap();
        let t = build_loop_tree(&p);
        assert_eq!(t.nodes[1].path, vec![0, 0, 1]);
        assert!(matches!(stmt_at(&p.body, &[0, 0, 1]), Some(Stmt::For(_))));
        assign_names(&mut p);
        let Some(Stmt::For(f)) = stmt_at(&p.body, &[0, 0, 1]) else { panic!() };
        assert_eq!(f.meta.name.as_deref(), Some("j"));
    }
}
