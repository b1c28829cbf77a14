//! Dependence analysis over array accesses.
//!
//! Distances are differences of loop-variable values (sink minus source)
//! over the loops enclosing both statements. Small nests with concrete
//! bounds are enumerated exactly; everything else gets ZIV and strong-SIV
//! subscript tests with `*` for unknown components. Accesses to arrays of a
//! `maybe_alias` pair are reported separately as runtime-checkable.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::affine::{eval_const, Affine};
use crate::ast::*;

pub const DEFAULT_MAX_ENUM: usize = 4096;
pub const ORACLE_MAX_ENUM: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DepKind {
    Flow,
    Anti,
    Output,
}

impl fmt::Display for DepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DepKind::Flow => "flow",
            DepKind::Anti => "anti",
            DepKind::Output => "output",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dist {
    Const(i64),
    Star,
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dist::Const(d) => write!(f, "{d}"),
            Dist::Star => f.write_str("*"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StmtRef {
    pub id: StmtId,
    /// Preorder index of the assignment in the analyzed statements.
    pub site: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dependence {
    pub kind: DepKind,
    pub src: StmtRef,
    pub sink: StmtRef,
    /// Names of the loops enclosing both statements, outermost first.
    pub loops: Vec<String>,
    pub distance: Vec<Dist>,
    pub array: String,
}

impl Dependence {
    /// Distance component for the named loop, if it encloses both ends.
    pub fn at(&self, loop_name: &str) -> Option<Dist> {
        self.loops.iter().position(|l| l == loop_name).map(|k| self.distance[k])
    }

    /// Whether a concrete distance vector is matched, `*` being a wildcard.
    pub fn covers(&self, other: &Dependence) -> bool {
        self.kind == other.kind
            && self.src == other.src
            && self.sink == other.sink
            && self.loops == other.loops
            && self.array == other.array
            && self.distance.len() == other.distance.len()
            && self.distance.iter().zip(&other.distance).all(|(a, b)| *a == Dist::Star || a == b)
    }

    fn vector(&self) -> String {
        let parts: Vec<String> = self.distance.iter().map(|d| d.to_string()).collect();
        format!("({})", parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exactness {
    Exact,
    Conservative,
}

/// A may-alias dependence: every reordering is suspect unless the two
/// arrays turn out disjoint at run time.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AliasDependence {
    pub dep: Dependence,
    pub pair: (String, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependenceSet {
    pub deps: BTreeSet<Dependence>,
    pub alias: BTreeSet<AliasDependence>,
    pub exactness: Exactness,
}

impl DependenceSet {
    pub fn is_exact(&self) -> bool {
        self.exactness == Exactness::Exact
    }

    /// Every dependence of `other` is matched by one here.
    pub fn covers(&self, other: &DependenceSet) -> bool {
        other.deps.iter().all(|d| self.deps.iter().any(|c| c.covers(d)))
    }
}

impl fmt::Display for DependenceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.exactness {
            Exactness::Exact => "exact",
            Exactness::Conservative => "conservative",
        };
        for d in &self.deps {
            writeln!(f, "{} {}->{} {} {}", d.kind, d.src.id, d.sink.id, d.vector(), tag)?;
        }
        for a in &self.alias {
            let d = &a.dep;
            writeln!(
                f,
                "{} {}->{} {} may-alias({},{})",
                d.kind,
                d.src.id,
                d.sink.id,
                d.vector(),
                a.pair.0,
                a.pair.1
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DepError {
    #[error("nest contains a while loop")]
    WhileInNest,
    #[error("more than {0} statement instances")]
    CapExceeded(usize),
    #[error("nest is not enumerable: {0}")]
    NotEnumerable(String),
    #[error("run failed: {0}")]
    Run(String),
}

/// Analyzes a statement sequence (usually one loop nest).
pub fn compute_dependences(p: &Program, stmts: &[Stmt], max_enum: usize) -> Result<DependenceSet, DepError> {
    if stmts.iter().any(Stmt::contains_while) {
        return Err(DepError::WhileInNest);
    }
    let sites = collect_sites(stmts);
    let alias = alias_dependences(p, &sites);
    if enumerable(p, stmts) {
        match enumerate(p, stmts, max_enum) {
            Ok(accesses) => {
                return Ok(DependenceSet {
                    deps: pairs(&accesses, &sites),
                    alias,
                    exactness: Exactness::Exact,
                })
            }
            Err(DepError::CapExceeded(_)) | Err(DepError::NotEnumerable(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(DependenceSet {
        deps: conservative(p, &sites),
        alias,
        exactness: Exactness::Conservative,
    })
}

/// Loop name stored in metadata, or the induction variable.
fn loop_name(f: &ForLoop) -> String {
    f.meta.name.clone().unwrap_or_else(|| f.var.clone())
}

#[derive(Debug, Clone)]
struct AccessSite {
    array: String,
    subscripts: Vec<Expr>,
    write: bool,
}

#[derive(Debug, Clone)]
struct Site {
    id: StmtId,
    /// Enclosing loops inside the analyzed statements: (uid, name, var).
    loops: Vec<(usize, String, String)>,
    /// Reads (including guards of enclosing `if`s) then the write.
    accesses: Vec<AccessSite>,
}

fn collect_sites(stmts: &[Stmt]) -> Vec<Site> {
    struct Walk {
        sites: Vec<Site>,
        loops: Vec<(usize, String, String)>,
        guards: Vec<AccessSite>,
        next_uid: usize,
    }
    impl Walk {
        fn reads(e: &Expr, out: &mut Vec<AccessSite>) {
            e.walk(&mut |x| {
                if let Expr::Read(r) = x {
                    out.push(AccessSite {
                        array: r.array.clone(),
                        subscripts: r.indices.clone(),
                        write: false,
                    });
                }
            });
        }

        fn list(&mut self, stmts: &[Stmt]) {
            for s in stmts {
                self.stmt(s);
            }
        }

        fn stmt(&mut self, s: &Stmt) {
            match s {
                Stmt::Assign(a) => {
                    let mut acc = self.guards.clone();
                    for i in &a.target.indices {
                        Self::reads(i, &mut acc);
                    }
                    Self::reads(&a.value, &mut acc);
                    if a.op == AssignOp::Add {
                        acc.push(AccessSite {
                            array: a.target.array.clone(),
                            subscripts: a.target.indices.clone(),
                            write: false,
                        });
                    }
                    acc.push(AccessSite {
                        array: a.target.array.clone(),
                        subscripts: a.target.indices.clone(),
                        write: true,
                    });
                    self.sites.push(Site {
                        id: a.id,
                        loops: self.loops.clone(),
                        accesses: acc,
                    });
                }
                Stmt::For(f) => {
                    let uid = self.next_uid;
                    self.next_uid += 1;
                    let saved = self.guards.len();
                    Self::reads(&f.lower, &mut self.guards);
                    Self::reads(&f.upper, &mut self.guards);
                    self.loops.push((uid, loop_name(f), f.var.clone()));
                    self.list(&f.body);
                    self.loops.pop();
                    self.guards.truncate(saved);
                }
                Stmt::If(i) => {
                    let saved = self.guards.len();
                    Self::reads(&i.cond, &mut self.guards);
                    self.list(&i.then_body);
                    if let Some(e) = &i.else_body {
                        self.list(e);
                    }
                    self.guards.truncate(saved);
                }
                Stmt::While(w) => {
                    let saved = self.guards.len();
                    Self::reads(&w.cond, &mut self.guards);
                    self.list(&w.body);
                    self.guards.truncate(saved);
                }
                Stmt::Block(b) => self.list(b),
            }
        }
    }
    let mut w = Walk {
        sites: Vec::new(),
        loops: Vec::new(),
        guards: Vec::new(),
        next_uid: 0,
    };
    w.list(stmts);
    w.sites
}

fn common_loops(a: &Site, b: &Site) -> usize {
    a.loops.iter().zip(&b.loops).take_while(|(x, y)| x.0 == y.0).count()
}

fn kind_of(src_write: bool, sink_write: bool) -> Option<DepKind> {
    match (src_write, sink_write) {
        (true, false) => Some(DepKind::Flow),
        (false, true) => Some(DepKind::Anti),
        (true, true) => Some(DepKind::Output),
        (false, false) => None,
    }
}

fn alias_dependences(p: &Program, sites: &[Site]) -> BTreeSet<AliasDependence> {
    let mut out = BTreeSet::new();
    for (a_name, b_name) in p.alias_pairs() {
        for (si, s) in sites.iter().enumerate() {
            for (ti, t) in sites.iter().enumerate().skip(si) {
                for x in &s.accesses {
                    for y in &t.accesses {
                        let crosses = (x.array == a_name && y.array == b_name) || (x.array == b_name && y.array == a_name);
                        let Some(kind) = kind_of(x.write, y.write) else { continue };
                        if !crosses {
                            continue;
                        }
                        let n = common_loops(s, t);
                        let loops: Vec<String> = s.loops[..n].iter().map(|l| l.1.clone()).collect();
                        let sref = StmtRef { id: s.id, site: si };
                        let tref = StmtRef { id: t.id, site: ti };
                        let mut add = |kind, src, sink| {
                            out.insert(AliasDependence {
                                dep: Dependence {
                                    kind,
                                    src,
                                    sink,
                                    loops: loops.clone(),
                                    distance: vec![Dist::Star; n],
                                    array: format!("{}|{}", x.array, y.array),
                                },
                                pair: (a_name.clone(), b_name.clone()),
                            });
                        };
                        add(kind, sref, tref);
                        if let Some(back) = kind_of(y.write, x.write) {
                            add(back, tref, sref);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Whether control flow and addresses are independent of memory and all
/// bounds are concrete.
fn enumerable(p: &Program, stmts: &[Stmt]) -> bool {
    let opaque: Vec<&str> = p.params().filter(|d| d.opaque).map(|d| d.name.as_str()).collect();
    let clean = |e: &Expr| !e.reads_memory() && !opaque.iter().any(|o| e.mentions_var(o));
    fn go(stmts: &[Stmt], clean: &dyn Fn(&Expr) -> bool) -> bool {
        stmts.iter().all(|s| match s {
            Stmt::Assign(a) => a.target.indices.iter().all(clean) && all_subscripts(&a.value, clean),
            Stmt::For(f) => clean(&f.lower) && clean(&f.upper) && go(&f.body, clean),
            Stmt::If(i) => clean(&i.cond) && go(&i.then_body, clean) && i.else_body.as_ref().is_none_or(|e| go(e, clean)),
            Stmt::While(_) => false,
            Stmt::Block(b) => go(b, clean),
        })
    }
    go(stmts, &clean)
}

fn all_subscripts(e: &Expr, clean: &dyn Fn(&Expr) -> bool) -> bool {
    let mut ok = true;
    e.walk(&mut |x| {
        if let Expr::Read(r) = x {
            ok &= r.indices.iter().all(clean);
        }
    });
    ok
}

#[derive(Debug, Clone)]
struct Access {
    site: usize,
    /// Statement instance counter.
    instance: usize,
    /// Loop uid and value, outermost first.
    iter: Vec<(usize, i64)>,
    write: bool,
    array: String,
    cell: (usize, usize),
}

fn enumerate(p: &Program, stmts: &[Stmt], cap: usize) -> Result<Vec<Access>, DepError> {
    struct En<'a> {
        env: Vec<(String, i64)>,
        iter: Vec<(usize, i64)>,
        out: Vec<Access>,
        site: usize,
        instance: usize,
        uid: usize,
        cap: usize,
        p: &'a Program,
    }
    impl En<'_> {
        fn val(&self, e: &Expr) -> Result<i64, DepError> {
            eval_const(e, &|v| self.env.iter().rev().find(|(n, _)| n == v).map(|(_, x)| *x))
                .ok_or_else(|| DepError::NotEnumerable("expression could not be evaluated".into()))
        }

        fn cell(&self, r: &ArrayRef) -> Result<(usize, usize), DepError> {
            let decl_idx = self
                .p
                .arrays()
                .position(|a| a.name == r.array)
                .ok_or_else(|| DepError::NotEnumerable(format!("unknown array {}", r.array)))?;
            let dims = &self.p.arrays().nth(decl_idx).unwrap().dims;
            let mut off = 0usize;
            for (e, &d) in r.indices.iter().zip(dims.iter()) {
                let v = self.val(e)?;
                if v < 0 || v as usize >= d {
                    return Err(DepError::NotEnumerable(format!("{}[..] out of bounds", r.array)));
                }
                off = off * d + v as usize;
            }
            Ok((decl_idx, off))
        }

        fn push(&mut self, r: &ArrayRef, write: bool) -> Result<(), DepError> {
            let cell = self.cell(r)?;
            self.out.push(Access {
                site: self.site,
                instance: self.instance,
                iter: self.iter.clone(),
                write,
                array: r.array.clone(),
                cell,
            });
            Ok(())
        }

        fn list(&mut self, stmts: &[Stmt]) -> Result<(), DepError> {
            stmts.iter().try_for_each(|s| self.stmt(s))
        }

        fn stmt(&mut self, s: &Stmt) -> Result<(), DepError> {
            match s {
                Stmt::Assign(a) => {
                    if self.instance >= self.cap {
                        return Err(DepError::CapExceeded(self.cap));
                    }
                    let mut reads = Vec::new();
                    a.value.walk(&mut |x| {
                        if let Expr::Read(r) = x {
                            reads.push(r.clone());
                        }
                    });
                    for r in &reads {
                        self.push(r, false)?;
                    }
                    if a.op == AssignOp::Add {
                        self.push(&a.target, false)?;
                    }
                    self.push(&a.target, true)?;
                    self.instance += 1;
                    self.site += 1;
                    Ok(())
                }
                Stmt::For(f) => {
                    let uid = self.uid;
                    self.uid += 1;
                    let site0 = self.site;
                    let uid0 = self.uid;
                    let lb = self.val(&f.lower)?;
                    let ub = self.val(&f.upper)?;
                    let mut v = lb;
                    let mut site_end = None;
                    let mut uid_end = None;
                    while v < ub {
                        self.site = site0;
                        self.uid = uid0;
                        self.env.push((f.var.clone(), v));
                        self.iter.push((uid, v));
                        let r = self.list(&f.body);
                        self.iter.pop();
                        self.env.pop();
                        r?;
                        site_end = Some(self.site);
                        uid_end = Some(self.uid);
                        v += f.step;
                    }
                    // Keep numbering stable when the loop runs zero times.
                    self.site = site_end.unwrap_or(site0 + count_assigns(&f.body));
                    self.uid = uid_end.unwrap_or(uid0 + count_fors(&f.body));
                    Ok(())
                }
                Stmt::If(i) => {
                    let site0 = self.site;
                    let uid0 = self.uid;
                    let then_sites = count_assigns(&i.then_body);
                    let then_uids = count_fors(&i.then_body);
                    let else_body: &[Stmt] = i.else_body.as_deref().unwrap_or(&[]);
                    if self.val(&i.cond)? != 0 {
                        self.list(&i.then_body)?;
                    } else {
                        self.site = site0 + then_sites;
                        self.uid = uid0 + then_uids;
                        self.list(else_body)?;
                    }
                    self.site = site0 + then_sites + count_assigns(else_body);
                    self.uid = uid0 + then_uids + count_fors(else_body);
                    Ok(())
                }
                Stmt::While(_) => Err(DepError::WhileInNest),
                Stmt::Block(b) => self.list(b),
            }
        }
    }
    let mut en = En {
        env: p.known_params(),
        iter: Vec::new(),
        out: Vec::new(),
        site: 0,
        instance: 0,
        uid: 0,
        cap,
        p,
    };
    en.list(stmts)?;
    Ok(en.out)
}

fn count_assigns(stmts: &[Stmt]) -> usize {
    stmts.iter().map(|s| s.assigns().len()).sum()
}

fn count_fors(stmts: &[Stmt]) -> usize {
    fn go(s: &Stmt) -> usize {
        let own = matches!(s, Stmt::For(_)) as usize;
        own + s.child_lists().iter().flat_map(|l| l.iter()).map(go).sum::<usize>()
    }
    stmts.iter().map(go).sum()
}

/// Turns an ordered access list into dependences between distinct
/// statement instances touching the same cell. Arrays of may-alias pairs
/// are assumed distinct here.
fn pairs(accesses: &[Access], sites: &[Site]) -> BTreeSet<Dependence> {
    let mut by_cell: HashMap<(usize, usize), Vec<&Access>> = HashMap::new();
    for a in accesses {
        by_cell.entry(a.cell).or_default().push(a);
    }
    let mut out = BTreeSet::new();
    for list in by_cell.values() {
        for (i, a) in list.iter().enumerate() {
            for b in &list[i + 1..] {
                if a.instance == b.instance {
                    continue;
                }
                let Some(kind) = kind_of(a.write, b.write) else { continue };
                out.insert(make_dep(kind, a, b, sites));
            }
        }
    }
    out
}

fn make_dep(kind: DepKind, a: &Access, b: &Access, sites: &[Site]) -> Dependence {
    let n = a.iter.iter().zip(&b.iter).take_while(|(x, y)| x.0 == y.0).count();
    Dependence {
        kind,
        src: StmtRef {
            id: sites[a.site].id,
            site: a.site,
        },
        sink: StmtRef {
            id: sites[b.site].id,
            site: b.site,
        },
        loops: sites[a.site].loops[..n].iter().map(|l| l.1.clone()).collect(),
        distance: (0..n).map(|k| Dist::Const(b.iter[k].1 - a.iter[k].1)).collect(),
        array: a.array.clone(),
    }
}

enum DimInfo {
    Independent,
    Unknown,
    Distance(usize, i64),
}

/// Classifies one subscript dimension for a source access at `src` and a
/// sink access at `sink` touching the same cell.
fn test_dim(e1: &Expr, e2: &Expr, common: &[(usize, String, String)], params: &[(String, i64)], src: &Site, sink: &Site) -> DimInfo {
    let resolve = |v: &str| params.iter().find(|(n, _)| n == v).map(|(_, x)| *x);
    let (Some(f), Some(g)) = (Affine::from_expr(e1, &resolve), Affine::from_expr(e2, &resolve)) else {
        return DimInfo::Unknown;
    };
    let is_loop_var = |site: &Site, v: &str| site.loops.iter().any(|l| l.2 == v);
    let f_vars: Vec<&String> = f.coeffs.keys().filter(|v| is_loop_var(src, v)).collect();
    let g_vars: Vec<&String> = g.coeffs.keys().filter(|v| is_loop_var(sink, v)).collect();
    let symbolic = f.coeffs.len() != f_vars.len() || g.coeffs.len() != g_vars.len();
    if f_vars.is_empty() && g_vars.is_empty() {
        if symbolic {
            return if f.sub(&g).and_then(|d| d.as_constant()).is_some_and(|d| d != 0) {
                DimInfo::Independent
            } else {
                DimInfo::Unknown
            };
        }
        return if f.constant == g.constant {
            DimInfo::Unknown
        } else {
            DimInfo::Independent
        };
    }
    if let ([x], [y]) = (f_vars.as_slice(), g_vars.as_slice()) {
        if x == y {
            if let Some(k) = common.iter().position(|l| &l.2 == *x) {
                let a = f.coeff(x);
                if a == g.coeff(x) && a != 0 {
                    let mut rest_f = f.clone();
                    rest_f.coeffs.remove(*x);
                    let mut rest_g = g.clone();
                    rest_g.coeffs.remove(*x);
                    if let Some(c) = rest_f.sub(&rest_g).and_then(|d| d.as_constant()) {
                        // a*i + c1 == a*i' + c2  =>  i' - i = (c1 - c2) / a
                        return if c % a == 0 {
                            DimInfo::Distance(k, c / a)
                        } else {
                            DimInfo::Independent
                        };
                    }
                }
            }
        }
    }
    DimInfo::Unknown
}

fn conservative(p: &Program, sites: &[Site]) -> BTreeSet<Dependence> {
    let params = p.known_params();
    let mut out = BTreeSet::new();
    for (si, s) in sites.iter().enumerate() {
        for (ti, t) in sites.iter().enumerate().skip(si) {
            let n = common_loops(s, t);
            let common = &s.loops[..n];
            for (xi, x) in s.accesses.iter().enumerate() {
                for (yi, y) in t.accesses.iter().enumerate() {
                    if si == ti && yi < xi {
                        continue;
                    }
                    if x.array != y.array || kind_of(x.write, y.write).is_none() {
                        continue;
                    }
                    let mut dist = vec![Dist::Star; n];
                    let mut independent = false;
                    for (e1, e2) in x.subscripts.iter().zip(&y.subscripts) {
                        match test_dim(e1, e2, common, &params, s, t) {
                            DimInfo::Independent => independent = true,
                            DimInfo::Unknown => {}
                            DimInfo::Distance(k, d) => match dist[k] {
                                Dist::Star => dist[k] = Dist::Const(d),
                                Dist::Const(e) if e != d => independent = true,
                                Dist::Const(_) => {}
                            },
                        }
                    }
                    if independent {
                        continue;
                    }
                    let loops: Vec<String> = common.iter().map(|l| l.1.clone()).collect();
                    let sref = StmtRef { id: s.id, site: si };
                    let tref = StmtRef { id: t.id, site: ti };
                    // `dist` relates an instance of s (first) to an instance of t.
                    let (forward, backward) = directions(&dist);
                    let all_zero = dist.iter().all(|d| *d == Dist::Const(0));
                    if all_zero {
                        // Same iteration of every common loop: textual order decides.
                        if si != ti {
                            if let Some(k) = kind_of(x.write, y.write) {
                                out.insert(dep(k, sref, tref, &loops, dist.clone(), &x.array));
                            }
                        }
                        continue;
                    }
                    if forward {
                        if let Some(k) = kind_of(x.write, y.write) {
                            out.insert(dep(k, sref, tref, &loops, dist.clone(), &x.array));
                        }
                    }
                    if backward {
                        let neg: Vec<Dist> = dist
                            .iter()
                            .map(|d| match d {
                                Dist::Const(c) => Dist::Const(-c),
                                Dist::Star => Dist::Star,
                            })
                            .collect();
                        if let Some(k) = kind_of(y.write, x.write) {
                            out.insert(dep(k, tref, sref, &loops, neg, &x.array));
                        }
                    }
                }
            }
        }
    }
    out
}

fn dep(kind: DepKind, src: StmtRef, sink: StmtRef, loops: &[String], distance: Vec<Dist>, array: &str) -> Dependence {
    Dependence {
        kind,
        src,
        sink,
        loops: loops.to_vec(),
        distance,
        array: array.to_string(),
    }
}

/// Whether the vector can be lexicographically positive (forward) or
/// negative (backward).
fn directions(d: &[Dist]) -> (bool, bool) {
    for c in d {
        match c {
            Dist::Const(0) => continue,
            Dist::Const(v) if *v > 0 => return (true, false),
            Dist::Const(_) => return (false, true),
            Dist::Star => return (true, true),
        }
    }
    (false, false)
}

/// Test oracle: executes the statements with the interpreter and derives
/// dependences from the addresses actually touched.
pub fn brute_force_dependences(p: &Program, stmts: &[Stmt], cap: usize) -> Result<DependenceSet, DepError> {
    use crate::interp::{run, RunOptions};
    if stmts.iter().any(Stmt::contains_while) {
        return Err(DepError::WhileInNest);
    }
    // Enclosing loops of every assignment: (uid, name), plus the loop
    // variables used to recover iteration values from the trace.
    let mut site_loops: BTreeMap<usize, Vec<(usize, String)>> = BTreeMap::new();
    fn walk(stmts: &[Stmt], stack: &mut Vec<(usize, String)>, uid: &mut usize, site: &mut usize, out: &mut BTreeMap<usize, Vec<(usize, String)>>) {
        for s in stmts {
            match s {
                Stmt::Assign(_) => {
                    out.insert(*site, stack.clone());
                    *site += 1;
                }
                Stmt::For(f) => {
                    stack.push((*uid, loop_name(f)));
                    *uid += 1;
                    walk(&f.body, stack, uid, site, out);
                    stack.pop();
                }
                other => {
                    for l in other.child_lists() {
                        walk(l, stack, uid, site, out);
                    }
                }
            }
        }
    }
    walk(stmts, &mut Vec::new(), &mut 0, &mut 0, &mut site_loops);
    // Retag every assignment so the trace carries its current loop values
    // and its position.
    let mut body = stmts.to_vec();
    let mut counter = 0;
    fn retag(stmts: &mut [Stmt], vars: &mut Vec<String>, counter: &mut usize) {
        for s in stmts {
            match s {
                Stmt::Assign(a) => {
                    a.iter = vars.iter().map(|v| Expr::var(v.clone())).collect();
                    a.id = StmtId(*counter);
                    *counter += 1;
                }
                Stmt::For(f) => {
                    vars.push(f.var.clone());
                    retag(&mut f.body, vars, counter);
                    vars.pop();
                }
                other => {
                    for l in other.child_lists_mut() {
                        retag(l, vars, counter);
                    }
                }
            }
        }
    }
    retag(&mut body, &mut Vec::new(), &mut counter);
    let original_ids: Vec<StmtId> = {
        let mut v = Vec::new();
        for s in stmts {
            v.extend(s.assigns().into_iter().map(|a| a.id));
        }
        v
    };
    let mut prog = Program {
        decls: p.decls.clone(),
        body,
    };
    // Analyze with distinct storage for may-alias pairs.
    prog.decls.retain(|d| !matches!(d, Decl::MaybeAlias(..)));
    let opts = RunOptions {
        step_budget: (cap as u64).saturating_mul(64).max(1_000_000),
        ..RunOptions::default()
    };
    let (_, trace) = run(&prog, &opts).map_err(|e| DepError::Run(e.to_string()))?;
    if trace.records.len() > cap {
        return Err(DepError::CapExceeded(cap));
    }
    let mut last: HashMap<usize, Vec<(usize, bool)>> = HashMap::new();
    let mut out = BTreeSet::new();
    for (n, rec) in trace.records.iter().enumerate() {
        let site = rec.stmt.0;
        let touched: Vec<(usize, bool)> = rec
            .reads
            .iter()
            .map(|a| (a.global, false))
            .chain(rec.writes.iter().map(|a| (a.global, true)))
            .collect();
        for (addr, write) in touched {
            let earlier = last.entry(addr).or_default();
            for &(m, w) in earlier.iter() {
                if m == n {
                    continue;
                }
                let Some(kind) = kind_of(w, write) else { continue };
                let a = &trace.records[m];
                let (sa, sb) = (&site_loops[&a.stmt.0], &site_loops[&site]);
                let common = sa.iter().zip(sb).take_while(|(x, y)| x.0 == y.0).count();
                out.insert(Dependence {
                    kind,
                    src: StmtRef {
                        id: original_ids[a.stmt.0],
                        site: a.stmt.0,
                    },
                    sink: StmtRef {
                        id: original_ids[site],
                        site,
                    },
                    loops: sa[..common].iter().map(|l| l.1.clone()).collect(),
                    distance: (0..common).map(|k| Dist::Const(rec.iter[k] - a.iter[k])).collect(),
                    array: trace.arrays[array_of(&a.reads, &a.writes, addr)].clone(),
                });
            }
            earlier.push((n, write));
        }
    }
    Ok(DependenceSet {
        deps: out,
        alias: alias_dependences(p, &collect_sites(stmts)),
        exactness: Exactness::Exact,
    })
}

fn array_of(reads: &[crate::interp::Address], writes: &[crate::interp::Address], global: usize) -> usize {
    reads
        .iter()
        .chain(writes)
        .find(|a| a.global == global)
        .map(|a| a.array)
        .unwrap_or(0)
}
