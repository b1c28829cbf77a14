//! Reference interpreter and trace recorder.
//!
//! All arithmetic is checked 64-bit integer arithmetic; overflow, division
//! by zero and out-of-bounds subscripts abort the run. Loop bounds are
//! evaluated once on loop entry.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ast::*;

pub const DEFAULT_STEP_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AliasBinding {
    Distinct,
    /// The second array of the pair starts `offset` cells into the first.
    Overlapping(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParallelOrder {
    Sequential,
    Reversed,
    Shuffled(u64),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    /// One binding per `maybe_alias` pair, in declaration order; missing
    /// entries are distinct.
    pub bindings: Vec<AliasBinding>,
    /// Iteration order used for loops marked `parallel`.
    pub parallel: ParallelOrder,
    pub step_budget: u64,
    pub record_trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 0,
            bindings: Vec::new(),
            parallel: ParallelOrder::Sequential,
            step_budget: DEFAULT_STEP_BUDGET,
            record_trace: true,
        }
    }
}

impl RunOptions {
    pub fn seeded(seed: u64) -> RunOptions {
        RunOptions {
            seed,
            ..RunOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("step budget of {0} exceeded")]
    StepBudget(u64),
    #[error("division by zero in {0}")]
    DivisionByZero(String),
    #[error("integer overflow in {0}")]
    Overflow(String),
    #[error("subscript out of bounds: {array}[{index}] in {site}")]
    OutOfBounds {
        array: String,
        index: String,
        site: String,
    },
    #[error("unbound variable '{0}'")]
    Unbound(String),
    #[error("programs declare different arrays")]
    DeclMismatch,
    #[error("no loop named '{0}'")]
    NoSuchLoop(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArraySlot {
    pub name: String,
    pub dims: Vec<usize>,
    pub base: usize,
}

impl ArraySlot {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub arrays: Vec<ArraySlot>,
    pub size: usize,
}

impl Layout {
    pub fn new(p: &Program, bindings: &[AliasBinding]) -> Layout {
        let mut arrays = Vec::new();
        let mut next = 0;
        for a in p.arrays() {
            arrays.push(ArraySlot {
                name: a.name.clone(),
                dims: a.dims.clone(),
                base: next,
            });
            next += a.len();
        }
        for (k, (a, b)) in p.alias_pairs().iter().enumerate() {
            if let Some(AliasBinding::Overlapping(off)) = bindings.get(k) {
                let base_a = arrays.iter().find(|s| &s.name == a).map(|s| s.base).unwrap_or(0);
                if let Some(slot) = arrays.iter_mut().find(|s| &s.name == b) {
                    slot.base = base_a + off;
                }
            }
        }
        let size = arrays.iter().map(|s| s.base + s.len()).max().unwrap_or(0);
        Layout { arrays, size }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.arrays.iter().position(|s| s.name == name)
    }

    pub fn disjoint(&self, a: &str, b: &str) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(x), Some(y)) => {
                let (x, y) = (&self.arrays[x], &self.arrays[y]);
                x.base + x.len() <= y.base || y.base + y.len() <= x.base
            }
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryState {
    pub layout: Layout,
    pub cells: Vec<i64>,
    pub bindings: Vec<AliasBinding>,
    pub seed: u64,
}

impl MemoryState {
    pub fn initial(p: &Program, seed: u64, bindings: &[AliasBinding]) -> MemoryState {
        let layout = Layout::new(p, bindings);
        let mut cells = vec![0; layout.size];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (slot, decl) in layout.arrays.iter().zip(p.arrays()) {
            for c in &mut cells[slot.base..slot.base + slot.len()] {
                *c = match decl.init {
                    Init::Zero => 0,
                    Init::Random => rng.gen_range(-100..=100),
                };
            }
        }
        MemoryState {
            layout,
            cells,
            bindings: bindings.to_vec(),
            seed,
        }
    }

    pub fn array(&self, name: &str) -> Option<&[i64]> {
        let slot = &self.layout.arrays[self.layout.index_of(name)?];
        Some(&self.cells[slot.base..slot.base + slot.len()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address {
    /// Index into the layout's array list.
    pub array: usize,
    pub offset: usize,
    /// Cell in the flat store; equal addresses touch the same storage.
    pub global: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub stmt: StmtId,
    /// Preorder index of the executed assignment node in the program.
    pub site: usize,
    pub iter: Vec<i64>,
    pub reads: Vec<Address>,
    pub writes: Vec<Address>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub arrays: Vec<String>,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    /// `(statement, iteration vector)` sequence.
    pub fn instances(&self) -> Vec<(StmtId, Vec<i64>)> {
        self.records.iter().map(|r| (r.stmt, r.iter.clone())).collect()
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "stmt,iter_vec,reads,writes")?;
        let fmt_addrs = |v: &[Address]| {
            v.iter()
                .map(|a| format!("{}:{}", self.arrays[a.array], a.offset))
                .collect::<Vec<_>>()
                .join(" ")
        };
        for r in &self.records {
            let iter: Vec<String> = r.iter.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{},{},{}", r.stmt, iter.join(" "), fmt_addrs(&r.reads), fmt_addrs(&r.writes))?;
        }
        Ok(())
    }
}

/// True iff both traces execute the same statement instances in the same
/// order.
pub fn order_preserved(t1: &Trace, t2: &Trace) -> bool {
    t1.records.len() == t2.records.len()
        && t1
            .records
            .iter()
            .zip(&t2.records)
            .all(|(a, b)| a.stmt == b.stmt && a.iter == b.iter)
}

/// True iff both traces execute the same multiset of statement instances.
pub fn same_instances(t1: &Trace, t2: &Trace) -> bool {
    let mut a = t1.instances();
    let mut b = t2.instances();
    a.sort();
    b.sort();
    a == b
}

pub fn run(p: &Program, opts: &RunOptions) -> Result<(MemoryState, Trace), RunError> {
    let mem = MemoryState::initial(p, opts.seed, &opts.bindings);
    run_from(p, mem, opts)
}

/// Executes `p` starting from an explicit memory state.
pub fn run_from(p: &Program, mem: MemoryState, opts: &RunOptions) -> Result<(MemoryState, Trace), RunError> {
    let mut sites = HashMap::new();
    for (i, a) in p.assigns().into_iter().enumerate() {
        sites.insert(a as *const Assign, i);
    }
    let rng = match opts.parallel {
        ParallelOrder::Shuffled(s) => Some(ChaCha8Rng::seed_from_u64(s)),
        _ => None,
    };
    let mut m = Machine {
        env: p.params().map(|pd| (pd.name.clone(), pd.value)).collect(),
        mem,
        trace: Trace {
            arrays: p.arrays().map(|a| a.name.clone()).collect(),
            records: Vec::new(),
        },
        opts,
        steps: 0,
        sites,
        rng,
    };
    m.block(&p.body)?;
    Ok((m.mem, m.trace))
}

struct Machine<'a> {
    env: Vec<(String, i64)>,
    mem: MemoryState,
    trace: Trace,
    opts: &'a RunOptions,
    steps: u64,
    sites: HashMap<*const Assign, usize>,
    rng: Option<ChaCha8Rng>,
}

impl Machine<'_> {
    fn tick(&mut self) -> Result<(), RunError> {
        self.steps += 1;
        if self.steps > self.opts.step_budget {
            return Err(RunError::StepBudget(self.opts.step_budget));
        }
        Ok(())
    }

    fn lookup(&self, v: &str) -> Result<i64, RunError> {
        self.env
            .iter()
            .rev()
            .find(|(n, _)| n == v)
            .map(|(_, x)| *x)
            .ok_or_else(|| RunError::Unbound(v.to_string()))
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), RunError> {
        stmts.iter().try_for_each(|s| self.stmt(s))
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), RunError> {
        match s {
            Stmt::Assign(a) => self.assign(a),
            Stmt::Block(b) => self.block(b),
            Stmt::If(i) => {
                if self.eval(&i.cond, &mut None, "if condition")? != 0 {
                    self.block(&i.then_body)
                } else if let Some(e) = &i.else_body {
                    self.block(e)
                } else {
                    Ok(())
                }
            }
            Stmt::While(w) => {
                while self.eval(&w.cond, &mut None, "while condition")? != 0 {
                    self.tick()?;
                    self.block(&w.body)?;
                }
                Ok(())
            }
            Stmt::For(f) => {
                let lb = self.eval(&f.lower, &mut None, "loop bound")?;
                let ub = self.eval(&f.upper, &mut None, "loop bound")?;
                let mut values = Vec::new();
                let mut v = lb;
                while v < ub {
                    values.push(v);
                    v = v.checked_add(f.step).ok_or_else(|| RunError::Overflow(format!("loop '{}'", f.var)))?;
                }
                if f.parallel {
                    match self.opts.parallel {
                        ParallelOrder::Sequential => {}
                        ParallelOrder::Reversed => values.reverse(),
                        ParallelOrder::Shuffled(_) => {
                            if let Some(rng) = self.rng.as_mut() {
                                values.shuffle(rng);
                            }
                        }
                    }
                }
                for v in values {
                    self.tick()?;
                    self.env.push((f.var.clone(), v));
                    let r = self.block(&f.body);
                    self.env.pop();
                    r?;
                }
                Ok(())
            }
        }
    }

    fn address(&mut self, r: &ArrayRef, reads: &mut Option<Vec<Address>>, site: &str) -> Result<Address, RunError> {
        let idx = self
            .mem
            .layout
            .index_of(&r.array)
            .ok_or_else(|| RunError::Unbound(r.array.clone()))?;
        let mut subs = Vec::with_capacity(r.indices.len());
        for e in &r.indices {
            subs.push(self.eval(e, reads, site)?);
        }
        let slot = &self.mem.layout.arrays[idx];
        let mut offset = 0usize;
        for (s, &d) in subs.iter().zip(&slot.dims) {
            if *s < 0 || *s as usize >= d {
                let index = subs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ");
                return Err(RunError::OutOfBounds {
                    array: r.array.clone(),
                    index,
                    site: site.to_string(),
                });
            }
            offset = offset * d + *s as usize;
        }
        Ok(Address {
            array: idx,
            offset,
            global: slot.base + offset,
        })
    }

    fn assign(&mut self, a: &Assign) -> Result<(), RunError> {
        self.tick()?;
        let site = a.id.to_string();
        let mut reads = if self.opts.record_trace { Some(Vec::new()) } else { None };
        let target = self.address(&a.target, &mut reads, &site)?;
        let mut value = self.eval(&a.value, &mut reads, &site)?;
        if a.op == AssignOp::Add {
            if let Some(r) = reads.as_mut() {
                r.push(target);
            }
            value = self.mem.cells[target.global]
                .checked_add(value)
                .ok_or_else(|| RunError::Overflow(site.clone()))?;
        }
        self.mem.cells[target.global] = value;
        if let Some(reads) = reads {
            let mut iter = Vec::with_capacity(a.iter.len());
            for e in &a.iter {
                iter.push(self.eval(e, &mut None, &site)?);
            }
            let site_idx = self.sites.get(&(a as *const Assign)).copied().unwrap_or(usize::MAX);
            self.trace.records.push(TraceRecord {
                stmt: a.id,
                site: site_idx,
                iter,
                reads,
                writes: vec![target],
            });
        }
        Ok(())
    }

    fn eval(&mut self, e: &Expr, reads: &mut Option<Vec<Address>>, site: &str) -> Result<i64, RunError> {
        let overflow = || RunError::Overflow(site.to_string());
        Ok(match e {
            Expr::Int(v) => *v,
            Expr::Var(v) => self.lookup(v)?,
            Expr::Read(r) => {
                let addr = self.address(r, reads, site)?;
                if let Some(rs) = reads.as_mut() {
                    rs.push(addr);
                }
                self.mem.cells[addr.global]
            }
            Expr::Disjoint(a, b) => self.mem.layout.disjoint(a, b) as i64,
            Expr::Unary(UnOp::Neg, x) => self.eval(x, reads, site)?.checked_neg().ok_or_else(overflow)?,
            Expr::Unary(UnOp::Not, x) => (self.eval(x, reads, site)? == 0) as i64,
            Expr::Call(f, a, b) => {
                let (x, y) = (self.eval(a, reads, site)?, self.eval(b, reads, site)?);
                match f {
                    Builtin::Min => x.min(y),
                    Builtin::Max => x.max(y),
                }
            }
            Expr::Binary(BinOp::And, a, b) => {
                (self.eval(a, reads, site)? != 0 && self.eval(b, reads, site)? != 0) as i64
            }
            Expr::Binary(BinOp::Or, a, b) => {
                (self.eval(a, reads, site)? != 0 || self.eval(b, reads, site)? != 0) as i64
            }
            Expr::Binary(op, a, b) => {
                let x = self.eval(a, reads, site)?;
                let y = self.eval(b, reads, site)?;
                match op {
                    BinOp::Add => x.checked_add(y).ok_or_else(overflow)?,
                    BinOp::Sub => x.checked_sub(y).ok_or_else(overflow)?,
                    BinOp::Mul => x.checked_mul(y).ok_or_else(overflow)?,
                    BinOp::Div | BinOp::Rem if y == 0 => return Err(RunError::DivisionByZero(site.to_string())),
                    BinOp::Div => x.checked_div(y).ok_or_else(overflow)?,
                    BinOp::Rem => x.checked_rem(y).ok_or_else(overflow)?,
                    BinOp::Lt => (x < y) as i64,
                    BinOp::Le => (x <= y) as i64,
                    BinOp::Gt => (x > y) as i64,
                    BinOp::Ge => (x >= y) as i64,
                    BinOp::Eq => (x == y) as i64,
                    BinOp::Ne => (x != y) as i64,
                    BinOp::And | BinOp::Or => unreachable!(),
                }
            }
        })
    }
}

/// First cell where two final memories differ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub seed: u64,
    pub bindings: Vec<AliasBinding>,
    pub array: String,
    pub index: usize,
    pub left: i64,
    pub right: i64,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[{}] differs ({} vs {}) with seed {} and bindings {:?}",
            self.array, self.index, self.left, self.right, self.seed, self.bindings
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub runs: usize,
    pub divergence: Option<Divergence>,
}

impl EquivalenceReport {
    pub fn is_equivalent(&self) -> bool {
        self.divergence.is_none()
    }
}

/// Every combination of distinct/overlapping bindings for `pairs` alias
/// pairs.
pub fn all_bindings(pairs: usize) -> Vec<Vec<AliasBinding>> {
    (0..1usize << pairs)
        .map(|mask| {
            (0..pairs)
                .map(|k| {
                    if mask & (1 << k) != 0 {
                        AliasBinding::Overlapping(1)
                    } else {
                        AliasBinding::Distinct
                    }
                })
                .collect()
        })
        .collect()
}

fn first_difference(a: &MemoryState, b: &MemoryState) -> Option<(String, usize, i64, i64)> {
    for slot in &a.layout.arrays {
        let (Some(x), Some(y)) = (a.array(&slot.name), b.array(&slot.name)) else {
            continue;
        };
        if let Some(i) = (0..x.len()).find(|&i| x[i] != y[i]) {
            return Some((slot.name.clone(), i, x[i], y[i]));
        }
    }
    None
}

/// Runs both programs on `trials` seeded initializations under every alias
/// binding and reports the first memory divergence.
pub fn equivalent(p1: &Program, p2: &Program, trials: usize, seed: u64) -> Result<EquivalenceReport, RunError> {
    let arrays1: Vec<&ArrayDecl> = p1.arrays().collect();
    let arrays2: Vec<&ArrayDecl> = p2.arrays().collect();
    if arrays1 != arrays2 || p1.alias_pairs() != p2.alias_pairs() {
        return Err(RunError::DeclMismatch);
    }
    let mut runs = 0;
    for t in 0..trials {
        let s = seed.wrapping_add(t as u64);
        for bindings in all_bindings(p1.alias_pairs().len()) {
            let opts = RunOptions {
                seed: s,
                bindings: bindings.clone(),
                record_trace: false,
                ..RunOptions::default()
            };
            let (m1, _) = run(p1, &opts)?;
            let (m2, _) = run(p2, &opts)?;
            runs += 1;
            if let Some((array, index, left, right)) = first_difference(&m1, &m2) {
                return Ok(EquivalenceReport {
                    runs,
                    divergence: Some(Divergence {
                        seed: s,
                        bindings,
                        array,
                        index,
                        left,
                        right,
                    }),
                });
            }
        }
    }
    Ok(EquivalenceReport { runs, divergence: None })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelReport {
    pub orders_checked: usize,
    /// Description of the first order whose final memory disagreed.
    pub mismatch: Option<String>,
}

impl ParallelReport {
    pub fn is_consistent(&self) -> bool {
        self.mismatch.is_none()
    }
}

/// Executes the named loop's iterations in original, reversed and `trials`
/// shuffled orders and requires identical final memory.
pub fn parallel_consistent(p: &Program, loop_name: &str, trials: usize, seed: u64) -> Result<ParallelReport, RunError> {
    let tree = crate::ir::build_loop_tree(p);
    let node = tree.find(loop_name).ok_or_else(|| RunError::NoSuchLoop(loop_name.to_string()))?;
    let mut marked = p.clone();
    crate::ir::for_each_for_mut(&mut marked.body, &mut |f| f.parallel = false);
    match crate::ir::stmt_at_mut(&mut marked.body, &node.path) {
        Some(Stmt::For(f)) => f.parallel = true,
        _ => return Err(RunError::NoSuchLoop(loop_name.to_string())),
    }
    let mut orders = vec![ParallelOrder::Reversed];
    orders.extend((0..trials).map(|t| ParallelOrder::Shuffled(seed.wrapping_add(t as u64))));
    let base_opts = RunOptions {
        seed,
        record_trace: false,
        ..RunOptions::default()
    };
    let (reference, _) = run(&marked, &base_opts)?;
    let mut checked = 1;
    for order in orders {
        let opts = RunOptions {
            parallel: order,
            ..base_opts.clone()
        };
        let (m, _) = run(&marked, &opts)?;
        checked += 1;
        if let Some((array, index, left, right)) = first_difference(&reference, &m) {
            return Ok(ParallelReport {
                orders_checked: checked,
                mismatch: Some(format!("{order:?}: {array}[{index}] is {right}, sequential gives {left}")),
            });
        }
    }
    Ok(ParallelReport {
        orders_checked: checked,
        mismatch: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    fn prog(src: &str) -> Program {
        parse_program(src).unwrap()
    }

    #[test]
    fn simple_loop_and_trace() {
        let p = prog("array A[3]; for (i = 0; i < 3; i += 1) A[i] = i;");
        let (m, t) = run(&p, &RunOptions::default()).unwrap();
        assert_eq!(m.array("A").unwrap(), &[0, 1, 2]);
        let inst: Vec<_> = t.instances();
        assert_eq!(
            inst,
            vec![(StmtId(0), vec![0]), (StmtId(0), vec![1]), (StmtId(0), vec![2])]
        );
    }

    #[test]
    fn deterministic() {
        let p = prog("array A[5] init random; array B[5]; for (i = 1; i < 5; i += 1) B[i] = A[i - 1] * A[i];");
        let a = run(&p, &RunOptions::seeded(7)).unwrap();
        let b = run(&p, &RunOptions::seeded(7)).unwrap();
        assert_eq!(a, b);
        let c = run(&p, &RunOptions::seeded(8)).unwrap();
        assert_ne!(a.0.cells, c.0.cells);
        assert!(a.0.cells[..5].iter().all(|v| (-100..=100).contains(v)));
    }

    #[test]
    fn faults() {
        let p = prog("array A[3]; for (i = 0; i < 4; i += 1) A[i] = 1;");
        assert!(matches!(run(&p, &RunOptions::default()), Err(RunError::OutOfBounds { .. })));
        let p = prog("array A[3]; for (i = 0; i < 3; i += 1) A[i] = 1 / i;");
        assert!(matches!(run(&p, &RunOptions::default()), Err(RunError::DivisionByZero(_))));
        let p = prog("array A[1]; A[0] = 9223372036854775807; A[0] += 1;");
        assert!(matches!(run(&p, &RunOptions::default()), Err(RunError::Overflow(_))));
        let p = prog("array A[1]; while (A[0] < 1) { A[0] = 0; }");
        let opts = RunOptions {
            step_budget: 1000,
            ..RunOptions::default()
        };
        assert_eq!(run(&p, &opts).unwrap_err(), RunError::StepBudget(1000));
    }

    #[test]
    fn alias_binding_shares_storage() {
        let p = prog(
            "array A[4]; array B[4]; maybe_alias(A, B);\nA[1] = 5; if (disjoint(A, B)) { B[3] = 1; } else { B[3] = 2; }",
        );
        let (m, _) = run(&p, &RunOptions::default()).unwrap();
        assert_eq!(m.array("B").unwrap(), &[0, 0, 0, 1]);
        let opts = RunOptions {
            bindings: vec![AliasBinding::Overlapping(1)],
            ..RunOptions::default()
        };
        let (m, _) = run(&p, &opts).unwrap();
        assert_eq!(m.array("B").unwrap()[0], 5);
        assert_eq!(m.array("B").unwrap()[3], 2);
    }

    #[test]
    fn equivalence_reports() {
        let p = prog("array A[6] init random; for (i = 1; i < 6; i += 1) A[i] = A[i - 1] + 1;");
        assert!(equivalent(&p, &p, 5, 1).unwrap().is_equivalent());
        let q = prog("array A[6] init random; for (i = 1; i < 6; i += 1) A[i] = A[i - 1] + 2;");
        assert!(!equivalent(&p, &q, 5, 1).unwrap().is_equivalent());
    }

    #[test]
    fn parallel_consistency() {
        let p = prog("array A[8] init random; array B[8]; for (i = 0; i < 8; i += 1) B[i] = A[i] * 2;");
        assert!(parallel_consistent(&p, "i", 10, 3).unwrap().is_consistent());
        let p = prog("array A[8] init random; for (i = 1; i < 8; i += 1) A[i] = A[i - 1];");
        assert!(!parallel_consistent(&p, "i", 10, 3).unwrap().is_consistent());
        let p = prog("array A[8]; for (i = 0; i < 0; i += 1) A[i] = 1;");
        assert!(parallel_consistent(&p, "i", 10, 3).unwrap().is_consistent());
    }

    #[test]
    fn compound_assign_records_target_read() {
        let p = prog("array S[1]; array A[2]; for (i = 0; i < 2; i += 1) S[0] += A[i];");
        let (_, t) = run(&p, &RunOptions::default()).unwrap();
        assert_eq!(t.records[0].reads.len(), 2);
        assert_eq!(t.records[0].writes[0].global, 0);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "s0,0,A:0 S:0,S:0");
    }
}
