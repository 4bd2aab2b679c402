//! Flat evaluation tapes with reverse-mode differentiation.

use alloc::boxed::Box;

use alloc::vec::Vec;
#[cfg(test)]
use alloc::vec;

use super::{relation_penalty, PenaltyConfig};
use crate::dsl::{Constraint, ConstraintSet, NumExpr, RelOp};
use crate::math;

type Slot = u32;

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Feature(usize),
    Add(Slot, Slot),
    Sub(Slot, Slot),
    Mul(Slot, Slot),
    Div(Slot, Slot),
    Pow(Slot, Slot),
    Log(Slot),
    Abs(Slot),
    /// Range into `Tape::args`.
    Min(u32, u32),
    Max(u32, u32),
}

/// Post-order instruction list for one expression; the root is the last slot.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    args: Vec<Slot>,
}

impl Tape {
    pub fn new(e: &NumExpr) -> Self {
        let mut t = Tape { ops: Vec::new(), args: Vec::new() };
        t.emit(e);
        t
    }

    fn emit(&mut self, e: &NumExpr) -> Slot {
        let op = match e {
            NumExpr::Const(v) => Op::Const(*v),
            NumExpr::Feature(i) => Op::Feature(*i),
            NumExpr::Add(a, b) => Op::Add(self.emit(a), self.emit(b)),
            NumExpr::Sub(a, b) => Op::Sub(self.emit(a), self.emit(b)),
            NumExpr::Mul(a, b) => Op::Mul(self.emit(a), self.emit(b)),
            NumExpr::Div(a, b) => Op::Div(self.emit(a), self.emit(b)),
            NumExpr::Pow(a, b) => Op::Pow(self.emit(a), self.emit(b)),
            NumExpr::Log(a) => Op::Log(self.emit(a)),
            NumExpr::Abs(a) => Op::Abs(self.emit(a)),
            NumExpr::Min(xs) | NumExpr::Max(xs) => {
                let slots: Vec<Slot> = xs.iter().map(|a| self.emit(a)).collect();
                let start = self.args.len() as u32;
                self.args.extend_from_slice(&slots);
                let end = self.args.len() as u32;
                if matches!(e, NumExpr::Min(_)) {
                    Op::Min(start, end)
                } else {
                    Op::Max(start, end)
                }
            }
        };
        self.ops.push(op);
        (self.ops.len() - 1) as Slot
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Index into `args[start..end]` of the selected min/max operand; first wins ties.
    fn select(&self, vals: &[f64], start: u32, end: u32, want_min: bool) -> usize {
        let args = &self.args[start as usize..end as usize];
        let mut best = 0;
        for (k, &s) in args.iter().enumerate().skip(1) {
            let (v, b) = (vals[s as usize], vals[args[best] as usize]);
            if (want_min && v < b) || (!want_min && v > b) {
                best = k;
            }
        }
        best
    }

    /// Fills `vals` with every slot value and returns the root value.
    pub fn forward(&self, x: &[f64], cfg: &PenaltyConfig, vals: &mut Vec<f64>) -> f64 {
        vals.clear();
        let g = &cfg.guards;
        for op in &self.ops {
            let v = |s: &Slot| vals[*s as usize];
            let out = match op {
                Op::Const(c) => *c,
                Op::Feature(i) => x[*i],
                Op::Add(a, b) => v(a) + v(b),
                Op::Sub(a, b) => v(a) - v(b),
                Op::Mul(a, b) => v(a) * v(b),
                Op::Div(a, b) => v(a) / g.denominator(v(b)).0,
                Op::Pow(a, b) => math::powf(v(a), v(b)),
                Op::Log(a) => math::ln(g.log_arg(v(a)).0),
                Op::Abs(a) => math::abs(v(a)),
                Op::Min(s, e) => vals[self.args[*s as usize + self.select(vals, *s, *e, true)] as usize],
                Op::Max(s, e) => vals[self.args[*s as usize + self.select(vals, *s, *e, false)] as usize],
            };
            vals.push(out);
        }
        *vals.last().unwrap_or(&f64::NAN)
    }

    /// Accumulates `seed * d(root)/dx` into `grad`, using values from [`Tape::forward`].
    pub fn backward(&self, vals: &[f64], cfg: &PenaltyConfig, seed: f64, adj: &mut Vec<f64>, grad: &mut [f64]) {
        if seed == 0.0 || self.ops.is_empty() {
            return;
        }
        let g = &cfg.guards;
        adj.clear();
        adj.resize(self.ops.len(), 0.0);
        *adj.last_mut().unwrap() = seed;
        for (k, op) in self.ops.iter().enumerate().rev() {
            let d = adj[k];
            if d == 0.0 {
                continue;
            }
            let v = |s: &Slot| vals[*s as usize];
            match op {
                Op::Const(_) => {}
                Op::Feature(i) => grad[*i] += d,
                Op::Add(a, b) => {
                    adj[*a as usize] += d;
                    adj[*b as usize] += d;
                }
                Op::Sub(a, b) => {
                    adj[*a as usize] += d;
                    adj[*b as usize] -= d;
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (v(a), v(b));
                    adj[*a as usize] += d * vb;
                    adj[*b as usize] += d * va;
                }
                Op::Div(a, b) => {
                    let (den, clamped) = g.denominator(v(b));
                    adj[*a as usize] += d / den;
                    if !clamped {
                        adj[*b as usize] -= d * v(a) / (den * den);
                    }
                }
                Op::Pow(a, b) => {
                    let (base, exponent) = (v(a), v(b));
                    adj[*a as usize] += d * exponent * math::powf(base, exponent - 1.0);
                    if base > 0.0 {
                        adj[*b as usize] += d * vals[k] * math::ln(base);
                    }
                }
                Op::Log(a) => {
                    let (arg, clamped) = g.log_arg(v(a));
                    if !clamped {
                        adj[*a as usize] += d / arg;
                    }
                }
                Op::Abs(a) => adj[*a as usize] += d * math::sign(v(a)),
                Op::Min(s, e) | Op::Max(s, e) => {
                    let pick = self.select(vals, *s, *e, matches!(op, Op::Min(..)));
                    adj[self.args[*s as usize + pick] as usize] += d;
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Node {
    /// Implication guards are stored already negated.
    Rel { op: RelOp, left: Tape, right: Tape },
    And(Vec<Node>),
    Or(Vec<Node>),
    Implies { not_guard: Box<Node>, body: Box<Node> },
}

/// One constraint compiled to tapes.
#[derive(Clone, Debug)]
pub struct CompiledConstraint {
    root: Node,
}

#[derive(Default)]
struct Scratch {
    left: Vec<f64>,
    right: Vec<f64>,
    adj: Vec<f64>,
}

fn compile(c: &Constraint) -> Node {
    match c {
        Constraint::Relation { op, left, right } => Node::Rel { op: *op, left: Tape::new(left), right: Tape::new(right) },
        Constraint::And(cs) => Node::And(cs.iter().map(compile).collect()),
        Constraint::Or(cs) => Node::Or(cs.iter().map(compile).collect()),
        Constraint::Implies { guard, body } => {
            let not_guard = match guard.as_ref() {
                Constraint::Relation { op, left, right } => match op.negate() {
                    Some(neg) => Node::Rel { op: neg, left: Tape::new(left), right: Tape::new(right) },
                    // Unsatisfiable negation: the body alone decides.
                    None => Node::Or(Vec::new()),
                },
                other => compile(other),
            };
            Node::Implies { not_guard: Box::new(not_guard), body: Box::new(compile(body)) }
        }
    }
}

impl Node {
    fn penalty(&self, x: &[f64], cfg: &PenaltyConfig, s: &mut Scratch) -> f64 {
        match self {
            Node::Rel { op, left, right } => {
                let a = left.forward(x, cfg, &mut s.left);
                let b = right.forward(x, cfg, &mut s.right);
                relation_penalty(*op, a, b, cfg.strict_margin)
            }
            Node::And(cs) => cs.iter().map(|c| c.penalty(x, cfg, s)).sum(),
            Node::Or(cs) if cs.is_empty() => f64::INFINITY,
            Node::Or(cs) => {
                let mut best = f64::INFINITY;
                for (k, c) in cs.iter().enumerate() {
                    let p = c.penalty(x, cfg, s);
                    if k == 0 || p < best {
                        best = p;
                    }
                }
                best
            }
            Node::Implies { not_guard, body } => {
                let pg = not_guard.penalty(x, cfg, s);
                let pb = body.penalty(x, cfg, s);
                if pb < pg { pb } else { pg }
            }
        }
    }

    /// Returns the penalty and accumulates `seed * gradient` into `grad`.
    fn penalty_grad(&self, x: &[f64], cfg: &PenaltyConfig, seed: f64, s: &mut Scratch, grad: &mut [f64]) -> f64 {
        match self {
            Node::Rel { op, left, right } => {
                let a = left.forward(x, cfg, &mut s.left);
                let b = right.forward(x, cfg, &mut s.right);
                let p = relation_penalty(*op, a, b, cfg.strict_margin);
                // d penalty / d (a - b)
                let slope = match op {
                    RelOp::Eq => math::sign(a - b),
                    RelOp::Le | RelOp::Lt if p > 0.0 => 1.0,
                    RelOp::Ge | RelOp::Gt if p > 0.0 => -1.0,
                    _ => 0.0,
                };
                if slope != 0.0 && seed != 0.0 {
                    left.backward(&s.left, cfg, seed * slope, &mut s.adj, grad);
                    right.backward(&s.right, cfg, -seed * slope, &mut s.adj, grad);
                }
                p
            }
            Node::And(cs) => cs.iter().map(|c| c.penalty_grad(x, cfg, seed, s, grad)).sum(),
            Node::Or(cs) if cs.is_empty() => f64::INFINITY,
            Node::Or(cs) => {
                let ps: Vec<f64> = cs.iter().map(|c| c.penalty(x, cfg, s)).collect();
                let pick = argmin_first(&ps);
                cs[pick].penalty_grad(x, cfg, seed, s, grad);
                ps[pick]
            }
            Node::Implies { not_guard, body } => {
                let pg = not_guard.penalty(x, cfg, s);
                let pb = body.penalty(x, cfg, s);
                if pb < pg {
                    body.penalty_grad(x, cfg, seed, s, grad)
                } else {
                    not_guard.penalty_grad(x, cfg, seed, s, grad);
                    pg
                }
            }
        }
    }
}

fn argmin_first(ps: &[f64]) -> usize {
    let mut best = 0;
    for (k, p) in ps.iter().enumerate().skip(1) {
        if *p < ps[best] {
            best = k;
        }
    }
    best
}

impl CompiledConstraint {
    pub fn new(c: &Constraint) -> Self {
        Self { root: compile(c) }
    }

    pub fn penalty(&self, x: &[f64], cfg: &PenaltyConfig) -> f64 {
        self.root.penalty(x, cfg, &mut Scratch::default())
    }

    /// Returns the penalty and adds `seed * gradient` into `grad`.
    pub fn penalty_and_gradient(&self, x: &[f64], cfg: &PenaltyConfig, seed: f64, grad: &mut [f64]) -> f64 {
        self.root.penalty_grad(x, cfg, seed, &mut Scratch::default(), grad)
    }
}

/// A whole [`ConstraintSet`] compiled for repeated evaluation.
#[derive(Clone, Debug)]
pub struct Compiled {
    constraints: Vec<CompiledConstraint>,
}

impl Compiled {
    pub fn new(cs: &ConstraintSet) -> Self {
        Self { constraints: cs.iter().map(CompiledConstraint::new).collect() }
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn penalties(&self, x: &[f64], cfg: &PenaltyConfig) -> Vec<f64> {
        let mut s = Scratch::default();
        self.constraints.iter().map(|c| c.root.penalty(x, cfg, &mut s)).collect()
    }

    pub fn total(&self, x: &[f64], cfg: &PenaltyConfig) -> f64 {
        let mut s = Scratch::default();
        self.constraints.iter().map(|c| c.root.penalty(x, cfg, &mut s)).sum()
    }

    pub fn max(&self, x: &[f64], cfg: &PenaltyConfig) -> f64 {
        self.penalties(x, cfg).into_iter().fold(0.0, |m, p| if p > m || p.is_nan() { p } else { m })
    }

    /// Whether every constraint's penalty is within the tolerance.
    pub fn satisfied(&self, x: &[f64], cfg: &PenaltyConfig) -> bool {
        let mut s = Scratch::default();
        self.constraints.iter().all(|c| c.root.penalty(x, cfg, &mut s) <= cfg.tolerance)
    }

    /// Sum of penalties; overwrites `grad` with its gradient.
    pub fn total_with_gradient(&self, x: &[f64], cfg: &PenaltyConfig, grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut s = Scratch::default();
        self.constraints.iter().map(|c| c.root.penalty_grad(x, cfg, 1.0, &mut s, grad)).sum()
    }
}
