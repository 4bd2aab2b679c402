//! Evaluation, checking, repair and differentiation of constraints.
//!
//! Every constraint maps to a nonnegative, continuous *penalty* that is zero
//! exactly when the constraint holds:
//!
//! | constraint      | penalty                     |
//! |-----------------|-----------------------------|
//! | `a == b`        | `abs(a - b)`                |
//! | `a <= b`        | `max(0, a - b)`             |
//! | `a < b`         | `max(0, a - b + margin)`    |
//! | `a >= b`        | `max(0, b - a)`             |
//! | `a > b`         | `max(0, b - a + margin)`    |
//! | `and`           | sum of children             |
//! | `or`            | min of children             |
//! | `if g then b`   | `min(penalty(not g), penalty(b))` |
//!
//! The tree-walking functions here are the reference semantics. [`Compiled`]
//! evaluates the same arithmetic on flat tapes and adds reverse-mode
//! gradients.

mod fix;
mod tape;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fix::{fix, fix_row, FixError, FixRule};
pub use tape::{Compiled, CompiledConstraint, Tape};

use crate::dsl::{Constraint, ConstraintSet, NumExpr, RelOp};
use crate::math;
use crate::matrix::Matrix;

/// Guards that keep division and log finite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExprGuards {
    /// Denominators with smaller magnitude are clamped to `±div_floor`, keeping the sign.
    pub div_floor: f64,
    /// `log(x)` evaluates `ln(max(x, log_floor))`.
    pub log_floor: f64,
}

impl Default for ExprGuards {
    fn default() -> Self {
        Self { div_floor: 1e-12, log_floor: 1e-12 }
    }
}

impl ExprGuards {
    #[inline]
    pub(crate) fn denominator(&self, d: f64) -> (f64, bool) {
        if math::abs(d) < self.div_floor {
            (if d.is_sign_negative() { -self.div_floor } else { self.div_floor }, true)
        } else {
            (d, false)
        }
    }

    #[inline]
    pub(crate) fn log_arg(&self, a: f64) -> (f64, bool) {
        if a < self.log_floor {
            (self.log_floor, true)
        } else {
            (a, false)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// A row passes [`check`] when its largest constraint penalty is at most this.
    pub tolerance: f64,
    /// Margin that turns `<` and `>` into closed comparisons.
    pub strict_margin: f64,
    #[serde(default)]
    pub guards: ExprGuards,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self { tolerance: 1e-2, strict_margin: 1e-6, guards: ExprGuards::default() }
    }
}

impl PenaltyConfig {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self { tolerance, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("matrix has {got} columns, constraints expect {expected}")]
    Width { expected: usize, got: usize },
    #[error(transparent)]
    Fix(#[from] FixError),
}

/// Evaluates `e` on the feature vector `x` with default guards.
pub fn evaluate_expr(e: &NumExpr, x: &[f64]) -> f64 {
    evaluate_expr_with(e, x, &ExprGuards::default())
}

pub fn evaluate_expr_with(e: &NumExpr, x: &[f64], g: &ExprGuards) -> f64 {
    let ev = |e: &NumExpr| evaluate_expr_with(e, x, g);
    match e {
        NumExpr::Const(v) => *v,
        NumExpr::Feature(i) => x[*i],
        NumExpr::Add(a, b) => ev(a) + ev(b),
        NumExpr::Sub(a, b) => ev(a) - ev(b),
        NumExpr::Mul(a, b) => ev(a) * ev(b),
        NumExpr::Div(a, b) => {
            let n = ev(a);
            n / g.denominator(ev(b)).0
        }
        NumExpr::Pow(a, b) => {
            let base = ev(a);
            math::powf(base, ev(b))
        }
        NumExpr::Log(a) => math::ln(g.log_arg(ev(a)).0),
        NumExpr::Abs(a) => math::abs(ev(a)),
        NumExpr::Min(args) => args.iter().map(ev).reduce(|m, v| if v < m { v } else { m }).unwrap_or(f64::NAN),
        NumExpr::Max(args) => args.iter().map(ev).reduce(|m, v| if v > m { v } else { m }).unwrap_or(f64::NAN),
    }
}

#[inline]
pub(crate) fn relation_penalty(op: RelOp, a: f64, b: f64, margin: f64) -> f64 {
    let hinge = |v: f64| if v > 0.0 { v } else { 0.0 };
    match op {
        RelOp::Eq => math::abs(a - b),
        RelOp::Le => hinge(a - b),
        RelOp::Lt => hinge(a - b + margin),
        RelOp::Ge => hinge(b - a),
        RelOp::Gt => hinge(b - a + margin),
    }
}

/// Violation penalty of `c` at `x`; zero iff the constraint holds.
pub fn penalty(c: &Constraint, x: &[f64], cfg: &PenaltyConfig) -> f64 {
    match c {
        Constraint::Relation { op, left, right } => {
            let a = evaluate_expr_with(left, x, &cfg.guards);
            let b = evaluate_expr_with(right, x, &cfg.guards);
            relation_penalty(*op, a, b, cfg.strict_margin)
        }
        Constraint::And(cs) => cs.iter().map(|c| penalty(c, x, cfg)).sum(),
        Constraint::Or(cs) => min_first(cs.iter().map(|c| penalty(c, x, cfg))),
        Constraint::Implies { guard, body } => {
            let not_guard = match guard.as_ref() {
                Constraint::Relation { op, left, right } => {
                    let a = evaluate_expr_with(left, x, &cfg.guards);
                    let b = evaluate_expr_with(right, x, &cfg.guards);
                    // Validated constraints never carry an equality guard.
                    op.negate().map_or(f64::INFINITY, |neg| relation_penalty(neg, a, b, cfg.strict_margin))
                }
                other => penalty(other, x, cfg),
            };
            let p_body = penalty(body, x, cfg);
            if p_body < not_guard { p_body } else { not_guard }
        }
    }
}

pub(crate) fn min_first(it: impl Iterator<Item = f64>) -> f64 {
    it.reduce(|m, v| if v < m { v } else { m }).unwrap_or(f64::INFINITY)
}

/// Sum of per-constraint penalties.
pub fn total_penalty(cs: &ConstraintSet, x: &[f64], cfg: &PenaltyConfig) -> f64 {
    cs.iter().map(|c| penalty(c, x, cfg)).sum()
}

/// Largest per-constraint penalty (zero for an empty set).
pub fn max_penalty(cs: &ConstraintSet, x: &[f64], cfg: &PenaltyConfig) -> f64 {
    cs.iter().map(|c| penalty(c, x, cfg)).fold(0.0, |m, p| if p > m || p.is_nan() { p } else { m })
}

/// Whether a row satisfies every constraint within `cfg.tolerance`.
pub fn check_row(cs: &ConstraintSet, x: &[f64], cfg: &PenaltyConfig) -> bool {
    cs.iter().all(|c| penalty(c, x, cfg) <= cfg.tolerance)
}

/// Per-row satisfaction of `cs` within `cfg.tolerance`.
pub fn check(cs: &ConstraintSet, x: &Matrix, cfg: &PenaltyConfig) -> Result<Vec<bool>, EngineError> {
    let width = required_width(cs);
    if x.cols() < width {
        return Err(EngineError::Width { expected: width, got: x.cols() });
    }
    Ok(x.iter_rows().map(|row| check_row(cs, row, cfg)).collect())
}

/// Reverse-mode gradient of [`penalty`] with respect to `x`.
pub fn penalty_gradient(c: &Constraint, x: &[f64], cfg: &PenaltyConfig) -> Vec<f64> {
    let compiled = CompiledConstraint::new(c);
    let mut grad = vec![0.0; x.len()];
    compiled.penalty_and_gradient(x, cfg, 1.0, &mut grad);
    grad
}

/// Sum of penalties and its gradient.
pub fn total_penalty_gradient(cs: &ConstraintSet, x: &[f64], cfg: &PenaltyConfig) -> (f64, Vec<f64>) {
    let compiled = Compiled::new(cs);
    let mut grad = vec![0.0; x.len()];
    let total = compiled.total_with_gradient(x, cfg, &mut grad);
    (total, grad)
}

fn required_width(cs: &ConstraintSet) -> usize {
    cs.iter().filter_map(|c| c.features().last().copied()).max().map_or(0, |m| m + 1)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dsl::parse_constraint;
    use crate::dsl::tests::schema;
    use alloc::boxed::Box;

    fn parse(s: &str) -> Constraint {
        parse_constraint(s, &schema(8)).unwrap()
    }

    fn c(v: f64) -> NumExpr {
        NumExpr::Const(v)
    }

    fn f(i: usize) -> NumExpr {
        NumExpr::Feature(i)
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(evaluate_expr(&(f(1) + f(2)), &[0.0, 1.0, 2.0]), 3.0);
        assert_eq!(evaluate_expr(&c(7.0), &[]), 7.0);
        assert_eq!(evaluate_expr(&NumExpr::Min(vec![f(0), f(1)]), &[5.0, 3.0]), 3.0);
        assert_eq!(evaluate_expr(&NumExpr::Max(vec![f(0), f(1)]), &[5.0, 3.0]), 5.0);
    }

    #[test]
    fn guards() {
        let g = ExprGuards::default();
        assert_eq!(evaluate_expr(&(c(1.0) / f(0)), &[0.0]), 1e12);
        assert_eq!(evaluate_expr(&(c(1.0) / f(0)), &[-0.0]), -1e12);
        assert_eq!(evaluate_expr(&(c(1.0) / f(0)), &[-1e-20]), -1e12);
        assert_eq!(evaluate_expr(&f(0).log(), &[-5.0]), math::ln(g.log_floor));
        let loose = ExprGuards { div_floor: 0.5, log_floor: 1.0 };
        assert_eq!(evaluate_expr_with(&(c(1.0) / f(0)), &[0.25], &loose), 2.0);
        assert_eq!(evaluate_expr_with(&f(0).log(), &[0.5], &loose), 0.0);
    }

    #[test]
    fn penalty_examples() {
        let cfg = PenaltyConfig::default();
        let sum = parse("F0 == F1 + F2");
        assert_eq!(penalty(&sum, &[3.0, 1.0, 2.0], &cfg), 0.0);
        assert_eq!(penalty(&sum, &[0.0, 1.0, 2.0], &cfg), 3.0);
        let imp = parse("if F1 > 0 then F4 > 0");
        for f4 in [-10.0, 0.0, 10.0] {
            assert_eq!(penalty(&imp, &[0.0, -1.0, 0.0, 0.0, f4], &cfg), 0.0);
        }
        assert_eq!(penalty(&imp, &[0.0, 1.0, 0.0, 0.0, -2.0], &cfg), 1.0);
    }

    #[test]
    fn relation_mapping() {
        let cfg = PenaltyConfig { strict_margin: 0.25, ..Default::default() };
        let x = [1.0, 3.0];
        assert_eq!(penalty(&parse("F0 <= F1"), &x, &cfg), 0.0);
        assert_eq!(penalty(&parse("F1 <= F0"), &x, &cfg), 2.0);
        assert_eq!(penalty(&parse("F1 < F0"), &x, &cfg), 2.25);
        assert_eq!(penalty(&parse("F0 < F0"), &x, &cfg), 0.25);
        assert_eq!(penalty(&parse("F0 >= F1"), &x, &cfg), 2.0);
        assert_eq!(penalty(&parse("F0 > F1"), &x, &cfg), 2.25);
        assert_eq!(penalty(&parse("F0 >= F1 and F1 <= F0"), &x, &cfg), 4.0);
        assert_eq!(penalty(&parse("F0 >= F1 or F0 >= 2"), &x, &cfg), 1.0);
    }

    #[test]
    fn check_examples() {
        let mut cs = ConstraintSet::default();
        cs.push(parse("F0 == F1 + F2"), None);
        let x = Matrix::from_rows(&[[0.0, 1.0, 2.0], [3.0, 1.0, 2.0]]).unwrap();
        assert_eq!(check(&cs, &x, &PenaltyConfig::with_tolerance(0.0)).unwrap(), vec![false, true]);
        assert_eq!(check(&cs, &x, &PenaltyConfig::with_tolerance(5.0)).unwrap(), vec![true, true]);
        let narrow = Matrix::from_rows(&[[0.0, 1.0]]).unwrap();
        assert_eq!(check(&cs, &narrow, &PenaltyConfig::default()), Err(EngineError::Width { expected: 3, got: 2 }));
    }

    #[test]
    fn total_penalty_examples() {
        let cfg = PenaltyConfig::default();
        let empty = ConstraintSet::default();
        assert_eq!(total_penalty_gradient(&empty, &[1.0, 2.0], &cfg), (0.0, vec![0.0, 0.0]));
        let one = ConstraintSet::new(vec![parse("F0 == F1 + F2")]);
        let x = [0.0, 1.0, 2.0];
        assert_eq!(total_penalty(&one, &x, &cfg), penalty(&one.constraints[0], &x, &cfg));
        let two = ConstraintSet::new(vec![parse("F0 == F1 + F2"), parse("F1 <= 0")]);
        assert_eq!(total_penalty(&two, &x, &cfg), 4.0);
        assert_eq!(max_penalty(&two, &x, &cfg), 3.0);
    }

    #[test]
    fn gradient_examples() {
        let cfg = PenaltyConfig::default();
        assert_eq!(penalty_gradient(&parse("F0 == F1 + F2"), &[0.0, 1.0, 2.0], &cfg), vec![-1.0, 1.0, 1.0]);
        assert_eq!(penalty_gradient(&parse("F1 <= F2"), &[0.0, 1.0, 2.0], &cfg), vec![0.0, 0.0, 0.0]);
        // Ties pick the first argument.
        let g = penalty_gradient(&NumExpr::Max(vec![f(0), f(1)]).le(c(0.0)), &[1.0, 1.0], &cfg);
        assert_eq!(g, vec![1.0, 0.0]);
    }

    // ----- finite-difference oracle -----

    pub(crate) struct Lcg(pub u64);

    impl Lcg {
        pub fn next_f64(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
        pub fn below(&mut self, n: usize) -> usize {
            (self.next_f64() * n as f64) as usize % n
        }
        pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
            lo + (hi - lo) * self.next_f64()
        }
    }

    /// Random expression whose values stay moderate on `[0.5, 2]^n` inputs.
    pub(crate) fn random_expr(rng: &mut Lcg, depth: usize, n: usize) -> NumExpr {
        if depth == 0 || rng.next_f64() < 0.25 {
            return if rng.next_f64() < 0.7 { f(rng.below(n)) } else { c(rng.range(-2.0, 2.0)) };
        }
        let sub = |rng: &mut Lcg| random_expr(rng, depth - 1, n);
        match rng.below(10) {
            0 => sub(rng) + sub(rng),
            1 => sub(rng) - sub(rng),
            2 => sub(rng) * sub(rng),
            3 => sub(rng) / (c(3.0) + sub(rng).abs()),
            4 => (c(1.0) + sub(rng).abs()).pow(c(rng.range(0.5, 2.5))),
            5 => sub(rng).pow(c(2.0)),
            6 => (c(0.5) + sub(rng).abs()).log(),
            7 => sub(rng).abs(),
            8 => NumExpr::Min((0..1 + rng.below(3)).map(|_| sub(rng)).collect()),
            _ => NumExpr::Max((0..1 + rng.below(3)).map(|_| sub(rng)).collect()),
        }
    }

    pub(crate) fn random_constraint(rng: &mut Lcg, depth: usize, n: usize) -> Constraint {
        let rel = |rng: &mut Lcg, eq: bool| {
            let ops = [RelOp::Eq, RelOp::Le, RelOp::Lt, RelOp::Ge, RelOp::Gt];
            let op = if eq { ops[rng.below(5)] } else { ops[1 + rng.below(4)] };
            Constraint::Relation { op, left: random_expr(rng, 3, n), right: random_expr(rng, 3, n) }
        };
        if depth == 0 || rng.next_f64() < 0.4 {
            return rel(rng, true);
        }
        match rng.below(3) {
            0 => Constraint::And((0..2 + rng.below(2)).map(|_| random_constraint(rng, depth - 1, n)).collect()),
            1 => Constraint::Or((0..2 + rng.below(2)).map(|_| random_constraint(rng, depth - 1, n)).collect()),
            _ => Constraint::Implies { guard: Box::new(rel(rng, false)), body: Box::new(random_constraint(rng, depth - 1, n)) },
        }
    }

    /// Smallest distance to a non-differentiable switch anywhere in `e` at `x`.
    fn expr_kink_margin(e: &NumExpr, x: &[f64], cfg: &PenaltyConfig) -> f64 {
        let ev = |e: &NumExpr| evaluate_expr_with(e, x, &cfg.guards);
        let rec = |e: &NumExpr| expr_kink_margin(e, x, cfg);
        let spread = |args: &[NumExpr]| {
            let v: Vec<f64> = args.iter().map(ev).collect();
            let mut m = f64::INFINITY;
            for i in 0..v.len() {
                for j in i + 1..v.len() {
                    m = m.min(math::abs(v[i] - v[j]));
                }
            }
            m
        };
        match e {
            NumExpr::Const(_) | NumExpr::Feature(_) => f64::INFINITY,
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Mul(a, b) | NumExpr::Pow(a, b) => rec(a).min(rec(b)),
            NumExpr::Div(a, b) => rec(a).min(rec(b)).min(math::abs(math::abs(ev(b)) - cfg.guards.div_floor)),
            NumExpr::Log(a) => rec(a).min(math::abs(ev(a) - cfg.guards.log_floor)),
            NumExpr::Abs(a) => rec(a).min(math::abs(ev(a))),
            NumExpr::Min(args) | NumExpr::Max(args) => args.iter().map(rec).fold(spread(args), f64::min),
        }
    }

    pub(crate) fn kink_margin(c: &Constraint, x: &[f64], cfg: &PenaltyConfig) -> f64 {
        let rel_margin = |op: RelOp, l: &NumExpr, r: &NumExpr| {
            let d = evaluate_expr_with(l, x, &cfg.guards) - evaluate_expr_with(r, x, &cfg.guards);
            let shift = match op {
                RelOp::Lt => cfg.strict_margin,
                RelOp::Gt => -cfg.strict_margin,
                _ => 0.0,
            };
            math::abs(d + shift).min(expr_kink_margin(l, x, cfg)).min(expr_kink_margin(r, x, cfg))
        };
        let spread = |ps: &[f64]| {
            let mut m = f64::INFINITY;
            for i in 0..ps.len() {
                for j in i + 1..ps.len() {
                    m = m.min(math::abs(ps[i] - ps[j]));
                }
            }
            m
        };
        match c {
            Constraint::Relation { op, left, right } => rel_margin(*op, left, right),
            Constraint::And(cs) => cs.iter().map(|c| kink_margin(c, x, cfg)).fold(f64::INFINITY, f64::min),
            Constraint::Or(cs) => {
                let ps: Vec<f64> = cs.iter().map(|c| penalty(c, x, cfg)).collect();
                cs.iter().map(|c| kink_margin(c, x, cfg)).fold(spread(&ps), f64::min)
            }
            Constraint::Implies { guard, body } => {
                let Constraint::Relation { op, left, right } = guard.as_ref() else { unreachable!() };
                let neg = Constraint::Relation { op: op.negate().unwrap(), left: left.clone(), right: right.clone() };
                let ps = [penalty(&neg, x, cfg), penalty(body, x, cfg)];
                spread(&ps).min(kink_margin(&neg, x, cfg)).min(kink_margin(body, x, cfg))
            }
        }
    }

    pub(crate) fn central_difference(c: &Constraint, x: &[f64], cfg: &PenaltyConfig, h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|j| {
                let mut up = x.to_vec();
                let mut down = x.to_vec();
                up[j] += h;
                down[j] -= h;
                (penalty(c, &up, cfg) - penalty(c, &down, cfg)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = PenaltyConfig::default();
        let mut rng = Lcg(42);
        let n = 5;
        let mut checked = 0;
        while checked < 200 {
            let con = random_constraint(&mut rng, 2, n);
            let x: Vec<f64> = (0..n).map(|_| rng.range(0.5, 2.0)).collect();
            if kink_margin(&con, &x, &cfg) < 1e-3 {
                continue;
            }
            let g = penalty_gradient(&con, &x, &cfg);
            let fd = central_difference(&con, &x, &cfg, 1e-5);
            for j in 0..n {
                let err = math::abs(g[j] - fd[j]) / math::abs(fd[j]).max(1.0);
                assert!(err <= 1e-4, "{con:?} at {x:?}: grad {g:?} vs fd {fd:?}");
            }
            checked += 1;
        }
    }

    #[test]
    fn features_of_matches_sensitivity() {
        // A coordinate outside features_of never moves the value; every
        // listed coordinate moves it for some random input.
        let mut rng = Lcg(7);
        let n = 6;
        for _ in 0..200 {
            let e = random_expr(&mut rng, 3, n);
            let feats = e.features();
            for j in 0..n {
                let mut moved = false;
                for _ in 0..20 {
                    let x: Vec<f64> = (0..n).map(|_| rng.range(0.5, 2.0)).collect();
                    let mut y = x.clone();
                    y[j] += rng.range(0.1, 1.0);
                    if evaluate_expr(&e, &x) != evaluate_expr(&e, &y) {
                        moved = true;
                        break;
                    }
                }
                if !feats.contains(&j) {
                    assert!(!moved, "feature {j} not listed but changes {e:?}");
                }
            }
        }
        let sum = parse("F0 == F1 + F2");
        for j in 0..3 {
            let x = [0.0, 1.0, 2.0];
            let mut y = x;
            y[j] += 1.0;
            assert_ne!(penalty(&sum, &x, &PenaltyConfig::default()), penalty(&sum, &y, &PenaltyConfig::default()));
        }
    }
}
