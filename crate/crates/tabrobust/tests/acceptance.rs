//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabrobust::exec::RayonExecutor;
use tabrobust::pipeline::{self, BenchmarkRun, Config, Seeds, WallClock};
use tabrobust_core::attack::checkpoint_schedule;
use tabrobust_core::bench::{budget_sweep, Evaluation, EvaluationReport, NoClock, SweepAxis, SweepSpec};
use tabrobust_core::dsl::{parse_constraint_file, Constraint, RelOp};
use tabrobust_core::engine::{check_row, evaluate_expr_with, fix, penalty, penalty_gradient, FixRule, PenaltyConfig};
use tabrobust_core::metrics::metrics;
use tabrobust_core::model::ReferenceModel;
use tabrobust_core::{DatasetSchema, FeatureMetadata, Matrix, NumExpr};

const THREADS: usize = 4;

struct Line {
    id: u8,
    title: &'static str,
    pass: bool,
    detail: String,
    seconds: f64,
}

fn run(id: u8, title: &'static str, limit_s: Option<f64>, f: impl FnOnce() -> Result<String, String>) -> Line {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let seconds = start.elapsed().as_secs_f64();
    let (mut pass, mut detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if let Some(limit) = limit_s {
        if seconds >= limit {
            pass = false;
            detail = format!("{detail}; took {seconds:.1} s, limit {limit} s");
        }
    }
    Line { id, title, pass, detail, seconds }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------- 1: fixer oracle ----------

fn fixer_oracle() -> Result<String, String> {
    let schema = DatasetSchema::new((0..3).map(|j| FeatureMetadata::continuous(format!("F{j}"), -100.0, 100.0)).collect(), 1)
        .map_err(|e| e.to_string())?;
    let cs = parse_constraint_file("F0 == F1 + F2", &schema).map_err(|e| e.to_string())?;
    let x = Matrix::from_rows(&[[0.0, 1.0, 2.0], [3.0, 4.0, 5.0], [6.0, 7.0, 8.0]]).unwrap();
    let expected = Matrix::from_rows(&[[3.0, 1.0, 2.0], [9.0, 4.0, 5.0], [15.0, 7.0, 8.0]]).unwrap();
    let got = fix(&FixRule::derive(&cs, None), &x).map_err(|e| e.to_string())?;
    ensure(got == expected, || format!("got {got:?}"))?;
    Ok("output equals the expected matrix exactly".into())
}

// ---------- 2: constraint gradients ----------

struct Gen(ChaCha8Rng);

impl Gen {
    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
    fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }
    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    fn expr(&mut self, depth: usize, n: usize) -> NumExpr {
        if depth == 0 || self.unit() < 0.25 {
            return if self.unit() < 0.7 { NumExpr::feature(self.below(n)) } else { NumExpr::constant(self.range(-2.0, 2.0)) };
        }
        let d = depth - 1;
        let c = NumExpr::constant;
        match self.below(10) {
            0 => self.expr(d, n) + self.expr(d, n),
            1 => self.expr(d, n) - self.expr(d, n),
            2 => self.expr(d, n) * self.expr(d, n),
            3 => self.expr(d, n) / (c(3.0) + self.expr(d, n).abs()),
            4 => (c(1.0) + self.expr(d, n).abs()).pow(c(self.range(0.5, 2.5))),
            5 => self.expr(d, n).pow(c(2.0)),
            6 => (c(0.5) + self.expr(d, n).abs()).log(),
            7 => self.expr(d, n).abs(),
            8 => NumExpr::Min((0..1 + self.below(3)).map(|_| self.expr(d, n)).collect()),
            _ => NumExpr::Max((0..1 + self.below(3)).map(|_| self.expr(d, n)).collect()),
        }
    }

    fn relation(&mut self, allow_eq: bool, n: usize) -> Constraint {
        let ops = [RelOp::Eq, RelOp::Le, RelOp::Lt, RelOp::Ge, RelOp::Gt];
        let op = if allow_eq { ops[self.below(5)] } else { ops[1 + self.below(4)] };
        Constraint::Relation { op, left: self.expr(3, n), right: self.expr(3, n) }
    }

    fn constraint(&mut self, depth: usize, n: usize) -> Constraint {
        if depth == 0 || self.unit() < 0.4 {
            return self.relation(true, n);
        }
        match self.below(3) {
            0 => Constraint::And((0..2 + self.below(2)).map(|_| self.constraint(depth - 1, n)).collect()),
            1 => Constraint::Or((0..2 + self.below(2)).map(|_| self.constraint(depth - 1, n)).collect()),
            _ => Constraint::Implies { guard: Box::new(self.relation(false, n)), body: Box::new(self.constraint(depth - 1, n)) },
        }
    }
}

fn min_gap(v: &[f64]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            m = m.min((v[i] - v[j]).abs());
        }
    }
    m
}

/// Distance from `x` to the nearest switch of any abs, min, max, hinge,
/// guard or penalty selection in the expression.
fn expr_margin(e: &NumExpr, x: &[f64], cfg: &PenaltyConfig) -> f64 {
    let ev = |e: &NumExpr| evaluate_expr_with(e, x, &cfg.guards);
    let rec = |e: &NumExpr| expr_margin(e, x, cfg);
    match e {
        NumExpr::Const(_) | NumExpr::Feature(_) => f64::INFINITY,
        NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Mul(a, b) | NumExpr::Pow(a, b) => rec(a).min(rec(b)),
        NumExpr::Div(a, b) => rec(a).min(rec(b)).min((ev(b).abs() - cfg.guards.div_floor).abs()),
        NumExpr::Log(a) => rec(a).min((ev(a) - cfg.guards.log_floor).abs()),
        NumExpr::Abs(a) => rec(a).min(ev(a).abs()),
        NumExpr::Min(args) | NumExpr::Max(args) => {
            let vals: Vec<f64> = args.iter().map(ev).collect();
            args.iter().map(rec).fold(min_gap(&vals), f64::min)
        }
    }
}

fn margin(c: &Constraint, x: &[f64], cfg: &PenaltyConfig) -> f64 {
    match c {
        Constraint::Relation { op, left, right } => {
            let d = evaluate_expr_with(left, x, &cfg.guards) - evaluate_expr_with(right, x, &cfg.guards);
            let shift = match op {
                RelOp::Lt => cfg.strict_margin,
                RelOp::Gt => -cfg.strict_margin,
                _ => 0.0,
            };
            (d + shift).abs().min(expr_margin(left, x, cfg)).min(expr_margin(right, x, cfg))
        }
        Constraint::And(cs) => cs.iter().map(|c| margin(c, x, cfg)).fold(f64::INFINITY, f64::min),
        Constraint::Or(cs) => {
            let ps: Vec<f64> = cs.iter().map(|c| penalty(c, x, cfg)).collect();
            cs.iter().map(|c| margin(c, x, cfg)).fold(min_gap(&ps), f64::min)
        }
        Constraint::Implies { guard, body } => {
            let Constraint::Relation { op, left, right } = guard.as_ref() else { return 0.0 };
            let neg = Constraint::Relation { op: op.negate().expect("guards are inequalities"), left: left.clone(), right: right.clone() };
            let ps = [penalty(&neg, x, cfg), penalty(body, x, cfg)];
            min_gap(&ps).min(margin(&neg, x, cfg)).min(margin(body, x, cfg))
        }
    }
}

fn constraint_gradients() -> Result<String, String> {
    let cfg = PenaltyConfig::default();
    let mut g = Gen(ChaCha8Rng::seed_from_u64(2024));
    let (n, h) = (5, 1e-5);
    let (mut checked, mut worst, mut nonzero) = (0, 0.0f64, 0);
    while checked < 150 {
        let c = g.constraint(2, n);
        let x: Vec<f64> = (0..n).map(|_| g.range(0.5, 2.0)).collect();
        if margin(&c, &x, &cfg) < 1e-3 {
            continue;
        }
        let grad = penalty_gradient(&c, &x, &cfg);
        for j in 0..n {
            let (mut up, mut down) = (x.clone(), x.clone());
            up[j] += h;
            down[j] -= h;
            let fd = (penalty(&c, &up, &cfg) - penalty(&c, &down, &cfg)) / (2.0 * h);
            let err = (grad[j] - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(err);
            ensure(err <= 1e-4, || format!("{c:?} at {x:?}: coordinate {j} gradient {} vs {fd}", grad[j]))?;
        }
        nonzero += usize::from(grad.iter().any(|&v| v != 0.0));
        checked += 1;
    }
    ensure(nonzero >= 50, || format!("only {nonzero} pairs had a nonzero gradient"))?;
    Ok(format!("{checked} pairs ({nonzero} with nonzero gradient), max relative error {worst:.2e}"))
}

// ---------- 3: model gradients ----------

/// Weights of layer `k` followed by its biases, by flat index.
fn param(m: &mut ReferenceModel, k: usize, idx: usize) -> &mut f64 {
    let layer = &mut m.layers[k];
    let nw = layer.weights.len();
    if idx < nw {
        &mut layer.weights[idx]
    } else {
        &mut layer.bias[idx - nw]
    }
}

fn model_gradients() -> Result<String, String> {
    let mut m = ReferenceModel::new(8, &[64, 32, 16], 5);
    let mut g = Gen(ChaCha8Rng::seed_from_u64(77));
    let h = 1e-5;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    let mut worst = 0.0f64;
    for point in 0..50 {
        let x: Vec<f64> = (0..8).map(|_| g.unit()).collect();
        let y = (point % 2) as u8;
        let (_, gx) = m.input_gradient(&x, y).map_err(|e| e.to_string())?;
        for j in 0..8 {
            let (mut up, mut down) = (x.clone(), x.clone());
            up[j] += h;
            down[j] -= h;
            let fd = (m.backprop(&up, y, None, None) - m.backprop(&down, y, None, None)) / (2.0 * h);
            worst = worst.max(rel(gx[j], fd));
            ensure(rel(gx[j], fd) <= 1e-4, || format!("input {j} at point {point}: {} vs {fd}", gx[j]))?;
        }
        let mut grads = m.zeros_like();
        m.backprop(&x, y, Some(&mut grads), None);
        for k in 0..m.layers.len() {
            let nw = m.layers[k].weights.len();
            for idx in 0..nw + m.layers[k].bias.len() {
                let analytic = if idx < nw { grads[k].weights[idx] } else { grads[k].bias[idx - nw] };
                let w0 = *param(&mut m, k, idx);
                *param(&mut m, k, idx) = w0 + h;
                let up = m.backprop(&x, y, None, None);
                *param(&mut m, k, idx) = w0 - h;
                let down = m.backprop(&x, y, None, None);
                *param(&mut m, k, idx) = w0;
                let fd = (up - down) / (2.0 * h);
                worst = worst.max(rel(analytic, fd));
                ensure(rel(analytic, fd) <= 1e-4, || format!("layer {k} parameter {idx} at point {point}: {analytic} vs {fd}"))?;
            }
        }
    }
    Ok(format!("50 points, inputs and all {} parameters, max relative error {worst:.2e}", m.n_params()))
}

// ---------- 4: checkpoint schedule ----------

/// Schedule iterated by hand in integer hundredths: gaps start at 22 and
/// shrink by 3 down to a floor of 6.
fn hand_schedule(n: usize) -> Vec<usize> {
    let mut out = vec![0];
    let (mut p, mut gap) = (0usize, 22usize);
    loop {
        p += gap;
        let w = (p * n).div_ceil(100).min(n);
        if *out.last().unwrap() != w {
            out.push(w);
        }
        if w == n {
            return out;
        }
        gap = gap.saturating_sub(3).max(6);
    }
}

fn checkpoints() -> Result<String, String> {
    ensure(hand_schedule(10) == [0, 3, 5, 6, 7, 8, 9, 10], || format!("oracle gives {:?}", hand_schedule(10)))?;
    for n in [5, 10, 20, 100] {
        let got = checkpoint_schedule(n);
        ensure(got == hand_schedule(n), || format!("n_iter {n}: {got:?} vs {:?}", hand_schedule(n)))?;
    }
    Ok(format!("n_iter=10 -> {:?}; 5, 20, 100 match the hand recurrence", checkpoint_schedule(10)))
}

// ---------- 5-7, 9, 11: synthetic benchmark ----------

/// Independent re-check of one reported success: types and bounds, every
/// constraint at tolerance, the eps-ball in schema-scaled space, immutable
/// coordinates and the model decision.
fn independent_recheck(
    model: &ReferenceModel,
    schema: &DatasetSchema,
    cs: &tabrobust_core::ConstraintSet,
    report: &EvaluationReport,
    orig: &[f64],
    cand: &[f64],
) -> Result<(), String> {
    if let Some(v) = schema.row_violation(cand) {
        return Err(format!("type or bound violation {v:?}"));
    }
    let cfg = PenaltyConfig { tolerance: report.attack.tolerance, strict_margin: report.attack.strict_margin, ..Default::default() };
    for (k, c) in cs.iter().enumerate() {
        let p = penalty(c, cand, &cfg);
        if p > cfg.tolerance {
            return Err(format!("constraint {k} penalty {p}"));
        }
    }
    if !check_row(cs, cand, &cfg) {
        return Err("checker rejects the row".into());
    }
    let sq: f64 = schema
        .features
        .iter()
        .enumerate()
        .map(|(j, f)| ((cand[j] - orig[j]) / (f.max - f.min)).powi(2))
        .sum();
    let eps = report.attack.budget.eps;
    if sq.sqrt() > eps + 1e-9 {
        return Err(format!("distance {} above eps {eps}", sq.sqrt()));
    }
    for (j, f) in schema.features.iter().enumerate() {
        if !f.mutable && cand[j].to_bits() != orig[j].to_bits() {
            return Err(format!("immutable column {} changed", f.name));
        }
    }
    let p = model.predict_proba(&Matrix::from_rows(&[cand]).unwrap()).map_err(|e| e.to_string())?;
    if (p.get(0, 1) >= 0.5) == (schema.critical_class == 1) {
        return Err(format!("not misclassified (p1 = {})", p.get(0, 1)));
    }
    Ok(())
}

fn success_set(ev: &Evaluation) -> Vec<usize> {
    ev.result.samples.iter().enumerate().filter(|(_, s)| s.valid_success()).map(|(i, _)| ev.attack_rows[i]).collect()
}

struct Standard {
    run: BenchmarkRun,
    seconds: f64,
}

fn validity(cfg: &Config, std0: &Standard) -> Result<String, String> {
    let ev = &std0.run.standard_eval;
    let r = &ev.report;
    let split = &std0.run.split;
    ensure(cfg.synth.n_rows == 5000, || "benchmark must use 5000 rows".into())?;
    ensure(split.constraints.len() == 2, || format!("{} constraints", split.constraints.len()))?;
    ensure(r.attack_set_size == 500, || format!("attacked {} rows", r.attack_set_size))?;
    ensure(r.revalidation_failures == 0, || format!("{} successes failed re-validation", r.revalidation_failures))?;
    let mut confirmed = 0;
    for (i, s) in ev.result.samples.iter().enumerate() {
        if s.valid_success() {
            let orig = split.test.x.row(ev.attack_rows[i]);
            independent_recheck(&std0.run.standard.model, &split.schema, &split.constraints, r, orig, &s.candidate)
                .map_err(|e| format!("attacked row {}: {e}", ev.attack_rows[i]))?;
            confirmed += 1;
        }
    }
    ensure(confirmed == r.valid_successes, || format!("{confirmed} confirmed vs {} reported", r.valid_successes))?;
    ensure(std0.seconds < 600.0, || format!("benchmark took {:.1} s", std0.seconds))?;
    Ok(format!(
        "{confirmed} reported successes on {} attacked rows, all re-validated; benchmark {:.1} s",
        r.attack_set_size, std0.seconds
    ))
}

fn dominance(cfg: &Config, std0: &Standard, exec: &RayonExecutor) -> Result<String, String> {
    let run = &std0.run;
    let mut grad_only = cfg.clone();
    grad_only.eval.attack.budget.n_gen = 0;
    let capgd = pipeline::evaluate_model(&grad_only, &run.standard.model, &run.split, "mlp", "none", 0, exec, &NoClock)
        .map_err(|e| e.to_string())?;
    let caa = &run.standard_eval;
    ensure(capgd.attack_rows == caa.attack_rows, || "attack sets differ".into())?;
    let (g, c) = (success_set(&capgd), success_set(caa));
    let missing: Vec<usize> = g.iter().filter(|i| !c.contains(i)).copied().collect();
    ensure(missing.is_empty(), || format!("CAPGD-only successes missing from CAA: {missing:?}"))?;
    let (ra_g, ra_c) = (capgd.report.robust_accuracy_constrained, caa.report.robust_accuracy_constrained);
    ensure(ra_c <= ra_g, || format!("CAA {ra_c} > CAPGD {ra_g}"))?;
    Ok(format!("CAPGD {} successes, CAA {} (superset); robust accuracy {ra_g:.3} -> {ra_c:.3}", g.len(), c.len()))
}

fn awareness(std0: &Standard) -> Result<String, String> {
    let r = &std0.run.standard_eval.report;
    ensure(r.robust_accuracy_constrained >= r.robust_accuracy_unconstrained, || {
        format!("{} < {}", r.robust_accuracy_constrained, r.robust_accuracy_unconstrained)
    })?;
    Ok(format!(
        "constrained {:.4} >= unconstrained validation {:.4}",
        r.robust_accuracy_constrained, r.robust_accuracy_unconstrained
    ))
}

fn defense(runs: &[(f64, f64, f64, f64)]) -> Result<String, String> {
    let mut gains: Vec<f64> = runs.iter().map(|r| r.3 - r.1).collect();
    gains.sort_by(f64::total_cmp);
    let median = gains[gains.len() / 2];
    let worst_drop = runs.iter().map(|r| r.0 - r.2).fold(f64::NEG_INFINITY, f64::max);
    let detail = runs
        .iter()
        .map(|(ca, ra, at_ca, at_ra)| format!("clean {ca:.3}/{at_ca:.3} robust {ra:.3}/{at_ra:.3}"))
        .collect::<Vec<_>>()
        .join("; ");
    ensure(median >= 0.05, || format!("median gain {:.1} points ({detail})", 100.0 * median))?;
    ensure(worst_drop <= 0.05, || format!("clean accuracy dropped {:.1} points ({detail})", 100.0 * worst_drop))?;
    Ok(format!("median robust gain {:.1} points, largest clean drop {:.1} points ({detail})", 100.0 * median, 100.0 * worst_drop))
}

fn monotonicity(cfg: &Config, std0: &Standard, exec: &RayonExecutor) -> Result<String, String> {
    let run = &std0.run;
    let ev = &run.standard_eval;
    let subset = run.split.test.subset(&ev.attack_rows);
    let model = &run.standard.model;
    let scaler = model.scaler().map_err(|e| e.to_string())?;
    let mut base = cfg.eval.attack.clone();
    base.budget.seed = 0;
    let mut lines = Vec::new();
    for (axis, values) in [(SweepAxis::Eps, vec![0.25, 0.5, 1.0]), (SweepAxis::SearchIters, vec![50.0, 100.0, 200.0])] {
        let spec = SweepSpec { axis, values };
        let points =
            budget_sweep(model, scaler, &run.split.schema, &run.split.constraints, &base, &subset.x, &subset.y, &spec, exec, &NoClock)
                .map_err(|e| e.to_string())?;
        let ra: Vec<f64> = points.iter().map(|p| p.robust_accuracy_constrained).collect();
        ensure(ra.windows(2).all(|w| w[1] <= w[0]), || format!("{} axis not monotone: {ra:?}", axis.name()))?;
        let best: Vec<f64> = ra.iter().scan(f64::INFINITY, |m, &v| {
            *m = m.min(v);
            Some(*m)
        }).collect();
        ensure(best == ra, || format!("{} axis differs from its best-so-far curve", axis.name()))?;
        lines.push(format!("{} {:?}", axis.name(), ra.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()));
    }
    Ok(lines.join("; "))
}

fn fingerprint(run: &BenchmarkRun) -> String {
    let strip = |r: &EvaluationReport| serde_json::to_string(&r.without_timings()).unwrap();
    let mut s = serde_json::to_string(&run.standard.model.to_checkpoint()).unwrap();
    s += &strip(&run.standard_eval.report);
    s += &serde_json::to_string(&run.standard_eval.result).unwrap();
    if let Some((at, ev)) = &run.adversarial {
        s += &serde_json::to_string(&at.model.to_checkpoint()).unwrap();
        s += &strip(&ev.report);
        s += &serde_json::to_string(&ev.result).unwrap();
    }
    s
}

fn determinism(cfg: &Config, reference: &BenchmarkRun) -> Result<String, String> {
    let expected = fingerprint(reference);
    let one = RayonExecutor::new(1).map_err(|e| e.to_string())?;
    let again = pipeline::run_benchmark(cfg, Seeds::all(0), true, &one, &NoClock).map_err(|e| e.to_string())?;
    ensure(fingerprint(&again) == expected, || "1-thread rerun differs".into())?;
    Ok(format!("seed 0 pipeline (data, standard and adversarial training, both evaluations) bit-identical at {THREADS} and 1 threads"))
}

// ---------- 10: metric oracles ----------

fn metric_oracles() -> Result<String, String> {
    let mut g = Gen(ChaCha8Rng::seed_from_u64(10));
    let mut done = 0;
    while done < 200 {
        let n = 2 + g.below(14);
        let y: Vec<u8> = (0..n).map(|_| g.below(2) as u8).collect();
        if y.iter().all(|&v| v == y[0]) {
            continue;
        }
        // Coarse grid forces ties.
        let s: Vec<f64> = (0..n).map(|_| g.below(6) as f64 / 5.0).collect();
        let m = metrics(&y, &s, 0.5).map_err(|e| e.to_string())?;
        let (mut wins, mut pairs) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if y[i] == 1 && y[j] == 0 {
                    pairs += 1.0;
                    wins += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
                }
            }
        }
        let auc = wins / pairs;
        let (mut tp, mut tn, mut fp, mut fn_) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            match (y[i], s[i] >= 0.5) {
                (1, true) => tp += 1.0,
                (1, false) => fn_ += 1.0,
                (_, true) => fp += 1.0,
                (_, false) => tn += 1.0,
            }
        }
        let denom: f64 = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        let mcc = if denom == 0.0 { 0.0 } else { (tp * tn - fp * fn_) / denom.sqrt() };
        ensure((m.auc - auc).abs() <= 1e-12, || format!("AUC {} vs {auc} on {y:?} {s:?}", m.auc))?;
        ensure((m.mcc - mcc).abs() <= 1e-12, || format!("MCC {} vs {mcc} on {y:?} {s:?}", m.mcc))?;
        done += 1;
    }
    Ok("200 instances match the pairwise AUC and contingency MCC oracles".into())
}

fn main() {
    let mut lines = vec![
        run(1, "fixer oracle", Some(1.0), fixer_oracle),
        run(2, "constraint gradients", Some(10.0), constraint_gradients),
        run(3, "model gradients", Some(10.0), model_gradients),
        run(4, "checkpoint schedule", None, checkpoints),
    ];

    let cfg = Config::default();
    let exec = RayonExecutor::new(THREADS).expect("thread pool");
    let bench_start = Instant::now();
    let mut runs = Vec::new();
    let mut first: Option<Standard> = None;
    let mut bench_error = None;
    for seed in 0..3u64 {
        let t = Instant::now();
        match pipeline::run_benchmark(&cfg, Seeds::all(seed), true, &exec, &WallClock::start()) {
            Ok(run) => {
                let seconds = t.elapsed().as_secs_f64();
                let s = &run.standard_eval.report;
                let at = &run.adversarial.as_ref().expect("adversarial run requested").1.report;
                runs.push((s.clean.accuracy, s.robust_accuracy_constrained, at.clean.accuracy, at.robust_accuracy_constrained));
                if seed == 0 {
                    first = Some(Standard { run, seconds });
                }
            }
            Err(e) => bench_error = Some(e.to_string()),
        }
    }
    let bench_seconds = bench_start.elapsed().as_secs_f64();
    let missing = || Err(format!("benchmark failed: {}", bench_error.clone().unwrap_or_default()));

    let mut l5 = run(5, "validity guarantee", None, || first.as_ref().map_or_else(missing, |s| validity(&cfg, s)));
    l5.seconds += first.as_ref().map_or(0.0, |s| s.seconds);
    lines.push(l5);
    lines.push(run(6, "ensemble dominance", None, || first.as_ref().map_or_else(missing, |s| dominance(&cfg, s, &exec))));
    lines.push(run(7, "constraint awareness", None, || first.as_ref().map_or_else(missing, awareness)));
    let mut l8 = run(8, "defense direction", None, || if runs.len() == 3 { defense(&runs) } else { missing() });
    l8.seconds = bench_seconds;
    if bench_seconds >= 1800.0 {
        l8.pass = false;
        l8.detail = format!("{}; took {bench_seconds:.1} s, limit 1800 s", l8.detail);
    }
    lines.push(l8);
    lines.push(run(9, "sweep monotonicity", None, || first.as_ref().map_or_else(missing, |s| monotonicity(&cfg, s, &exec))));
    lines.push(run(10, "metric oracles", None, metric_oracles));
    lines.push(run(11, "determinism", None, || first.as_ref().map_or_else(missing, |s| determinism(&cfg, &s.run))));

    lines.sort_by_key(|l| l.id);
    let mut failed = 0;
    for l in &lines {
        println!("criterion {:>2} {:<22} {} ({:.2} s) {}", l.id, l.title, if l.pass { "PASS" } else { "FAIL" }, l.seconds, l.detail);
        failed += usize::from(!l.pass);
    }
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
