use alloc::vec;
use alloc::vec::Vec;

use super::{checkpoint_schedule, distance, AttackContext, Norm, Point};
use crate::math;
use crate::model::Classifier;

#[derive(Clone, Debug, PartialEq)]
pub struct CapgdOutcome {
    /// Best point visited, ranked by success, then total penalty, then distance.
    pub point: Point,
    /// Iterate with the highest objective value.
    pub strongest: Point,
    pub success: bool,
    pub penalty: f64,
    pub distance: f64,
    /// Objective value after each iteration, starting with the original.
    pub trace: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
struct Rank {
    success: bool,
    penalty: f64,
    distance: f64,
}

impl Rank {
    fn beats(&self, other: &Rank) -> bool {
        if self.success != other.success {
            return self.success;
        }
        if self.penalty != other.penalty {
            return self.penalty < other.penalty;
        }
        self.distance < other.distance
    }
}

struct Eval {
    value: f64,
    grad: Vec<f64>,
}

impl<C: Classifier> AttackContext<'_, C> {
    /// Cross-entropy minus `lambda` times the total penalty, with its
    /// gradient in scaled space (zero on immutable coordinates).
    fn objective(&self, p: &Point, y: u8, lambda: f64) -> Eval {
        let n = self.n_features();
        let mut grad = vec![0.0; n];
        let ce = self.model.loss_gradient(&p.z, y, &mut grad);
        let mut pen_grad = vec![0.0; n];
        let pen = self.compiled().total_with_gradient(&p.raw, self.penalty_config(), &mut pen_grad);
        for j in 0..n {
            grad[j] = if self.mutable()[j] { grad[j] - lambda * pen_grad[j] * self.scaler.width(j) } else { 0.0 };
        }
        Eval { value: ce - lambda * pen, grad }
    }

    fn rank(&self, p: &Point, orig: &Point, y: u8) -> Rank {
        Rank {
            success: self.misclassified(&p.z, y),
            penalty: self.total_penalty(&p.raw),
            distance: distance(self.norm(), &p.z, &orig.z),
        }
    }

    fn direction(&self, grad: &[f64]) -> Vec<f64> {
        match self.norm() {
            Norm::Linf => grad.iter().map(|&g| math::sign(g)).collect(),
            Norm::L2 => {
                let n = math::l2_norm(grad);
                if n > 0.0 {
                    grad.iter().map(|g| g / n).collect()
                } else {
                    vec![0.0; grad.len()]
                }
            }
        }
    }
}

/// Constrained adaptive projected gradient ascent on one raw row `x` with
/// true label `y`.
///
/// Iterates are projected and repaired after every step. At each checkpoint
/// the step size is halved and the search restarts from the best objective
/// so far if too few iterations since the previous checkpoint improved it;
/// the penalty weight doubles while the best candidate still violates a
/// constraint. Starts at `x` without random initialization.
pub fn capgd<C: Classifier>(ctx: &AttackContext<'_, C>, x: &[f64], y: u8) -> CapgdOutcome {
    let orig = ctx.origin(x);
    let cfg = &ctx.config;
    let n_iter = cfg.budget.n_iter_gradient;
    let mut lambda = cfg.lambda;
    let mut cur = ctx.objective(&orig, y, lambda);
    let mut trace = vec![cur.value];
    let mut best_rank = ctx.rank(&orig, &orig, y);
    let mut best_point = orig.clone();
    let finish = |point: Point, strongest: Point, rank: Rank, trace: Vec<f64>| CapgdOutcome {
        point,
        strongest,
        success: rank.success,
        penalty: rank.penalty,
        distance: rank.distance,
        trace,
    };
    if ctx.eps() == 0.0 {
        return finish(best_point, orig, best_rank, trace);
    }

    let schedule = checkpoint_schedule(n_iter);
    let mut next_checkpoint = 1;
    let mut step = 2.0 * ctx.eps() / n_iter as f64;
    let mut x_cur = orig.clone();
    let mut x_prev = orig.clone();
    let mut top = (x_cur.clone(), cur.value);
    let mut improved = 0usize;

    for k in 0..n_iter {
        let dir = ctx.direction(&cur.grad);
        let z: Vec<f64> = x_cur.z.iter().zip(&dir).map(|(v, d)| v + step * d).collect();
        let z_next = ctx.repair(&z, &orig);
        let x_next = if k == 0 {
            z_next
        } else {
            let blended: Vec<f64> = (0..z.len())
                .map(|j| {
                    let xc = x_cur.z[j];
                    xc + cfg.alpha * (z_next.z[j] - xc) + (1.0 - cfg.alpha) * (xc - x_prev.z[j])
                })
                .collect();
            ctx.repair(&blended, &orig)
        };
        let next = ctx.objective(&x_next, y, lambda);
        if next.value > cur.value {
            improved += 1;
        }
        trace.push(next.value);
        let rank = ctx.rank(&x_next, &orig, y);
        if rank.beats(&best_rank) {
            best_rank = rank;
            best_point = x_next.clone();
        }
        if next.value > top.1 {
            top = (x_next.clone(), next.value);
        }
        x_prev = core::mem::replace(&mut x_cur, x_next);
        cur = next;

        if next_checkpoint < schedule.len() && k + 1 == schedule[next_checkpoint] {
            let interval = schedule[next_checkpoint] - schedule[next_checkpoint - 1];
            let mut restart = false;
            if (improved as f64) < cfg.rho * interval as f64 {
                step /= 2.0;
                restart = true;
            }
            if !ctx.compiled().satisfied(&best_point.raw, ctx.penalty_config()) {
                lambda *= 2.0;
                top.1 = ctx.objective(&top.0, y, lambda).value;
                if !restart {
                    cur = ctx.objective(&x_cur, y, lambda);
                }
            }
            if restart {
                x_cur = top.0.clone();
                x_prev = top.0.clone();
                cur = ctx.objective(&x_cur, y, lambda);
            }
            improved = 0;
            next_checkpoint += 1;
        }
    }
    finish(best_point, top.0, best_rank, trace)
}
