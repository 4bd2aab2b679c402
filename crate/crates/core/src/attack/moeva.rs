use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{distance, AttackContext, Point};
use crate::math;
use crate::model::Classifier;

#[derive(Clone, Debug, PartialEq)]
pub struct MoevaOutcome {
    pub point: Point,
    /// The model misclassifies `point`.
    pub success: bool,
    /// `point` is a misclassified candidate that passes validation.
    pub feasible: bool,
    /// True-class probability, distance and total penalty of `point`.
    pub objectives: [f64; 3],
    /// Generations evolved before returning.
    pub generations: usize,
    /// Lowest total penalty seen so far, after initialization and after each generation.
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Individual {
    point: Point,
    f: [f64; 3],
    misclassified: bool,
}

/// A unit of variation: one coordinate, or a whole one-hot group.
enum Gene {
    Continuous(usize),
    Integer(usize),
    Group(Vec<usize>),
}

impl Gene {
    fn columns(&self) -> &[usize] {
        match self {
            Gene::Continuous(j) | Gene::Integer(j) => core::slice::from_ref(j),
            Gene::Group(cols) => cols,
        }
    }
}

fn genes<C: Classifier>(ctx: &AttackContext<'_, C>) -> Vec<Gene> {
    let mut out = Vec::new();
    for j in 0..ctx.n_features() {
        if !ctx.mutable()[j] || ctx.in_group(j) {
            continue;
        }
        out.push(if ctx.is_discrete(j) { Gene::Integer(j) } else { Gene::Continuous(j) });
    }
    for cols in ctx.groups() {
        if ctx.mutable()[cols[0]] {
            out.push(Gene::Group(cols.clone()));
        }
    }
    out
}

fn dominates(a: &[f64; 3], b: &[f64; 3]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Nondominated fronts, each listing indices in increasing order.
fn nondominated_fronts(f: &[[f64; 3]]) -> Vec<Vec<usize>> {
    let n = f.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&f[i], &f[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&f[j], &f[i]) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(core::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of each member of `front` (same order).
fn crowding(f: &[[f64; 3]], front: &[usize]) -> Vec<f64> {
    let n = front.len();
    let mut d = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for m in 0..3 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| f[front[a]][m].total_cmp(&f[front[b]][m]));
        let lo = f[front[order[0]]][m];
        let hi = f[front[order[n - 1]]][m];
        if hi > lo {
            d[order[0]] = f64::INFINITY;
            d[order[n - 1]] = f64::INFINITY;
            for k in 1..n - 1 {
                d[order[k]] += (f[front[order[k + 1]]][m] - f[front[order[k - 1]]][m]) / (hi - lo);
            }
        }
    }
    d
}

/// Picks `keep` survivors; returns their indices plus rank and crowding.
fn survive(f: &[[f64; 3]], keep: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(keep);
    for (rank, front) in nondominated_fronts(f).into_iter().enumerate() {
        if out.len() >= keep {
            break;
        }
        let crowd = crowding(f, &front);
        let mut members: Vec<(usize, usize, f64)> = front.iter().zip(&crowd).map(|(&i, &c)| (i, rank, c)).collect();
        if out.len() + members.len() > keep {
            members.sort_by(|a, b| b.2.total_cmp(&a.2));
            members.truncate(keep - out.len());
        }
        out.extend(members);
    }
    out
}

fn fallback_order(a: &[f64; 3], b: &[f64; 3]) -> Ordering {
    a[2].total_cmp(&b[2]).then(a[0].total_cmp(&b[0])).then(a[1].total_cmp(&b[1]))
}

impl<C: Classifier> AttackContext<'_, C> {
    fn individual(&self, point: Point, orig: &Point, y: u8) -> Individual {
        let p = self.model.proba(&point.z);
        let f = [p[y as usize], distance(self.norm(), &point.z, &orig.z), self.total_penalty(&point.raw)];
        Individual { misclassified: self.misclassified(&point.z, y), point, f }
    }
}

/// Multi-objective evolutionary search on one raw row `x` with label `y`.
///
/// Minimizes the true-class probability, the distance to `x` and the total
/// constraint penalty with nondominated sorting and crowding-distance
/// survival. Stops at the first generation holding a valid misclassified
/// candidate and returns the closest such one; otherwise returns the
/// candidate with the lowest (penalty, probability, distance) seen.
pub fn moeva<C: Classifier>(ctx: &AttackContext<'_, C>, x: &[f64], y: u8, seed: u64) -> MoevaOutcome {
    let orig = ctx.origin(x);
    let budget = &ctx.config.budget;
    let eps = ctx.eps();
    let genes = genes(ctx);
    let first = ctx.individual(orig.clone(), &orig, y);
    let mut best = first.clone();
    let mut trace = Vec::new();
    let done = |ind: Individual, generations: usize, trace: Vec<f64>| MoevaOutcome {
        success: ind.misclassified,
        feasible: ind.misclassified && ctx.validator().is_valid(x, &ind.point.raw),
        objectives: ind.f,
        point: ind.point,
        generations,
        trace,
    };
    if eps == 0.0 || genes.is_empty() {
        return done(best, 0, trace);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = ctx.config.mutation_sigma.unwrap_or(eps / 10.0);
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and nonnegative");
    let rate = ctx.config.mutation_rate.unwrap_or(1.0 / genes.len() as f64);

    let mut pop = vec![first];
    while pop.len() < budget.n_pop {
        let mut z = orig.z.clone();
        for g in &genes {
            if let Gene::Continuous(j) | Gene::Integer(j) = *g {
                z[j] += rng.random_range(-0.5..=0.5) * eps;
            }
        }
        pop.push(ctx.individual(ctx.repair(&z, &orig), &orig, y));
    }

    // Returns the closest valid misclassified candidate among `inds`.
    let feasible = |inds: &[Individual]| -> Option<Individual> {
        inds.iter()
            .filter(|i| i.misclassified && ctx.validator().is_valid(x, &i.point.raw))
            .min_by(|a, b| a.f[1].total_cmp(&b.f[1]).then(a.f[0].total_cmp(&b.f[0])))
            .cloned()
    };
    let track = |best: &mut Individual, inds: &[Individual]| {
        for i in inds {
            if fallback_order(&i.f, &best.f) == Ordering::Less {
                *best = i.clone();
            }
        }
    };

    track(&mut best, &pop);
    trace.push(best.f[2]);
    if let Some(hit) = feasible(&pop) {
        return done(hit, 0, trace);
    }
    let objectives: Vec<[f64; 3]> = pop.iter().map(|i| i.f).collect();
    let kept = survive(&objectives, pop.len());
    let mut standing: Vec<(usize, f64)> = kept.iter().map(|k| (k.1, k.2)).collect();
    pop = kept.iter().map(|k| pop[k.0].clone()).collect();

    for gen in 1..=budget.n_gen {
        let tournament = |rng: &mut ChaCha8Rng| {
            let a = rng.random_range(0..pop.len());
            let b = rng.random_range(0..pop.len());
            let (ra, ca) = standing[a];
            let (rb, cb) = standing[b];
            if rb < ra || (rb == ra && cb > ca) { b } else { a }
        };
        let mut offspring = Vec::with_capacity(budget.n_off);
        while offspring.len() < budget.n_off {
            let pa = &pop[tournament(&mut rng)].point.z;
            let pb = &pop[tournament(&mut rng)].point.z;
            let (mut ca, mut cb) = (pa.clone(), pb.clone());
            let mut cut = [rng.random_range(0..=genes.len()), rng.random_range(0..=genes.len())];
            cut.sort_unstable();
            for g in &genes[cut[0]..cut[1]] {
                for &j in g.columns() {
                    ca[j] = pb[j];
                    cb[j] = pa[j];
                }
            }
            for child in [ca, cb] {
                if offspring.len() == budget.n_off {
                    break;
                }
                let mut z = child;
                for g in &genes {
                    if rng.random::<f64>() >= rate {
                        continue;
                    }
                    match g {
                        Gene::Continuous(j) => z[*j] += normal.sample(&mut rng),
                        Gene::Integer(j) => {
                            let f = &ctx.schema.features[*j];
                            let v = rng.random_range(math::ceil(f.min) as i64..=math::floor(f.max) as i64);
                            z[*j] = ctx.scaler.scale_value(*j, v as f64);
                        }
                        Gene::Group(cols) => {
                            let hot = rng.random_range(0..cols.len());
                            for (k, &j) in cols.iter().enumerate() {
                                z[j] = if k == hot { 1.0 } else { 0.0 };
                            }
                        }
                    }
                }
                offspring.push(ctx.individual(ctx.repair(&z, &orig), &orig, y));
            }
        }

        track(&mut best, &offspring);
        trace.push(best.f[2]);
        if let Some(hit) = feasible(&offspring) {
            return done(hit, gen, trace);
        }
        pop.extend(offspring);
        let objectives: Vec<[f64; 3]> = pop.iter().map(|i| i.f).collect();
        let kept = survive(&objectives, budget.n_pop);
        standing = kept.iter().map(|k| (k.1, k.2)).collect();
        pop = kept.iter().map(|k| pop[k.0].clone()).collect();
    }
    done(best, budget.n_gen, trace)
}
