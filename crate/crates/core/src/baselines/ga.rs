//! NSGA-II over per-vehicle maneuver sequences.

use crate::error::{Error, Result};
use crate::sim::Maneuver;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Fitness assigned to an episode with a violation.
pub const VIOLATION_SCORE: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 10,
            crossover_rate: 0.9,
            mutation_rate: 0.05,
        }
    }
}

impl GaConfig {
    /// Generations that fit in `budget` episodes, counting a trailing
    /// partial generation.
    pub fn generations(&self, budget: usize) -> usize {
        budget.div_ceil(self.population)
    }
}

/// One maneuver sequence per surrounding vehicle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chromosome {
    pub genes: Vec<Vec<Maneuver>>,
}

impl Chromosome {
    pub fn random<R: Rng + ?Sized>(vehicles: usize, length: usize, rng: &mut R) -> Self {
        let genes = (0..vehicles)
            .map(|_| (0..length).map(|_| random_maneuver(rng)).collect())
            .collect();
        Self { genes }
    }

    pub fn len(&self) -> usize {
        self.genes.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn random_maneuver<R: Rng + ?Sized>(rng: &mut R) -> Maneuver {
    Maneuver::ALL[rng.random_range(0..Maneuver::ALL.len())]
}

/// Result of evaluating a chromosome with one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub violation: bool,
    /// Smallest ego-to-SV footprint gap observed, m.
    pub min_gap: f64,
}

impl Evaluation {
    pub fn score(&self) -> f64 {
        if self.violation {
            VIOLATION_SCORE
        } else {
            0.0
        }
    }

    /// Objectives to minimise: negated score, then minimum gap.
    pub fn objectives(&self) -> [f64; 2] {
        [-self.score(), self.min_gap]
    }
}

/// `a` dominates `b` when it is no worse everywhere and better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut better = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        better |= x < y;
    }
    better
}

/// Fast non-dominated sort; returns fronts of indices, best first.
pub fn non_dominated_sort(objectives: &[[f64; 2]]) -> Vec<Vec<usize>> {
    let n = objectives.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_set: Vec<Vec<usize>> = vec![Vec::new(); n];
    for p in 0..n {
        for q in 0..n {
            if dominates(&objectives[p], &objectives[q]) {
                dominates_set[p].push(q);
            } else if dominates(&objectives[q], &objectives[p]) {
                dominated_by[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&p| dominated_by[p] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominates_set[p] {
                dominated_by[q] -= 1;
                if dominated_by[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front`, in front order.
pub fn crowding_distance(front: &[usize], objectives: &[[f64; 2]]) -> Vec<f64> {
    let m = front.len();
    let mut dist = vec![0.0; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    for k in 0..2 {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| objectives[front[a]][k].total_cmp(&objectives[front[b]][k]));
        let lo = objectives[front[order[0]]][k];
        let hi = objectives[front[order[m - 1]]][k];
        dist[order[0]] = f64::INFINITY;
        dist[order[m - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..m - 1 {
                let gap = objectives[front[order[w + 1]]][k] - objectives[front[order[w - 1]]][k];
                dist[order[w]] += gap / (hi - lo);
            }
        }
    }
    dist
}

/// Rank and crowding distance of every individual.
fn rank_and_crowd(objectives: &[[f64; 2]]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; objectives.len()];
    let mut crowd = vec![0.0; objectives.len()];
    for (r, front) in non_dominated_sort(objectives).iter().enumerate() {
        for (&i, d) in front.iter().zip(crowding_distance(front, objectives)) {
            rank[i] = r;
            crowd[i] = d;
        }
    }
    (rank, crowd)
}

fn crowded_cmp(a: usize, b: usize, rank: &[usize], crowd: &[f64]) -> Ordering {
    rank[a].cmp(&rank[b]).then(crowd[b].total_cmp(&crowd[a]))
}

/// Picks `size` survivors by front, then crowding distance.
pub fn select_survivors(objectives: &[[f64; 2]], size: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(size);
    for front in non_dominated_sort(objectives) {
        if out.len() + front.len() <= size {
            out.extend(&front);
        } else {
            let crowd = crowding_distance(&front, objectives);
            let mut order: Vec<usize> = (0..front.len()).collect();
            order.sort_by(|&a, &b| crowd[b].total_cmp(&crowd[a]).then(a.cmp(&b)));
            out.extend(order.into_iter().take(size - out.len()).map(|k| front[k]));
        }
        if out.len() == size {
            break;
        }
    }
    out
}

fn tournament<R: Rng + ?Sized>(rank: &[usize], crowd: &[f64], rng: &mut R) -> usize {
    let a = rng.random_range(0..rank.len());
    let b = rng.random_range(0..rank.len());
    if crowded_cmp(b, a, rank, crowd) == Ordering::Less {
        b
    } else {
        a
    }
}

/// One-point crossover applied independently to each vehicle's sequence.
pub fn crossover<R: Rng + ?Sized>(a: &Chromosome, b: &Chromosome, rng: &mut R) -> (Chromosome, Chromosome) {
    let mut c = a.clone();
    let mut d = b.clone();
    for (x, y) in c.genes.iter_mut().zip(d.genes.iter_mut()) {
        if x.len() < 2 {
            continue;
        }
        let cut = rng.random_range(1..x.len());
        x[cut..].swap_with_slice(&mut y[cut..]);
    }
    (c, d)
}

pub fn mutate<R: Rng + ?Sized>(c: &mut Chromosome, rate: f64, rng: &mut R) {
    if rate <= 0.0 {
        return;
    }
    for gene in c.genes.iter_mut().flatten() {
        if rng.random_bool(rate) {
            *gene = random_maneuver(rng);
        }
    }
}

/// Offspring of a population by binary tournament, crossover and mutation.
pub fn offspring<R: Rng + ?Sized>(
    population: &[Chromosome],
    objectives: &[[f64; 2]],
    cfg: &GaConfig,
    rng: &mut R,
) -> Vec<Chromosome> {
    let (rank, crowd) = rank_and_crowd(objectives);
    let mut children = Vec::with_capacity(population.len());
    while children.len() < population.len() {
        let p1 = &population[tournament(&rank, &crowd, rng)];
        let p2 = &population[tournament(&rank, &crowd, rng)];
        let (mut c1, mut c2) = if rng.random_bool(cfg.crossover_rate.clamp(0.0, 1.0)) {
            crossover(p1, p2, rng)
        } else {
            (p1.clone(), p2.clone())
        };
        mutate(&mut c1, cfg.mutation_rate, rng);
        mutate(&mut c2, cfg.mutation_rate, rng);
        children.push(c1);
        if children.len() < population.len() {
            children.push(c2);
        }
    }
    children
}

/// A population and its objectives after one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub population: Vec<Chromosome>,
    pub evaluations: Vec<Evaluation>,
}

/// Runs NSGA-II for at most `budget` evaluations. `evaluate` receives a
/// batch of chromosomes with the number of evaluations already spent and
/// must return one evaluation per chromosome. Returns every generation's
/// surviving population; evaluations happen in batch order, so the
/// evaluator sees episodes in campaign order.
pub fn nsga2<R, F>(
    cfg: &GaConfig,
    budget: usize,
    vehicles: usize,
    length: usize,
    rng: &mut R,
    mut evaluate: F,
) -> Result<Vec<Generation>>
where
    R: Rng + ?Sized,
    F: FnMut(&[Chromosome], usize) -> Result<Vec<Evaluation>>,
{
    if cfg.population == 0 || budget < cfg.population {
        return Err(Error::InvalidConfig("GA budget must cover at least one population".into()));
    }
    let mut spent = 0;
    let mut run = |batch: &[Chromosome], spent: &mut usize| -> Result<Vec<Evaluation>> {
        let evals = evaluate(batch, *spent)?;
        if evals.len() != batch.len() {
            return Err(Error::DimensionMismatch {
                expected: batch.len(),
                got: evals.len(),
            });
        }
        *spent += batch.len();
        Ok(evals)
    };

    let population: Vec<Chromosome> = (0..cfg.population)
        .map(|_| Chromosome::random(vehicles, length, rng))
        .collect();
    let evaluations = run(&population, &mut spent)?;
    let mut history = vec![Generation {
        population,
        evaluations,
    }];
    while spent < budget {
        let current = history.last().expect("at least one generation");
        let objectives: Vec<[f64; 2]> = current.evaluations.iter().map(Evaluation::objectives).collect();
        let mut children = offspring(&current.population, &objectives, cfg, rng);
        children.truncate(budget - spent);
        let child_evals = run(&children, &mut spent)?;

        let mut pool = current.population.clone();
        pool.extend(children);
        let mut pool_evals = current.evaluations.clone();
        pool_evals.extend(child_evals);
        let pool_obj: Vec<[f64; 2]> = pool_evals.iter().map(Evaluation::objectives).collect();
        let keep = select_survivors(&pool_obj, cfg.population);
        history.push(Generation {
            population: keep.iter().map(|&i| pool[i].clone()).collect(),
            evaluations: keep.iter().map(|&i| pool_evals[i]).collect(),
        });
    }
    Ok(history)
}
