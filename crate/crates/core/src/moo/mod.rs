//! NSGA-II over map parameters with (displacement, distortion) objectives.
//!
//! This module works in `f64` only: the classifier is reached through a black-box score
//! callback and the search itself has no use for a generic scalar.

mod hypervolume;
mod problems;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use hypervolume::{dominated_area, hypervolume_2d, normalize_objectives, normalize_with, HvConvention, Hypervolume, Normalized};
pub use problems::{CounterfactualProblem, Family, ScoreFn, TwoParabolas};

/// Objectives and total constraint violation of one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub objectives: [f64; 2],
    /// Zero for feasible candidates.
    pub violation: f64,
}

impl Evaluation {
    pub fn feasible(&self) -> bool {
        self.violation <= 0.0
    }
}

/// A box-bounded bi-objective minimization problem.
pub trait MooProblem {
    fn n_vars(&self) -> usize;
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn evaluate(&self, x: &[f64]) -> Evaluation;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub params: Vec<f64>,
    pub eval: Evaluation,
}

/// Mutually nondominated candidates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParetoFront {
    pub members: Vec<Individual>,
}

impl ParetoFront {
    pub fn objectives(&self) -> Vec<[f64; 2]> {
        self.members.iter().map(|m| m.eval.objectives).collect()
    }

    /// Adds `cand` unless something already dominates or equals it, dropping members it dominates.
    fn offer(&mut self, cand: &Individual) {
        let c = cand.eval.objectives;
        if self.members.iter().any(|m| dominates(&m.eval.objectives, &c) || m.eval.objectives == c) {
            return;
        }
        self.members.retain(|m| !dominates(&c, &m.eval.objectives));
        self.members.push(cand.clone());
    }

    fn sorted(mut self) -> Self {
        self.members.sort_by(|a, b| {
            let (x, y) = (a.eval.objectives, b.eval.objectives);
            x[0].total_cmp(&y[0]).then(x[1].total_cmp(&y[1]))
        });
        self
    }
}

/// Pareto dominance for minimization.
pub fn dominates(a: &[f64; 2], b: &[f64; 2]) -> bool {
    a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1])
}

/// Feasible beats infeasible, smaller violation beats larger, then Pareto dominance.
fn constrained_dominates(a: &Evaluation, b: &Evaluation) -> bool {
    match (a.feasible(), b.feasible()) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.violation < b.violation,
        (true, true) => dominates(&a.objectives, &b.objectives),
    }
}

fn sort_by_relation(n: usize, dom: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dom(i, j) {
                dominates_list[i].push(j);
            } else if i != j && dom(j, i) {
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
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Successive nondominated fronts (indices into `points`), first front first.
pub fn nondominated_sort(points: &[[f64; 2]]) -> Vec<Vec<usize>> {
    sort_by_relation(points.len(), |i, j| dominates(&points[i], &points[j]))
}

/// Crowding distance of each member of one front; boundary members get infinity.
pub fn crowding_distance(points: &[[f64; 2]], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut dist = vec![0.0; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    for k in 0..2 {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| points[front[a]][k].total_cmp(&points[front[b]][k]));
        let lo = points[front[order[0]]][k];
        let hi = points[front[order[m - 1]]][k];
        dist[order[0]] = f64::INFINITY;
        dist[order[m - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..m - 1 {
                let gap = points[front[order[w + 1]]][k] - points[front[order[w - 1]]][k];
                dist[order[w]] += gap / (hi - lo);
            }
        }
    }
    dist
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsgaConfig {
    pub pop: usize,
    pub generations: usize,
    pub seed: u64,
    pub crossover_prob: f64,
    pub crossover_eta: f64,
    pub mutation_eta: f64,
    /// Per-variable mutation probability; `None` means `1/n_vars`.
    pub mutation_prob: Option<f64>,
}

impl Default for NsgaConfig {
    fn default() -> Self {
        Self {
            pop: 100,
            generations: 200,
            seed: 0,
            crossover_prob: 0.9,
            crossover_eta: 15.0,
            mutation_eta: 20.0,
            mutation_prob: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsgaResult {
    /// Nondominated feasible candidates seen during the run. When nothing feasible was found,
    /// the first front of the final population (all flagged infeasible).
    pub front: ParetoFront,
    /// Hypervolume of the archive after initialization and after every generation.
    pub hv_trace: Vec<f64>,
    /// Reference point of `hv_trace`: 1.1 times the worst initial objectives.
    pub hv_reference: [f64; 2],
    pub evaluations: usize,
}

fn evaluate_all<P: MooProblem + ?Sized>(problem: &P, xs: Vec<Vec<f64>>) -> Vec<Individual> {
    xs.into_iter()
        .map(|params| {
            let eval = problem.evaluate(&params);
            Individual { params, eval }
        })
        .collect()
}

fn random_point(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter().zip(hi).map(|(&l, &h)| l + (h - l) * rng.random::<f64>()).collect()
}

fn reference_point(pop: &[Individual]) -> [f64; 2] {
    let mut r = [0.0f64; 2];
    for ind in pop {
        for k in 0..2 {
            r[k] = r[k].max(ind.eval.objectives[k]);
        }
    }
    r.map(|v| if v > 0.0 { 1.1 * v } else { 1.0 })
}

/// Rank and crowding of every population member under constraint-domination.
fn rank_and_crowd(pop: &[Individual]) -> (Vec<usize>, Vec<f64>, Vec<Vec<usize>>) {
    let fronts = sort_by_relation(pop.len(), |i, j| constrained_dominates(&pop[i].eval, &pop[j].eval));
    let objs: Vec<[f64; 2]> = pop.iter().map(|p| p.eval.objectives).collect();
    let mut rank = vec![0; pop.len()];
    let mut crowd = vec![0.0; pop.len()];
    for (r, f) in fronts.iter().enumerate() {
        let cd = crowding_distance(&objs, f);
        for (k, &i) in f.iter().enumerate() {
            rank[i] = r;
            crowd[i] = cd[k];
        }
    }
    (rank, crowd, fronts)
}

fn tournament(rng: &mut ChaCha8Rng, rank: &[usize], crowd: &[f64]) -> usize {
    let a = rng.random_range(0..rank.len());
    let b = rng.random_range(0..rank.len());
    if rank[a] != rank[b] {
        if rank[a] < rank[b] {
            a
        } else {
            b
        }
    } else if crowd[b] > crowd[a] {
        b
    } else {
        a
    }
}

/// Simulated binary crossover with bounds.
fn sbx(rng: &mut ChaCha8Rng, p1: &[f64], p2: &[f64], lo: &[f64], hi: &[f64], cfg: &NsgaConfig) -> (Vec<f64>, Vec<f64>) {
    let (mut c1, mut c2) = (p1.to_vec(), p2.to_vec());
    if rng.random::<f64>() > cfg.crossover_prob {
        return (c1, c2);
    }
    let eta = cfg.crossover_eta;
    for i in 0..p1.len() {
        if rng.random::<f64>() > 0.5 || (p1[i] - p2[i]).abs() <= 1e-14 {
            continue;
        }
        let (y1, y2) = if p1[i] < p2[i] { (p1[i], p2[i]) } else { (p2[i], p1[i]) };
        let (yl, yu) = (lo[i], hi[i]);
        let u: f64 = rng.random();
        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let bq1 = spread(1.0 + 2.0 * (y1 - yl) / (y2 - y1));
        let bq2 = spread(1.0 + 2.0 * (yu - y2) / (y2 - y1));
        let mut a = (0.5 * ((y1 + y2) - bq1 * (y2 - y1))).clamp(yl, yu);
        let mut b = (0.5 * ((y1 + y2) + bq2 * (y2 - y1))).clamp(yl, yu);
        if rng.random::<f64>() <= 0.5 {
            std::mem::swap(&mut a, &mut b);
        }
        c1[i] = a;
        c2[i] = b;
    }
    (c1, c2)
}

/// Bounded polynomial mutation.
fn mutate(rng: &mut ChaCha8Rng, x: &mut [f64], lo: &[f64], hi: &[f64], cfg: &NsgaConfig) {
    let p = cfg.mutation_prob.unwrap_or(1.0 / x.len() as f64);
    let eta = cfg.mutation_eta;
    for i in 0..x.len() {
        if rng.random::<f64>() > p || hi[i] <= lo[i] {
            continue;
        }
        let (yl, yu) = (lo[i], hi[i]);
        let y = x[i];
        let d1 = (y - yl) / (yu - yl);
        let d2 = (yu - y) / (yu - yl);
        let u: f64 = rng.random();
        let pow = 1.0 / (eta + 1.0);
        let dq = if u < 0.5 {
            let v = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
            v.powf(pow) - 1.0
        } else {
            let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - v.powf(pow)
        };
        x[i] = (y + dq * (yu - yl)).clamp(yl, yu);
    }
}

fn archive_hv(archive: &ParetoFront, reference: [f64; 2]) -> f64 {
    dominated_area(&archive.objectives(), reference)
}

/// Elitist NSGA-II with constraint-domination. Deterministic given `cfg.seed`.
pub fn nsga2<P: MooProblem + ?Sized>(problem: &P, cfg: &NsgaConfig) -> NsgaResult {
    let pop_size = cfg.pop.max(2) + cfg.pop % 2;
    let (lo, hi) = problem.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init: Vec<Vec<f64>> = (0..pop_size).map(|_| random_point(&mut rng, &lo, &hi)).collect();
    let mut pop = evaluate_all(problem, init);
    let mut evaluations = pop.len();

    let mut archive = ParetoFront::default();
    pop.iter().filter(|p| p.eval.feasible()).for_each(|p| archive.offer(p));
    let reference = reference_point(&pop);
    let mut trace = vec![archive_hv(&archive, reference)];

    for _ in 0..cfg.generations {
        let (rank, crowd, _) = rank_and_crowd(&pop);
        let mut children = Vec::with_capacity(pop_size);
        while children.len() < pop_size {
            let a = tournament(&mut rng, &rank, &crowd);
            let b = tournament(&mut rng, &rank, &crowd);
            let (mut c1, mut c2) = sbx(&mut rng, &pop[a].params, &pop[b].params, &lo, &hi, cfg);
            mutate(&mut rng, &mut c1, &lo, &hi, cfg);
            mutate(&mut rng, &mut c2, &lo, &hi, cfg);
            children.push(c1);
            children.push(c2);
        }
        let offspring = evaluate_all(problem, children);
        evaluations += offspring.len();
        offspring.iter().filter(|p| p.eval.feasible()).for_each(|p| archive.offer(p));

        let mut combined = pop;
        combined.extend(offspring);
        let (_, crowd, fronts) = rank_and_crowd(&combined);
        let mut keep = Vec::with_capacity(pop_size);
        for f in fronts {
            if keep.len() + f.len() <= pop_size {
                keep.extend(f);
            } else {
                let mut f = f;
                f.sort_by(|&a, &b| crowd[b].total_cmp(&crowd[a]).then(a.cmp(&b)));
                keep.extend(f.into_iter().take(pop_size - keep.len()));
            }
            if keep.len() == pop_size {
                break;
            }
        }
        let mut slots: Vec<Option<Individual>> = combined.into_iter().map(Some).collect();
        pop = keep.into_iter().map(|i| slots[i].take().expect("selected once")).collect();
        trace.push(archive_hv(&archive, reference));
    }

    let front = if archive.members.is_empty() {
        let (_, _, fronts) = rank_and_crowd(&pop);
        let mut f = ParetoFront::default();
        for &i in fronts.first().map(Vec::as_slice).unwrap_or(&[]) {
            f.members.push(pop[i].clone());
        }
        f
    } else {
        archive
    };
    NsgaResult {
        front: front.sorted(),
        hv_trace: trace,
        hv_reference: reference,
        evaluations,
    }
}

/// Uniform sampling of the parameter box with the same archive bookkeeping as [`nsga2`].
pub fn random_search<P: MooProblem + ?Sized>(problem: &P, evaluations: usize, seed: u64) -> ParetoFront {
    let (lo, hi) = problem.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut archive = ParetoFront::default();
    for _ in 0..evaluations {
        let params = random_point(&mut rng, &lo, &hi);
        let eval = problem.evaluate(&params);
        if eval.feasible() {
            archive.offer(&Individual { params, eval });
        }
    }
    archive.sorted()
}
