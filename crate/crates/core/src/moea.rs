//! NSGA-II: nondominated sorting, crowding distance, binary tournament,
//! simulated binary crossover, polynomial mutation and elitist survival.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::mop::{dominates, Bounds, Individual, Problem};

/// Population split into nondominated fronts.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedFronts {
    /// Indices per front, best front first, ascending within a front.
    pub fronts: Vec<Vec<usize>>,
    /// Zero-based front index per individual.
    pub rank: Vec<usize>,
    /// Crowding distance per individual, computed within its front.
    pub crowding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub p_c: f64,
    pub p_m: f64,
    pub eta_c: f64,
    pub eta_m: f64,
    pub max_evaluations: usize,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 92,
            p_c: 1.0,
            p_m: 0.5,
            eta_c: 20.0,
            eta_m: 20.0,
            max_evaluations: 10_000,
            seed: 1,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.population_size < 2 {
            return Err("population_size must be at least 2".into());
        }
        if self.max_evaluations == 0 {
            return Err("max_evaluations must be positive".into());
        }
        for (name, p) in [("p_c", self.p_c), ("p_m", self.p_m)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} = {p} must lie in [0, 1]"));
            }
        }
        for (name, eta) in [("eta_c", self.eta_c), ("eta_m", self.eta_m)] {
            if !(eta >= 0.0) || !eta.is_finite() {
                return Err(format!("{name} = {eta} must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Deb's fast nondominated sort; crowding is filled in per front.
pub fn fast_nondominated_sort(objectives: &[Vec<f64>]) -> RankedFronts {
    let n = objectives.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut dom_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&objectives[i], &objectives[j]) {
                dominated_by_me[i].push(j);
                dom_count[j] += 1;
            } else if dominates(&objectives[j], &objectives[i]) {
                dominated_by_me[j].push(i);
                dom_count[i] += 1;
            }
        }
    }
    let mut rank = vec![0usize; n];
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dom_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            rank[i] = fronts.len();
            for &j in &dominated_by_me[i] {
                dom_count[j] -= 1;
                if dom_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    let mut crowding = vec![0.0; n];
    for front in &fronts {
        let pts: Vec<&[f64]> = front.iter().map(|&i| objectives[i].as_slice()).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&pts)) {
            crowding[i] = d;
        }
    }
    RankedFronts { fronts, rank, crowding }
}

/// Crowding distance of each member of one front. Boundary members of every
/// objective with a nonzero range get `+∞`.
pub fn crowding_distance(front: &[&[f64]]) -> Vec<f64> {
    let k = front.len();
    if k == 0 {
        return Vec::new();
    }
    if k <= 2 {
        return vec![f64::INFINITY; k];
    }
    let m = front[0].len();
    let mut dist = vec![0.0; k];
    let mut order: Vec<usize> = (0..k).collect();
    for obj in 0..m {
        order.sort_by(|&a, &b| front[a][obj].total_cmp(&front[b][obj]).then(a.cmp(&b)));
        let lo = front[order[0]][obj];
        let hi = front[order[k - 1]][obj];
        let range = hi - lo;
        if !(range > 0.0) {
            continue;
        }
        dist[order[0]] = f64::INFINITY;
        dist[order[k - 1]] = f64::INFINITY;
        for w in 1..(k - 1) {
            let i = order[w];
            if dist[i].is_finite() {
                dist[i] += (front[order[w + 1]][obj] - front[order[w - 1]][obj]) / range;
            }
        }
    }
    dist
}

/// Simulated binary crossover. With probability `1 − p_c` the parents are
/// returned unchanged; otherwise each variable is recombined with
/// probability 0.5.
pub fn sbx_crossover(
    p1: &[f64],
    p2: &[f64],
    p_c: f64,
    eta_c: f64,
    bounds: &Bounds,
    rng: &mut impl Rng,
) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    if rng.gen::<f64>() >= p_c {
        return (c1, c2);
    }
    for w in 0..p1.len() {
        if rng.gen::<f64>() >= 0.5 || (p1[w] - p2[w]).abs() <= 1e-14 {
            continue;
        }
        let u: f64 = rng.gen();
        let beta = if u <= 0.5 {
            (2.0 * u).powf(1.0 / (eta_c + 1.0))
        } else {
            (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta_c + 1.0))
        };
        c1[w] = 0.5 * ((1.0 + beta) * p1[w] + (1.0 - beta) * p2[w]);
        c2[w] = 0.5 * ((1.0 - beta) * p1[w] + (1.0 + beta) * p2[w]);
    }
    bounds.clip(&mut c1);
    bounds.clip(&mut c2);
    (c1, c2)
}

/// Bounded polynomial mutation. `p_m` gates the whole individual, then each
/// variable mutates with probability `1/n`.
pub fn polynomial_mutation(z: &[f64], p_m: f64, eta_m: f64, bounds: &Bounds, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = z.to_vec();
    if rng.gen::<f64>() >= p_m {
        return out;
    }
    let n = z.len();
    let rate = 1.0 / n as f64;
    let pow = 1.0 / (eta_m + 1.0);
    for w in 0..n {
        if rng.gen::<f64>() >= rate {
            continue;
        }
        let (yl, yu) = (bounds.lower[w], bounds.upper[w]);
        let y = out[w];
        let span = yu - yl;
        let d1 = (y - yl) / span;
        let d2 = (yu - y) / span;
        let r: f64 = rng.gen();
        let dq = if r < 0.5 {
            let xy = 1.0 - d1;
            let val = 2.0 * r + (1.0 - 2.0 * r) * xy.powf(eta_m + 1.0);
            val.powf(pow) - 1.0
        } else {
            let xy = 1.0 - d2;
            let val = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * xy.powf(eta_m + 1.0);
            1.0 - val.powf(pow)
        };
        out[w] = (y + dq * span).clamp(yl, yu);
    }
    out
}

/// `Less` when `a` is preferred: lower rank, then larger crowding.
pub fn crowded_compare(rank_a: usize, crowd_a: f64, rank_b: usize, crowd_b: f64) -> Ordering {
    rank_a.cmp(&rank_b).then_with(|| crowd_b.total_cmp(&crowd_a))
}

/// Binary tournament on `(rank, crowding)`; ties are broken uniformly.
pub fn binary_tournament(pop: &[Individual], rng: &mut impl Rng) -> usize {
    let a = rng.gen_range(0..pop.len());
    let b = rng.gen_range(0..pop.len());
    let key = |i: usize| (pop[i].rank.unwrap_or(usize::MAX), pop[i].crowding.unwrap_or(0.0));
    let (ra, ca) = key(a);
    let (rb, cb) = key(b);
    match crowded_compare(ra, ca, rb, cb) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal => {
            if rng.gen::<bool>() {
                a
            } else {
                b
            }
        }
    }
}

/// Evaluates decision vectors in parallel, preserving order.
pub fn evaluate_all<P: Problem + ?Sized>(problem: &P, zs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    zs.par_iter().map(|z| problem.evaluate(z)).collect()
}

/// Recomputes rank and crowding of every individual from scratch.
pub fn assign_ranks(pop: &mut [Individual]) -> RankedFronts {
    let objs: Vec<Vec<f64>> = pop.iter().map(|ind| ind.obj().to_vec()).collect();
    let ranked = fast_nondominated_sort(&objs);
    for (i, ind) in pop.iter_mut().enumerate() {
        ind.rank = Some(ranked.rank[i]);
        ind.crowding = Some(ranked.crowding[i]);
    }
    ranked
}

/// Indices of the `size` survivors of `pool`, filled front by front with the
/// last front truncated by descending crowding.
pub fn select_survivors(objectives: &[Vec<f64>], size: usize) -> Vec<usize> {
    let ranked = fast_nondominated_sort(objectives);
    let mut chosen = Vec::with_capacity(size);
    for front in &ranked.fronts {
        if chosen.len() + front.len() <= size {
            chosen.extend_from_slice(front);
        } else {
            let mut rest = front.clone();
            rest.sort_by(|&a, &b| ranked.crowding[b].total_cmp(&ranked.crowding[a]).then(a.cmp(&b)));
            chosen.extend(rest.into_iter().take(size - chosen.len()));
        }
        if chosen.len() == size {
            break;
        }
    }
    chosen
}

/// Keeps the `size` best of `pool` and returns them with fresh rank/crowding.
pub fn environmental_selection(pool: Vec<Individual>, size: usize) -> Vec<Individual> {
    let objs: Vec<Vec<f64>> = pool.iter().map(|ind| ind.obj().to_vec()).collect();
    let chosen = select_survivors(&objs, size);
    let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
    let mut next: Vec<Individual> = chosen.iter().map(|&i| slots[i].take().expect("unique index")).collect();
    assign_ranks(&mut next);
    next
}

/// `(z, objectives)` with no rank information.
fn evaluated(zs: Vec<Vec<f64>>, objs: Vec<Vec<f64>>) -> Vec<Individual> {
    zs.into_iter().zip(objs).map(|(z, o)| Individual::evaluated(z, o)).collect()
}

/// One NSGA-II generation. At most `budget` offspring are evaluated; the
/// number used is returned alongside the next population.
pub fn nsga2_generation<P: Problem + ?Sized>(
    pop: &[Individual],
    problem: &P,
    config: &EvolutionConfig,
    rng: &mut impl Rng,
    budget: usize,
) -> (Vec<Individual>, usize) {
    let mut parents = pop.to_vec();
    assign_ranks(&mut parents);
    let bounds = problem.bounds();
    let n_off = config.population_size.min(budget);
    let mut children = Vec::with_capacity(n_off + 1);
    while children.len() < n_off {
        let a = binary_tournament(&parents, rng);
        let b = binary_tournament(&parents, rng);
        let (c1, c2) = sbx_crossover(&parents[a].z, &parents[b].z, config.p_c, config.eta_c, bounds, rng);
        children.push(polynomial_mutation(&c1, config.p_m, config.eta_m, bounds, rng));
        children.push(polynomial_mutation(&c2, config.p_m, config.eta_m, bounds, rng));
    }
    children.truncate(n_off);
    let objs = evaluate_all(problem, &children);
    let mut pool = parents;
    pool.extend(evaluated(children, objs));
    (environmental_selection(pool, config.population_size), n_off)
}

/// State handed to a per-generation hook.
#[derive(Debug, Clone, Copy)]
pub struct HookContext {
    pub generation: usize,
    pub evaluations: usize,
    pub max_evaluations: usize,
    pub population_size: usize,
}

impl HookContext {
    pub fn remaining(&self) -> usize {
        self.max_evaluations.saturating_sub(self.evaluations)
    }
}

/// Extension point run after every generation (used for the local search).
pub trait GenerationHook {
    /// May rewrite `pop` in place; returns the number of evaluations spent,
    /// which must not exceed `ctx.remaining()`.
    fn after_generation(
        &mut self,
        ctx: HookContext,
        pop: &mut Vec<Individual>,
        problem: &dyn Problem,
        rng: &mut ChaCha8Rng,
    ) -> usize;
}

/// Front-1 snapshot after a generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub evaluations: usize,
    pub front: Vec<Vec<f64>>,
    pub front_z: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub population: Vec<Individual>,
    pub history: Vec<GenerationRecord>,
    pub evaluations: usize,
}

impl RunResult {
    /// Members of the final first front.
    pub fn first_front(&self) -> Vec<&Individual> {
        self.population.iter().filter(|ind| ind.rank == Some(0)).collect()
    }
}

fn record(generation: usize, evaluations: usize, pop: &[Individual]) -> GenerationRecord {
    let best: Vec<&Individual> = pop.iter().filter(|i| i.rank == Some(0)).collect();
    GenerationRecord {
        generation,
        evaluations,
        front: best.iter().map(|i| i.obj().to_vec()).collect(),
        front_z: best.iter().map(|i| i.z.clone()).collect(),
    }
}

/// Full NSGA-II run from a uniform random population, with an optional hook
/// after each generation. Stops once the evaluation budget is spent.
pub fn run<P: Problem>(problem: &P, config: &EvolutionConfig, mut hook: Option<&mut dyn GenerationHook>) -> RunResult {
    config.validate().expect("invalid evolution config");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bounds = problem.bounds();
    let n_init = config.population_size.min(config.max_evaluations);
    let init: Vec<Vec<f64>> = (0..n_init).map(|_| bounds.sample(&mut rng)).collect();
    let objs = evaluate_all(problem, &init);
    let mut pop = evaluated(init, objs);
    assign_ranks(&mut pop);
    let mut evaluations = n_init;
    let mut history = vec![record(0, evaluations, &pop)];
    let mut generation = 0;
    while evaluations < config.max_evaluations && pop.len() == config.population_size {
        generation += 1;
        let (next, used) = nsga2_generation(&pop, problem, config, &mut rng, config.max_evaluations - evaluations);
        pop = next;
        evaluations += used;
        if let Some(h) = hook.as_deref_mut() {
            let ctx = HookContext {
                generation,
                evaluations,
                max_evaluations: config.max_evaluations,
                population_size: config.population_size,
            };
            let spent = h.after_generation(ctx, &mut pop, problem, &mut rng);
            evaluations += spent.min(ctx.remaining());
            assign_ranks(&mut pop);
        }
        history.push(record(generation, evaluations, &pop));
    }
    RunResult { population: pop, history, evaluations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<usize>) -> Vec<usize> {
        v.sort_unstable();
        v
    }

    #[test]
    fn sort_examples() {
        let r = fast_nondominated_sort(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![0.0, 3.0]]);
        assert_eq!(r.fronts, vec![vec![0, 2], vec![1]]);
        let same = fast_nondominated_sort(&vec![vec![1.0, 2.0]; 4]);
        assert_eq!(same.fronts.len(), 1);
        let chain = fast_nondominated_sort(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]);
        assert_eq!(chain.fronts, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn crowding_examples() {
        let two: Vec<&[f64]> = vec![&[0.0, 1.0], &[1.0, 0.0]];
        assert!(crowding_distance(&two).iter().all(|d| d.is_infinite()));
        let three: Vec<&[f64]> = vec![&[0.0, 2.0], &[1.0, 1.0], &[2.0, 0.0]];
        let d = crowding_distance(&three);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        assert!((d[1] - 2.0).abs() < 1e-15);
        let flat: Vec<&[f64]> = vec![&[0.0, 5.0], &[1.0, 5.0], &[2.0, 5.0], &[4.0, 5.0]];
        let d = crowding_distance(&flat);
        assert!((d[1] - 0.5).abs() < 1e-15 && (d[2] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn operators_trivial_cases() {
        let b = Bounds::uniform(3, 0.0, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p1 = vec![1.0, 2.0, 3.0];
        let p2 = vec![4.0, 5.0, 6.0];
        assert_eq!(sbx_crossover(&p1, &p2, 0.0, 20.0, &b, &mut rng), (p1.clone(), p2.clone()));
        assert_eq!(sbx_crossover(&p1, &p1, 1.0, 20.0, &b, &mut rng), (p1.clone(), p1.clone()));
        assert_eq!(polynomial_mutation(&p1, 0.0, 20.0, &b, &mut rng), p1);
        for _ in 0..1000 {
            let m = polynomial_mutation(&[0.0, 0.0, 0.0], 1.0, 20.0, &b, &mut rng);
            assert!(m.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn survivors_truncate_last_front_by_crowding() {
        let objs = vec![
            vec![0.0, 4.0],
            vec![1.0, 3.0],
            vec![1.1, 2.9],
            vec![3.0, 1.0],
            vec![4.0, 0.0],
            vec![5.0, 5.0],
        ];
        let chosen = sorted(select_survivors(&objs, 3));
        assert_eq!(chosen, vec![0, 3, 4]);
    }
}
