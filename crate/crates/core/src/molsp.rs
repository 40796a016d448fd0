//! Multiobjective local search: leader selection by Lebesgue box measure,
//! Λ search directions, two-stage local mutation, boundary repair and
//! merge-selection back into the host population.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::moea::{assign_ranks, evaluate_all, select_survivors, GenerationHook, HookContext, RankedFronts};
use crate::mop::{Bounds, Individual, Problem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MolspError {
    #[error("no candidate is strictly dominated by the reference point")]
    NoEligibleLeader,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Granularity of the κ, φ draws in the mutation equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DrawMode {
    #[default]
    PerComponent,
    /// One κ and one φ per mutant vector.
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    #[default]
    EveryGeneration,
    /// Only once the remaining budget cannot fund another full generation.
    TailOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MolspConfig {
    pub reference_point: Vec<f64>,
    pub enabled: bool,
    pub draw: DrawMode,
    pub schedule: Schedule,
}

impl MolspConfig {
    pub fn new(reference_point: Vec<f64>) -> Self {
        Self { reference_point, enabled: true, draw: DrawMode::default(), schedule: Schedule::default() }
    }

    pub fn generic() -> Self {
        Self::new(vec![25.0; 3])
    }

    pub fn applied() -> Self {
        Self::new(vec![5000.0, 10000.0, 5000.0, 5000.0])
    }
}

/// Population indices and data of the two best fronts.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidates {
    pub slots: Vec<usize>,
    pub z: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

impl Candidates {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

pub fn gather_candidates(fronts: &RankedFronts, pop: &[Individual]) -> Candidates {
    let slots: Vec<usize> = fronts.fronts.iter().take(2).flatten().copied().collect();
    Candidates {
        z: slots.iter().map(|&i| pop[i].z.clone()).collect(),
        y: slots.iter().map(|&i| pop[i].obj().to_vec()).collect(),
        slots,
    }
}

/// `∏_k (r_k − y_k)`, or `None` unless `y ≺ r` strictly in every objective.
pub fn box_measure(y: &[f64], r: &[f64]) -> Option<f64> {
    if y.iter().zip(r).all(|(a, b)| a < b) {
        Some(y.iter().zip(r).map(|(a, b)| b - a).product())
    } else {
        None
    }
}

/// Index of the leader: largest box measure, first index on ties.
pub fn leader_index(y: &[Vec<f64>], r: &[f64]) -> Result<usize, MolspError> {
    let mut best: Option<(usize, f64)> = None;
    for (j, yj) in y.iter().enumerate() {
        if let Some(g) = box_measure(yj, r) {
            if best.map_or(true, |(_, b)| g > b) {
                best = Some((j, g));
            }
        }
    }
    best.map(|(j, _)| j).ok_or(MolspError::NoEligibleLeader)
}

/// Leader `d̂` and the remaining candidates, order preserved.
pub fn select_leader(y: &[Vec<f64>], z: &[Vec<f64>], r: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>), MolspError> {
    if y.len() != z.len() {
        return Err(MolspError::Dimension(format!("{} objective vectors, {} decision vectors", y.len(), z.len())));
    }
    let j = leader_index(y, r)?;
    let rest = z.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, v)| v.clone()).collect();
    Ok((z[j].clone(), rest))
}

/// `Λ_h = d̂ − ẑ_h`, with exact zeros replaced by 1.
pub fn lambda_directions(leader: &[f64], others: &[Vec<f64>]) -> Vec<Vec<f64>> {
    others
        .iter()
        .map(|zh| {
            leader
                .iter()
                .zip(zh)
                .map(|(d, z)| {
                    let l = d - z;
                    if l == 0.0 {
                        1.0
                    } else {
                        l
                    }
                })
                .collect()
        })
        .collect()
}

/// Source of the κ ∈ [0,1] and φ ∈ {1,2} draws.
pub trait StepDraws {
    fn kappa(&mut self) -> f64;
    fn phi(&mut self) -> u32;
}

impl<R: Rng> StepDraws for R {
    fn kappa(&mut self) -> f64 {
        self.gen::<f64>()
    }

    fn phi(&mut self) -> u32 {
        self.gen_range(1..=2)
    }
}

fn signed_step(draws: &mut impl StepDraws) -> f64 {
    let kappa = draws.kappa();
    let sign = if draws.phi() % 2 == 0 { 1.0 } else { -1.0 };
    kappa * sign
}

fn mutate(base: &[f64], dir: &[f64], mode: DrawMode, draws: &mut impl StepDraws) -> Vec<f64> {
    match mode {
        DrawMode::PerComponent => base.iter().zip(dir).map(|(b, d)| b + d * signed_step(draws)).collect(),
        DrawMode::Scalar => {
            let s = signed_step(draws);
            base.iter().zip(dir).map(|(b, d)| b + d * s).collect()
        }
    }
}

/// Unrepaired mutants: `d̂ + d̂·κ·(−1)^φ` first, then `ẑ_h + Λ_h·κ·(−1)^φ`.
pub fn raw_mutants(
    leader: &[f64],
    others: &[Vec<f64>],
    lambda: &[Vec<f64>],
    mode: DrawMode,
    draws: &mut impl StepDraws,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(1 + others.len());
    out.push(mutate(leader, leader, mode, draws));
    for (zh, lh) in others.iter().zip(lambda) {
        out.push(mutate(zh, lh, mode, draws));
    }
    out
}

/// Replaces out-of-range components: below `L` by a draw in
/// `[L, L + 0.25·ss)`, above `U` by a draw in `[L + 0.75·ss, U]`.
pub fn repair_bounds(x: &[f64], bounds: &Bounds, rng: &mut impl Rng) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(w, &v)| {
            let (lo, hi) = (bounds.lower[w], bounds.upper[w]);
            let ss = hi - lo;
            if v < lo || v.is_nan() {
                lo + 0.25 * ss * rng.gen::<f64>()
            } else if v > hi {
                (lo + 0.75 * ss + 0.25 * ss * rng.gen::<f64>()).min(hi)
            } else {
                v
            }
        })
        .collect()
}

pub fn local_mutants(
    leader: &[f64],
    others: &[Vec<f64>],
    lambda: &[Vec<f64>],
    bounds: &Bounds,
    mode: DrawMode,
    rng: &mut impl Rng,
) -> Vec<Vec<f64>> {
    let raw = raw_mutants(leader, others, lambda, mode, rng);
    raw.iter().map(|m| repair_bounds(m, bounds, rng)).collect()
}

/// Outcome of one local-search step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepReport {
    pub evaluations: usize,
    /// Mutants that made it back into the population.
    pub accepted: usize,
    pub skipped: bool,
}

/// One local-search pass over `pop`, spending at most `budget` evaluations.
/// The best `K̂` members of leader ∪ others ∪ mutants overwrite the candidate
/// slots.
pub fn molsp_step<P: Problem + ?Sized>(
    pop: &mut [Individual],
    fronts: &RankedFronts,
    problem: &P,
    config: &MolspConfig,
    rng: &mut impl Rng,
    budget: usize,
) -> Result<StepReport, MolspError> {
    let cand = gather_candidates(fronts, pop);
    if cand.is_empty() || budget == 0 {
        return Ok(StepReport { skipped: true, ..Default::default() });
    }
    if cand.y[0].len() != config.reference_point.len() {
        return Err(MolspError::Dimension(format!(
            "{} objectives, reference point has {}",
            cand.y[0].len(),
            config.reference_point.len()
        )));
    }
    let lead = leader_index(&cand.y, &config.reference_point)?;
    let order: Vec<usize> = std::iter::once(lead).chain((0..cand.len()).filter(|&i| i != lead)).collect();
    let leader = &cand.z[lead];
    let others: Vec<Vec<f64>> = order[1..].iter().map(|&i| cand.z[i].clone()).collect();
    let lambda = lambda_directions(leader, &others);
    let mut mutants = local_mutants(leader, &others, &lambda, problem.bounds(), config.draw, rng);
    mutants.truncate(budget);
    let objs = evaluate_all(problem, &mutants);
    let n_mut = mutants.len();

    let mut pool_z: Vec<Vec<f64>> = order.iter().map(|&i| cand.z[i].clone()).collect();
    let mut pool_y: Vec<Vec<f64>> = order.iter().map(|&i| cand.y[i].clone()).collect();
    pool_z.extend(mutants);
    pool_y.extend(objs);
    let k = cand.len();
    let chosen = select_survivors(&pool_y, k);
    let accepted = chosen.iter().filter(|&&i| i >= k).count();
    let selected: Vec<Individual> = chosen.iter().map(|&i| Individual::evaluated(pool_z[i].clone(), pool_y[i].clone())).collect();
    for (&slot, ind) in cand.slots.iter().zip(selected) {
        pop[slot] = ind;
    }
    assign_ranks(pop);
    Ok(StepReport { evaluations: n_mut, accepted, skipped: false })
}

/// Generation hook running [`molsp_step`] on the configured schedule.
#[derive(Debug, Clone)]
pub struct MolspHook {
    pub config: MolspConfig,
    pub steps: usize,
    pub skipped: usize,
    pub accepted: usize,
}

impl MolspHook {
    pub fn new(config: MolspConfig) -> Self {
        Self { config, steps: 0, skipped: 0, accepted: 0 }
    }
}

impl GenerationHook for MolspHook {
    fn after_generation(
        &mut self,
        ctx: HookContext,
        pop: &mut Vec<Individual>,
        problem: &dyn Problem,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        if !self.config.enabled {
            return 0;
        }
        if self.config.schedule == Schedule::TailOnly && ctx.remaining() >= ctx.population_size {
            return 0;
        }
        let fronts = assign_ranks(pop);
        match molsp_step(pop, &fronts, problem, &self.config, rng, ctx.remaining()) {
            Ok(rep) => {
                if rep.skipped {
                    self.skipped += 1;
                } else {
                    self.steps += 1;
                    self.accepted += rep.accepted;
                }
                rep.evaluations
            }
            Err(e) => {
                log::debug!("local search skipped at generation {}: {e}", ctx.generation);
                self.skipped += 1;
                0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    struct Fixed {
        kappa: f64,
        phi: u32,
    }

    impl StepDraws for Fixed {
        fn kappa(&mut self) -> f64 {
            self.kappa
        }

        fn phi(&mut self) -> u32 {
            self.phi
        }
    }

    #[test]
    fn leader_examples() {
        let y = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![1.5, 1.5]];
        let z = vec![vec![0.0], vec![1.0], vec![2.0]];
        let (d, rest) = select_leader(&y, &z, &[3.0, 3.0]).unwrap();
        assert_eq!(d, vec![2.0]);
        assert_eq!(rest, vec![vec![0.0], vec![1.0]]);
        assert_eq!(leader_index(&y[..2], &[3.0, 3.0]).unwrap(), 0);
        assert_eq!(leader_index(&y[..1], &[3.0, 3.0]).unwrap(), 0);
        assert_eq!(leader_index(&y, &[1.0, 1.0]), Err(MolspError::NoEligibleLeader));
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_directions(&[5.0, 5.0], &[vec![5.0, 3.0]]), vec![vec![1.0, 2.0]]);
        assert_eq!(lambda_directions(&[1.0, 2.0], &[vec![1.0, 2.0]]), vec![vec![1.0, 1.0]]);
        assert_eq!(lambda_directions(&[2.0, 0.0, -3.0], &[vec![1.0, 1.0, 1.0]]), vec![vec![1.0, -1.0, -4.0]]);
    }

    #[test]
    fn mutation_arithmetic() {
        let m = raw_mutants(&[10.0], &[], &[], DrawMode::PerComponent, &mut Fixed { kappa: 0.5, phi: 1 });
        assert_eq!(m, vec![vec![5.0]]);
        let z = vec![vec![1.0, 2.0]];
        let lam = lambda_directions(&[3.0, 4.0], &z);
        let m = raw_mutants(&[3.0, 4.0], &z, &lam, DrawMode::Scalar, &mut Fixed { kappa: 0.0, phi: 2 });
        assert_eq!(m, vec![vec![3.0, 4.0], vec![1.0, 2.0]]);
    }

    #[test]
    fn repair_examples() {
        let b = Bounds::uniform(1, 0.0, 200.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let lo = repair_bounds(&[-5.0], &b, &mut rng)[0];
            assert!((0.0..50.0).contains(&lo));
            let hi = repair_bounds(&[250.0], &b, &mut rng)[0];
            assert!((150.0..=200.0).contains(&hi));
        }
        assert_eq!(repair_bounds(&[42.0], &b, &mut rng), vec![42.0]);
    }

    #[test]
    fn candidate_counts() {
        let objs = vec![vec![1.0, 3.0], vec![3.0, 1.0], vec![2.0, 4.0], vec![4.0, 2.0], vec![5.0, 5.0]];
        let pop: Vec<Individual> =
            objs.iter().enumerate().map(|(i, o)| Individual::evaluated(vec![i as f64], o.clone())).collect();
        let fronts = crate::moea::fast_nondominated_sort(&objs);
        let c = gather_candidates(&fronts, &pop);
        assert_eq!(c.slots, vec![0, 1, 2, 3]);
    }
}
