//! Δ-randomised winner histogram over candidate uncertainty designs.

use std::path::Path;

use anyhow::{bail, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use molsp_core::mop::{decode_mu, encode_spec, sample_delta, ControlProblem, Problem, ALGEBRAIC_LOG_MU_SQ};
use molsp_core::{Matrix, UncertaintySpec};

use crate::config::ExperimentConfig;
use crate::experiment::{read_fronts, run_id};
use crate::report::{num, Table};

/// Total cumulative squared error over all states, or `+∞` on divergence.
pub fn total_error(problem: &ControlProblem, k: &Matrix, delta: f64) -> f64 {
    match problem.state_errors(k, delta) {
        Ok(e) => {
            let s: f64 = e.iter().sum();
            if s.is_finite() {
                s
            } else {
                f64::INFINITY
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// Counts how often each candidate has the least total error over `n_sims`
/// draws of `Δ ~ U(−1, 1)`. Gains are computed once on the nominal model;
/// candidates whose gain fails never win. Ties go to the lowest index.
pub fn winner_histogram(candidates: &[UncertaintySpec], problem: &ControlProblem, n_sims: usize, seed: u64) -> Vec<usize> {
    assert!(!candidates.is_empty(), "winner histogram needs at least one candidate");
    let gains: Vec<Option<Matrix>> = candidates.par_iter().map(|c| problem.gain(c).ok().map(|g| g.k)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deltas: Vec<f64> = (0..n_sims).map(|_| sample_delta(&mut rng)).collect();
    let winners: Vec<usize> = deltas
        .par_iter()
        .map(|&d| {
            let mut best = 0;
            let mut best_err = f64::INFINITY;
            for (i, k) in gains.iter().enumerate() {
                let e = k.as_ref().map_or(f64::INFINITY, |k| total_error(problem, k, d));
                if e < best_err {
                    best = i;
                    best_err = e;
                }
            }
            best
        })
        .collect();
    let mut counts = vec![0; candidates.len()];
    for w in winners {
        counts[w] += 1;
    }
    counts
}

/// The problem's reference design: its fixed perturbation structure at the
/// algebraic penalty.
pub fn nominal_design(problem: &ControlProblem) -> UncertaintySpec {
    UncertaintySpec { mu: decode_mu(ALGEBRAIC_LOG_MU_SQ), ..problem.true_uncertainty.clone() }
}

/// A uniformly random decision vector decoded into a design.
pub fn random_design(problem: &ControlProblem, seed: u64) -> UncertaintySpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = problem.bounds().sample(&mut rng);
    problem.decode(&z).expect("sample lies within bounds")
}

/// Winner histogram over the members of a saved front (optionally one run)
/// plus the nominal and a random design.
pub fn select_from_fronts(cfg: &ExperimentConfig, fronts: &Path, run: Option<&str>) -> Result<Table> {
    let problem = cfg.build_problem()?;
    let seed = cfg.seeds[0];
    let mut labels = Vec::new();
    let mut zs = Vec::new();
    for (alg, s, z, _) in read_fronts(fronts)? {
        let id = run_id(&alg, s);
        if run.map_or(true, |r| r == id) {
            for (i, zi) in z.into_iter().enumerate() {
                labels.push(format!("{id}/{i}"));
                zs.push(zi);
            }
        }
    }
    if zs.is_empty() {
        bail!("no front members selected from {}", fronts.display());
    }
    let mut designs = zs.iter().map(|z| problem.decode(z)).collect::<Result<Vec<_>, _>>()?;
    designs.push(nominal_design(&problem));
    labels.push("nominal".into());
    designs.push(random_design(&problem, seed));
    labels.push("random".into());
    let counts = winner_histogram(&designs, &problem, cfg.winner_sims, seed);
    let n = problem.n_vars();
    let mut t = Table::new(["candidate".to_string(), "wins".into()].into_iter().chain((1..=n).map(|i| format!("z_{i}"))));
    for ((label, count), d) in labels.into_iter().zip(counts).zip(&designs) {
        let mut row = vec![label, count.to_string()];
        row.extend(encode_spec(d).into_iter().map(num));
        t.push(row);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use molsp_core::mop::{decode_generic, GENERIC_Z_STAR};

    #[test]
    fn single_and_identical_candidates() {
        let p = ControlProblem::generic();
        let z = decode_generic(&GENERIC_Z_STAR).unwrap();
        assert_eq!(winner_histogram(&[z.clone()], &p, 25, 1), vec![25]);
        assert_eq!(winner_histogram(&[z.clone(), z], &p, 25, 1), vec![25, 0]);
    }

    #[test]
    fn failing_candidate_never_wins() {
        let p = ControlProblem::generic();
        let bad = UncertaintySpec { e_g: Matrix::row(&[0.0]), ..decode_generic(&GENERIC_Z_STAR).unwrap() };
        let good = decode_generic(&GENERIC_Z_STAR).unwrap();
        let counts = winner_histogram(&[bad, good], &p, 30, 2);
        assert_eq!(counts.iter().sum::<usize>(), 30);
        assert_eq!(counts[1], 30);
    }
}
