//! Seeded optimisation runs with and without local search, indicator
//! computation against a pooled reference set, and result files.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use molsp_core::metrics::{build_reference_set, hypervolume, igd, nondominated, pure_diversity, spacing, spread};
use molsp_core::moea::{run, RunResult};
use molsp_core::molsp::MolspHook;
use molsp_core::mop::Problem;

use crate::config::ExperimentConfig;
use crate::report::{num, parse_num, svg_plot, write_svg, Series, Table};

pub const BASE: &str = "nsga2";
pub const HYBRID: &str = "nsga2_molsp";

/// Indicator names in file-column order.
pub const INDICATORS: [&str; 5] = ["igd", "sp", "hv", "pd", "spread"];
/// Whether a larger value of each indicator is better.
pub const HIGHER_IS_BETTER: [bool; 5] = [false, false, true, true, false];

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub algorithm: String,
    pub seed: u64,
    pub result: RunResult,
    pub local_steps: usize,
}

impl RunOutcome {
    pub fn run_id(&self) -> String {
        run_id(&self.algorithm, self.seed)
    }

    pub fn final_generation(&self) -> usize {
        self.result.history.last().map_or(0, |r| r.generation)
    }

    pub fn front(&self) -> Vec<Vec<f64>> {
        self.result.history.last().map(|r| r.front.clone()).unwrap_or_default()
    }
}

pub fn run_id(algorithm: &str, seed: u64) -> String {
    format!("{algorithm}-{seed}")
}

pub fn parse_run_id(id: &str) -> Result<(String, u64)> {
    let (alg, seed) = id.rsplit_once('-').with_context(|| format!("malformed run id {id:?}"))?;
    Ok((alg.to_string(), seed.parse().with_context(|| format!("malformed seed in run id {id:?}"))?))
}

/// Algorithms run for a configuration: the base engine always, the hybrid when enabled.
pub fn algorithms(cfg: &ExperimentConfig) -> Vec<&'static str> {
    if cfg.molsp.enabled {
        vec![BASE, HYBRID]
    } else {
        vec![BASE]
    }
}

/// Runs every (algorithm, seed) pair; both algorithms share a seed's initial population.
pub fn run_all(cfg: &ExperimentConfig) -> Result<Vec<RunOutcome>> {
    let problem = cfg.build_problem()?;
    problem.validate()?;
    let jobs: Vec<(&str, u64)> =
        algorithms(cfg).into_iter().flat_map(|a| cfg.seeds.iter().map(move |&s| (a, s))).collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(alg, seed)| {
            let evo = cfg.evolution_config(seed);
            if alg == HYBRID {
                let mut hook = MolspHook::new(cfg.molsp_config());
                let result = run(&problem, &evo, Some(&mut hook));
                RunOutcome { algorithm: alg.into(), seed, result, local_steps: hook.steps }
            } else {
                let result = run(&problem, &evo, None);
                RunOutcome { algorithm: alg.into(), seed, result, local_steps: 0 }
            }
        })
        .collect();
    Ok(outcomes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub algorithm: String,
    pub seed: u64,
    /// IGD, SP, HV, PD, Spread.
    pub values: [f64; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub runs: usize,
    pub mean: [f64; 5],
    pub std: [f64; 5],
    /// Paired per-seed wins against every other algorithm, per indicator.
    pub wins: [usize; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    pub summaries: Vec<AlgorithmSummary>,
    pub reference_set: Vec<Vec<f64>>,
}

impl MetricReport {
    pub fn summary(&self, algorithm: &str) -> Option<&AlgorithmSummary> {
        self.summaries.iter().find(|s| s.algorithm == algorithm)
    }

    pub fn value(&self, algorithm: &str, seed: u64, indicator: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.algorithm == algorithm && r.seed == seed).map(|r| r.values[indicator])
    }
}

/// All five indicators of one front.
pub fn indicators(front: &[Vec<f64>], pstar: &[Vec<f64>], hv_ref: &[f64]) -> Result<[f64; 5]> {
    let p = nondominated(front);
    if p.is_empty() {
        bail!("empty front");
    }
    Ok([
        igd(&p, pstar)?,
        if p.len() >= 2 { spacing(&p)? } else { 0.0 },
        hypervolume(&p, hv_ref)?,
        pure_diversity(&p)?,
        spread(&p, pstar)?.value,
    ])
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, std)
}

/// Builds the report from `(algorithm, seed, front)` triples.
pub fn metric_report(fronts: &[(String, u64, Vec<Vec<f64>>)], hv_ref: &[f64]) -> Result<MetricReport> {
    if fronts.is_empty() {
        bail!("no fronts to evaluate");
    }
    let all: Vec<Vec<Vec<f64>>> = fronts.iter().map(|(_, _, f)| f.clone()).collect();
    let pstar = build_reference_set(&all)?;
    let rows = fronts
        .iter()
        .map(|(alg, seed, f)| Ok(MetricRow { algorithm: alg.clone(), seed: *seed, values: indicators(f, &pstar, hv_ref)? }))
        .collect::<Result<Vec<_>>>()?;
    let mut names: Vec<String> = Vec::new();
    for r in &rows {
        if !names.contains(&r.algorithm) {
            names.push(r.algorithm.clone());
        }
    }
    let summaries = names
        .iter()
        .map(|name| {
            let mine: Vec<&MetricRow> = rows.iter().filter(|r| &r.algorithm == name).collect();
            let mut mean = [0.0; 5];
            let mut std = [0.0; 5];
            let mut wins = [0usize; 5];
            for k in 0..5 {
                let vals: Vec<f64> = mine.iter().map(|r| r.values[k]).collect();
                (mean[k], std[k]) = mean_std(&vals);
                for r in &mine {
                    for o in rows.iter().filter(|o| o.seed == r.seed && &o.algorithm != name) {
                        let better =
                            if HIGHER_IS_BETTER[k] { r.values[k] > o.values[k] } else { r.values[k] < o.values[k] };
                        if better {
                            wins[k] += 1;
                        }
                    }
                }
            }
            AlgorithmSummary { algorithm: name.clone(), runs: mine.len(), mean, std, wins }
        })
        .collect();
    Ok(MetricReport { rows, summaries, reference_set: pstar })
}

pub fn fronts_table(outcomes: &[RunOutcome], n_vars: usize, n_obj: usize) -> Table {
    let mut header = vec!["run_id".to_string(), "generation".into(), "individual_id".into()];
    header.extend((1..=n_vars).map(|i| format!("z_{i}")));
    header.extend((1..=n_obj).map(|i| format!("f_{i}")));
    let mut t = Table::new(header);
    for o in outcomes {
        let last = o.result.history.last();
        for (i, (z, f)) in last.iter().flat_map(|r| r.front_z.iter().zip(&r.front)).enumerate() {
            let mut row = vec![o.run_id(), o.final_generation().to_string(), i.to_string()];
            row.extend(z.iter().map(|&v| num(v)));
            row.extend(f.iter().map(|&v| num(v)));
            t.push(row);
        }
    }
    t
}

/// Final fronts grouped by run id, in file order.
pub fn read_fronts(path: &Path) -> Result<Vec<(String, u64, Vec<Vec<f64>>, Vec<Vec<f64>>)>> {
    let t = Table::read(path)?;
    let zc: Vec<usize> = (0..t.header.len()).filter(|&i| t.header[i].starts_with("z_")).collect();
    let fc: Vec<usize> = (0..t.header.len()).filter(|&i| t.header[i].starts_with("f_")).collect();
    let id = t.column("run_id").context("fronts file lacks run_id")?;
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, (Vec<Vec<f64>>, Vec<Vec<f64>>)> = BTreeMap::new();
    for row in &t.rows {
        let z = zc.iter().map(|&c| parse_num(&row[c])).collect::<Result<Vec<_>>>()?;
        let f = fc.iter().map(|&c| parse_num(&row[c])).collect::<Result<Vec<_>>>()?;
        if !groups.contains_key(&row[id]) {
            order.push(row[id].clone());
        }
        let g = groups.entry(row[id].clone()).or_default();
        g.0.push(z);
        g.1.push(f);
    }
    order
        .into_iter()
        .map(|rid| {
            let (alg, seed) = parse_run_id(&rid)?;
            let (z, f) = groups.remove(&rid).unwrap();
            Ok((alg, seed, z, f))
        })
        .collect()
}

pub fn metrics_table(report: &MetricReport) -> Table {
    let mut t = Table::new(["algorithm", "seed"].into_iter().chain(INDICATORS));
    for r in &report.rows {
        let mut row = vec![r.algorithm.clone(), r.seed.to_string()];
        row.extend(r.values.iter().map(|&v| num(v)));
        t.push(row);
    }
    t
}

pub fn summary_table(report: &MetricReport) -> Table {
    let mut header = vec!["algorithm".to_string(), "runs".into()];
    for k in INDICATORS {
        header.push(format!("{k}_mean"));
        header.push(format!("{k}_std"));
        header.push(format!("{k}_wins"));
    }
    let mut t = Table::new(header);
    for s in &report.summaries {
        let mut row = vec![s.algorithm.clone(), s.runs.to_string()];
        for k in 0..5 {
            row.push(num(s.mean[k]));
            row.push(num(s.std[k]));
            row.push(s.wins[k].to_string());
        }
        t.push(row);
    }
    t
}

/// Per-generation front-1 hypervolume of every run.
pub fn convergence(outcomes: &[RunOutcome], hv_ref: &[f64]) -> Result<(Table, Vec<Series>)> {
    let per_run: Vec<Vec<(usize, usize, f64, usize)>> = outcomes
        .par_iter()
        .map(|o| {
            o.result
                .history
                .iter()
                .map(|r| Ok((r.generation, r.evaluations, hypervolume(&r.front, hv_ref)?, r.front.len())))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(["algorithm", "seed", "generation", "evaluations", "hv", "front_size"]);
    let mut series = Vec::new();
    for (o, recs) in outcomes.iter().zip(&per_run) {
        for &(g, e, hv, size) in recs {
            t.push(vec![o.algorithm.clone(), o.seed.to_string(), g.to_string(), e.to_string(), num(hv), size.to_string()]);
        }
        series.push(Series { label: o.run_id(), points: recs.iter().map(|&(_, e, hv, _)| (e as f64, hv)).collect() });
    }
    Ok((t, series))
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: MetricReport,
    pub outcomes: Vec<RunOutcome>,
}

/// Runs the configured experiment and writes `fronts.csv`, `metrics.csv`,
/// `summary.csv`, `convergence.csv` and `convergence.svg` to the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let outcomes = run_all(cfg)?;
    let hv_ref = cfg.hv_reference();
    let fronts: Vec<(String, u64, Vec<Vec<f64>>)> =
        outcomes.iter().map(|o| (o.algorithm.clone(), o.seed, o.front())).collect();
    let report = metric_report(&fronts, &hv_ref)?;
    let dir = &cfg.output_dir;
    fronts_table(&outcomes, problem.n_vars(), problem.n_objectives()).write(&dir.join("fronts.csv"))?;
    metrics_table(&report).write(&dir.join("metrics.csv"))?;
    summary_table(&report).write(&dir.join("summary.csv"))?;
    let (conv, series) = convergence(&outcomes, &hv_ref)?;
    conv.write(&dir.join("convergence.csv"))?;
    write_svg(&dir.join("convergence.svg"), &svg_plot("Front-1 hypervolume", "evaluations", "HV", &series))?;
    for o in &outcomes {
        log::info!(
            "{}: {} evaluations, {} generations, {} local-search steps",
            o.run_id(),
            o.result.evaluations,
            o.final_generation(),
            o.local_steps
        );
    }
    Ok(ExperimentOutput { report, outcomes })
}

/// Recomputes indicators from a saved `fronts.csv`.
pub fn metrics_from_file(fronts: &Path, hv_ref: &[f64]) -> Result<MetricReport> {
    let runs: Vec<(String, u64, Vec<Vec<f64>>)> =
        read_fronts(fronts)?.into_iter().map(|(a, s, _, f)| (a, s, f)).collect();
    metric_report(&runs, hv_ref)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_ids_round_trip() {
        assert_eq!(parse_run_id(&run_id(HYBRID, 17)).unwrap(), (HYBRID.to_string(), 17));
        assert!(parse_run_id("nodash").is_err());
    }

    #[test]
    fn summary_statistics_and_wins() {
        let fronts = vec![
            ("a".to_string(), 1, vec![vec![1.0, 2.0], vec![2.0, 1.0]]),
            ("b".to_string(), 1, vec![vec![1.5, 2.5], vec![2.5, 1.5]]),
            ("a".to_string(), 2, vec![vec![1.0, 2.0]]),
            ("b".to_string(), 2, vec![vec![0.5, 0.5]]),
        ];
        let rep = metric_report(&fronts, &[3.0, 3.0]).unwrap();
        assert_eq!(rep.reference_set, vec![vec![0.5, 0.5]]);
        let a = rep.summary("a").unwrap();
        let hv: Vec<f64> = rep.rows.iter().filter(|r| r.algorithm == "a").map(|r| r.values[2]).collect();
        assert_eq!(hv, vec![3.0, 2.0]);
        assert!((a.mean[2] - 2.5).abs() < 1e-12);
        assert!((a.std[2] - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(a.wins[2], 1);
        assert_eq!(rep.summary("b").unwrap().wins[2], 1);
    }
}
