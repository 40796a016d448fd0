use std::fs;
use std::path::Path;

use molsp_harness::compare::{compare_controllers, compare_table, Controller};
use molsp_harness::config::{ExperimentConfig, ProblemChoice};
use molsp_harness::experiment::{metrics_from_file, metrics_table, read_fronts, run_experiment, BASE, HYBRID, INDICATORS};
use molsp_harness::report::{num, parse_num, Table};
use molsp_harness::winner::select_from_fronts;

fn small_config(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.seeds = vec![1, 2];
    cfg.output_dir = dir.to_path_buf();
    cfg.evolution.population_size = 20;
    cfg.evolution.max_evaluations = 200;
    cfg.winner_sims = 50;
    cfg
}

fn header(path: &Path) -> Vec<String> {
    Table::read(path).unwrap().header
}

#[test]
fn experiment_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.outcomes.len(), 4);
    for o in &out.outcomes {
        assert!(o.result.evaluations <= 200);
    }

    let fronts = header(&dir.path().join("fronts.csv"));
    let mut expected = vec!["run_id".to_string(), "generation".into(), "individual_id".into()];
    expected.extend((1..=5).map(|i| format!("z_{i}")));
    expected.extend((1..=3).map(|i| format!("f_{i}")));
    assert_eq!(fronts, expected);

    let metrics = Table::read(&dir.path().join("metrics.csv")).unwrap();
    let mut expected = vec!["algorithm".to_string(), "seed".into()];
    expected.extend(INDICATORS.iter().map(|s| s.to_string()));
    assert_eq!(metrics.header, expected);
    assert_eq!(metrics.rows.len(), 4);
    for row in &metrics.rows {
        assert!(row[0] == BASE || row[0] == HYBRID);
        for v in &row[2..] {
            assert!(parse_num(v).unwrap().is_finite());
        }
    }

    let summary = header(&dir.path().join("summary.csv"));
    assert_eq!(summary.len(), 2 + 3 * INDICATORS.len());
    assert_eq!(header(&dir.path().join("convergence.csv")), ["algorithm", "seed", "generation", "evaluations", "hv", "front_size"]);
    let svg = fs::read_to_string(dir.path().join("convergence.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 4);
}

#[test]
fn metrics_recomputed_from_fronts_file_match() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    run_experiment(&cfg).unwrap();
    let rep = metrics_from_file(&dir.path().join("fronts.csv"), &cfg.hv_reference()).unwrap();
    let written = fs::read(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics_table(&rep).to_bytes().unwrap(), written);
}

#[test]
fn base_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let mut cfg = small_config(dir);
        cfg.molsp.enabled = false;
        run_experiment(&cfg).unwrap();
    }
    for file in ["fronts.csv", "metrics.csv", "summary.csv", "convergence.csv"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
}

#[test]
fn fronts_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = run_experiment(&cfg).unwrap();
    let back = read_fronts(&dir.path().join("fronts.csv")).unwrap();
    assert_eq!(back.len(), out.outcomes.len());
    for ((alg, seed, z, f), o) in back.iter().zip(&out.outcomes) {
        assert_eq!(alg, &o.algorithm);
        assert_eq!(*seed, o.seed);
        let last = o.result.history.last().unwrap();
        assert_eq!(z, &last.front_z);
        assert_eq!(f, &last.front);
    }
}

#[test]
fn number_format_round_trips() {
    for v in [0.0, -0.0, 1.0, -3.25e-17, 1.2345678901234567e300, f64::MIN_POSITIVE, f64::INFINITY, f64::NEG_INFINITY] {
        let back = parse_num(&num(v)).unwrap();
        assert_eq!(back.to_bits(), v.to_bits(), "{v} -> {back}");
    }
    assert!(parse_num(&num(f64::NAN)).unwrap().is_nan());
}

#[test]
fn winner_selection_counts_all_simulations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    run_experiment(&cfg).unwrap();
    let t = select_from_fronts(&cfg, &dir.path().join("fronts.csv"), None).unwrap();
    let total: usize = t.rows.iter().map(|r| r[1].parse::<usize>().unwrap()).sum();
    assert_eq!(total, cfg.winner_sims);
    assert_eq!(t.rows[t.rows.len() - 2][0], "nominal");
    assert_eq!(t.rows[t.rows.len() - 1][0], "random");
    let one = select_from_fronts(&cfg, &dir.path().join("fronts.csv"), Some("nsga2-1")).unwrap();
    assert!(one.rows.len() < t.rows.len());
    assert!(select_from_fronts(&cfg, &dir.path().join("fronts.csv"), Some("nsga2-99")).is_err());
}

#[test]
fn compare_is_deterministic_and_complete() {
    let cfg = ExperimentConfig { problem: ProblemChoice::Applied, ..ExperimentConfig::default() };
    let a = compare_controllers(&cfg).unwrap();
    let b = compare_controllers(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), cfg.overloads.len() * Controller::ALL.len());
    let t = compare_table(&a);
    assert_eq!(t.header, ["overload", "controller", "f1", "f2", "f3", "f4", "max_abs_steering", "spectral_radius", "status"]);
    for r in &a {
        assert!(!r.diverged);
        assert_eq!(r.states.len(), cfg.compare.steps + 1);
        assert!(r.mse.iter().all(|v| v.is_finite() && *v >= 0.0));
    }
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(&path, "problem = \"applied\"\nseeds = [4]\n[evolution]\nmax_evaluations = 500\n[molsp]\nenabled = false\n").unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.problem, ProblemChoice::Applied);
    assert_eq!(cfg.seeds, vec![4]);
    assert_eq!(cfg.evolution.max_evaluations, 500);
    assert!(!cfg.molsp.enabled);
    assert_eq!(cfg.n_objectives(), 4);
    assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    fs::write(&path, "seeds = [1]\nbogus = 3\n").unwrap();
    assert!(ExperimentConfig::load(&path).is_err());
}
