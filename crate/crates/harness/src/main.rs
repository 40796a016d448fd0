use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use molsp_harness::compare::{compare_controllers, design_gain, emit_compare, simulate_controller, trajectory_table, Actuation, Controller};
use molsp_harness::config::{ExperimentConfig, ProblemChoice};
use molsp_harness::experiment::{metrics_from_file, metrics_table, run_experiment, summary_table};
use molsp_harness::report::{svg_plot, write_svg, Series};
use molsp_harness::winner::select_from_fronts;

#[derive(Parser)]
#[command(name = "molsp", version, about = "Robust LQR tuning by multiobjective evolutionary search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run with this single seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Enable or disable the local search
    #[arg(long, value_enum)]
    molsp: Option<Switch>,
    /// Evaluation budget per run
    #[arg(long)]
    evals: Option<usize>,
    /// generic or applied
    #[arg(long)]
    problem: Option<ProblemChoice>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(m) = self.molsp {
            cfg.molsp.enabled = matches!(m, Switch::On);
        }
        if let Some(e) = self.evals {
            cfg.evolution.max_evaluations = e;
        }
        if let Some(p) = self.problem {
            cfg.problem = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run NSGA-II with and without local search over the configured seeds
    Optimize(Common),
    /// Winner histogram over a saved front plus nominal and random designs
    Select {
        #[command(flatten)]
        common: Common,
        /// fronts.csv written by `optimize`
        #[arg(long)]
        fronts: PathBuf,
        /// Restrict candidates to one run id
        #[arg(long)]
        run: Option<String>,
    },
    /// Simulate one controller at one payload overload
    Simulate {
        #[command(flatten)]
        common: Common,
        /// rlqr_mop, rlqr_a or lqr
        #[arg(long, default_value = "rlqr_mop")]
        controller: Controller,
        /// Overload as a fraction of the rated payload
        #[arg(long, default_value_t = 0.0)]
        overload: f64,
    },
    /// Payload sweep over all controllers
    Compare(Common),
    /// Recompute indicators from a saved fronts.csv
    Metrics {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fronts: PathBuf,
    },
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MOLSP_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("MOLSP_THREADS={v:?} is not an integer"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    init_threads()?;
    match Cli::parse().command {
        Command::Optimize(common) => {
            let cfg = common.load()?;
            let out = run_experiment(&cfg)?;
            cfg.to_toml().and_then(|t| molsp_harness::report::write_atomic(&cfg.output_dir.join("config.toml"), t.as_bytes()))?;
            for s in &out.report.summaries {
                println!(
                    "{:<12} runs {:>3}  HV {:.4e} ± {:.2e}  IGD {:.4e}  wins(HV) {}",
                    s.algorithm, s.runs, s.mean[2], s.std[2], s.mean[0], s.wins[2]
                );
            }
            println!("results in {}", cfg.output_dir.display());
        }
        Command::Select { common, fronts, run } => {
            let cfg = common.load()?;
            let t = select_from_fronts(&cfg, &fronts, run.as_deref())?;
            let path = cfg.output_dir.join("winners.csv");
            t.write(&path)?;
            let best = t.rows.iter().max_by_key(|r| r[1].parse::<usize>().unwrap_or(0)).map(|r| r[0].clone());
            println!("most frequent winner: {}", best.unwrap_or_default());
            println!("histogram in {}", path.display());
        }
        Command::Simulate { common, controller, overload } => {
            let cfg = common.load()?;
            let k = design_gain(&cfg, controller, Actuation::Steering)?;
            let r = simulate_controller(&cfg, controller, &k, overload)?;
            let name = format!("trajectory_{}_{:.0}", controller.name(), overload * 100.0);
            trajectory_table(&r, cfg.vehicle.dt).write(&cfg.output_dir.join(format!("{name}.csv")))?;
            let dt = cfg.vehicle.dt;
            let series: Vec<Series> = ["lateral velocity", "yaw rate", "lateral offset", "orientation"]
                .iter()
                .enumerate()
                .map(|(j, l)| Series {
                    label: l.to_string(),
                    points: r.states.iter().enumerate().map(|(i, x)| (i as f64 * dt, x[j])).collect(),
                })
                .collect();
            write_svg(&cfg.output_dir.join(format!("{name}.svg")), &svg_plot(&name, "time [s]", "error", &series))?;
            println!(
                "{} at {:.0}% overload: rho {:.4}, MSE f1..f4 {:?}{}",
                controller.name(),
                overload * 100.0,
                r.spectral_radius,
                r.mse,
                if r.diverged { " (diverged)" } else { "" }
            );
        }
        Command::Compare(common) => {
            let cfg = common.load()?;
            let rows = compare_controllers(&cfg)?;
            emit_compare(&cfg, &rows)?;
            for r in &rows {
                println!(
                    "{:>5.0}%  {:<9} f1 {:.4e}  f2 {:.4e}  f3 {:.4e}  f4 {:.4e}  rho {:.4}",
                    r.overload * 100.0,
                    r.controller.name(),
                    r.mse[0],
                    r.mse[1],
                    r.mse[2],
                    r.mse[3],
                    r.spectral_radius
                );
            }
        }
        Command::Metrics { common, fronts } => {
            let cfg = common.load()?;
            let rep = metrics_from_file(&fronts, &cfg.hv_reference())?;
            metrics_table(&rep).write(&cfg.output_dir.join("metrics.csv"))?;
            summary_table(&rep).write(&cfg.output_dir.join("summary.csv"))?;
            println!("{} runs evaluated, results in {}", rep.rows.len(), cfg.output_dir.display());
        }
    }
    Ok(())
}
