//! Payload sweep: RLQR with the selected uncertainties, RLQR with the
//! algebraic uncertainties and LQR, all designed on the nominal vehicle and
//! simulated on heavier or lighter true plants along a reference manoeuvre.

use anyhow::{Context, Result};

use molsp_core::mop::{applied_reference_uncertainty, decode_applied, decode_mu, ALGEBRAIC_LOG_MU_SQ, APPLIED_Z_STAR};
use molsp_core::numkernel::spectral_radius;
use molsp_core::rlqr::{lqr_gain, rlqr_gain_steady, simulate_closed_loop_with, DEFAULT_MAX_ITER, DEFAULT_TOL};
use molsp_core::vehicle::{applied_model, payload_variant_with};
use molsp_core::{Matrix, StateSpaceModel, UncertaintySpec};

use crate::config::{ExperimentConfig, ManeuverChoice};
use crate::report::{num, svg_plot, write_svg, Series, Table};

/// State index behind each of `f1..f4`.
pub const OBJECTIVE_STATES: [usize; 4] = [2, 1, 0, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Controller {
    RlqrMop,
    RlqrAlgebraic,
    Lqr,
}

impl Controller {
    pub const ALL: [Controller; 3] = [Controller::RlqrMop, Controller::RlqrAlgebraic, Controller::Lqr];

    pub fn name(self) -> &'static str {
        match self {
            Controller::RlqrMop => "rlqr_mop",
            Controller::RlqrAlgebraic => "rlqr_a",
            Controller::Lqr => "lqr",
        }
    }

    pub fn uncertainty(self) -> Option<UncertaintySpec> {
        match self {
            Controller::RlqrMop => Some(decode_applied(&APPLIED_Z_STAR).expect("static design")),
            Controller::RlqrAlgebraic => Some(applied_reference_uncertainty(decode_mu(ALGEBRAIC_LOG_MU_SQ))),
            Controller::Lqr => None,
        }
    }
}

impl std::str::FromStr for Controller {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Controller::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown controller {s:?} (expected rlqr_mop, rlqr_a or lqr)"))
    }
}

/// Which inputs of the two-input model the controller actuates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Actuation {
    /// Steering only; the curvature channel carries the reference.
    Steering,
    /// Both input columns under feedback.
    Full,
}

fn restrict(unc: UncertaintySpec, m: usize) -> UncertaintySpec {
    let e_g = unc.e_g.submatrix(0, 0, unc.e_g.rows(), m);
    UncertaintySpec { e_g, ..unc }
}

/// Gain of `controller` on the nominal two-input model, `Q = I`, `R = I`.
pub fn design_gain(cfg: &ExperimentConfig, controller: Controller, actuation: Actuation) -> Result<Matrix> {
    let nominal = applied_model(&cfg.vehicle.params(), cfg.vehicle.dt)?;
    let model = match actuation {
        Actuation::Steering => nominal.with_inputs(1),
        Actuation::Full => nominal,
    };
    let (n, m) = (model.n_states(), model.n_inputs());
    let q = Matrix::identity(n);
    let r = Matrix::identity(m);
    let k = match controller.uncertainty() {
        Some(unc) => {
            let g = rlqr_gain_steady(&model, &restrict(unc, m), &q, &r, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            if !g.converged {
                anyhow::bail!("{} gain did not converge", controller.name());
            }
            g.k
        }
        None => lqr_gain(&model, &q, &r)?.k,
    };
    Ok(k)
}

/// True plant at `overload` times the rated payload.
pub fn true_plant(cfg: &ExperimentConfig, overload: f64) -> Result<StateSpaceModel> {
    let p = payload_variant_with(&cfg.vehicle.params(), overload, cfg.vehicle.inertia_rule())?;
    Ok(applied_model(&p, cfg.vehicle.dt)?)
}

pub fn closed_loop_radius(plant: &StateSpaceModel, k: &Matrix) -> Result<f64> {
    let sub = plant.with_inputs(k.rows());
    Ok(spectral_radius(&(&sub.f + &sub.g.matmul(k)))?)
}

/// Reference path curvature at time `t`.
pub fn reference_curvature(cfg: &ExperimentConfig, t: f64) -> f64 {
    let c = &cfg.compare;
    let v = cfg.vehicle.v;
    match c.maneuver {
        ManeuverChoice::LaneChange => {
            let s = (t - c.start) / c.lane_duration;
            if !(0.0..=1.0).contains(&s) {
                return 0.0;
            }
            let y_dd = c.lane_offset / (c.lane_duration * c.lane_duration) * (60.0 * s - 180.0 * s * s + 120.0 * s.powi(3));
            y_dd / (v * v)
        }
        ManeuverChoice::Arc => {
            if t >= c.start {
                c.arc_curvature
            } else {
                0.0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub overload: f64,
    pub controller: Controller,
    /// MSE of `f1..f4`; NaN when diverged.
    pub mse: [f64; 4],
    pub max_abs_steering: f64,
    pub spectral_radius: f64,
    pub diverged: bool,
    pub states: Vec<Vec<f64>>,
    pub steering: Vec<f64>,
}

/// Simulates a steering-only controller on the true plant along the reference manoeuvre.
pub fn simulate_controller(cfg: &ExperimentConfig, controller: Controller, k: &Matrix, overload: f64) -> Result<SimOutcome> {
    let plant = true_plant(cfg, overload)?;
    let rho = closed_loop_radius(&plant, k)?;
    let sub = plant.with_inputs(k.rows());
    let g_ref: Vec<f64> = (0..plant.n_states()).map(|i| plant.g[(i, 1)]).collect();
    let dt = cfg.vehicle.dt;
    let res = simulate_closed_loop_with(&sub, k, &cfg.compare.x0, cfg.compare.steps, |i| {
        let kappa = reference_curvature(cfg, i as f64 * dt);
        Some(g_ref.iter().map(|g| g * kappa).collect())
    });
    Ok(match res {
        Ok(tr) => {
            let n = tr.states.len() as f64;
            let mut mse = [0.0; 4];
            for (j, &s) in OBJECTIVE_STATES.iter().enumerate() {
                mse[j] = tr.states.iter().map(|x| x[s] * x[s]).sum::<f64>() / n;
            }
            let steering: Vec<f64> = tr.inputs.iter().map(|u| u[0]).collect();
            SimOutcome {
                overload,
                controller,
                mse,
                max_abs_steering: steering.iter().fold(0.0, |a, u| a.max(u.abs())),
                spectral_radius: rho,
                diverged: false,
                states: tr.states,
                steering,
            }
        }
        Err(_) => SimOutcome {
            overload,
            controller,
            mse: [f64::NAN; 4],
            max_abs_steering: f64::NAN,
            spectral_radius: rho,
            diverged: true,
            states: Vec::new(),
            steering: Vec::new(),
        },
    })
}

/// Every controller at every configured overload, in overload-major order.
pub fn compare_controllers(cfg: &ExperimentConfig) -> Result<Vec<SimOutcome>> {
    let gains: Vec<(Controller, Matrix)> = Controller::ALL
        .into_iter()
        .map(|c| design_gain(cfg, c, Actuation::Steering).map(|k| (c, k)))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for &ov in &cfg.overloads {
        for (c, k) in &gains {
            out.push(simulate_controller(cfg, *c, k, ov).with_context(|| format!("overload {ov}"))?);
        }
    }
    Ok(out)
}

pub fn compare_table(rows: &[SimOutcome]) -> Table {
    let mut t = Table::new(["overload", "controller", "f1", "f2", "f3", "f4", "max_abs_steering", "spectral_radius", "status"]);
    for r in rows {
        let mut row = vec![num(r.overload), r.controller.name().to_string()];
        row.extend(r.mse.iter().map(|&v| num(v)));
        row.push(num(r.max_abs_steering));
        row.push(num(r.spectral_radius));
        row.push(if r.diverged { "diverged" } else { "ok" }.to_string());
        t.push(row);
    }
    t
}

pub fn steering_table(rows: &[SimOutcome], dt: f64) -> Table {
    let mut t = Table::new(["overload", "controller", "step", "time", "steering"]);
    for r in rows {
        for (i, u) in r.steering.iter().enumerate() {
            t.push(vec![num(r.overload), r.controller.name().into(), i.to_string(), num(i as f64 * dt), num(*u)]);
        }
    }
    t
}

pub fn trajectory_table(r: &SimOutcome, dt: f64) -> Table {
    let mut t = Table::new(["step", "time", "x_1", "x_2", "x_3", "x_4", "steering"]);
    for (i, x) in r.states.iter().enumerate() {
        let mut row = vec![i.to_string(), num(i as f64 * dt)];
        row.extend(x.iter().map(|&v| num(v)));
        row.push(r.steering.get(i).map_or_else(String::new, |&u| num(u)));
        t.push(row);
    }
    t
}

fn percent(ov: f64) -> String {
    format!("{:.0}", ov * 100.0)
}

/// Writes `compare.csv`, `steering.csv` and per-overload steering and offset plots.
pub fn emit_compare(cfg: &ExperimentConfig, rows: &[SimOutcome]) -> Result<()> {
    let dir = &cfg.output_dir;
    let dt = cfg.vehicle.dt;
    compare_table(rows).write(&dir.join("compare.csv"))?;
    steering_table(rows, dt).write(&dir.join("steering.csv"))?;
    for &ov in &cfg.overloads {
        let here: Vec<&SimOutcome> = rows.iter().filter(|r| r.overload == ov).collect();
        let steer: Vec<Series> = here
            .iter()
            .map(|r| Series {
                label: r.controller.name().into(),
                points: r.steering.iter().enumerate().map(|(i, &u)| (i as f64 * dt, u)).collect(),
            })
            .collect();
        let offset: Vec<Series> = here
            .iter()
            .map(|r| Series {
                label: r.controller.name().into(),
                points: r.states.iter().enumerate().map(|(i, x)| (i as f64 * dt, x[2])).collect(),
            })
            .collect();
        let pct = percent(ov);
        write_svg(
            &dir.join(format!("steering_{pct}.svg")),
            &svg_plot(&format!("Steering, {pct}% overload"), "time [s]", "steering [rad]", &steer),
        )?;
        write_svg(
            &dir.join(format!("offset_{pct}.svg")),
            &svg_plot(&format!("Lateral offset error, {pct}% overload"), "time [s]", "offset [m]", &offset),
        )?;
    }
    Ok(())
}
