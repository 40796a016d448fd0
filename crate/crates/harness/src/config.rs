//! TOML experiment configuration. Every section is optional and unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use molsp_core::moea::EvolutionConfig;
use molsp_core::molsp::{DrawMode, MolspConfig, Schedule};
use molsp_core::mop::ControlProblem;
use molsp_core::vehicle::InertiaRule;
use molsp_core::VehicleParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProblemChoice {
    #[default]
    Generic,
    Applied,
}

impl std::str::FromStr for ProblemChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "generic" => Ok(Self::Generic),
            "applied" => Ok(Self::Applied),
            _ => Err(format!("unknown problem {s:?} (expected generic or applied)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DrawChoice {
    #[default]
    PerComponent,
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleChoice {
    #[default]
    EveryGeneration,
    TailOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MolspSection {
    pub enabled: bool,
    /// Defaults to the problem's hypervolume reference point.
    pub reference_point: Option<Vec<f64>>,
    pub draw: DrawChoice,
    pub schedule: ScheduleChoice,
}

impl Default for MolspSection {
    fn default() -> Self {
        Self { enabled: true, reference_point: None, draw: DrawChoice::default(), schedule: ScheduleChoice::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionSection {
    pub population_size: usize,
    pub p_c: f64,
    pub p_m: f64,
    pub eta_c: f64,
    pub eta_m: f64,
    pub max_evaluations: usize,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        let d = EvolutionConfig::default();
        Self {
            population_size: d.population_size,
            p_c: d.p_c,
            p_m: d.p_m,
            eta_c: d.eta_c,
            eta_m: d.eta_m,
            max_evaluations: d.max_evaluations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InertiaChoice {
    #[default]
    ScaleWithMass,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleSection {
    pub a: f64,
    pub b: f64,
    pub l: f64,
    pub v: f64,
    pub m: f64,
    pub payload: f64,
    pub j: f64,
    pub c1: f64,
    pub c2: f64,
    /// Sampling period of the discrete model, s.
    pub dt: f64,
    pub inertia: InertiaChoice,
}

impl Default for VehicleSection {
    fn default() -> Self {
        let p = VehicleParams::reference_truck();
        Self {
            a: p.a,
            b: p.b,
            l: p.l,
            v: p.v,
            m: p.m,
            payload: p.payload,
            j: p.j,
            c1: p.c1,
            c2: p.c2,
            dt: 0.1,
            inertia: InertiaChoice::default(),
        }
    }
}

impl VehicleSection {
    pub fn params(&self) -> VehicleParams {
        VehicleParams {
            a: self.a,
            b: self.b,
            l: self.l,
            v: self.v,
            m: self.m,
            payload: self.payload,
            j: self.j,
            c1: self.c1,
            c2: self.c2,
        }
    }

    pub fn inertia_rule(&self) -> InertiaRule {
        match self.inertia {
            InertiaChoice::ScaleWithMass => InertiaRule::ScaleWithMass,
            InertiaChoice::Constant => InertiaRule::Constant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ManeuverChoice {
    #[default]
    LaneChange,
    Arc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    /// Initial error state `[lateral velocity, yaw rate, lateral offset, orientation]`.
    pub x0: Vec<f64>,
    pub steps: usize,
    pub maneuver: ManeuverChoice,
    /// Lateral offset of the lane change, m.
    pub lane_offset: f64,
    /// Duration of the lane change, s.
    pub lane_duration: f64,
    /// Start time of the manoeuvre, s.
    pub start: f64,
    /// Path curvature of the arc manoeuvre, 1/m.
    pub arc_curvature: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            x0: vec![0.0, 0.0, 1.0, 0.0],
            steps: 600,
            maneuver: ManeuverChoice::default(),
            lane_offset: 3.5,
            lane_duration: 5.0,
            start: 10.0,
            arc_curvature: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub problem: ProblemChoice,
    pub seeds: Vec<u64>,
    pub winner_sims: usize,
    pub output_dir: PathBuf,
    /// Payload overloads as fractions of the rated payload.
    pub overloads: Vec<f64>,
    /// Defaults to `[25, 25, 25]` (generic) or `[5000, 10000, 5000, 5000]` (applied).
    pub hv_reference: Option<Vec<f64>>,
    pub molsp: MolspSection,
    pub evolution: EvolutionSection,
    pub vehicle: VehicleSection,
    pub compare: CompareSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemChoice::default(),
            seeds: (1..=10).collect(),
            winner_sims: 1000,
            output_dir: PathBuf::from("out"),
            overloads: vec![0.0, 1.0, 2.0, 3.0],
            hv_reference: None,
            molsp: MolspSection::default(),
            evolution: EvolutionSection::default(),
            vehicle: VehicleSection::default(),
            compare: CompareSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("seeds must be nonempty");
        }
        if let Some(o) = self.overloads.iter().find(|&&o| !(o >= -1.0)) {
            bail!("overload {o} is below -1");
        }
        self.evolution_config(0).validate().map_err(anyhow::Error::msg)?;
        self.vehicle.params().validate()?;
        if !(self.vehicle.dt > 0.0) {
            bail!("vehicle.dt must be positive");
        }
        let m = self.n_objectives();
        if self.hv_reference().len() != m {
            bail!("hv_reference needs {m} entries");
        }
        if self.molsp_config().reference_point.len() != m {
            bail!("molsp.reference_point needs {m} entries");
        }
        if self.compare.x0.len() != 4 {
            bail!("compare.x0 needs 4 entries");
        }
        if !(self.compare.lane_duration > 0.0) {
            bail!("compare.lane_duration must be positive");
        }
        Ok(())
    }

    pub fn n_objectives(&self) -> usize {
        match self.problem {
            ProblemChoice::Generic => 3,
            ProblemChoice::Applied => 4,
        }
    }

    pub fn hv_reference(&self) -> Vec<f64> {
        self.hv_reference.clone().unwrap_or_else(|| match self.problem {
            ProblemChoice::Generic => MolspConfig::generic().reference_point,
            ProblemChoice::Applied => MolspConfig::applied().reference_point,
        })
    }

    pub fn molsp_config(&self) -> MolspConfig {
        let mut c = MolspConfig::new(self.molsp.reference_point.clone().unwrap_or_else(|| self.hv_reference()));
        c.enabled = self.molsp.enabled;
        c.draw = match self.molsp.draw {
            DrawChoice::PerComponent => DrawMode::PerComponent,
            DrawChoice::Scalar => DrawMode::Scalar,
        };
        c.schedule = match self.molsp.schedule {
            ScheduleChoice::EveryGeneration => Schedule::EveryGeneration,
            ScheduleChoice::TailOnly => Schedule::TailOnly,
        };
        c
    }

    pub fn evolution_config(&self, seed: u64) -> EvolutionConfig {
        let e = &self.evolution;
        EvolutionConfig {
            population_size: e.population_size,
            p_c: e.p_c,
            p_m: e.p_m,
            eta_c: e.eta_c,
            eta_m: e.eta_m,
            max_evaluations: e.max_evaluations,
            seed,
        }
    }

    pub fn build_problem(&self) -> Result<ControlProblem> {
        Ok(match self.problem {
            ProblemChoice::Generic => ControlProblem::generic(),
            ProblemChoice::Applied => ControlProblem::applied(&self.vehicle.params(), self.vehicle.dt)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = ExperimentConfig::from_toml("problem = \"applied\"\nseeds = [4]\n[evolution]\nmax_evaluations = 300\n").unwrap();
        assert_eq!(cfg.problem, ProblemChoice::Applied);
        assert_eq!(cfg.evolution.population_size, 92);
        assert_eq!(cfg.hv_reference(), vec![5000.0, 10000.0, 5000.0, 5000.0]);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml("problme = \"generic\"\n").is_err());
        assert!(ExperimentConfig::from_toml("[evolution]\npop = 3\n").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_toml("seeds = []\n").is_err());
        assert!(ExperimentConfig::from_toml("overloads = [-1.5]\n").is_err());
        assert!(ExperimentConfig::from_toml("hv_reference = [1.0]\n").is_err());
    }
}
