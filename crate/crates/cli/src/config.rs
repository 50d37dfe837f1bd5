//! Scenario configuration: JSON schema, semantic validation with
//! JSON-pointer-style error paths, and resolution into core objects.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use reglab_core::rollout::PriorSpec;
use reglab_core::schedule::{
    generate_admissible_schedule, CostParams, CostSchedule, DwellSpec, NormPower, ScheduleSpec,
};
use reglab_core::system::{SteadyStatePair, SystemModel, STEADY_STATE_TOL};

/// A configuration error tied to the offending location in the document.
#[derive(Debug)]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.pointer, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(pointer: &str, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        pointer: pointer.to_string(),
        message: message.into(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemSpec {
    Integrator { dim: usize },
    Linear { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
}

impl SystemSpec {
    pub fn resolve(&self) -> Result<SystemModel, ConfigError> {
        match self {
            SystemSpec::Integrator { dim } => {
                if *dim == 0 {
                    return err("/system/dim", "state dimension must be positive");
                }
                Ok(SystemModel::integrator(*dim))
            }
            SystemSpec::Linear { a, b } => {
                let a = matrix_from_rows(a, "/system/a")?;
                let b = matrix_from_rows(b, "/system/b")?;
                SystemModel::linear(a, b).map_err(|e| ConfigError {
                    pointer: "/system".into(),
                    message: e.to_string(),
                })
            }
        }
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], pointer: &str) -> Result<DMatrix<f64>, ConfigError> {
    if rows.is_empty() {
        return err(pointer, "matrix has no rows");
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        return err(pointer, "matrix has no columns");
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return err(pointer, "ragged matrix");
    }
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &data))
}

/// Controller selection: the `name` key picks the registry entry, every
/// other key is handed to the builder (e.g. `"k"` for linear feedback).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub name: String,
    #[serde(flatten)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl ControllerSpec {
    pub fn params_value(&self) -> serde_json::Value {
        serde_json::Value::Object(self.params.clone())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PriorConfig {
    #[default]
    Default,
    StateAsTheta,
    CostPair,
    #[serde(untagged)]
    Explicit {
        theta: Vec<f64>,
        eta: Vec<f64>,
    },
}

impl PriorConfig {
    pub fn resolve(&self) -> PriorSpec {
        match self {
            PriorConfig::Default => PriorSpec::ControllerDefault,
            PriorConfig::StateAsTheta => PriorSpec::StateAsTheta,
            PriorConfig::CostPair => PriorSpec::CostPair,
            PriorConfig::Explicit { theta, eta } => PriorSpec::Explicit(SteadyStatePair::new(
                DVector::from_vec(eta.clone()),
                DVector::from_vec(theta.clone()),
            )),
        }
    }
}

/// Target pool entry for the schedule generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetSpec {
    pub theta: Vec<f64>,
    /// Explicit input or "solve".
    #[serde(default = "default_solve")]
    pub eta: serde_json::Value,
}

fn default_solve() -> serde_json::Value {
    serde_json::Value::String("solve".into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateSpec {
    pub seed: u64,
    pub n0: usize,
    pub phi: f64,
    pub targets: Vec<TargetSpec>,
    #[serde(default = "default_p")]
    pub p: u8,
    #[serde(default = "default_weight")]
    pub q: f64,
    #[serde(default = "default_weight")]
    pub r: f64,
}

fn default_p() -> u8 {
    1
}
fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleConfig {
    Inline(ScheduleSpec),
    Generate(GenerateSpec),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
pub struct AnalysisToggles {
    #[serde(default)]
    pub regret: bool,
    #[serde(default)]
    pub lyapunov: bool,
    #[serde(default)]
    pub certify: bool,
    #[serde(default)]
    pub bounds: bool,
    #[serde(default)]
    pub summability: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub system: SystemSpec,
    pub controller: ControllerSpec,
    #[serde(default)]
    pub prior: PriorConfig,
    pub schedule: ScheduleConfig,
    pub x0: Vec<f64>,
    pub horizon: usize,
    #[serde(default)]
    pub outputs: OutputPaths,
    #[serde(default)]
    pub analyses: AnalysisToggles,
    /// Dwell constants for the bound pipeline when the schedule is inline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell: Option<DwellSpec>,
}

/// A fully resolved scenario, ready to roll out.
#[derive(Debug)]
pub struct ResolvedScenario {
    pub label: String,
    pub system: SystemModel,
    pub schedule: CostSchedule,
    pub x0: DVector<f64>,
    pub prior: PriorSpec,
    /// Dwell spec for bound assembly (from the generator or `dwell`).
    pub dwell: Option<DwellSpec>,
    /// Generator self-check, when the schedule was generated.
    pub generated_admissible: Option<bool>,
}

impl ScenarioConfig {
    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(json).map_err(|e| ConfigError {
            pointer: "/".into(),
            message: e.to_string(),
        })
    }

    /// Applies the REGLAB_SEED environment override to the generator seed.
    pub fn apply_seed_override(&mut self) {
        if let Ok(val) = std::env::var("REGLAB_SEED") {
            if let Ok(seed) = val.parse::<u64>() {
                if let ScheduleConfig::Generate(g) = &mut self.schedule {
                    g.seed = seed;
                }
            }
        }
    }

    pub fn resolve(&self) -> Result<ResolvedScenario, ConfigError> {
        let system = self.system.resolve()?;
        if self.x0.len() != system.state_dim() {
            return err(
                "/x0",
                format!(
                    "dimension {} does not match state dimension {}",
                    self.x0.len(),
                    system.state_dim()
                ),
            );
        }
        let x0 = DVector::from_vec(self.x0.clone());

        let (schedule, dwell, generated_admissible) = match &self.schedule {
            ScheduleConfig::Inline(spec) => {
                if spec.horizon < self.horizon {
                    return err(
                        "/schedule/inline/horizon",
                        format!(
                            "schedule covers [0, {}] but the scenario horizon is {}",
                            spec.horizon, self.horizon
                        ),
                    );
                }
                let schedule = spec.resolve(&system).map_err(|e| ConfigError {
                    pointer: "/schedule/inline".into(),
                    message: e.to_string(),
                })?;
                (schedule, self.dwell, None)
            }
            ScheduleConfig::Generate(g) => {
                if g.targets.is_empty() {
                    return err("/schedule/generate/targets", "target pool is empty");
                }
                if g.phi <= 0.0 {
                    return err("/schedule/generate/phi", "phi must be positive");
                }
                let mut pool = Vec::with_capacity(g.targets.len());
                for (i, target) in g.targets.iter().enumerate() {
                    let theta = DVector::from_vec(target.theta.clone());
                    if theta.len() != system.state_dim() {
                        return err(
                            &format!("/schedule/generate/targets/{i}/theta"),
                            "dimension mismatch",
                        );
                    }
                    let eta = match &target.eta {
                        serde_json::Value::String(s) if s == "solve" => system
                            .solve_steady_input(&theta, STEADY_STATE_TOL)
                            .ok_or_else(|| ConfigError {
                                pointer: format!("/schedule/generate/targets/{i}/eta"),
                                message: "steady input not solvable".into(),
                            })?,
                        serde_json::Value::Array(vals) => {
                            let v: Option<Vec<f64>> = vals.iter().map(|x| x.as_f64()).collect();
                            match v {
                                Some(v) if v.len() == system.input_dim() => DVector::from_vec(v),
                                _ => {
                                    return err(
                                        &format!("/schedule/generate/targets/{i}/eta"),
                                        "must be a vector of input dimension",
                                    )
                                }
                            }
                        }
                        _ => {
                            return err(
                                &format!("/schedule/generate/targets/{i}/eta"),
                                "must be a vector or \"solve\"",
                            )
                        }
                    };
                    pool.push(SteadyStatePair::new(eta, theta));
                }
                let p = match g.p {
                    1 => NormPower::One,
                    2 => NormPower::Two,
                    _ => return err("/schedule/generate/p", "p must be 1 or 2"),
                };
                if g.q <= 0.0 || g.r <= 0.0 {
                    return err("/schedule/generate/q", "weights must be positive");
                }
                let spec = DwellSpec::new(g.n0, g.phi);
                let generated = generate_admissible_schedule(
                    g.seed,
                    &spec,
                    self.horizon,
                    &pool,
                    &CostParams { p, q: g.q, r: g.r },
                )
                .map_err(|e| ConfigError {
                    pointer: "/schedule/generate".into(),
                    message: e.to_string(),
                })?;
                (generated.schedule, Some(spec), Some(generated.admissible))
            }
        };

        schedule
            .validate_against(&system, STEADY_STATE_TOL)
            .map_err(|e| ConfigError {
                pointer: "/schedule".into(),
                message: e.to_string(),
            })?;

        if self.analyses.summability && self.horizon < 2000 {
            return err(
                "/analyses/summability",
                "summability classification needs horizon >= 2000 (doubling horizons up to 2000)",
            );
        }
        if self.analyses.bounds && dwell.is_none() {
            return err(
                "/dwell",
                "bound assembly needs dwell constants: use a generated schedule or set \"dwell\"",
            );
        }

        Ok(ResolvedScenario {
            label: self.name.clone().unwrap_or_else(|| "scenario".into()),
            system,
            schedule,
            x0,
            prior: self.prior.resolve(),
            dwell,
            generated_admissible,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config() -> serde_json::Value {
        serde_json::json!({
            "system": {"kind": "integrator", "dim": 1},
            "controller": {"name": "example1-improved"},
            "schedule": {"inline": {
                "horizon": 10,
                "segments": [
                    {"start": 0, "theta": [0.0], "eta": "solve", "p": 1, "q": 1.0, "r": 1.0}
                ]
            }},
            "x0": [1.0],
            "horizon": 10
        })
    }

    #[test]
    fn minimal_config_resolves() {
        let cfg = ScenarioConfig::from_json(&minimal_config().to_string()).unwrap();
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.schedule.horizon(), 10);
        assert!(resolved.dwell.is_none());
    }

    #[test]
    fn dimension_error_carries_pointer() {
        let mut json = minimal_config();
        json["x0"] = serde_json::json!([1.0, 2.0]);
        let cfg = ScenarioConfig::from_json(&json.to_string()).unwrap();
        let e = cfg.resolve().unwrap_err();
        assert_eq!(e.pointer, "/x0");
    }

    #[test]
    fn bounds_analysis_requires_dwell() {
        let mut json = minimal_config();
        json["analyses"] = serde_json::json!({"bounds": true});
        let cfg = ScenarioConfig::from_json(&json.to_string()).unwrap();
        let e = cfg.resolve().unwrap_err();
        assert_eq!(e.pointer, "/dwell");
    }

    #[test]
    fn generated_schedule_carries_dwell() {
        let json = serde_json::json!({
            "system": {"kind": "integrator", "dim": 1},
            "controller": {"name": "example1-improved"},
            "schedule": {"generate": {
                "seed": 1, "n0": 2, "phi": 5.0,
                "targets": [{"theta": [0.0]}, {"theta": [1.5]}, {"theta": [-1.0]}]
            }},
            "x0": [1.0],
            "horizon": 100,
            "analyses": {"bounds": true, "regret": true, "certify": true}
        });
        let cfg = ScenarioConfig::from_json(&json.to_string()).unwrap();
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.dwell, Some(DwellSpec::new(2, 5.0)));
        assert_eq!(resolved.generated_admissible, Some(true));
    }

    #[test]
    fn linear_system_with_gain() {
        let json = serde_json::json!({
            "system": {"kind": "linear", "a": [[0.5]], "b": [[1.0]]},
            "controller": {"name": "linear-feedback", "k": [[-0.3]]},
            "schedule": {"inline": {
                "horizon": 10,
                "segments": [{"start": 0, "theta": [0.0], "eta": "solve", "p": 1, "q": 1.0, "r": 1.0}]
            }},
            "x0": [1.0],
            "horizon": 10
        });
        let cfg = ScenarioConfig::from_json(&json.to_string()).unwrap();
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.system.state_dim(), 1);
        assert_eq!(cfg.controller.name, "linear-feedback");
        assert!(cfg.controller.params_value().get("k").is_some());
    }
}
