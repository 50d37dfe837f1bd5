//! Scenario execution: rollout, requested analyses, invariant checks, and
//! report/trace persistence. Reports are fully deterministic (no clocks, no
//! environment-dependent fields), so a re-analysis from the persisted trace
//! reproduces the report byte for byte.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use reglab_core::bounds::{
    assemble_regret_bound, sigma_sum, sum_product_cap, window_contraction, BoundInputs,
};
use reglab_core::controllers::ControllerRegistry;
use reglab_core::metrics::{
    certify_rate, classify_summability, dynamic_regret, fit_input_bound, lyapunov_tail_series,
    tracking_sums, RateCertificate, SummabilityParams, SummabilityVerdict, DOUBLING_HORIZONS,
};
use reglab_core::rollout::{rollout, Trajectory};
use reglab_core::schedule::{
    check_dwell, lipschitz_constant, path_length, CostSchedule, PathLength,
};
use reglab_core::BoundReport;

use crate::config::{ResolvedScenario, ScenarioConfig};
use crate::trace;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RegretSection {
    pub at_horizon: f64,
    pub path_length: PathLength,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InputBoundSection {
    pub k_u: f64,
    pub k_zeta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LyapunovSection {
    /// Start of the constant-cost window the tail series was computed on.
    pub window_start: usize,
    pub v0: f64,
    pub max_telescoping_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RateSection {
    pub k: f64,
    pub family: String,
    pub sigma_horizon: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoundsSection {
    pub n0: usize,
    pub phi: f64,
    pub report: BoundReport,
    pub empirical_regret: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SummabilitySection {
    pub regret: SummabilityVerdict,
    pub tracking: SummabilityVerdict,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub controller: String,
    pub horizon: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regret: Option<RegretSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_bound: Option<InputBoundSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summability: Option<SummabilitySection>,
    pub checks: Vec<CheckResult>,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed_checks(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

pub struct ScenarioOutcome {
    pub report: RunReport,
    pub trajectory: Trajectory,
    pub schedule: CostSchedule,
    pub trace_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
}

/// Runs a scenario end to end: rollout, analyses, persistence.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let registry = ControllerRegistry::with_builtins();
    run_scenario_with(config, &registry)
}

pub fn run_scenario_with(
    config: &ScenarioConfig,
    registry: &ControllerRegistry,
) -> Result<ScenarioOutcome> {
    let resolved = config.resolve().map_err(|e| anyhow!(e.to_string()))?;
    let mut controller = registry
        .build(
            &config.controller.name,
            &config.controller.params_value(),
            &resolved.system,
        )
        .with_context(|| format!("building controller '{}'", config.controller.name))?;

    let trajectory = rollout(
        &resolved.system,
        controller.as_mut(),
        &resolved.schedule,
        &resolved.x0,
        config.horizon,
        &resolved.prior,
    )?;

    let report = analyze(config, &resolved, &trajectory, registry)?;

    let trace_path = config.outputs.trace.as_ref().map(PathBuf::from);
    if let Some(path) = &trace_path {
        trace::write_csv(path, &trajectory, &resolved.schedule)?;
    }
    let report_path = config.outputs.report.as_ref().map(PathBuf::from);
    if let Some(path) = &report_path {
        write_report(path, &report)?;
    }

    Ok(ScenarioOutcome {
        report,
        trajectory,
        schedule: resolved.schedule,
        trace_path,
        report_path,
    })
}

pub fn write_report(path: &Path, report: &RunReport) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(path, json).with_context(|| format!("writing report {}", path.display()))
}

/// Recomputes the report from a persisted trace. Certification and bound
/// analyses re-run their rollouts deterministically; point analyses use the
/// stored values.
pub fn reanalyze_from_trace(config: &ScenarioConfig, trace_csv: &str) -> Result<RunReport> {
    let resolved = config.resolve().map_err(|e| anyhow!(e.to_string()))?;
    let trajectory = trace::from_csv(trace_csv, &resolved.system)?;
    let registry = ControllerRegistry::with_builtins();
    analyze(config, &resolved, &trajectory, &registry)
}

fn analyze(
    config: &ScenarioConfig,
    resolved: &ResolvedScenario,
    trajectory: &Trajectory,
    registry: &ControllerRegistry,
) -> Result<RunReport> {
    let horizon = config.horizon;
    let schedule = &resolved.schedule;
    let mut checks = Vec::new();

    // Always-on invariants.
    let replay = trajectory.check_dynamics(&resolved.system);
    checks.push(CheckResult {
        name: "dynamics-replay".into(),
        pass: replay.is_ok(),
        detail: replay
            .err()
            .map(|e| e.to_string())
            .unwrap_or_else(|| "x_{t+1} = f(x_t, u_t) exactly for all t".into()),
    });
    let min_loss = trajectory
        .loss
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    checks.push(CheckResult {
        name: "nonnegative-loss".into(),
        pass: min_loss >= -1e-12,
        detail: format!("min per-step loss {min_loss:.3e}"),
    });
    let monotone = trajectory
        .regret_cum
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-12);
    checks.push(CheckResult {
        name: "regret-monotone".into(),
        pass: monotone,
        detail: "running regret nondecreasing".into(),
    });
    if let (Some(adm), Some(dwell)) = (resolved.generated_admissible, resolved.dwell) {
        let live = check_dwell(schedule, &dwell);
        checks.push(CheckResult {
            name: "schedule-admissible".into(),
            pass: adm && live.ok,
            detail: match live.violation {
                None => format!(
                    "dwell check passed (N0 = {}, phi = {})",
                    dwell.n0, dwell.phi
                ),
                Some(v) => format!(
                    "violated on [{}, {}]: {} switches vs bound {:.3}",
                    v.tau1, v.tau2, v.count, v.bound
                ),
            },
        });
    }

    let mut report = RunReport {
        scenario: resolved.label.clone(),
        controller: config.controller.name.clone(),
        horizon,
        regret: None,
        input_bound: None,
        lyapunov: None,
        rate: None,
        bounds: None,
        summability: None,
        checks: Vec::new(),
    };

    if config.analyses.regret {
        let at_horizon = dynamic_regret(trajectory, schedule, horizon)?;
        let pl = path_length(schedule, horizon)?;
        report.regret = Some(RegretSection {
            at_horizon,
            path_length: pl,
        });
        match fit_input_bound(trajectory, schedule) {
            Ok((k_u, k_zeta)) => {
                report.input_bound = Some(InputBoundSection { k_u, k_zeta });
            }
            Err(e) => checks.push(CheckResult {
                name: "input-bound-fit".into(),
                pass: false,
                detail: e.to_string(),
            }),
        }
    }

    if config.analyses.lyapunov {
        // telescoping on the trailing constant-cost window
        let window_start = schedule.segments().last().map(|s| s.start).unwrap_or(0);
        let v = lyapunov_tail_series(trajectory, schedule, window_start, horizon)?;
        let mut max_residual: f64 = 0.0;
        let mut min_v = f64::INFINITY;
        for (i, t) in (window_start..horizon).enumerate() {
            max_residual = max_residual.max((v[i + 1] - v[i] + trajectory.loss[t]).abs());
            min_v = min_v.min(v[i]);
        }
        min_v = min_v.min(*v.last().expect("nonempty series"));
        report.lyapunov = Some(LyapunovSection {
            window_start,
            v0: v[0],
            max_telescoping_residual: max_residual,
        });
        checks.push(CheckResult {
            name: "telescoping".into(),
            pass: max_residual <= 1e-12,
            detail: format!("max |V_{{t+1}} - V_t + loss_t| = {max_residual:.3e}"),
        });
        checks.push(CheckResult {
            name: "lyapunov-nonnegative".into(),
            pass: min_v >= 0.0,
            detail: format!("min V_t = {min_v:.3e}"),
        });
    }

    let mut certificate: Option<RateCertificate> = None;
    if config.analyses.certify || config.analyses.bounds {
        match build_certificate(config, resolved, registry) {
            Ok(cert) => {
                // post-hoc: the certificate must dominate the envelope it was
                // built from (table normalized so k * sigma covers it)
                let valid =
                    cert.table.iter().enumerate().all(|(t, &e)| {
                        cert.k * e <= cert.k * cert.sigma_at(t) * (1.0 + 1e-9) + 1e-12
                    });
                checks.push(CheckResult {
                    name: "rate-certificate".into(),
                    pass: valid,
                    detail: format!("k = {}, family = {}", cert.k, cert.curve.label()),
                });
                report.rate = Some(RateSection {
                    k: cert.k,
                    family: cert.curve.label(),
                    sigma_horizon: cert.table.len().saturating_sub(1),
                });
                certificate = Some(cert);
            }
            Err(e) => checks.push(CheckResult {
                name: "rate-certificate".into(),
                pass: false,
                detail: e.to_string(),
            }),
        }
    }

    if config.analyses.bounds {
        let outcome = (|| -> Result<BoundsSection> {
            let dwell = resolved
                .dwell
                .ok_or_else(|| anyhow!("bounds need dwell constants"))?;
            let cert = certificate
                .as_ref()
                .ok_or_else(|| anyhow!("bounds need a rate certificate"))?;
            let m = sigma_sum(cert, 1e-9)?;
            let d = window_contraction(cert.k, cert, dwell.n0, dwell.phi, 200)?;
            let p = sum_product_cap(cert.k, d.delta, dwell.n0)?;
            let (k_u, k_zeta) = fit_input_bound(trajectory, schedule)?;
            let pl = path_length(schedule, horizon)?;
            let theta0 = &schedule.segments()[0].steady.theta;
            let radius = bounding_radius(trajectory, schedule);
            let l = lipschitz_constant(schedule.segment_at(0), radius)?;
            let empirical = dynamic_regret(trajectory, schedule, horizon)?;
            let bound = assemble_regret_bound(&BoundInputs {
                lipschitz: l,
                k: cert.k,
                m_sigma: m,
                n0: dwell.n0,
                delta: d.delta,
                p_cap: p,
                k_u,
                k_zeta,
                x0_dist: (&resolved.x0 - theta0).norm(),
                x1_dist: (&trajectory.x[1] - theta0).norm(),
                theta_sum: pl.theta_sum,
                eta_sum: pl.eta_sum,
            });
            Ok(BoundsSection {
                n0: dwell.n0,
                phi: dwell.phi,
                report: bound,
                empirical_regret: empirical,
                margin: bound.total - empirical,
            })
        })();
        match outcome {
            Ok(section) => {
                checks.push(CheckResult {
                    name: "bound-dominates-regret".into(),
                    pass: section.margin >= -1e-9 && section.report.total.is_finite(),
                    detail: format!(
                        "bound {:.6} vs empirical {:.6}",
                        section.report.total, section.empirical_regret
                    ),
                });
                report.bounds = Some(section);
            }
            Err(e) => checks.push(CheckResult {
                name: "bound-dominates-regret".into(),
                pass: false,
                detail: e.to_string(),
            }),
        }
    }

    if config.analyses.summability {
        let mut regret_sum = |h: usize| trajectory.regret_cum[h];
        let params = SummabilityParams::default();
        let regret_verdict = classify_summability(&mut regret_sum, &DOUBLING_HORIZONS, &params)?;
        let mut track_sum = |h: usize| {
            tracking_sums(trajectory, schedule, h)
                .map(|(sx, _)| sx)
                .unwrap_or(f64::NAN)
        };
        let tracking_verdict = classify_summability(&mut track_sum, &DOUBLING_HORIZONS, &params)?;
        report.summability = Some(SummabilitySection {
            regret: regret_verdict,
            tracking: tracking_verdict,
        });
    }

    report.checks = checks;
    Ok(report)
}

/// Radius of the visited `(u, x)` tube around the active steady pairs; only
/// needed for the quadratic cost family's Lipschitz constant.
fn bounding_radius(trajectory: &Trajectory, schedule: &CostSchedule) -> f64 {
    let horizon = trajectory.horizon().min(schedule.horizon());
    let mut radius: f64 = 0.0;
    for t in 0..=horizon {
        let steady = &schedule.segment_at(t).steady;
        let d = ((&trajectory.x[t] - &steady.theta).norm_squared()
            + (&trajectory.u[t] - &steady.eta).norm_squared())
        .sqrt();
        radius = radius.max(d);
    }
    radius.max(1e-9)
}

/// Rate certificate for the scenario's first cost segment, from a radial
/// grid of initial states derived from x0.
fn build_certificate(
    config: &ScenarioConfig,
    resolved: &ResolvedScenario,
    registry: &ControllerRegistry,
) -> Result<RateCertificate> {
    let seg0 = resolved.schedule.segments()[0].clone();
    let theta0 = seg0.steady.theta.clone();
    let offset = &resolved.x0 - &theta0;
    let direction = if offset.norm() > 0.0 {
        offset
    } else {
        DVector::from_element(resolved.system.state_dim(), 1.0)
    };
    let grid: Vec<DVector<f64>> = [0.25, 0.5, 1.0]
        .iter()
        .map(|&s| &theta0 + &direction * s)
        .collect();
    let t_max = config.horizon.clamp(10, 2000);
    let name = config.controller.name.clone();
    let params = config.controller.params_value();
    let mut mk = || {
        registry
            .build(&name, &params, &resolved.system)
            .expect("controller built once already")
    };
    let cert = certify_rate(
        &resolved.system,
        &mut mk,
        &seg0,
        &grid,
        t_max,
        &resolved.prior,
    )?;
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn improved_config(trace: Option<&str>, report: Option<&str>) -> ScenarioConfig {
        let json = serde_json::json!({
            "name": "unit",
            "system": {"kind": "integrator", "dim": 1},
            "controller": {"name": "example1-improved"},
            "schedule": {"generate": {
                "seed": 11, "n0": 2, "phi": 5.0,
                "targets": [{"theta": [0.0]}, {"theta": [1.5]}, {"theta": [-1.0]}]
            }},
            "x0": [1.0],
            "horizon": 500,
            "outputs": {"trace": trace, "report": report},
            "analyses": {"regret": true, "certify": true, "bounds": true}
        });
        ScenarioConfig::from_json(&json.to_string()).unwrap()
    }

    #[test]
    fn scenario_runs_and_all_checks_pass() {
        let cfg = improved_config(None, None);
        let outcome = run_scenario(&cfg).unwrap();
        assert!(
            outcome.report.all_pass(),
            "failed: {:?}",
            outcome.report.failed_checks()
        );
        let bounds = outcome.report.bounds.as_ref().unwrap();
        assert!(bounds.margin >= 0.0);
        assert!(bounds.report.total.is_finite());
    }

    #[test]
    fn trace_reanalysis_reproduces_report_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let trace_path = dir.path().join("trace.csv");
        let report_path = dir.path().join("report.json");
        let cfg = improved_config(
            Some(trace_path.to_str().unwrap()),
            Some(report_path.to_str().unwrap()),
        );
        let outcome = run_scenario(&cfg).unwrap();
        let persisted = std::fs::read_to_string(&report_path).unwrap();
        let trace_csv = std::fs::read_to_string(&trace_path).unwrap();
        let re_report = reanalyze_from_trace(&cfg, &trace_csv).unwrap();
        let re_json = serde_json::to_string_pretty(&re_report).unwrap();
        assert_eq!(persisted, re_json);
        assert_eq!(outcome.report, re_report);
    }
}
