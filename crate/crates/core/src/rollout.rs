//! Closed-loop execution with one-step information delay.
//!
//! At time t the controller is given the cost segment active at t-1; at
//! t = 0 it is given the prior pair `i_0`. The produced trajectory stores one
//! extra state `x_{T+1}` so tail quantities such as `||x_1 - theta_0||` are
//! always available to the bound machinery.

use nalgebra::DVector;

use crate::controllers::{Controller, PreferredPrior, Revealed};
use crate::error::{Error, Result};
use crate::schedule::{eval_cost, CostSchedule};
use crate::system::{SteadyStatePair, SystemModel, STEADY_STATE_TOL};

/// How the prior pair `i_0 = (eta_{-1}, theta_{-1})` is chosen.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum PriorSpec {
    /// Defer to the controller's declared preference.
    #[default]
    ControllerDefault,
    /// theta_{-1} = x_0; eta_{-1} from the steady-state equation when
    /// solvable, otherwise zero.
    StateAsTheta,
    /// The steady pair of the first cost segment.
    CostPair,
    Explicit(SteadyStatePair),
}

/// Resolves the prior against a concrete initial state and schedule.
pub fn resolve_prior(
    spec: &PriorSpec,
    preferred: PreferredPrior,
    system: &SystemModel,
    schedule: &CostSchedule,
    x0: &DVector<f64>,
) -> SteadyStatePair {
    match spec {
        PriorSpec::Explicit(pair) => pair.clone(),
        PriorSpec::CostPair => schedule.segments()[0].steady.clone(),
        PriorSpec::StateAsTheta => state_as_theta(system, x0),
        PriorSpec::ControllerDefault => match preferred {
            PreferredPrior::StateAsTheta => state_as_theta(system, x0),
            PreferredPrior::CostPair => schedule.segments()[0].steady.clone(),
        },
    }
}

fn state_as_theta(system: &SystemModel, x0: &DVector<f64>) -> SteadyStatePair {
    let eta = system
        .solve_steady_input(x0, STEADY_STATE_TOL)
        .unwrap_or_else(|| DVector::zeros(system.input_dim()));
    SteadyStatePair::new(eta, x0.clone())
}

/// Aligned closed-loop sequences: states `x_0..x_{T+1}`, inputs `u_0..u_T`,
/// per-step losses `L_t(u_t, x_t) - L_t(eta_t, theta_t)`, and their running
/// sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub loss: Vec<f64>,
    pub regret_cum: Vec<f64>,
}

impl Trajectory {
    /// Horizon T: number of executed steps minus one.
    pub fn horizon(&self) -> usize {
        self.u.len() - 1
    }

    /// Replays the plant over the stored inputs and checks
    /// `x_{t+1} = f(x_t, u_t)` exactly.
    pub fn check_dynamics(&self, system: &SystemModel) -> Result<()> {
        for t in 0..self.u.len() {
            let next = system.step(&self.x[t], &self.u[t])?;
            if next != self.x[t + 1] {
                return Err(Error::ControllerFailure {
                    name: "replay".into(),
                    step: t,
                    reason: "stored state differs from f(x_t, u_t)".into(),
                });
            }
        }
        Ok(())
    }
}

/// Executes the closed loop for `T + 1` steps (t = 0..=T).
pub fn rollout(
    system: &SystemModel,
    controller: &mut dyn Controller,
    schedule: &CostSchedule,
    x0: &DVector<f64>,
    horizon: usize,
    prior: &PriorSpec,
) -> Result<Trajectory> {
    if x0.len() != system.state_dim() {
        return Err(Error::DimensionMismatch {
            what: "state",
            expected: system.state_dim(),
            got: x0.len(),
        });
    }
    if horizon > schedule.horizon() {
        return Err(Error::MisalignedHorizons {
            available: schedule.horizon(),
            requested: horizon,
        });
    }
    let meta = controller.meta();
    let prior_pair = resolve_prior(prior, meta.preferred_prior, system, schedule, x0);
    controller.begin(x0, &prior_pair);

    let mut x = Vec::with_capacity(horizon + 2);
    let mut u = Vec::with_capacity(horizon + 1);
    let mut loss = Vec::with_capacity(horizon + 1);
    let mut regret_cum = Vec::with_capacity(horizon + 1);
    let mut cum = 0.0;
    x.push(x0.clone());

    for t in 0..=horizon {
        let revealed = if t == 0 {
            Revealed::Prior(&prior_pair)
        } else {
            let index = schedule.segment_index_at(t - 1);
            Revealed::Segment {
                index,
                segment: &schedule.segments()[index],
            }
        };
        let x_t = x.last().expect("state history nonempty").clone();
        let u_t =
            controller
                .control(t, &x_t, revealed)
                .map_err(|reason| Error::ControllerFailure {
                    name: meta.name.clone(),
                    step: t,
                    reason,
                })?;
        if u_t.len() != system.input_dim() {
            return Err(Error::ControllerFailure {
                name: meta.name.clone(),
                step: t,
                reason: format!(
                    "controller returned input of dimension {}, plant expects {}",
                    u_t.len(),
                    system.input_dim()
                ),
            });
        }
        let seg = schedule.segment_at(t);
        let step_loss =
            eval_cost(seg, &u_t, &x_t) - eval_cost(seg, &seg.steady.eta, &seg.steady.theta);
        let x_next = system.step(&x_t, &u_t)?;

        cum += step_loss;
        u.push(u_t);
        loss.push(step_loss);
        regret_cum.push(cum);
        x.push(x_next);
    }

    Ok(Trajectory {
        x,
        u,
        loss,
        regret_cum,
    })
}
