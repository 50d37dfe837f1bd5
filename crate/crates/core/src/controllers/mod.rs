//! Causal control algorithms with one-step information delay, behind a
//! common trait and a name-keyed registry.
//!
//! At time t a controller sees the current state and the cost segment that
//! was active at t-1; at t = 0 it sees only the prior pair `i_0`. Each
//! variant declares what it knows about its own convergence rate and
//! input-bound constants, which the certification pipeline verifies rather
//! than trusts.

mod example1;
mod linear_feedback;

pub use example1::{Example1Baseline, Example1Improved, TauCounter};
pub use linear_feedback::{spectral_envelope, LinearFeedback};

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::schedule::CostSegment;
use crate::system::{SteadyStatePair, SystemModel};

/// Information revealed to the controller at one step: the prior pair at
/// t = 0, afterwards the segment active one step earlier. Segment identity is
/// its index, so a switch is detected exactly rather than by value comparison.
#[derive(Debug, Clone, Copy)]
pub enum Revealed<'a> {
    Prior(&'a SteadyStatePair),
    Segment {
        index: usize,
        segment: &'a CostSegment,
    },
}

impl<'a> Revealed<'a> {
    pub fn steady(&self) -> &'a SteadyStatePair {
        match self {
            Revealed::Prior(pair) => pair,
            Revealed::Segment { segment, .. } => &segment.steady,
        }
    }
}

/// Known rate families for decay certificates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateFamily {
    /// sigma(t) = 1/t for t >= 1 (not summable).
    InverseLinear,
    /// sigma(t) = 1/t^2 for t >= 1.
    InverseSquare,
    /// sigma(t) = lambda^t.
    Geometric(f64),
}

/// Rate law a controller claims for itself: `||x_t - theta|| <= k ||x_0 - theta|| sigma(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeclaredRate {
    pub k: f64,
    pub family: RateFamily,
}

/// Which prior `i_0` the controller expects when none is configured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreferredPrior {
    /// theta_{-1} = x_0, eta_{-1} solved from the steady-state equation.
    StateAsTheta,
    /// The steady pair of the first cost segment.
    CostPair,
}

/// Static facts a controller declares about itself.
#[derive(Debug, Clone)]
pub struct ControllerMeta {
    pub name: String,
    pub rate: Option<DeclaredRate>,
    /// `(k_u, k_zeta)` when known.
    pub input_bound: Option<(f64, f64)>,
    pub preferred_prior: PreferredPrior,
    pub warnings: Vec<String>,
}

/// A causal control algorithm with internal state.
///
/// `begin` is invoked by the rollout before the first step; `control` once
/// per step. Implementations must be deterministic in
/// `(begin arguments, control arguments)`.
pub trait Controller {
    fn meta(&self) -> ControllerMeta;

    /// Resets internal state for a fresh rollout from `x0` with prior `i_0`.
    fn begin(&mut self, x0: &DVector<f64>, prior: &SteadyStatePair);

    /// Computes `u_t` from the current state and the revealed information.
    fn control(
        &mut self,
        t: usize,
        x: &DVector<f64>,
        revealed: Revealed<'_>,
    ) -> std::result::Result<DVector<f64>, String>;
}

type Builder =
    Box<dyn Fn(&serde_json::Value, &SystemModel) -> Result<Box<dyn Controller>> + Send + Sync>;

/// Name-keyed registry of controller builders. Builders receive the
/// controller's JSON configuration and the plant, and return a fresh
/// instance. Three controllers are built in; `register` adds
/// project-specific variants (the "custom" config key resolves only if such
/// a builder was registered).
pub struct ControllerRegistry {
    builders: BTreeMap<String, Builder>,
}

impl ControllerRegistry {
    pub fn empty() -> Self {
        ControllerRegistry {
            builders: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = ControllerRegistry::empty();
        reg.register("example1-baseline", |_cfg, system| {
            Ok(Box::new(Example1Baseline::new(system)?) as Box<dyn Controller>)
        });
        reg.register("example1-improved", |_cfg, system| {
            Ok(Box::new(Example1Improved::new(system)?) as Box<dyn Controller>)
        });
        reg.register("linear-feedback", |cfg, system| {
            Ok(Box::new(LinearFeedback::from_config(cfg, system)?) as Box<dyn Controller>)
        });
        reg
    }

    pub fn register<F>(&mut self, name: &str, builder: F)
    where
        F: Fn(&serde_json::Value, &SystemModel) -> Result<Box<dyn Controller>>
            + Send
            + Sync
            + 'static,
    {
        self.builders.insert(name.to_string(), Box::new(builder));
    }

    pub fn build(
        &self,
        name: &str,
        config: &serde_json::Value,
        system: &SystemModel,
    ) -> Result<Box<dyn Controller>> {
        let builder = self
            .builders
            .get(name)
            .ok_or_else(|| Error::UnknownController(name.to_string()))?;
        builder(config, system)
    }

    pub fn names(&self) -> Vec<&str> {
        self.builders.keys().map(|s| s.as_str()).collect()
    }
}
