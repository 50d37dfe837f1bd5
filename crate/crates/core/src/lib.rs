//! Simulation and certification toolkit for online controllers under
//! time-varying positive-definite costs.
//!
//! The crate simulates discrete-time plants in closed loop with causal
//! controllers that receive cost information with a one-step delay, measures
//! dynamic regret against the time-varying optimal steady state, and
//! assembles certified regret bounds from dwell-time constants, decay-rate
//! certificates, and input-bound fits. Every closed-form constant is backed
//! by a brute-force enumeration oracle.
//!
//! Modules:
//! - [`system`]: plants `x_{t+1} = f(x_t, u_t)` and steady-state pairs
//! - [`schedule`]: piecewise-constant cost schedules, path length, dwell checks
//! - [`controllers`]: the controller trait, registry, and built-in variants
//! - [`rollout`]: closed-loop execution with the information delay
//! - [`metrics`]: regret, Lyapunov tails, rate certificates, summability
//! - [`bounds`]: bound constants and their enumeration oracles

pub mod bounds;
pub mod controllers;
pub mod error;
pub mod metrics;
pub mod rollout;
pub mod schedule;
pub mod system;

pub use bounds::{
    assemble_regret_bound, brute_force_sum_product, find_min_dwell, min_dwell_exponential,
    sigma_sum, sum_product_cap, window_contraction, BoundInputs, BoundReport,
};
pub use controllers::{
    spectral_envelope, Controller, ControllerMeta, ControllerRegistry, PreferredPrior, RateFamily,
    Revealed,
};
pub use error::{Error, Result};
pub use metrics::{
    certify_rate, classify_summability, dynamic_regret, fit_input_bound, lyapunov_tail,
    lyapunov_tail_series, phi_envelope, tracking_sums, RateCertificate, SigmaCurve,
    SummabilityParams, SummabilityVerdict, Verdict, DOUBLING_HORIZONS,
};
pub use rollout::{rollout, PriorSpec, Trajectory};
pub use schedule::{
    check_dwell, check_dwell_brute_force, dwell_count, eval_cost, generate_admissible_schedule,
    lipschitz_constant, path_length, switch_times, CostParams, CostSchedule, CostSegment,
    DwellSpec, NormPower, PathLength, ScheduleSpec,
};
pub use system::{validate_steady_state, SteadyStatePair, SystemKind, SystemModel};
