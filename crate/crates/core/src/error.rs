//! Error type shared by all modules of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix does not have the dimension the operation requires.
    /// `what` names the offending dimension (e.g. "state", "input", "A rows").
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid interval: tau1 = {tau1} exceeds tau2 = {tau2}")]
    InvalidInterval { tau1: usize, tau2: usize },

    #[error("Lipschitz constant is region-dependent for quadratic costs; supply a finite radius")]
    RegionDependentLipschitz,

    #[error("controller '{name}' failed at step {step}: {reason}")]
    ControllerFailure {
        name: String,
        step: usize,
        reason: String,
    },

    #[error("unknown controller '{0}' (not in registry)")]
    UnknownController(String),

    #[error("controller configuration invalid: {0}")]
    ControllerConfig(String),

    #[error("misaligned horizons: trajectory covers {available}, requested {requested}")]
    MisalignedHorizons { available: usize, requested: usize },

    #[error("cost schedule is not constant on [{from}, {to}]")]
    NonConstantSchedule { from: usize, to: usize },

    #[error("rate family 1/t is not summable; the tail-sum bound M does not exist")]
    NotSummable,

    #[error("sigma tail cannot be certified from the tabulated values: {0}")]
    TailUncertified(String),

    #[error(
        "delta = {delta} >= 1 at phi = {phi}; increase phi (witness switch times {witness:?})"
    )]
    DeltaTooLarge {
        delta: f64,
        phi: f64,
        witness: Vec<usize>,
    },

    #[error("spectral radius {rho} >= 1: not Schur stable")]
    NotSchurStable { rho: f64 },

    #[error("lambda must lie in (0, 1), got {0}")]
    InvalidLambda(f64),

    #[error("input-bound fit: ratio unbounded at step {step} (x_t = theta_{{t-1}} but u_t != eta_{{t-1}} with constant steady pair); the bounded-input hypothesis fails")]
    InputBoundViolated { step: usize },

    #[error("uninformative grid: every initial state coincides with theta")]
    UninformativeGrid,

    #[error("summability classification needs at least {needed} doubling horizons, got {got}")]
    TooFewHorizons { needed: usize, got: usize },

    #[error("horizons must double: {prev} -> {next}")]
    NotDoubling { prev: usize, next: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
