//! Regret, Lyapunov tail values, rate certificates, input-bound fits, the
//! reachability envelope, and summability classification.
//!
//! The tail value `V_t = sum_{tau=t}^{T} (L(u_tau, x_tau) - L(eta, theta))`
//! is the truncated remaining regret under a constant cost. Accumulated
//! backwards, `V_{t+1} - V_t + loss_t = 0` holds to within one rounding of
//! the suffix sum; this per-step decrease is what makes V a Lyapunov
//! function.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controllers::{Controller, RateFamily};
use crate::error::{Error, Result};
use crate::rollout::{rollout, PriorSpec, Trajectory};
use crate::schedule::{eval_cost, CostSchedule, CostSegment};
use crate::system::SystemModel;

// ---------------------------------------------------------------------------
// Regret and tracking sums
// ---------------------------------------------------------------------------

/// `sum_{t=0}^{T} L_t(u_t, x_t) - L_t(eta_t, theta_t)`. The optimal-cost
/// term is evaluated even though it vanishes for the parametric family.
pub fn dynamic_regret(traj: &Trajectory, schedule: &CostSchedule, horizon: usize) -> Result<f64> {
    check_alignment(traj, schedule, horizon)?;
    let mut sum = 0.0;
    for t in 0..=horizon {
        let seg = schedule.segment_at(t);
        sum += eval_cost(seg, &traj.u[t], &traj.x[t])
            - eval_cost(seg, &seg.steady.eta, &seg.steady.theta);
    }
    Ok(sum)
}

/// `(sum_t ||x_t - theta_t||, sum_t ||u_t - eta_t||)` over `t in [0, T]`.
pub fn tracking_sums(
    traj: &Trajectory,
    schedule: &CostSchedule,
    horizon: usize,
) -> Result<(f64, f64)> {
    check_alignment(traj, schedule, horizon)?;
    let mut sum_x = 0.0;
    let mut sum_u = 0.0;
    for t in 0..=horizon {
        let steady = &schedule.segment_at(t).steady;
        sum_x += (&traj.x[t] - &steady.theta).norm();
        sum_u += (&traj.u[t] - &steady.eta).norm();
    }
    Ok((sum_x, sum_u))
}

fn check_alignment(traj: &Trajectory, schedule: &CostSchedule, horizon: usize) -> Result<()> {
    if horizon > traj.horizon() || horizon > schedule.horizon() {
        return Err(Error::MisalignedHorizons {
            available: traj.horizon().min(schedule.horizon()),
            requested: horizon,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Lyapunov tail
// ---------------------------------------------------------------------------

/// Truncated tail regret `V_t` for every `t in [t0, T]`, computed by backward
/// accumulation so that `V_{t+1} - V_t + loss_t` vanishes to within a single
/// rounding. Requires the schedule to be constant on `[t0, T]`.
pub fn lyapunov_tail_series(
    traj: &Trajectory,
    schedule: &CostSchedule,
    t0: usize,
    horizon: usize,
) -> Result<Vec<f64>> {
    check_alignment(traj, schedule, horizon)?;
    if t0 > horizon {
        return Err(Error::InvalidInterval {
            tau1: t0,
            tau2: horizon,
        });
    }
    if schedule.segment_index_at(t0) != schedule.segment_index_at(horizon) {
        return Err(Error::NonConstantSchedule {
            from: t0,
            to: horizon,
        });
    }
    let mut series = vec![0.0; horizon - t0 + 1];
    let mut acc = 0.0;
    for t in (t0..=horizon).rev() {
        acc += traj.loss[t];
        series[t - t0] = acc;
    }
    Ok(series)
}

/// Single tail value `V_t`.
pub fn lyapunov_tail(
    traj: &Trajectory,
    schedule: &CostSchedule,
    t: usize,
    horizon: usize,
) -> Result<f64> {
    Ok(lyapunov_tail_series(traj, schedule, t, horizon)?[0])
}

/// Truncation horizon heuristic: ten times the first instant at which the
/// certified envelope falls below 1e-8, capped at one million steps.
pub fn suggested_truncation_horizon(cert: &RateCertificate) -> usize {
    const CAP: usize = 1_000_000;
    for t in 0..CAP {
        if cert.k * cert.sigma_at(t) < 1e-8 {
            return (10 * t.max(1)).min(CAP);
        }
    }
    CAP
}

// ---------------------------------------------------------------------------
// Input-bound fit (k_u, k_zeta)
// ---------------------------------------------------------------------------

/// Fits the smallest `k_u` (with `k_zeta = 0`) such that
/// `||u_t - eta_{t-1}|| <= k_u ||x_t - theta_{t-1}||` at every step where the
/// steady pair did not just move, then the smallest `k_zeta` covering the
/// remaining steps given that `k_u`. Pairs are those of the cost sequence
/// with the convention `zeta_t = zeta_0` for `t < 0`.
pub fn fit_input_bound(traj: &Trajectory, schedule: &CostSchedule) -> Result<(f64, f64)> {
    let horizon = traj.horizon().min(schedule.horizon());
    let steady_at = |t: isize| {
        let t = t.max(0) as usize;
        &schedule.segment_at(t).steady
    };
    let mut k_u: f64 = 0.0;
    let mut deferred = Vec::new();
    for t in 0..=horizon {
        let prev = steady_at(t as isize - 1);
        let numer = (&traj.u[t] - &prev.eta).norm();
        let denom = (&traj.x[t] - &prev.theta).norm();
        let pair_a = steady_at(t as isize - 1);
        let pair_b = steady_at(t as isize - 2);
        let zeta_diff = ((&pair_a.theta - &pair_b.theta).norm_squared()
            + (&pair_a.eta - &pair_b.eta).norm_squared())
        .sqrt();
        if zeta_diff == 0.0 {
            if denom > 1e-14 {
                k_u = k_u.max(numer / denom);
            } else if numer > 1e-9 {
                return Err(Error::InputBoundViolated { step: t });
            }
        } else {
            deferred.push((numer, denom, zeta_diff));
        }
    }
    let mut k_zeta: f64 = 0.0;
    for (numer, denom, zeta_diff) in deferred {
        let excess = numer - k_u * denom;
        if excess > 0.0 {
            k_zeta = k_zeta.max(excess / zeta_diff);
        }
    }
    Ok((k_u, k_zeta))
}

// ---------------------------------------------------------------------------
// Rate certificates
// ---------------------------------------------------------------------------

/// Decay curve `sigma` with `sigma(0) = 1`, nonincreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "param")]
pub enum SigmaCurve {
    /// 1/t for t >= 1 (not summable).
    #[serde(rename = "1/t")]
    InverseLinear,
    /// 1/t^2 for t >= 1.
    #[serde(rename = "1/t^2")]
    InverseSquare,
    #[serde(rename = "geometric")]
    Geometric(f64),
    /// Tabulated values; reads beyond the table clamp to the last entry.
    #[serde(rename = "empirical")]
    Empirical(Vec<f64>),
}

impl SigmaCurve {
    pub fn eval(&self, t: usize) -> f64 {
        match self {
            SigmaCurve::InverseLinear => {
                if t == 0 {
                    1.0
                } else {
                    1.0 / t as f64
                }
            }
            SigmaCurve::InverseSquare => {
                if t == 0 {
                    1.0
                } else {
                    1.0 / (t as f64 * t as f64)
                }
            }
            SigmaCurve::Geometric(lambda) => lambda.powi(t as i32),
            SigmaCurve::Empirical(table) => {
                if table.is_empty() {
                    1.0
                } else {
                    table[t.min(table.len() - 1)]
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            SigmaCurve::InverseLinear => "1/t".into(),
            SigmaCurve::InverseSquare => "1/t^2".into(),
            SigmaCurve::Geometric(l) => format!("geometric({l})"),
            SigmaCurve::Empirical(_) => "empirical".into(),
        }
    }
}

impl From<RateFamily> for SigmaCurve {
    fn from(f: RateFamily) -> Self {
        match f {
            RateFamily::InverseLinear => SigmaCurve::InverseLinear,
            RateFamily::InverseSquare => SigmaCurve::InverseSquare,
            RateFamily::Geometric(l) => SigmaCurve::Geometric(l),
        }
    }
}

/// Certificate `||x_t - theta|| <= k ||x_0 - theta|| sigma(t)` backed by grid
/// rollouts. `table` is the monotonized empirical envelope (normalized so the
/// certificate holds with this `k`); `curve` is the family actually used by
/// downstream sums and products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub k: f64,
    pub curve: SigmaCurve,
    pub table: Vec<f64>,
}

impl RateCertificate {
    pub fn from_family(k: f64, curve: SigmaCurve) -> Self {
        RateCertificate {
            k,
            curve,
            table: Vec::new(),
        }
    }

    pub fn sigma_at(&self, t: usize) -> f64 {
        self.curve.eval(t)
    }
}

/// Certifies a decay rate for a controller under a constant cost by rolling
/// out every grid state and enveloping `||x_t - theta|| / ||x_0 - theta||`.
///
/// The raw envelope is monotonized by a running max from the tail; `k` is its
/// value at zero (at least one). If the controller declares a rate family and
/// the declared curve dominates the envelope on the horizon, the certificate
/// carries that family (enabling closed-form tail sums); otherwise it stays
/// empirical.
pub fn certify_rate(
    system: &SystemModel,
    make_controller: &mut dyn FnMut() -> Box<dyn Controller>,
    segment: &CostSegment,
    x0_grid: &[DVector<f64>],
    t_max: usize,
    prior: &PriorSpec,
) -> Result<RateCertificate> {
    let schedule = CostSchedule::constant(segment.clone(), t_max)?;
    let theta = &segment.steady.theta;
    let mut envelope = vec![0.0f64; t_max + 1];
    let mut informative = false;
    let mut declared = None;
    for x0 in x0_grid {
        let dist0 = (x0 - theta).norm();
        if dist0 == 0.0 {
            continue;
        }
        informative = true;
        let mut ctrl = make_controller();
        declared = ctrl.meta().rate;
        let traj = rollout(system, ctrl.as_mut(), &schedule, x0, t_max, prior)?;
        for (slot, x_t) in envelope.iter_mut().zip(&traj.x) {
            let ratio = (x_t - theta).norm() / dist0;
            *slot = slot.max(ratio);
        }
    }
    if !informative {
        return Err(Error::UninformativeGrid);
    }
    // running max from the tail
    for t in (0..t_max).rev() {
        envelope[t] = envelope[t].max(envelope[t + 1]);
    }
    let k = envelope[0].max(1.0);
    let table: Vec<f64> = envelope.iter().map(|v| v / k).collect();

    if let Some(decl) = declared {
        let curve = SigmaCurve::from(decl.family);
        // absolute floor on the normalized ratio scale: subtracting nearby
        // states loses up to ~1e-12 of the initial distance when theta != 0
        let dominated = envelope
            .iter()
            .enumerate()
            .all(|(t, &e)| e <= decl.k * curve.eval(t) * (1.0 + 1e-9) + 1e-12);
        if dominated {
            return Ok(RateCertificate {
                k: decl.k,
                curve,
                table,
            });
        }
    }
    Ok(RateCertificate {
        k,
        curve: SigmaCurve::Empirical(table.clone()),
        table,
    })
}

// ---------------------------------------------------------------------------
// Reachability envelope phi(s, t)
// ---------------------------------------------------------------------------

/// Sampled lower bound on `phi(s, t) = sup { ||x_tau - theta|| : ||x_0 - theta|| <= s, tau >= t }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiEnvelope {
    pub s: f64,
    /// `values[t]` approximates `phi(s, t)`; nonincreasing by construction.
    pub values: Vec<f64>,
}

/// Builds the envelope from a radial grid of initial conditions: every
/// nonzero sign pattern over the axes in up to three dimensions, otherwise
/// seeded random directions; `grid_density` radii per direction up to `s`.
pub fn phi_envelope(
    system: &SystemModel,
    make_controller: &mut dyn FnMut() -> Box<dyn Controller>,
    segment: &CostSegment,
    s: f64,
    grid_density: usize,
    t_max: usize,
    prior: &PriorSpec,
) -> Result<PhiEnvelope> {
    assert!(s > 0.0, "radius must be positive");
    let n = system.state_dim();
    let theta = &segment.steady.theta;
    let schedule = CostSchedule::constant(segment.clone(), t_max)?;

    let mut directions: Vec<DVector<f64>> = Vec::new();
    if n <= 3 {
        let patterns = 3usize.pow(n as u32);
        for code in 1..patterns {
            let mut dir = DVector::zeros(n);
            let mut c = code;
            for i in 0..n {
                dir[i] = match c % 3 {
                    0 => 0.0,
                    1 => 1.0,
                    _ => -1.0,
                };
                c /= 3;
            }
            if dir.norm() > 0.0 {
                directions.push(dir.normalize());
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..(2 * n * grid_density.max(1)) {
            let dir = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..=1.0));
            if dir.norm() > 1e-9 {
                directions.push(dir.normalize());
            }
        }
    }

    let mut row_max = vec![0.0f64; t_max + 1];
    for dir in &directions {
        for j in 1..=grid_density.max(1) {
            let radius = s * j as f64 / grid_density.max(1) as f64;
            let x0 = theta + dir * radius;
            let mut ctrl = make_controller();
            let traj = rollout(system, ctrl.as_mut(), &schedule, &x0, t_max, prior)?;
            for (slot, x_t) in row_max.iter_mut().zip(&traj.x) {
                *slot = slot.max((x_t - theta).norm());
            }
        }
    }
    // sup over tau >= t: running max from the tail
    for t in (0..t_max).rev() {
        row_max[t] = row_max[t].max(row_max[t + 1]);
    }
    Ok(PhiEnvelope { s, values: row_max })
}

// ---------------------------------------------------------------------------
// Summability classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "bound")]
pub enum Verdict {
    #[serde(rename = "bounded")]
    Bounded(f64),
    #[serde(rename = "diverging")]
    Diverging,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummabilityVerdict {
    pub verdict: Verdict,
    pub partial_sums: Vec<(usize, f64)>,
    pub growth_per_doubling: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SummabilityParams {
    /// A doubling that adds at least this much counts as divergent growth
    /// (harmonic-type growth adds about 0.69 per doubling).
    pub divergence_floor: f64,
    /// Consecutive increments must shrink by at least this factor to count
    /// as a geometric tail.
    pub decay_ratio: f64,
    /// Relative headroom added to the last partial sum for the bound D.
    pub safety: f64,
}

impl Default for SummabilityParams {
    fn default() -> Self {
        SummabilityParams {
            divergence_floor: 0.05,
            decay_ratio: 0.75,
            safety: 0.1,
        }
    }
}

/// Standard doubling horizons used by the experiment runner.
pub const DOUBLING_HORIZONS: [usize; 5] = [125, 250, 500, 1000, 2000];

/// Classifies partial sums at doubling horizons: diverging if every doubling
/// adds at least the floor, bounded if the increments decay geometrically.
pub fn classify_summability(
    sum_fn: &mut dyn FnMut(usize) -> f64,
    horizons: &[usize],
    params: &SummabilityParams,
) -> Result<SummabilityVerdict> {
    if horizons.len() < 4 {
        return Err(Error::TooFewHorizons {
            needed: 4,
            got: horizons.len(),
        });
    }
    for w in horizons.windows(2) {
        if w[1] != 2 * w[0] {
            return Err(Error::NotDoubling {
                prev: w[0],
                next: w[1],
            });
        }
    }
    let partial_sums: Vec<(usize, f64)> = horizons.iter().map(|&h| (h, sum_fn(h))).collect();
    let diffs: Vec<f64> = partial_sums.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let growth_per_doubling = *diffs.last().expect(">= 4 horizons imply >= 3 diffs");

    let diverging = diffs.iter().all(|&d| d >= params.divergence_floor);
    let decaying = diffs
        .windows(2)
        .all(|w| w[1] <= params.decay_ratio * w[0] + 1e-12);

    let verdict = if diverging {
        Verdict::Diverging
    } else if decaying {
        let last = partial_sums.last().expect("nonempty").1;
        Verdict::Bounded(last * (1.0 + params.safety))
    } else {
        Verdict::Inconclusive
    };
    Ok(SummabilityVerdict {
        verdict,
        partial_sums,
        growth_per_doubling,
    })
}
