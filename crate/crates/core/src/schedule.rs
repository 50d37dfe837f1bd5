//! Piecewise-constant cost schedules, their switch structure, path length,
//! and average-dwell-time admissibility.
//!
//! Each segment carries a weighted p-norm cost
//! `L(u, x) = q ||x - theta||^p + r ||u - eta||^p` with `p in {1, 2}` and a
//! declared steady-state pair, so the cost is positive definite with respect
//! to `(eta, theta)` by construction and a conservative Lipschitz constant
//! is available in closed form.
//!
//! The dwell checker enforces the strict counting inequality
//! `N(tau1, tau2) < N0 + (tau2 - tau1) / phi` over every interval, where the
//! switch at t = 0 counts and interval endpoints are inclusive. Ties fail.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{validate_steady_state, SteadyStatePair, SystemModel, STEADY_STATE_TOL};

/// Norm power of the parametric cost family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormPower {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl NormPower {
    pub fn exponent(self) -> f64 {
        match self {
            NormPower::One => 1.0,
            NormPower::Two => 2.0,
        }
    }
}

/// One piece of the schedule: active from `start` until the next segment.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSegment {
    pub start: usize,
    pub steady: SteadyStatePair,
    pub p: NormPower,
    pub q: f64,
    pub r: f64,
}

impl CostSegment {
    pub fn new(start: usize, steady: SteadyStatePair, p: NormPower, q: f64, r: f64) -> Self {
        assert!(q > 0.0 && r > 0.0, "cost weights must be positive");
        CostSegment {
            start,
            steady,
            p,
            q,
            r,
        }
    }

    /// Same cost function (everything except the start time).
    fn same_cost(&self, other: &CostSegment) -> bool {
        self.steady == other.steady && self.p == other.p && self.q == other.q && self.r == other.r
    }
}

/// `L(u, x) = q ||x - theta||^p + r ||u - eta||^p`.
pub fn eval_cost(seg: &CostSegment, u: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let dx = (x - &seg.steady.theta).norm();
    let du = (u - &seg.steady.eta).norm();
    match seg.p {
        NormPower::One => seg.q * dx + seg.r * du,
        NormPower::Two => seg.q * dx * dx + seg.r * du * du,
    }
}

/// Conservative Lipschitz constant of the segment cost on the ball of the
/// given radius around the steady pair. For p = 1 the bound
/// `sqrt(2) * max(q, r)` is global and the radius is ignored; for p = 2 the
/// gradient-norm bound `2 sqrt(2) * max(q, r) * radius` needs a finite radius.
pub fn lipschitz_constant(seg: &CostSegment, radius: f64) -> Result<f64> {
    let w = seg.q.max(seg.r);
    match seg.p {
        NormPower::One => Ok(std::f64::consts::SQRT_2 * w),
        NormPower::Two => {
            if !radius.is_finite() || radius <= 0.0 {
                return Err(Error::RegionDependentLipschitz);
            }
            Ok(2.0 * std::f64::consts::SQRT_2 * w * radius)
        }
    }
}

/// An ordered piecewise-constant schedule covering `[0, horizon]`.
///
/// Construction normalizes the segment list: adjacent segments with an
/// identical cost are merged, starts must be strictly increasing and the
/// first must be 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSchedule {
    segments: Vec<CostSegment>,
    horizon: usize,
}

impl CostSchedule {
    pub fn new(segments: Vec<CostSegment>, horizon: usize) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidSchedule("no segments".into()));
        }
        if segments[0].start != 0 {
            return Err(Error::InvalidSchedule(format!(
                "first segment must start at 0, starts at {}",
                segments[0].start
            )));
        }
        let mut merged: Vec<CostSegment> = Vec::with_capacity(segments.len());
        for seg in segments {
            if let Some(prev) = merged.last() {
                if seg.start <= prev.start {
                    return Err(Error::InvalidSchedule(format!(
                        "segment starts must be strictly increasing ({} after {})",
                        seg.start, prev.start
                    )));
                }
                if seg.start > horizon {
                    return Err(Error::InvalidSchedule(format!(
                        "segment start {} beyond horizon {}",
                        seg.start, horizon
                    )));
                }
                if prev.same_cost(&seg) {
                    // identical adjacent segments merge into the earlier one
                    continue;
                }
            }
            merged.push(seg);
        }
        let dims: Vec<(usize, usize)> = merged
            .iter()
            .map(|s| (s.steady.theta.len(), s.steady.eta.len()))
            .collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::InvalidSchedule(
                "segments disagree on state/input dimensions".into(),
            ));
        }
        Ok(CostSchedule {
            segments: merged,
            horizon,
        })
    }

    /// Single segment active on the whole horizon.
    pub fn constant(segment: CostSegment, horizon: usize) -> Result<Self> {
        let mut seg = segment;
        seg.start = 0;
        CostSchedule::new(vec![seg], horizon)
    }

    pub fn segments(&self) -> &[CostSegment] {
        &self.segments
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Index of the segment active at time `t`.
    pub fn segment_index_at(&self, t: usize) -> usize {
        match self.segments.binary_search_by_key(&t, |s| s.start) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }

    pub fn segment_at(&self, t: usize) -> &CostSegment {
        &self.segments[self.segment_index_at(t)]
    }

    /// Checks each segment's declared steady pair against the plant.
    pub fn validate_against(&self, system: &SystemModel, tol: f64) -> Result<()> {
        for (i, seg) in self.segments.iter().enumerate() {
            if !validate_steady_state(system, &seg.steady, tol)? {
                return Err(Error::InvalidSchedule(format!(
                    "segment {i} (start {}): declared pair is not a steady state within tol {tol}",
                    seg.start
                )));
            }
        }
        Ok(())
    }
}

/// Switch instants `t_0 = 0, t_1, ..., t_{N-1}` plus the convention `t_N = horizon`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchTimes {
    pub times: Vec<usize>,
    pub t_n: usize,
}

impl SwitchTimes {
    pub fn count(&self) -> usize {
        self.times.len()
    }
}

pub fn switch_times(schedule: &CostSchedule) -> SwitchTimes {
    SwitchTimes {
        times: schedule.segments.iter().map(|s| s.start).collect(),
        t_n: schedule.horizon,
    }
}

/// Number of switch instants `t_i` with `tau1 <= t_i <= tau2` (both inclusive;
/// the initial switch at t = 0 counts).
pub fn dwell_count(schedule: &CostSchedule, tau1: usize, tau2: usize) -> Result<usize> {
    if tau1 > tau2 {
        return Err(Error::InvalidInterval { tau1, tau2 });
    }
    Ok(schedule
        .segments
        .iter()
        .filter(|s| tau1 <= s.start && s.start <= tau2)
        .count())
}

/// Average dwell time constraint: chatter bound `N0` and dwell `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellSpec {
    pub n0: usize,
    pub phi: f64,
}

impl DwellSpec {
    pub fn new(n0: usize, phi: f64) -> Self {
        assert!(phi > 0.0, "phi must be positive");
        DwellSpec { n0, phi }
    }
}

/// Interval on which the strict dwell inequality fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellViolation {
    pub tau1: usize,
    pub tau2: usize,
    pub count: usize,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwellCheck {
    pub ok: bool,
    pub violation: Option<DwellViolation>,
}

/// Checks `N(tau1, tau2) < N0 + (tau2 - tau1) / phi` strictly for all
/// `0 <= tau1 <= tau2 <= horizon`.
///
/// Intervals with no switch satisfy the inequality whenever `N0 >= 1`, and
/// shrinking an interval onto its outermost contained switches preserves the
/// count while lowering the right-hand side, so checking endpoint pairs drawn
/// from the switch times is exhaustive. `N0 = 0` fails outright: a degenerate
/// interval has bound 0 while counts are nonnegative integers and the
/// inequality is strict.
pub fn check_dwell(schedule: &CostSchedule, spec: &DwellSpec) -> DwellCheck {
    let times = switch_times(schedule).times;
    if spec.n0 == 0 {
        // [0, 0] contains the initial switch: 1 < 0 fails.
        return DwellCheck {
            ok: false,
            violation: Some(DwellViolation {
                tau1: 0,
                tau2: 0,
                count: 1,
                bound: 0.0,
            }),
        };
    }
    for i in 0..times.len() {
        for j in i..times.len() {
            let count = j - i + 1;
            let width = (times[j] - times[i]) as f64;
            let bound = spec.n0 as f64 + width / spec.phi;
            if count as f64 >= bound {
                return DwellCheck {
                    ok: false,
                    violation: Some(DwellViolation {
                        tau1: times[i],
                        tau2: times[j],
                        count,
                        bound,
                    }),
                };
            }
        }
    }
    DwellCheck {
        ok: true,
        violation: None,
    }
}

/// Reference checker: evaluates every integer pair directly. Quadratic in the
/// horizon; used to validate `check_dwell`.
pub fn check_dwell_brute_force(schedule: &CostSchedule, spec: &DwellSpec) -> DwellCheck {
    for tau1 in 0..=schedule.horizon {
        for tau2 in tau1..=schedule.horizon {
            let count = dwell_count(schedule, tau1, tau2).expect("tau1 <= tau2");
            let bound = spec.n0 as f64 + (tau2 - tau1) as f64 / spec.phi;
            if count as f64 >= bound {
                return DwellCheck {
                    ok: false,
                    violation: Some(DwellViolation {
                        tau1,
                        tau2,
                        count,
                        bound,
                    }),
                };
            }
        }
    }
    DwellCheck {
        ok: true,
        violation: None,
    }
}

/// Total variation of the optimal pairs over `[1, T]`, split into the state
/// part and the input part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLength {
    pub theta_sum: f64,
    pub eta_sum: f64,
}

impl PathLength {
    pub fn total(&self) -> f64 {
        self.theta_sum + self.eta_sum
    }
}

/// `PL = sum_{t=1}^{T} ||eta_t - eta_{t-1}|| + ||theta_t - theta_{t-1}||` for
/// the per-time-step expansion of the schedule: only the switch instants in
/// `[1, T]` contribute a jump.
pub fn path_length(schedule: &CostSchedule, horizon: usize) -> Result<PathLength> {
    if horizon > schedule.horizon {
        return Err(Error::MisalignedHorizons {
            available: schedule.horizon,
            requested: horizon,
        });
    }
    let mut theta_sum = 0.0;
    let mut eta_sum = 0.0;
    let segs = schedule.segments();
    for i in 1..segs.len() {
        if segs[i].start >= 1 && segs[i].start <= horizon {
            theta_sum += (&segs[i].steady.theta - &segs[i - 1].steady.theta).norm();
            eta_sum += (&segs[i].steady.eta - &segs[i - 1].steady.eta).norm();
        }
    }
    Ok(PathLength { theta_sum, eta_sum })
}

/// Cost parameters shared by every generated segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub p: NormPower,
    pub q: f64,
    pub r: f64,
}

/// Result of the randomized schedule generator. `admissible` is the
/// self-check `check_dwell(schedule, spec)`; it is false only for the
/// degenerate single-segment fallback when the spec is infeasible.
#[derive(Debug, Clone)]
pub struct GeneratedSchedule {
    pub schedule: CostSchedule,
    pub admissible: bool,
}

/// Draws a schedule whose switch gaps all exceed `phi`, which guarantees the
/// strict dwell inequality for any `N0 >= 2`. Deterministic in the seed.
/// Infeasible specs (`N0 < 2`, `phi` too large for the horizon, or a pool
/// with fewer than two targets) degrade to a flagged single-segment schedule.
pub fn generate_admissible_schedule(
    seed: u64,
    spec: &DwellSpec,
    horizon: usize,
    target_pool: &[SteadyStatePair],
    cost: &CostParams,
) -> Result<GeneratedSchedule> {
    if target_pool.is_empty() {
        return Err(Error::InvalidSchedule("empty target pool".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_gap = spec.phi.floor() as usize + 1;

    let mut segments = Vec::new();
    let pick = |rng: &mut ChaCha8Rng, avoid: Option<usize>| -> usize {
        loop {
            let i = rng.gen_range(0..target_pool.len());
            if Some(i) != avoid || target_pool.len() == 1 {
                return i;
            }
        }
    };

    let first = pick(&mut rng, None);
    segments.push(CostSegment::new(
        0,
        target_pool[first].clone(),
        cost.p,
        cost.q,
        cost.r,
    ));

    let feasible = spec.n0 >= 2 && target_pool.len() >= 2 && min_gap <= horizon;
    if feasible {
        let mut t = 0usize;
        let mut last = first;
        loop {
            let gap = rng.gen_range(min_gap..=2 * min_gap);
            t += gap;
            if t > horizon.saturating_sub(1) {
                break;
            }
            let next = pick(&mut rng, Some(last));
            segments.push(CostSegment::new(
                t,
                target_pool[next].clone(),
                cost.p,
                cost.q,
                cost.r,
            ));
            last = next;
        }
    }

    let schedule = CostSchedule::new(segments, horizon)?;
    let admissible = check_dwell(&schedule, spec).ok;
    Ok(GeneratedSchedule {
        schedule,
        admissible,
    })
}

// ---------------------------------------------------------------------------
// JSON interface
// ---------------------------------------------------------------------------

/// `eta` entry in the JSON schedule: explicit vector or "solve" to take the
/// input from the steady-state equation of the plant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSpec {
    Solve(String),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub start: usize,
    pub theta: Vec<f64>,
    pub eta: EtaSpec,
    pub p: u8,
    pub q: f64,
    pub r: f64,
}

/// Serialized form of a schedule:
/// `{"horizon": T, "segments": [{"start", "theta", "eta"|"solve", "p", "q", "r"}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub horizon: usize,
    pub segments: Vec<SegmentSpec>,
}

impl ScheduleSpec {
    /// Resolves the spec against a plant: "solve" entries are filled from the
    /// steady-state equation and every pair is validated.
    pub fn resolve(&self, system: &SystemModel) -> Result<CostSchedule> {
        let mut segments = Vec::with_capacity(self.segments.len());
        for (i, seg) in self.segments.iter().enumerate() {
            let theta = DVector::from_vec(seg.theta.clone());
            let eta = match &seg.eta {
                EtaSpec::Explicit(v) => DVector::from_vec(v.clone()),
                EtaSpec::Solve(word) => {
                    if word != "solve" {
                        return Err(Error::InvalidSchedule(format!(
                            "segment {i}: eta must be a vector or \"solve\", got \"{word}\""
                        )));
                    }
                    system
                        .solve_steady_input(&theta, STEADY_STATE_TOL)
                        .ok_or_else(|| {
                            Error::InvalidSchedule(format!(
                                "segment {i}: steady input not solvable for declared theta"
                            ))
                        })?
                }
            };
            let p = match seg.p {
                1 => NormPower::One,
                2 => NormPower::Two,
                other => {
                    return Err(Error::InvalidSchedule(format!(
                        "segment {i}: p must be 1 or 2, got {other}"
                    )))
                }
            };
            if seg.q <= 0.0 || seg.r <= 0.0 {
                return Err(Error::InvalidSchedule(format!(
                    "segment {i}: weights must be positive"
                )));
            }
            segments.push(CostSegment {
                start: seg.start,
                steady: SteadyStatePair::new(eta, theta),
                p,
                q: seg.q,
                r: seg.r,
            });
        }
        let schedule = CostSchedule::new(segments, self.horizon)?;
        schedule.validate_against(system, STEADY_STATE_TOL)?;
        Ok(schedule)
    }

    pub fn from_schedule(schedule: &CostSchedule) -> Self {
        ScheduleSpec {
            horizon: schedule.horizon(),
            segments: schedule
                .segments()
                .iter()
                .map(|s| SegmentSpec {
                    start: s.start,
                    theta: s.steady.theta.iter().copied().collect(),
                    eta: EtaSpec::Explicit(s.steady.eta.iter().copied().collect()),
                    p: match s.p {
                        NormPower::One => 1,
                        NormPower::Two => 2,
                    },
                    q: s.q,
                    r: s.r,
                })
                .collect(),
        }
    }
}
