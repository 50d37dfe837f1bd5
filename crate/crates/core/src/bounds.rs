//! Closed-form constants of the regret bound and the brute-force oracles
//! that validate them.
//!
//! A switch sequence `0 = t_0 < t_1 < ... < t_N` is treated as admissible for
//! the enumerations when `t_i - t_j > phi * (i - j - N0)` for every pair
//! `j < i` (every window of the sequence satisfies the dwell inequality in
//! re-based form). This is the form of the dwell inequality the bound
//! derivation relies on, and it admits a superset of the sequences a
//! literally admissible schedule can produce, so maxima over it are valid
//! upper bounds.
//!
//! With `delta` the maximal window product over `N'' in [N0+1, 2N0+1]`, the
//! sum-product bound is
//! `P = (1 - k^{2 N0 + 1})/(1 - k) + (N0 + 1)/(1 - delta)` for `k > 1` and
//! `P = (2 N0 + 1) + (N0 + 1)/(1 - delta)` for `k = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{RateCertificate, SigmaCurve};

/// `C_{N0} = sum_{i=0}^{N0} k^i`.
pub fn geometric_prefix_sum(k: f64, n0: usize) -> f64 {
    (0..=n0).map(|i| k.powi(i as i32)).sum()
}

/// Tail-sum bound `M >= lim sum_{t=0}^{T} sigma(t)`.
///
/// Closed forms for the known families; for empirical tables the tail is
/// certified only when the table reaches exactly zero (the tail is then zero
/// by monotonicity) or when a geometric ratio `r < 1` validates on the
/// trailing half of the table. The 1/t family errors: no bound exists.
pub fn sigma_sum(cert: &RateCertificate, tail_tol: f64) -> Result<f64> {
    match &cert.curve {
        SigmaCurve::Geometric(lambda) => {
            if !(0.0..1.0).contains(lambda) {
                return Err(Error::InvalidLambda(*lambda));
            }
            Ok(1.0 / (1.0 - lambda))
        }
        SigmaCurve::InverseSquare => Ok(1.0 + std::f64::consts::PI.powi(2) / 6.0),
        SigmaCurve::InverseLinear => Err(Error::NotSummable),
        SigmaCurve::Empirical(table) => {
            if table.is_empty() {
                return Err(Error::TailUncertified("empty table".into()));
            }
            let table_sum: f64 = table.iter().sum();
            let last = *table.last().expect("nonempty");
            if last == 0.0 {
                return Ok(table_sum);
            }
            if last > tail_tol {
                return Err(Error::TailUncertified(format!(
                    "sigma(t_max) = {last:.3e} above the tail tolerance {tail_tol:.3e}"
                )));
            }
            // geometric envelope over the trailing half
            let half = table.len() / 2;
            let mut ratio: f64 = 0.0;
            let mut valid = table.len() >= 8;
            for t in half.max(1)..table.len() {
                let prev = table[t - 1];
                if prev <= 0.0 {
                    valid = false;
                    break;
                }
                ratio = ratio.max(table[t] / prev);
            }
            if valid && ratio < 1.0 {
                // envelope-based tail; certified relative to the fitted ratio
                return Ok(table_sum + last * ratio / (1.0 - ratio));
            }
            Err(Error::TailUncertified(format!(
                "no geometric decay on the trailing table (ratio {ratio:.4})"
            )))
        }
    }
}

/// Smallest integer strictly greater than `x`, clamped at zero.
fn int_gt(x: f64) -> usize {
    if x < 0.0 {
        0
    } else {
        x.floor() as usize + 1
    }
}

/// Minimal feasible next switch time after prefix `times` (next index
/// `times.len()`), under the window constraints.
fn min_next_time(times: &[usize], phi: f64, n0: usize) -> usize {
    let i = times.len(); // index of the next switch
    let mut lo = times[i - 1] + 1;
    for (j, &tj) in times.iter().enumerate() {
        if i - j > n0 {
            let need = tj + int_gt(phi * ((i - j - n0) as f64));
            lo = lo.max(need);
        }
    }
    lo
}

fn window_feasible(times: &[usize], phi: f64, n0: usize) -> bool {
    let i = times.len() - 1;
    let ti = times[i];
    for (j, &tj) in times.iter().enumerate().take(i) {
        if i - j > n0 && (ti - tj) as f64 <= phi * ((i - j - n0) as f64) {
            return false;
        }
    }
    true
}

/// Result of the window-product maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowContraction {
    pub delta: f64,
    /// Switch times achieving the maximum (including t_0 = 0).
    pub witness: Vec<usize>,
    /// Window length the maximum was attained at.
    pub window_len: usize,
}

/// `delta = max over N'' in [N0+1, 2N0+1] and admissible switch sequences of
/// prod_{j=1}^{N''} k sigma(t_j - t_{j-1})`, by exhaustive enumeration up to
/// the horizon cap. Errors when `delta >= 1` (the dwell time is too small
/// for the sum-product machinery).
pub fn window_contraction(
    k: f64,
    cert: &RateCertificate,
    n0: usize,
    phi: f64,
    horizon_cap: usize,
) -> Result<WindowContraction> {
    let mut best = WindowContraction {
        delta: 0.0,
        witness: vec![0],
        window_len: 0,
    };
    for window_len in (n0 + 1)..=(2 * n0 + 1) {
        let mut times = vec![0usize];
        max_product_dfs(
            k,
            cert,
            n0,
            phi,
            window_len,
            horizon_cap,
            &mut times,
            1.0,
            &mut best,
            window_len,
        );
    }
    if best.window_len == 0 {
        return Err(Error::DeltaTooLarge {
            delta: f64::INFINITY,
            phi,
            witness: Vec::new(),
        });
    }
    if best.delta >= 1.0 {
        return Err(Error::DeltaTooLarge {
            delta: best.delta,
            phi,
            witness: best.witness,
        });
    }
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn max_product_dfs(
    k: f64,
    cert: &RateCertificate,
    n0: usize,
    phi: f64,
    window_len: usize,
    cap: usize,
    times: &mut Vec<usize>,
    product: f64,
    best: &mut WindowContraction,
    target_n_pp: usize,
) {
    if times.len() == window_len + 1 {
        if best.window_len == 0 || product > best.delta {
            best.delta = product;
            best.witness = times.clone();
            best.window_len = target_n_pp;
        }
        return;
    }
    let remaining = window_len + 1 - times.len();
    let sigma_1 = cert.sigma_at(1);
    let lo = min_next_time(times, phi, n0);
    for t_next in lo..=cap {
        let gap = t_next - times.last().expect("prefix nonempty");
        let factor = k * cert.sigma_at(gap);
        let optimistic = product * factor * (k * sigma_1).powi(remaining as i32 - 1);
        if best.window_len != 0 && optimistic <= best.delta {
            // sigma is nonincreasing: larger gaps only lower the bound
            break;
        }
        times.push(t_next);
        debug_assert!(window_feasible(times, phi, n0));
        max_product_dfs(
            k,
            cert,
            n0,
            phi,
            window_len,
            cap,
            times,
            product * factor,
            best,
            target_n_pp,
        );
        times.pop();
    }
}

/// Smallest dwell time on the candidate grid for which `window_contraction` certifies
/// a contraction `delta < 1`.
pub fn find_min_dwell(
    k: f64,
    cert: &RateCertificate,
    n0: usize,
    phi_grid: &[f64],
    horizon_cap: usize,
) -> Option<f64> {
    phi_grid
        .iter()
        .copied()
        .find(|&phi| window_contraction(k, cert, n0, phi, horizon_cap).is_ok())
}

/// Cap on the sum of window products. `k = 1` uses the
/// degenerate form of the geometric prefix.
pub fn sum_product_cap(k: f64, delta: f64, n0: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::DeltaTooLarge {
            delta,
            phi: f64::NAN,
            witness: Vec::new(),
        });
    }
    let first = if k == 1.0 {
        (2 * n0 + 1) as f64
    } else {
        (1.0 - k.powi(2 * n0 as i32 + 1)) / (1.0 - k)
    };
    Ok(first + (n0 + 1) as f64 / (1.0 - delta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumProductMax {
    pub value: f64,
    /// False when the horizon cap cut a branch that could still have beaten
    /// the incumbent; the value is then only a lower bound on the true max.
    pub exact: bool,
    pub witness: Vec<usize>,
}

/// Exact maximum of `sum_{i=0}^{N'} prod_{j=1}^{i} k sigma(t_j - t_{j-1})`
/// over admissible switch sequences with `t_{N'} <= horizon_cap`, by
/// depth-first enumeration with sound pruning.
pub fn brute_force_sum_product(
    k: f64,
    cert: &RateCertificate,
    n0: usize,
    phi: f64,
    n_prime: usize,
    horizon_cap: usize,
) -> SumProductMax {
    let mut best = SumProductMax {
        value: 1.0, // the i = 0 term is the empty product
        exact: true,
        witness: vec![0],
    };
    let mut times = vec![0usize];
    sum_product_dfs(
        k,
        cert,
        n0,
        phi,
        n_prime,
        horizon_cap,
        &mut times,
        1.0,
        1.0,
        &mut best,
    );
    best
}

#[allow(clippy::too_many_arguments)]
fn sum_product_dfs(
    k: f64,
    cert: &RateCertificate,
    n0: usize,
    phi: f64,
    n_prime: usize,
    cap: usize,
    times: &mut Vec<usize>,
    product: f64,
    sum: f64,
    best: &mut SumProductMax,
) {
    if sum > best.value {
        best.value = sum;
        best.witness = times.clone();
    }
    if times.len() == n_prime + 1 {
        return;
    }
    let remaining = n_prime + 1 - times.len();
    let sigma_1 = cert.sigma_at(1);
    // future terms after choosing the next factor f: f * (1 + y + ... + y^{rem-1})
    let future_mult: f64 = (0..remaining as i32).map(|d| (k * sigma_1).powi(d)).sum();
    let lo = min_next_time(times, phi, n0);
    let mut t_next = lo;
    loop {
        if t_next > cap {
            // could a farther switch still beat the incumbent?
            let factor = k * cert.sigma_at(t_next - times.last().expect("nonempty"));
            if sum + product * factor * future_mult > best.value {
                best.exact = false;
            }
            break;
        }
        let gap = t_next - times.last().expect("prefix nonempty");
        let factor = k * cert.sigma_at(gap);
        let optimistic = sum + product * factor * future_mult;
        if optimistic <= best.value {
            break;
        }
        times.push(t_next);
        sum_product_dfs(
            k,
            cert,
            n0,
            phi,
            n_prime,
            cap,
            times,
            product * factor,
            sum + product * factor,
            best,
        );
        times.pop();
        t_next += 1;
    }
}

/// Minimal average dwell time for an exponential envelope `c lambda^t` with
/// headroom `phi0`: `-ln(c)/ln(lambda) + phi0`.
pub fn min_dwell_exponential(c: f64, lambda: f64, phi0: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidLambda(lambda));
    }
    assert!(c >= 1.0, "envelope constant must be at least one");
    assert!(phi0 > 0.0, "phi0 must be positive");
    Ok(-c.ln() / lambda.ln() + phi0)
}

/// Everything the final bound assembly needs.
#[derive(Debug, Clone, Copy)]
pub struct BoundInputs {
    /// Lipschitz constant of the cost family on the relevant region.
    pub lipschitz: f64,
    /// Rate certificate constant k.
    pub k: f64,
    /// Tail-sum bound M.
    pub m_sigma: f64,
    /// Chatter bound.
    pub n0: usize,
    /// Window contraction delta.
    pub delta: f64,
    /// Sum-product constant P.
    pub p_cap: f64,
    /// Input-bound constants.
    pub k_u: f64,
    pub k_zeta: f64,
    /// `||x_0 - theta_0||` and `||x_1 - theta_0||`.
    pub x0_dist: f64,
    pub x1_dist: f64,
    /// Path-length split sums.
    pub theta_sum: f64,
    pub eta_sum: f64,
}

/// All constants of the regret bound, every intermediate retained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(rename = "M")]
    pub m: f64,
    pub delta: f64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "C_N0")]
    pub c_n0: f64,
    #[serde(rename = "C_hat")]
    pub c_hat: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "C_eta")]
    pub c_eta: f64,
    #[serde(rename = "C_theta")]
    pub c_theta: f64,
    #[serde(rename = "C_const")]
    pub c_const: f64,
    pub l: f64,
    pub sum_x_bound: f64,
    pub sum_u_bound: f64,
    pub total: f64,
}

/// Assembles the bound exactly as the two proof displays dictate:
///
/// `sum_x <= C_0 + (1 + C_hat) * S_theta`
/// `sum_u <= k_u C_0 + (1 + k_zeta) * S_eta + (k_u (2 + C_hat) + k_zeta) * S_theta`
/// `total = l * (sum_x bound + sum_u bound)`
///
/// with `C_hat = k M max(C_{N0}, P)` and
/// `C_0 = ||x_0 - theta_0|| + C_hat ||x_1 - theta_0||`.
pub fn assemble_regret_bound(inp: &BoundInputs) -> BoundReport {
    let c_n0 = geometric_prefix_sum(inp.k, inp.n0);
    let c_hat = inp.k * inp.m_sigma * c_n0.max(inp.p_cap);
    let c0 = inp.x0_dist + c_hat * inp.x1_dist;
    let sum_x_bound = c0 + (1.0 + c_hat) * inp.theta_sum;
    let sum_u_bound = inp.k_u * c0
        + (1.0 + inp.k_zeta) * inp.eta_sum
        + (inp.k_u * (2.0 + c_hat) + inp.k_zeta) * inp.theta_sum;
    let l = inp.lipschitz;
    let c_eta = l * (1.0 + inp.k_zeta);
    let c_theta = l * ((1.0 + c_hat) + inp.k_u * (2.0 + c_hat) + inp.k_zeta);
    let c_const = l * (1.0 + inp.k_u) * c0;
    let total = l * (sum_x_bound + sum_u_bound);
    BoundReport {
        m: inp.m_sigma,
        delta: inp.delta,
        p: inp.p_cap,
        c_n0,
        c_hat,
        c0,
        c_eta,
        c_theta,
        c_const,
        l,
        sum_x_bound,
        sum_u_bound,
        total,
    }
}
