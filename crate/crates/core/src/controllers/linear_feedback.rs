//! Static feedback around the most recent steady pair:
//! `u_t = K (x_t - theta_{t-1}) + eta_{t-1}`.
//!
//! For a Schur-stable closed loop `A + BK` the tracking error decays
//! geometrically; `spectral_envelope` fits a certified pointwise envelope
//! `||(A+BK)^t|| <= c lambda^t`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::system::{SteadyStatePair, SystemKind, SystemModel};

use super::{Controller, ControllerMeta, DeclaredRate, PreferredPrior, RateFamily, Revealed};

/// Largest singular value (induced 2-norm).
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |acc, &s| acc.max(s))
}

/// Largest eigenvalue magnitude.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.map(|x| nalgebra::Complex::new(x, 0.0))
        .eigenvalues()
        .map(|eigs| eigs.iter().fold(0.0f64, |acc, e| acc.max(e.norm())))
        .unwrap_or_else(|| operator_norm(m))
}

/// Fits `(c, lambda)` with `||A^t|| <= c lambda^t` for all `0 <= t <= t_max`.
///
/// When the power norms are already dominated by `rho^t` (normal matrices),
/// returns `(1, rho)` exactly. Otherwise uses `lambda = rho + margin` with
/// `margin = min(0.05, (1 - rho)/2)` and `c` the maximal ratio, validated
/// pointwise. Errors if the spectral radius is not strictly below one.
pub fn spectral_envelope(a_cl: &DMatrix<f64>, t_max: usize) -> Result<(f64, f64)> {
    let rho = spectral_radius(a_cl);
    if rho >= 1.0 {
        return Err(Error::NotSchurStable { rho });
    }
    let margin = 0.05f64.min((1.0 - rho) / 2.0);

    let norms: Vec<f64> = {
        let mut out = Vec::with_capacity(t_max + 1);
        let n = a_cl.nrows();
        let mut power = DMatrix::<f64>::identity(n, n);
        out.push(1.0);
        for _ in 1..=t_max {
            power = &power * a_cl;
            out.push(operator_norm(&power));
        }
        out
    };

    if rho > 1e-14 {
        let max_ratio = norms
            .iter()
            .enumerate()
            .map(|(t, &n)| n / rho.powi(t as i32))
            .fold(0.0f64, f64::max);
        if max_ratio <= 1.0 + 1e-9 {
            return Ok((1.0, rho));
        }
    }

    let lambda = rho + margin;
    let c = norms
        .iter()
        .enumerate()
        .map(|(t, &n)| n / lambda.powi(t as i32))
        .fold(1.0f64, f64::max);
    Ok((c, lambda))
}

/// Linear state feedback tracking the revealed steady pair.
#[derive(Debug, Clone)]
pub struct LinearFeedback {
    k: DMatrix<f64>,
    k_norm: f64,
    closed_loop: Option<DMatrix<f64>>,
    warnings: Vec<String>,
}

impl LinearFeedback {
    pub fn new(k: DMatrix<f64>, system: &SystemModel) -> Result<Self> {
        if k.nrows() != system.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "K rows",
                expected: system.input_dim(),
                got: k.nrows(),
            });
        }
        if k.ncols() != system.state_dim() {
            return Err(Error::DimensionMismatch {
                what: "K columns",
                expected: system.state_dim(),
                got: k.ncols(),
            });
        }
        let mut warnings = Vec::new();
        let closed_loop = match system.kind() {
            SystemKind::Linear { a, b } => {
                let a_cl = a + b * &k;
                let rho = spectral_radius(&a_cl);
                if rho >= 1.0 {
                    warnings.push(format!(
                        "closed-loop spectral radius {rho:.6} >= 1: stability not guaranteed"
                    ));
                }
                Some(a_cl)
            }
            _ => {
                warnings.push("plant is not linear: no closed-loop certificate".into());
                None
            }
        };
        let k_norm = operator_norm(&k);
        Ok(LinearFeedback {
            k,
            k_norm,
            closed_loop,
            warnings,
        })
    }

    pub fn from_config(cfg: &serde_json::Value, system: &SystemModel) -> Result<Self> {
        let rows = cfg.get("k").and_then(|v| v.as_array()).ok_or_else(|| {
            Error::ControllerConfig("linear-feedback needs a \"k\" matrix".into())
        })?;
        let mut data = Vec::new();
        let mut ncols = None;
        for row in rows {
            let row = row
                .as_array()
                .ok_or_else(|| Error::ControllerConfig("\"k\" must be an array of rows".into()))?;
            let vals: Vec<f64> = row
                .iter()
                .map(|v| {
                    v.as_f64().ok_or_else(|| {
                        Error::ControllerConfig("\"k\" entries must be numbers".into())
                    })
                })
                .collect::<Result<_>>()?;
            match ncols {
                None => ncols = Some(vals.len()),
                Some(c) if c != vals.len() => {
                    return Err(Error::ControllerConfig("ragged \"k\" matrix".into()))
                }
                _ => {}
            }
            data.extend(vals);
        }
        let ncols = ncols.unwrap_or(0);
        if ncols == 0 {
            return Err(Error::ControllerConfig("empty \"k\" matrix".into()));
        }
        let k = DMatrix::from_row_slice(data.len() / ncols, ncols, &data);
        LinearFeedback::new(k, system)
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn closed_loop(&self) -> Option<&DMatrix<f64>> {
        self.closed_loop.as_ref()
    }
}

impl Controller for LinearFeedback {
    fn meta(&self) -> ControllerMeta {
        let rate = self.closed_loop.as_ref().and_then(|a_cl| {
            spectral_envelope(a_cl, 200)
                .ok()
                .map(|(c, lambda)| DeclaredRate {
                    k: c,
                    family: RateFamily::Geometric(lambda),
                })
        });
        ControllerMeta {
            name: "linear-feedback".into(),
            rate,
            input_bound: Some((self.k_norm, 0.0)),
            preferred_prior: PreferredPrior::CostPair,
            warnings: self.warnings.clone(),
        }
    }

    fn begin(&mut self, _x0: &DVector<f64>, _prior: &SteadyStatePair) {}

    fn control(
        &mut self,
        _t: usize,
        x: &DVector<f64>,
        revealed: Revealed<'_>,
    ) -> std::result::Result<DVector<f64>, String> {
        let pair = revealed.steady();
        Ok(&self.k * (x - &pair.theta) + &pair.eta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_envelope_is_exact() {
        let a = DMatrix::from_element(1, 1, 0.2);
        let (c, lambda) = spectral_envelope(&a, 100).unwrap();
        assert_eq!(c, 1.0);
        assert_eq!(lambda, 0.2);
    }

    #[test]
    fn jordan_block_needs_margin() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 0.5]);
        let t_max = 200;
        let (c, lambda) = spectral_envelope(&a, t_max).unwrap();
        assert!(c > 1.0);
        assert_relative_eq!(lambda, 0.55, max_relative = 1e-12);
        // pointwise validity
        let mut power = DMatrix::<f64>::identity(2, 2);
        for t in 0..=t_max {
            assert!(
                operator_norm(&power) <= c * lambda.powi(t as i32) + 1e-12,
                "envelope violated at t = {t}"
            );
            power = &power * &a;
        }
    }

    #[test]
    fn nilpotent_envelope() {
        let a = DMatrix::zeros(2, 2);
        let (c, lambda) = spectral_envelope(&a, 50).unwrap();
        assert_eq!(c, 1.0);
        assert_relative_eq!(lambda, 0.05);
    }

    #[test]
    fn unstable_matrix_is_rejected() {
        let a = DMatrix::from_element(1, 1, 1.0);
        assert!(matches!(
            spectral_envelope(&a, 10),
            Err(Error::NotSchurStable { .. })
        ));
    }

    #[test]
    fn steady_state_is_preserved() {
        // a = 0.5, b = 1, K = -0.3, theta = 5 (eta = 2.5): from x = 5 the loop stays put
        let sys = SystemModel::scalar_linear(0.5, 1.0);
        let mut ctrl = LinearFeedback::new(DMatrix::from_element(1, 1, -0.3), &sys).unwrap();
        let pair = SteadyStatePair::scalar(2.5, 5.0);
        let x = DVector::from_element(1, 5.0);
        ctrl.begin(&x, &pair);
        let u = ctrl.control(0, &x, Revealed::Prior(&pair)).unwrap();
        assert_eq!(u[0], 2.5);
        let next = sys.step(&x, &u).unwrap();
        assert_eq!(next[0], 5.0);
    }

    #[test]
    fn unstable_gain_sets_warning() {
        let sys = SystemModel::scalar_linear(0.5, 1.0);
        let ctrl = LinearFeedback::new(DMatrix::from_element(1, 1, 0.6), &sys).unwrap();
        assert!(!ctrl.meta().warnings.is_empty());
    }

    #[test]
    fn gain_dimension_check() {
        let sys = SystemModel::scalar_linear(0.5, 1.0);
        assert!(LinearFeedback::new(DMatrix::zeros(2, 1), &sys).is_err());
    }
}
