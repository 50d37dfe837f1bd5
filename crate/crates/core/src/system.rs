//! Discrete-time plants `x_{t+1} = f(x_t, u_t)` and steady-state machinery.
//!
//! Three model kinds are supported: the integrator (`x + u`, requires
//! n = m), linear models (`Ax + Bu`), and an arbitrary user-supplied
//! transition map. A steady-state pair `(eta, theta)` is a fixed point
//! `theta = f(theta, eta)`; the cost schedule declares one per segment
//! and the plant validates it.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default absolute tolerance on the fixed-point residual
/// `||f(theta, eta) - theta||` when validating steady-state pairs.
pub const STEADY_STATE_TOL: f64 = 1e-9;

/// Transition map of a user-supplied plant.
pub type CustomMap = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;

#[derive(Clone)]
pub enum SystemKind {
    /// `f(x, u) = x + u`; state and input dimensions coincide.
    Integrator,
    /// `f(x, u) = A x + B u`.
    Linear { a: DMatrix<f64>, b: DMatrix<f64> },
    /// Arbitrary transition map.
    Custom(CustomMap),
}

impl fmt::Debug for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemKind::Integrator => write!(f, "Integrator"),
            SystemKind::Linear { a, b } => f
                .debug_struct("Linear")
                .field("a", a)
                .field("b", b)
                .finish(),
            SystemKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A discrete-time plant with fixed state dimension `n` and input dimension `m`.
#[derive(Debug, Clone)]
pub struct SystemModel {
    kind: SystemKind,
    n: usize,
    m: usize,
}

impl SystemModel {
    pub fn integrator(n: usize) -> Self {
        assert!(n > 0, "state dimension must be positive");
        SystemModel {
            kind: SystemKind::Integrator,
            n,
            m: n,
        }
    }

    /// Builds a linear model, checking that `A` is n-by-n and `B` is n-by-m.
    pub fn linear(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "A columns",
                expected: n,
                got: a.ncols(),
            });
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch {
                what: "B rows",
                expected: n,
                got: b.nrows(),
            });
        }
        let m = b.ncols();
        if n == 0 || m == 0 {
            return Err(Error::DimensionMismatch {
                what: "state/input dimension",
                expected: 1,
                got: 0,
            });
        }
        Ok(SystemModel {
            kind: SystemKind::Linear { a, b },
            n,
            m,
        })
    }

    /// Convenience constructor for scalar plants `x' = a x + b u`.
    pub fn scalar_linear(a: f64, b: f64) -> Self {
        SystemModel::linear(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
        )
        .expect("1x1 matrices are always consistent")
    }

    pub fn custom(n: usize, m: usize, f: CustomMap) -> Self {
        assert!(n > 0 && m > 0, "dimensions must be positive");
        SystemModel {
            kind: SystemKind::Custom(f),
            n,
            m,
        }
    }

    pub fn kind(&self) -> &SystemKind {
        &self.kind
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    fn check_dims(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "state",
                expected: self.n,
                got: x.len(),
            });
        }
        if u.len() != self.m {
            return Err(Error::DimensionMismatch {
                what: "input",
                expected: self.m,
                got: u.len(),
            });
        }
        Ok(())
    }

    /// One transition of the plant: returns `f(x, u)`.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dims(x, u)?;
        Ok(match &self.kind {
            SystemKind::Integrator => x + u,
            SystemKind::Linear { a, b } => a * x + b * u,
            SystemKind::Custom(f) => {
                let next = f(x, u);
                if next.len() != self.n {
                    return Err(Error::DimensionMismatch {
                        what: "custom map output",
                        expected: self.n,
                        got: next.len(),
                    });
                }
                next
            }
        })
    }

    /// Solves for an input `eta` with `f(theta, eta) = theta`, when the model
    /// structure allows it. Integrator: `eta = 0`. Linear: least-squares
    /// solution of `B eta = (I - A) theta`, accepted only if the residual is
    /// within `tol`. Custom maps cannot be inverted; returns `None`.
    pub fn solve_steady_input(&self, theta: &DVector<f64>, tol: f64) -> Option<DVector<f64>> {
        if theta.len() != self.n {
            return None;
        }
        match &self.kind {
            SystemKind::Integrator => Some(DVector::zeros(self.m)),
            SystemKind::Linear { a, b } => {
                let rhs = theta - a * theta;
                let svd = b.clone().svd(true, true);
                let eta = svd.solve(&rhs, 1e-12).ok()?;
                let residual = (b * &eta - &rhs).norm();
                (residual <= tol.max(1e-12)).then_some(eta)
            }
            SystemKind::Custom(_) => None,
        }
    }
}

/// A declared steady-state pair `(eta, theta)` with `theta = f(theta, eta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStatePair {
    pub eta: DVector<f64>,
    pub theta: DVector<f64>,
}

impl SteadyStatePair {
    pub fn new(eta: DVector<f64>, theta: DVector<f64>) -> Self {
        SteadyStatePair { eta, theta }
    }

    /// Scalar convenience constructor.
    pub fn scalar(eta: f64, theta: f64) -> Self {
        SteadyStatePair {
            eta: DVector::from_element(1, eta),
            theta: DVector::from_element(1, theta),
        }
    }
}

/// True iff `||f(theta, eta) - theta|| <= tol`.
pub fn validate_steady_state(
    system: &SystemModel,
    pair: &SteadyStatePair,
    tol: f64,
) -> Result<bool> {
    let next = system.step(&pair.theta, &pair.eta)?;
    Ok((next - &pair.theta).norm() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vec1(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    #[test]
    fn integrator_step() {
        let sys = SystemModel::integrator(1);
        let next = sys.step(&vec1(1.0), &vec1(-0.5)).unwrap();
        assert_eq!(next[0], 0.5);
    }

    #[test]
    fn scalar_linear_step() {
        let sys = SystemModel::scalar_linear(0.5, 1.0);
        let next = sys.step(&vec1(2.0), &vec1(0.0)).unwrap();
        assert_eq!(next[0], 1.0);
    }

    #[test]
    fn double_integrator_chain_step() {
        // A = [[0,1],[0,0]], B = [[0],[1]], x = (1,2), u = 3 -> (2,3)
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let sys = SystemModel::linear(a, b).unwrap();
        let x = DVector::from_row_slice(&[1.0, 2.0]);
        let next = sys.step(&x, &vec1(3.0)).unwrap();
        assert_eq!(next.as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn step_reports_offending_dimension() {
        let sys = SystemModel::integrator(2);
        let err = sys
            .step(&DVector::zeros(2), &DVector::zeros(3))
            .unwrap_err();
        match err {
            Error::DimensionMismatch {
                what,
                expected,
                got,
            } => {
                assert_eq!(what, "input");
                assert_eq!((expected, got), (2, 3));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn steady_state_validation() {
        let sys = SystemModel::integrator(1);
        assert!(validate_steady_state(&sys, &SteadyStatePair::scalar(0.0, 5.0), 0.0).unwrap());
        assert!(!validate_steady_state(&sys, &SteadyStatePair::scalar(0.1, 5.0), 1e-9).unwrap());

        let lin = SystemModel::scalar_linear(0.5, 1.0);
        assert!(validate_steady_state(&lin, &SteadyStatePair::scalar(2.5, 5.0), 1e-12).unwrap());
    }

    #[test]
    fn steady_input_solve() {
        let lin = SystemModel::scalar_linear(0.5, 1.0);
        let eta = lin.solve_steady_input(&vec1(5.0), 1e-9).unwrap();
        assert_relative_eq!(eta[0], 2.5, max_relative = 1e-12);

        let integrator = SystemModel::integrator(3);
        let eta = integrator
            .solve_steady_input(&DVector::from_element(3, 7.0), 0.0)
            .unwrap();
        assert_eq!(eta, DVector::zeros(3));
    }

    #[test]
    fn unsolvable_steady_input_is_none() {
        // B = 0: no input can hold theta != 0 at a != 1.
        let sys = SystemModel::linear(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 0.0),
        )
        .unwrap();
        assert!(sys.solve_steady_input(&vec1(5.0), 1e-9).is_none());
    }

    #[test]
    fn custom_map_runs_and_checks_output_dim() {
        let f: CustomMap = Arc::new(|x: &DVector<f64>, u: &DVector<f64>| x * 0.9 + u);
        let sys = SystemModel::custom(1, 1, f);
        let next = sys.step(&vec1(1.0), &vec1(0.1)).unwrap();
        assert_relative_eq!(next[0], 1.0, max_relative = 1e-15);
    }
}
