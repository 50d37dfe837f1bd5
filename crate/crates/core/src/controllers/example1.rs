//! The two integrator-style controllers: a baseline achieving
//! `||x_t - theta|| = (1/t) ||x_0 - theta||` under a constant cost, and an
//! improved variant achieving the square of that rate.
//!
//! Both share the same protocol for the step counter tau: tau = 0 at t = 0,
//! incremented every step, reset to one when the revealed cost segment
//! differs from the last one seen. The asymmetry (initialized at zero, reset
//! to one) is kept as is; it is what produces the exact 1/t and 1/t^2 laws.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::system::{SteadyStatePair, SystemModel};

use super::{Controller, ControllerMeta, DeclaredRate, PreferredPrior, RateFamily, Revealed};

/// Step counter with segment-identity reset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TauCounter {
    tau: usize,
    last_seen: Option<usize>,
}

impl TauCounter {
    pub fn new() -> Self {
        TauCounter::default()
    }

    /// Advances the counter for the information revealed at time `t` and
    /// returns the tau to use for this step.
    pub fn observe(&mut self, t: usize, revealed: &Revealed<'_>) -> usize {
        match revealed {
            Revealed::Prior(_) => {
                debug_assert_eq!(t, 0);
                self.tau = 0;
                self.last_seen = None;
            }
            Revealed::Segment { index, .. } => {
                if self.last_seen == Some(*index) {
                    self.tau += 1;
                } else {
                    self.tau = 1;
                    self.last_seen = Some(*index);
                }
            }
        }
        self.tau
    }

    pub fn tau(&self) -> usize {
        self.tau
    }
}

fn require_square(system: &SystemModel) -> Result<()> {
    if system.state_dim() != system.input_dim() {
        return Err(Error::ControllerConfig(format!(
            "integrator-style controller needs n = m, got n = {}, m = {}",
            system.state_dim(),
            system.input_dim()
        )));
    }
    Ok(())
}

/// `u_t = -(1/(tau+1)) x_t + (1/(tau+1)) theta_{t-1}`.
#[derive(Debug, Clone)]
pub struct Example1Baseline {
    counter: TauCounter,
}

impl Example1Baseline {
    pub fn new(system: &SystemModel) -> Result<Self> {
        require_square(system)?;
        Ok(Example1Baseline {
            counter: TauCounter::new(),
        })
    }

    pub fn gain(tau: usize) -> f64 {
        1.0 / (tau as f64 + 1.0)
    }
}

impl Controller for Example1Baseline {
    fn meta(&self) -> ControllerMeta {
        ControllerMeta {
            name: "example1-baseline".into(),
            rate: Some(DeclaredRate {
                k: 1.0,
                family: RateFamily::InverseLinear,
            }),
            input_bound: Some((1.0, 0.0)),
            preferred_prior: PreferredPrior::StateAsTheta,
            warnings: Vec::new(),
        }
    }

    fn begin(&mut self, _x0: &DVector<f64>, _prior: &SteadyStatePair) {
        self.counter = TauCounter::new();
    }

    fn control(
        &mut self,
        t: usize,
        x: &DVector<f64>,
        revealed: Revealed<'_>,
    ) -> std::result::Result<DVector<f64>, String> {
        let tau = self.counter.observe(t, &revealed);
        let theta = &revealed.steady().theta;
        let g = Self::gain(tau);
        Ok(g * (theta - x))
    }
}

/// `u_t = -((2 tau + 1)/(tau+1)^2) x_t + ((2 tau + 1)/(tau+1)^2) theta_{t-1}`.
#[derive(Debug, Clone)]
pub struct Example1Improved {
    counter: TauCounter,
}

impl Example1Improved {
    pub fn new(system: &SystemModel) -> Result<Self> {
        require_square(system)?;
        Ok(Example1Improved {
            counter: TauCounter::new(),
        })
    }

    pub fn gain(tau: usize) -> f64 {
        let tp1 = tau as f64 + 1.0;
        (2.0 * tau as f64 + 1.0) / (tp1 * tp1)
    }
}

impl Controller for Example1Improved {
    fn meta(&self) -> ControllerMeta {
        ControllerMeta {
            name: "example1-improved".into(),
            rate: Some(DeclaredRate {
                k: 1.0,
                family: RateFamily::InverseSquare,
            }),
            input_bound: Some((1.0, 0.0)),
            preferred_prior: PreferredPrior::StateAsTheta,
            warnings: Vec::new(),
        }
    }

    fn begin(&mut self, _x0: &DVector<f64>, _prior: &SteadyStatePair) {
        self.counter = TauCounter::new();
    }

    fn control(
        &mut self,
        t: usize,
        x: &DVector<f64>,
        revealed: Revealed<'_>,
    ) -> std::result::Result<DVector<f64>, String> {
        let tau = self.counter.observe(t, &revealed);
        let theta = &revealed.steady().theta;
        let g = Self::gain(tau);
        Ok(g * (theta - x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{CostSegment, NormPower};

    #[test]
    fn gains_match_formula() {
        assert_eq!(Example1Improved::gain(0), 1.0);
        assert_eq!(Example1Improved::gain(1), 0.75);
        assert_eq!(Example1Improved::gain(3), 7.0 / 16.0);
        assert_eq!(Example1Baseline::gain(0), 1.0);
        assert_eq!(Example1Baseline::gain(1), 0.5);
    }

    #[test]
    fn baseline_first_steps() {
        let sys = SystemModel::integrator(1);
        let mut ctrl = Example1Baseline::new(&sys).unwrap();
        let prior = SteadyStatePair::scalar(0.0, 1.0);
        let x0 = DVector::from_element(1, 1.0);
        ctrl.begin(&x0, &prior);

        // t = 0 with theta_{-1} = x_0: u = 0
        let u0 = ctrl.control(0, &x0, Revealed::Prior(&prior)).unwrap();
        assert_eq!(u0[0], 0.0);

        // t = 1, theta_0 = 0 revealed, tau resets to 1: u = -1/2
        let seg = CostSegment::new(
            0,
            SteadyStatePair::scalar(0.0, 0.0),
            NormPower::One,
            1.0,
            1.0,
        );
        let u1 = ctrl
            .control(
                1,
                &x0,
                Revealed::Segment {
                    index: 0,
                    segment: &seg,
                },
            )
            .unwrap();
        assert_eq!(u1[0], -0.5);
        assert_eq!(ctrl.counter.tau(), 1);
    }

    #[test]
    fn tau_resets_on_segment_change_only() {
        let mut counter = TauCounter::new();
        let prior = SteadyStatePair::scalar(0.0, 1.0);
        assert_eq!(counter.observe(0, &Revealed::Prior(&prior)), 0);

        let seg0 = CostSegment::new(
            0,
            SteadyStatePair::scalar(0.0, 0.0),
            NormPower::One,
            1.0,
            1.0,
        );
        let seg1 = CostSegment::new(
            5,
            SteadyStatePair::scalar(0.0, 2.0),
            NormPower::One,
            1.0,
            1.0,
        );
        let r0 = Revealed::Segment {
            index: 0,
            segment: &seg0,
        };
        let r1 = Revealed::Segment {
            index: 1,
            segment: &seg1,
        };
        assert_eq!(counter.observe(1, &r0), 1);
        assert_eq!(counter.observe(2, &r0), 2);
        assert_eq!(counter.observe(3, &r0), 3);
        // switch revealed
        assert_eq!(counter.observe(4, &r1), 1);
        assert_eq!(counter.observe(5, &r1), 2);
    }

    #[test]
    fn dimension_requirement() {
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = nalgebra::DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let sys = SystemModel::linear(a, b).unwrap();
        assert!(Example1Baseline::new(&sys).is_err());
    }
}
