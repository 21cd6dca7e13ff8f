//! Parameter extraction from decay traces, field sweeps and pulse-train
//! trajectories.

pub mod decay;
pub mod joint;
pub mod lm;
pub mod pulses;

use serde::{Deserialize, Serialize};

pub use decay::{fit_decay, fit_thermal_lifetimes, DecayData, DecayFit, ThermalFit};
pub use joint::{fit_joint_es, JointEsData, JointEsFit, JointEsOptions, LifetimePoint, OdmrPoint};
pub use lm::{finite_difference_jacobian, Bounds, FitResult, LeastSquaresProblem, LevenbergMarquardt, StepPolicy};
pub use pulses::{fit_pulse_dynamics, LifetimeConstraint, PulseDynamicsFit, PulseDynamicsOptions, Trajectory};

/// A fitted value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub at_bound: bool,
}

impl Estimate {
    pub(crate) fn from_fit(fit: &FitResult, i: usize) -> Self {
        Self {
            value: fit.params[i],
            std_error: fit.std_errors[i],
            at_bound: fit.at_bound[i],
        }
    }
}
