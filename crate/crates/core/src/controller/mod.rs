//! Online safety filters: coast-or-impulse logic for impulsive actuators and
//! the min-norm QP filter for continuous thrust.

mod filter;
mod impulse;
pub mod qp;

pub use filter::{
    build_rt_constraints, joint_margin, qp_filter, relaxed_filter, solve_filter, RtConstraint,
};
pub use impulse::{
    coast_bound, decide_impulsive, impulse_program, impulse_search, CycleState, DecisionKind,
    ImpulseResult, ImpulsiveDecision, SearchMode,
};
pub use qp::{kkt_residual, solve_qp, QpProblem, QpSolution};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Coast whenever the coast bound certifies safety.
    #[default]
    FuelMin,
    /// Impulse at the first guaranteed opportunity of every measurement cycle.
    AlwaysActuate,
}

/// How the impulse is chosen once a safe one is known.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpulseObjective {
    /// Minimise the bound itself.
    #[default]
    MinBound,
    /// Shrink the minimiser to the smallest multiple whose bound stays below
    /// `max(best, -slack)`.
    MinNorm { slack: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasiblePolicy {
    /// Stop the run at the first safety-infeasible event.
    #[default]
    Abort,
    /// Apply the least-violating command, flag the log and continue.
    Continue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultistartConfig {
    pub directions: usize,
    pub magnitudes: usize,
    pub iterations: usize,
}

impl Default for MultistartConfig {
    fn default() -> Self {
        Self {
            directions: 26,
            magnitudes: 5,
            iterations: 200,
        }
    }
}

fn psi_grid_default() -> usize {
    12
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    /// Default barrier time constant, s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Slope of the class-K function in the continuous condition, 1/s.
    #[serde(default)]
    pub alpha_slope: f64,
    /// Impulse norm bound (m/s) or per-axis thrust bound (m/s^2); absent means unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default)]
    pub multistart: MultistartConfig,
    #[serde(default = "psi_grid_default")]
    pub psi_grid: usize,
    #[serde(default)]
    pub impulse_objective: ImpulseObjective,
    #[serde(default)]
    pub on_infeasible: InfeasiblePolicy,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            gamma: None,
            alpha_slope: 0.0,
            u_max: None,
            policy: Policy::default(),
            multistart: MultistartConfig::default(),
            psi_grid: psi_grid_default(),
            impulse_objective: ImpulseObjective::default(),
            on_infeasible: InfeasiblePolicy::default(),
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.psi_grid == 0 {
            return bad("controller.psi_grid must be positive");
        }
        if !(self.alpha_slope >= 0.0) {
            return bad("controller.alpha_slope must be nonnegative");
        }
        if let Some(u) = self.u_max {
            if !(u >= 0.0) {
                return bad("controller.u_max must be nonnegative");
            }
        }
        if let Some(g) = self.gamma {
            if !(g >= 0.0) {
                return bad("controller.gamma must be nonnegative");
            }
        }
        if let ImpulseObjective::MinNorm { slack } = self.impulse_objective {
            if !(slack >= 0.0) {
                return bad("impulse_objective slack must be nonnegative");
            }
        }
        Ok(())
    }
}
