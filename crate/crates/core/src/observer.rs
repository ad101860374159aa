//! Open-loop observer: nominal propagation between jumps, actuation updates
//! and filtered measurement resets.

use serde::{Deserialize, Serialize};

use crate::dynamics::{true_flow_step, PlantState, StateDomain, Vec3};
use crate::error::Result;
use crate::uncertainty::{propagate_q, DisturbanceBounds, LipschitzPair, UncertaintyBound};

/// Estimate and the radii of the balls known to contain the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateState {
    pub x_hat: PlantState,
    pub rho_hat: UncertaintyBound,
}

impl EstimateState {
    pub fn new(x_hat: PlantState, rho_hat: UncertaintyBound) -> Self {
        Self { x_hat, rho_hat }
    }

    /// Whether `truth` lies in both error balls.
    pub fn contains(&self, truth: &PlantState) -> bool {
        (truth.r - self.x_hat.r).norm() <= self.rho_hat.rho_r
            && (truth.v - self.x_hat.v).norm() <= self.rho_hat.rho_v
    }
}

/// A ground-station report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub x_bar: PlantState,
    pub rho_bar: UncertaintyBound,
    /// Time until the following measurement.
    pub sigma_m_next: f64,
}

/// Constants shared by the observer updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverModel {
    pub mu: f64,
    pub domain: StateDomain,
    pub lip: LipschitzPair,
    pub bounds: DisturbanceBounds,
}

/// Advance the estimate by `dt`. A `Some` thrust selects continuous mode:
/// it is added to the nominal flow and its error bound to the tube.
pub fn observer_flow_step(
    est: &EstimateState,
    dt: f64,
    model: &ObserverModel,
    u_continuous: Option<&Vec3>,
) -> Result<EstimateState> {
    let (extra, w) = match u_continuous {
        Some(u) => (*u, model.bounds.w_c + model.bounds.w_g(u.norm())),
        None => (Vec3::zeros(), model.bounds.w_c),
    };
    let x_hat = true_flow_step(&est.x_hat, &extra, dt, model.mu, &model.domain)?;
    let rho_hat = propagate_q(dt, est.rho_hat, &model.lip, w);
    Ok(EstimateState { x_hat, rho_hat })
}

/// Impulse applied: velocity estimate shifts and its radius absorbs `w_g(|u|)`.
pub fn observer_actuation_jump(
    est: &EstimateState,
    u: &Vec3,
    bounds: &DisturbanceBounds,
) -> EstimateState {
    let mut out = *est;
    out.x_hat.v += u;
    out.rho_hat.rho_v += bounds.w_g(u.norm());
    out
}

/// Whether the measured balls lie inside the current estimate balls.
pub fn measurement_admissible(est: &EstimateState, meas: &Measurement) -> bool {
    (meas.x_bar.r - est.x_hat.r).norm() + meas.rho_bar.rho_r <= est.rho_hat.rho_r
        && (meas.x_bar.v - est.x_hat.v).norm() + meas.rho_bar.rho_v <= est.rho_hat.rho_v
}

/// Reset to the measurement when admissible; otherwise keep the estimate.
/// Returns the new estimate and whether the measurement was accepted.
pub fn observer_measurement_jump(est: &EstimateState, meas: &Measurement) -> (EstimateState, bool) {
    if measurement_admissible(est, meas) {
        (EstimateState::new(meas.x_bar, meas.rho_bar), true)
    } else {
        (*est, false)
    }
}
