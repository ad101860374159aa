//! Barrier families, worst-case bounds over the estimate balls, bounds along
//! predicted trajectories, and the offline verifiers.

mod bound;
mod sampling;
mod verify;

pub use bound::{lip_along_traj, psi_h, FamilyBound, Horizon, PredictionContext};
pub use sampling::{ball_point, HaltonSampler, VerifierSampling};
pub use verify::{
    max_horizon, verify_rit_cbf, verify_rt_cbf, MaxHorizonReport, VerifyMode, VerifyReport, Witness,
};

use serde::{Deserialize, Serialize};

use crate::dynamics::{gravity, KeplerOrbit, PlantState, Vec3};
use crate::error::{Error, Result};
use crate::observer::EstimateState;
use crate::uncertainty::UncertaintyBound;

/// Shape of one constraint. Both kinds are measured relative to a moving
/// Kepler reference (the obstacle centre or the virtual target).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BarrierKind {
    /// `h = R_o - d - gamma d'` with `d` the distance to the centre.
    /// `gamma = 0` gives the plain distance constraint.
    ExclusionZone { radius: f64, gamma: f64 },
    /// `h = p.(r - c) - offset + gamma p.(v - c')`.
    Halfspace {
        normal: Vec3,
        offset: f64,
        gamma: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierFamily {
    pub index: usize,
    pub kind: BarrierKind,
    pub center: KeplerOrbit,
}

/// Value, gradients and explicit time derivative of one barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierEval {
    pub h: f64,
    pub grad_r: Vec3,
    pub grad_v: Vec3,
    pub dh_dt: f64,
}

/// Lipschitz constants of `h` in position and velocity over an error ball.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LipschitzProfile {
    pub l_hr: f64,
    pub l_hv: f64,
}

impl LipschitzProfile {
    pub fn dot(&self, rho: &UncertaintyBound) -> f64 {
        let a = if rho.rho_r == 0.0 {
            0.0
        } else {
            self.l_hr * rho.rho_r
        };
        let b = if rho.rho_v == 0.0 {
            0.0
        } else {
            self.l_hv * rho.rho_v
        };
        a + b
    }

    pub fn max(&self, o: &Self) -> Self {
        Self {
            l_hr: self.l_hr.max(o.l_hr),
            l_hv: self.l_hv.max(o.l_hv),
        }
    }
}

/// Reference position, velocity and acceleration at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterState {
    pub r: Vec3,
    pub v: Vec3,
    pub a: Vec3,
}

impl CenterState {
    pub fn of(orbit: &KeplerOrbit, t: f64) -> Self {
        let s = orbit.state_at(t);
        Self {
            r: s.r,
            v: s.v,
            a: gravity(&s.r, orbit.mu),
        }
    }
}

impl BarrierFamily {
    pub fn new(index: usize, kind: BarrierKind, center: KeplerOrbit) -> Result<Self> {
        match kind {
            BarrierKind::ExclusionZone { radius, gamma } => {
                if !(radius > 0.0) || !(gamma >= 0.0) {
                    return Err(Error::Config(format!(
                        "exclusion zone {index} needs radius > 0 and gamma >= 0"
                    )));
                }
            }
            BarrierKind::Halfspace { normal, gamma, .. } => {
                if (normal.norm() - 1.0).abs() > 1e-9 || !(gamma > 0.0) {
                    return Err(Error::Config(format!(
                        "halfspace {index} needs a unit normal and gamma > 0"
                    )));
                }
            }
        }
        Ok(Self {
            index,
            kind,
            center,
        })
    }

    pub fn gamma(&self) -> f64 {
        match self.kind {
            BarrierKind::ExclusionZone { gamma, .. } | BarrierKind::Halfspace { gamma, .. } => {
                gamma
            }
        }
    }

    pub fn center_at(&self, t: f64) -> CenterState {
        CenterState::of(&self.center, t)
    }

    /// Barrier value given the reference state.
    pub fn value(&self, x: &PlantState, c: &CenterState) -> f64 {
        let r = x.r - c.r;
        let w = x.v - c.v;
        match self.kind {
            BarrierKind::ExclusionZone { radius, gamma } => {
                let d = r.norm();
                if d == 0.0 {
                    return f64::INFINITY;
                }
                let dd = r.dot(&w) / d;
                radius - d - if gamma == 0.0 { 0.0 } else { gamma * dd }
            }
            BarrierKind::Halfspace {
                normal,
                offset,
                gamma,
            } => normal.dot(&r) - offset + gamma * normal.dot(&w),
        }
    }

    pub fn eval_with(&self, x: &PlantState, c: &CenterState) -> Result<BarrierEval> {
        let r = x.r - c.r;
        let w = x.v - c.v;
        let (h, grad_r, grad_v) = match self.kind {
            BarrierKind::ExclusionZone { radius, gamma } => {
                let d = r.norm();
                if d == 0.0 {
                    return Err(Error::BarrierSingularity);
                }
                let n = r / d;
                let dd = n.dot(&w);
                let h = radius - d - gamma * dd;
                let grad_r = -n - (w - n * dd) * (gamma / d);
                (h, grad_r, -n * gamma)
            }
            BarrierKind::Halfspace {
                normal,
                offset,
                gamma,
            } => (
                normal.dot(&r) - offset + gamma * normal.dot(&w),
                normal,
                normal * gamma,
            ),
        };
        let dh_dt = -grad_r.dot(&c.v) - grad_v.dot(&c.a);
        Ok(BarrierEval {
            h,
            grad_r,
            grad_v,
            dh_dt,
        })
    }

    pub fn h_eval(&self, t: f64, x: &PlantState) -> Result<BarrierEval> {
        self.eval_with(x, &self.center_at(t))
    }

    /// Lipschitz profile valid over the balls of radius `rho` around `x`.
    pub fn lipschitz_with(
        &self,
        x: &PlantState,
        c: &CenterState,
        rho: &UncertaintyBound,
    ) -> LipschitzProfile {
        match self.kind {
            BarrierKind::ExclusionZone { gamma, .. } => {
                let d = (x.r - c.r).norm();
                let w = (x.v - c.v).norm();
                zone_profile(gamma, d - rho.rho_r, w + rho.rho_v)
            }
            BarrierKind::Halfspace { gamma, .. } => LipschitzProfile {
                l_hr: 1.0,
                l_hv: gamma,
            },
        }
    }

    pub fn lipschitz(&self, t: f64, x: &PlantState, rho: &UncertaintyBound) -> LipschitzProfile {
        self.lipschitz_with(x, &self.center_at(t), rho)
    }

    /// `h(t, x_hat) + l_h . rho_hat`, an upper bound on `h` over the balls.
    pub fn h_hat_with(&self, est: &EstimateState, c: &CenterState) -> f64 {
        let h = self.value(&est.x_hat, c);
        h + self
            .lipschitz_with(&est.x_hat, c, &est.rho_hat)
            .dot(&est.rho_hat)
    }

    pub fn h_hat(&self, t: f64, est: &EstimateState) -> f64 {
        self.h_hat_with(est, &self.center_at(t))
    }
}

/// Exclusion-zone profile given a lower bound on the distance to the centre
/// and an upper bound on the relative speed over the region of interest.
pub(crate) fn zone_profile(gamma: f64, d_low: f64, w_high: f64) -> LipschitzProfile {
    if gamma == 0.0 {
        return LipschitzProfile {
            l_hr: 1.0,
            l_hv: 0.0,
        };
    }
    let l_hr = if d_low > 0.0 {
        let k = gamma * w_high / d_low;
        (1.0 + k * k).sqrt()
    } else {
        f64::INFINITY
    };
    LipschitzProfile { l_hr, l_hv: gamma }
}

/// Largest `h_hat` over all families.
pub fn max_h_hat(families: &[BarrierFamily], t: f64, est: &EstimateState) -> f64 {
    families
        .iter()
        .map(|f| f.h_hat(t, est))
        .fold(f64::NEG_INFINITY, f64::max)
}
