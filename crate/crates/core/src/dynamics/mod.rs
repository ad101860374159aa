//! Two-body truth model, impulse map and nominal prediction.

mod disturbance;
mod kepler;
mod predict;

pub use disturbance::{DisturbanceGenerator, DisturbanceMode};
pub use kepler::{KeplerOrbit, OrbitElements, OrbitSpec};
pub use predict::{predict_many, predict_p, PREDICT_RTOL};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Earth gravitational parameter, m^3/s^2.
pub const MU_EARTH: f64 = 3.986004418e14;

pub type Vec3 = Vector3<f64>;

/// Position and velocity in an inertial frame. Planar problems keep `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub r: Vec3,
    pub v: Vec3,
}

impl PlantState {
    pub fn new(r: Vec3, v: Vec3) -> Self {
        Self { r, v }
    }

    pub fn is_finite(&self) -> bool {
        self.r.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }

    /// Specific orbital energy.
    pub fn energy(&self, mu: f64) -> f64 {
        0.5 * self.v.norm_squared() - mu / self.r.norm()
    }
}

/// Radial shell in which the nominal model is trusted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDomain {
    pub r_min: f64,
    pub r_max: f64,
    pub v_max: f64,
}

impl StateDomain {
    pub fn new(r_min: f64, r_max: f64, v_max: f64) -> Self {
        Self {
            r_min,
            r_max,
            v_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min < self.r_max) {
            return Err(Error::Config(format!(
                "state domain requires 0 < r_min < r_max, got [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, x: &PlantState) -> bool {
        let rn = x.r.norm();
        rn >= self.r_min && rn <= self.r_max
    }

    /// Lipschitz constant of the inverse-square field in position over the shell.
    pub fn lipschitz_r(&self, mu: f64) -> f64 {
        2.0 * mu / self.r_min.powi(3)
    }
}

/// `-mu r / |r|^3` without a domain check.
pub fn gravity(r: &Vec3, mu: f64) -> Vec3 {
    let rn = r.norm();
    -mu / (rn * rn * rn) * r
}

/// Nominal acceleration; fails when the radius drops below `r_min`.
pub fn nominal_accel(r: &Vec3, mu: f64, r_min: f64) -> Result<Vec3> {
    let rn = r.norm();
    if !(rn >= r_min) {
        return Err(Error::Singularity {
            radius: rn,
            r_min,
            r_max: f64::INFINITY,
        });
    }
    Ok(gravity(r, mu))
}

/// One RK4 step of the truth dynamics with a constant extra acceleration
/// (disturbance plus any continuous thrust and its error).
pub fn true_flow_step(
    x: &PlantState,
    extra_accel: &Vec3,
    dt: f64,
    mu: f64,
    domain: &StateDomain,
) -> Result<PlantState> {
    if !(dt > 0.0) {
        return Err(Error::StepSize(dt));
    }
    let f = |s: &PlantState| -> Result<PlantState> {
        let a = nominal_accel(&s.r, mu, domain.r_min)?;
        Ok(PlantState::new(s.v, a + extra_accel))
    };
    let add =
        |s: &PlantState, k: &PlantState, h: f64| PlantState::new(s.r + k.r * h, s.v + k.v * h);
    let k1 = f(x)?;
    let k2 = f(&add(x, &k1, dt / 2.0))?;
    let k3 = f(&add(x, &k2, dt / 2.0))?;
    let k4 = f(&add(x, &k3, dt))?;
    let out = PlantState::new(
        x.r + (k1.r + k2.r * 2.0 + k3.r * 2.0 + k4.r) * (dt / 6.0),
        x.v + (k1.v + k2.v * 2.0 + k3.v * 2.0 + k4.v) * (dt / 6.0),
    );
    let rn = out.r.norm();
    if !(rn >= domain.r_min) {
        return Err(Error::Singularity {
            radius: rn,
            r_min: domain.r_min,
            r_max: domain.r_max,
        });
    }
    Ok(out)
}

/// Velocity jump `v + u + d_g`; position is untouched.
pub fn apply_impulse(x: &PlantState, u: &Vec3, d_g: &Vec3, u_max: f64) -> Result<PlantState> {
    let m = u.norm();
    if m > u_max * (1.0 + 1e-12) {
        return Err(Error::ActuationLimit {
            magnitude: m,
            limit: u_max,
        });
    }
    Ok(PlantState::new(x.r, x.v + u + d_g))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circular(radius: f64) -> PlantState {
        let speed = (MU_EARTH / radius).sqrt();
        PlantState::new(Vec3::new(radius, 0.0, 0.0), Vec3::new(0.0, speed, 0.0))
    }

    #[test]
    fn accel_axis_aligned() {
        let r = 7.0e6;
        let a = nominal_accel(&Vec3::new(r, 0.0, 0.0), MU_EARTH, 6.0e6).unwrap();
        assert_eq!(a, Vec3::new(-MU_EARTH / (r * r), 0.0, 0.0));
    }

    #[test]
    fn accel_inverse_square() {
        let r = Vec3::new(3.0e6, -5.0e6, 2.5e6);
        let a = nominal_accel(&r, MU_EARTH, 1.0).unwrap();
        let s = a.norm() * r.norm_squared() / MU_EARTH;
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn accel_singularity() {
        let e = nominal_accel(&Vec3::new(1.0, 0.0, 0.0), MU_EARTH, 6.0e6).unwrap_err();
        assert!(matches!(e, Error::Singularity { .. }));
    }

    #[test]
    fn shell_lipschitz() {
        let d = StateDomain::new(6.99e6, 8.56e6, 1e4);
        let l = d.lipschitz_r(MU_EARTH);
        assert!((l - 2.0 * MU_EARTH / 6.99e6f64.powi(3)).abs() < 1e-20);
        // finite-difference check of the Jacobian bound at r_min
        let r = Vec3::new(6.99e6, 0.0, 0.0);
        let h = 1.0;
        let da = gravity(&(r + Vec3::new(h, 0.0, 0.0)), MU_EARTH)
            - gravity(&(r - Vec3::new(h, 0.0, 0.0)), MU_EARTH);
        assert!((da.norm() / (2.0 * h) - l).abs() < 1e-6 * l);
    }

    #[test]
    fn circular_orbit_radius_and_energy() {
        let radius = 7.0e6;
        let mut x = circular(radius);
        let period = 2.0 * std::f64::consts::PI * (radius.powi(3) / MU_EARTH).sqrt();
        let steps = period.ceil() as usize;
        let dt = period / steps as f64;
        let dom = StateDomain::new(6.0e6, 8.0e6, 1e4);
        let e0 = x.energy(MU_EARTH);
        for _ in 0..steps {
            x = true_flow_step(&x, &Vec3::zeros(), dt, MU_EARTH, &dom).unwrap();
            assert!((x.r.norm() / radius - 1.0).abs() < 1e-6);
        }
        assert!(((x.energy(MU_EARTH) - e0) / e0).abs() < 1e-8);
    }

    #[test]
    fn step_size_error() {
        let dom = StateDomain::new(6.0e6, 8.0e6, 1e4);
        let e = true_flow_step(&circular(7e6), &Vec3::zeros(), 0.0, MU_EARTH, &dom).unwrap_err();
        assert_eq!(e, Error::StepSize(0.0));
    }

    #[test]
    fn impulse_keeps_position() {
        let x = circular(7e6);
        let u = Vec3::new(0.3, -0.1, 0.2);
        let y = apply_impulse(&x, &u, &Vec3::zeros(), 1.0).unwrap();
        assert_eq!(y.r, x.r);
        assert_eq!(y.v, x.v + u);
        assert_eq!(
            apply_impulse(&x, &Vec3::zeros(), &Vec3::zeros(), 1.0).unwrap(),
            x
        );
        assert!(matches!(
            apply_impulse(&x, &Vec3::new(2.0, 0.0, 0.0), &Vec3::zeros(), 1.0),
            Err(Error::ActuationLimit { .. })
        ));
    }
}
