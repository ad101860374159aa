use serde::{Deserialize, Serialize};

use super::{PlantState, Vec3};
use crate::error::{Error, Result};

/// Classical orbital elements; angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitElements {
    /// Semi-major axis, m.
    pub a: f64,
    pub e: f64,
    #[serde(default)]
    pub inc_deg: f64,
    #[serde(default)]
    pub raan_deg: f64,
    #[serde(default)]
    pub argp_deg: f64,
    #[serde(default)]
    pub true_anomaly_deg: f64,
}

impl OrbitElements {
    pub fn orbit(&self, mu: f64, epoch: f64) -> Result<KeplerOrbit> {
        if !(self.e >= 0.0 && self.e < 1.0) || !(self.a > 0.0) {
            return Err(Error::NonElliptic(self.e));
        }
        let (i, o, w) = (
            self.inc_deg.to_radians(),
            self.raan_deg.to_radians(),
            self.argp_deg.to_radians(),
        );
        let (so, co) = o.sin_cos();
        let (si, ci) = i.sin_cos();
        let (sw, cw) = w.sin_cos();
        let p = Vec3::new(co * cw - so * sw * ci, so * cw + co * sw * ci, sw * si);
        let q = Vec3::new(-co * sw - so * cw * ci, -so * sw + co * cw * ci, cw * si);
        let nu = self.true_anomaly_deg.to_radians();
        let e = self.e;
        let ecc_anom =
            2.0 * ((1.0 - e).sqrt() * (nu / 2.0).sin()).atan2((1.0 + e).sqrt() * (nu / 2.0).cos());
        let m0 = ecc_anom - e * ecc_anom.sin();
        Ok(KeplerOrbit::from_parts(mu, self.a, e, p, q, m0, epoch))
    }
}

/// Orbit given either by elements at `t = 0` or by a state at an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OrbitSpec {
    Elements(OrbitElements),
    State {
        r: [f64; 3],
        v: [f64; 3],
        epoch: f64,
    },
}

impl OrbitSpec {
    pub fn orbit(&self, mu: f64) -> Result<KeplerOrbit> {
        match self {
            OrbitSpec::Elements(el) => el.orbit(mu, 0.0),
            OrbitSpec::State { r, v, epoch } => KeplerOrbit::from_state(
                &PlantState::new(Vec3::from(*r), Vec3::from(*v)),
                *epoch,
                mu,
            ),
        }
    }
}

/// Closed-form two-body trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeplerOrbit {
    pub mu: f64,
    pub a: f64,
    pub e: f64,
    /// Unit vector towards periapsis.
    pub p: Vec3,
    /// In-plane unit vector 90 degrees ahead of `p`.
    pub q: Vec3,
    /// Mean anomaly at `epoch`.
    pub m0: f64,
    pub epoch: f64,
    pub n: f64,
}

impl KeplerOrbit {
    fn from_parts(mu: f64, a: f64, e: f64, p: Vec3, q: Vec3, m0: f64, epoch: f64) -> Self {
        Self {
            mu,
            a,
            e,
            p,
            q,
            m0,
            epoch,
            n: (mu / (a * a * a)).sqrt(),
        }
    }

    /// Orbit passing through `x` at time `epoch`.
    pub fn from_state(x: &PlantState, epoch: f64, mu: f64) -> Result<Self> {
        let r = x.r.norm();
        let h = x.r.cross(&x.v);
        let hn = h.norm();
        if hn == 0.0 {
            return Err(Error::NonElliptic(f64::NAN));
        }
        let energy = x.energy(mu);
        if !(energy < 0.0) {
            return Err(Error::NonElliptic(1.0));
        }
        let a = -mu / (2.0 * energy);
        let e_vec = x.v.cross(&h) / mu - x.r / r;
        let e = e_vec.norm();
        if e >= 1.0 {
            return Err(Error::NonElliptic(e));
        }
        let w = h / hn;
        let p = if e > 1e-11 { e_vec / e } else { x.r / r };
        let q = w.cross(&p);
        let pos = Vec3::new(x.r.dot(&p), x.r.dot(&q), 0.0);
        let b = a * (1.0 - e * e).sqrt();
        let ecc_anom = (pos[1] / b).atan2(pos[0] / a + e);
        let m0 = ecc_anom - e * ecc_anom.sin();
        Ok(Self::from_parts(mu, a, e, p, q, m0, epoch))
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n
    }

    pub fn periapsis(&self) -> f64 {
        self.a * (1.0 - self.e)
    }

    pub fn apoapsis(&self) -> f64 {
        self.a * (1.0 + self.e)
    }

    pub fn eccentric_anomaly(&self, t: f64) -> f64 {
        let m = (self.m0 + self.n * (t - self.epoch)).rem_euclid(2.0 * std::f64::consts::PI);
        let e = self.e;
        let mut ea = if e < 0.8 { m } else { std::f64::consts::PI };
        for _ in 0..50 {
            let f = ea - e * ea.sin() - m;
            let d = f / (1.0 - e * ea.cos());
            ea -= d;
            if d.abs() < 1e-15 {
                break;
            }
        }
        ea
    }

    pub fn state_at(&self, t: f64) -> PlantState {
        let ea = self.eccentric_anomaly(t);
        let (s, c) = ea.sin_cos();
        let root = (1.0 - self.e * self.e).sqrt();
        let x = self.a * (c - self.e);
        let y = self.a * root * s;
        let rate = self.n / (1.0 - self.e * c);
        let vx = -self.a * s * rate;
        let vy = self.a * root * c * rate;
        PlantState::new(self.p * x + self.q * y, self.p * vx + self.q * vy)
    }

    pub fn accel_at(&self, t: f64) -> Vec3 {
        super::gravity(&self.state_at(t).r, self.mu)
    }
}
