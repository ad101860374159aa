//! Validated runtime form of a [`ScenarioConfig`].

use crate::cbf::{BarrierFamily, BarrierKind, PredictionContext};
use crate::config::{ActuationMode, BarrierSpec, Frame, ScenarioConfig};
use crate::dynamics::{KeplerOrbit, PlantState, StateDomain, Vec3};
use crate::error::{Error, Result};
use crate::timing::TimingConfig;
use crate::uncertainty::{
    pre_actuation_bound_continuous, pre_actuation_bound_impulsive, DisturbanceBounds,
    LipschitzPair, PreActuationBound, UncertaintyBound,
};

/// Ratio of inradius to circumradius of the regular icosahedron.
pub fn icosahedron_inradius_ratio() -> f64 {
    ((5.0 + 2.0 * 5f64.sqrt()) / 15.0).sqrt()
}

/// Unit face normals of the regular icosahedron (the dodecahedron vertices).
pub fn icosahedron_normals() -> Vec<Vec3> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let ip = 1.0 / phi;
    let mut out = Vec::with_capacity(20);
    for sx in [1.0, -1.0] {
        for sy in [1.0, -1.0] {
            for sz in [1.0, -1.0] {
                out.push(Vec3::new(sx, sy, sz));
            }
        }
    }
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            out.push(Vec3::new(0.0, s1 * ip, s2 * phi));
            out.push(Vec3::new(s1 * ip, s2 * phi, 0.0));
            out.push(Vec3::new(s1 * phi, 0.0, s2 * ip));
        }
    }
    out.into_iter().map(|v| v.normalize()).collect()
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub timing: TimingConfig,
    pub lip: LipschitzPair,
    pub bounds: DisturbanceBounds,
    pub rho_bar: UncertaintyBound,
    pub reference: KeplerOrbit,
    pub initial: PlantState,
    pub families: Vec<BarrierFamily>,
    pub truth_dt: f64,
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl Scenario {
    pub fn from_config(config: &ScenarioConfig) -> Result<Self> {
        let c = config;
        check(c.dimension == 2 || c.dimension == 3, || {
            format!("dimension must be 2 or 3, got {}", c.dimension)
        })?;
        check(c.mu > 0.0, || "mu must be positive".into())?;
        let timing = c.timing.timing();
        timing.validate()?;
        c.domain.validate()?;
        let d = &c.disturbances;
        check(
            d.w_c >= 0.0 && d.w_g_slope >= 0.0 && d.w_g_cap >= 0.0,
            || "disturbance bounds must be nonnegative".into(),
        )?;
        let m = &c.measurement;
        check(m.rho_r >= 0.0 && m.rho_v >= 0.0, || {
            "measurement radii must be nonnegative".into()
        })?;
        check(m.shrink_factor > 0.0 && m.shrink_factor <= 1.0, || {
            format!("shrink_factor must lie in (0, 1], got {}", m.shrink_factor)
        })?;
        check((0.0..1.0).contains(&m.noise_fraction), || {
            format!(
                "noise_fraction must lie in [0, 1), got {}",
                m.noise_fraction
            )
        })?;
        check(c.duration >= 0.0, || "duration must be nonnegative".into())?;
        c.controller.validate()?;
        check(
            c.mode != ActuationMode::Impulsive || c.controller.u_max.is_some(),
            || "impulsive scenarios need controller.u_max".into(),
        )?;
        check(c.integrator.predict_tol > 0.0, || {
            "predict_tol must be positive".into()
        })?;
        let truth_dt = c.integrator.truth_dt.unwrap_or(timing.t_s.min(1.0) / 10.0);
        check(truth_dt > 0.0, || "truth_dt must be positive".into())?;
        check(c.verifier.samples > 0, || {
            "verifier.samples must be positive".into()
        })?;
        let lip = c
            .lipschitz
            .unwrap_or_else(|| LipschitzPair::new(c.domain.lipschitz_r(c.mu), 0.0));
        check(lip.l_fr >= 0.0 && lip.l_fv >= 0.0, || {
            "Lipschitz constants must be nonnegative".into()
        })?;
        let reference = c.reference.orbit(c.mu)?;
        let ref0 = reference.state_at(0.0);
        let (dr, dv) = (Vec3::from(c.initial.dr), Vec3::from(c.initial.dv));
        let initial = match c.initial.frame {
            Frame::Inertial => PlantState::new(ref0.r + dr, ref0.v + dv),
            Frame::Rtn => {
                let rot = rtn_axes(&ref0);
                PlantState::new(ref0.r + rot * dr, ref0.v + rot * dv)
            }
            Frame::Lvlh => relative_to(&ref0, &dr, &dv),
        };
        check(c.domain.contains(&initial), || {
            "initial state outside the state domain".into()
        })?;
        let mut families = Vec::new();
        let default_gamma = c.controller.gamma;
        for spec in &c.barriers {
            match spec {
                BarrierSpec::ExclusionZone {
                    center,
                    radius,
                    gamma,
                } => {
                    let kind = BarrierKind::ExclusionZone {
                        radius: *radius,
                        gamma: gamma.or(default_gamma).unwrap_or(0.0),
                    };
                    families.push(BarrierFamily::new(
                        families.len(),
                        kind,
                        center.orbit(c.mu)?,
                    )?);
                }
                BarrierSpec::Halfspace {
                    center,
                    normal,
                    offset,
                    gamma,
                } => {
                    let n = Vec3::from(*normal);
                    let kind = BarrierKind::Halfspace {
                        normal: n.try_normalize(0.0).unwrap_or(n),
                        offset: *offset,
                        gamma: gamma.or(default_gamma).unwrap_or(0.0),
                    };
                    families.push(BarrierFamily::new(
                        families.len(),
                        kind,
                        center.orbit(c.mu)?,
                    )?);
                }
                BarrierSpec::Icosahedron {
                    center,
                    radius,
                    gamma,
                } => {
                    check(*radius > 0.0, || {
                        "icosahedron radius must be positive".into()
                    })?;
                    let orbit = center.orbit(c.mu)?;
                    for n in icosahedron_normals() {
                        let kind = BarrierKind::Halfspace {
                            normal: n,
                            offset: radius * icosahedron_inradius_ratio(),
                            gamma: gamma.or(default_gamma).unwrap_or(0.0),
                        };
                        families.push(BarrierFamily::new(families.len(), kind, orbit)?);
                    }
                }
            }
        }
        check(!families.is_empty(), || {
            "at least one barrier is required".into()
        })?;
        Ok(Self {
            config: c.clone(),
            timing,
            lip,
            bounds: DisturbanceBounds::new(d.w_c, d.w_g_slope, d.w_g_cap),
            rho_bar: UncertaintyBound::new(m.rho_r, m.rho_v),
            reference,
            initial,
            families,
            truth_dt,
        })
    }

    /// Same scenario with a different maximal measurement interval
    /// (and `T_L` following it when it was tied to `T_M`).
    pub fn with_horizon(&self, t_mx: f64) -> Result<Self> {
        let mut cfg = self.config.clone();
        cfg.timing.t_mx = t_mx;
        if let Some(t_l) = cfg.timing.t_l {
            cfg.timing.t_l = Some(t_l.min(t_mx));
        }
        Self::from_config(&cfg)
    }

    pub fn mode(&self) -> ActuationMode {
        self.config.mode
    }

    pub fn dim(&self) -> usize {
        self.config.dimension
    }

    pub fn mu(&self) -> f64 {
        self.config.mu
    }

    pub fn domain(&self) -> StateDomain {
        self.config.domain
    }

    /// Euclidean bound on a single command, infinite when unbounded.
    pub fn u_norm_max(&self) -> f64 {
        match (self.config.controller.u_max, self.mode()) {
            (None, _) => f64::INFINITY,
            (Some(u), ActuationMode::Impulsive) => u,
            (Some(u), ActuationMode::Continuous) => u * (self.dim() as f64).sqrt(),
        }
    }

    /// `W_g`: the supremum of the actuation error over admissible commands.
    pub fn w_g_sup(&self) -> f64 {
        self.bounds.sup_w_g(self.u_norm_max())
    }

    pub fn ctx(&self) -> PredictionContext {
        PredictionContext {
            mu: self.mu(),
            domain: self.domain(),
            l_fr: self.lip.l_fr,
            grid_step: self.timing.t_mx / self.config.controller.psi_grid as f64,
            rtol: self.config.integrator.predict_tol,
        }
    }

    pub fn q3(&self) -> PreActuationBound {
        pre_actuation_bound_impulsive(
            &self.timing,
            &self.lip,
            self.bounds.w_c,
            self.w_g_sup(),
            self.rho_bar,
        )
    }

    pub fn q4(&self) -> UncertaintyBound {
        pre_actuation_bound_continuous(
            &self.timing,
            &self.lip,
            self.bounds.w_c,
            self.w_g_sup(),
            self.rho_bar,
        )
    }
}

/// Angular velocity of the radial-along-track frame of `x`.
pub fn frame_rate(x: &PlantState) -> Vec3 {
    x.r.cross(&x.v) / x.r.norm_squared()
}

/// State at offset `dr` with velocity `dv` relative to the frame rotating
/// with `x`, both given in that frame's axes.
pub fn relative_to(x: &PlantState, dr: &Vec3, dv: &Vec3) -> PlantState {
    let rot = rtn_axes(x);
    let dr = rot * dr;
    PlantState::new(x.r + dr, x.v + rot * dv + frame_rate(x).cross(&dr))
}

/// Velocity of a neighbouring orbit at offset `dr` (inertial) from `x`:
/// co-rotation with the frame plus the along-track drift of a circular
/// orbit displaced radially by the radial part of `dr`.
pub fn neighbour_velocity(x: &PlantState, dr: &Vec3) -> Vec3 {
    let w = frame_rate(x);
    let rot = rtn_axes(x);
    let radial = dr.dot(&rot.column(0));
    x.v + w.cross(dr) - rot.column(1) * (1.5 * w.norm() * radial)
}

/// Matrix whose columns are the radial, along-track and cross-track axes.
pub fn rtn_axes(x: &PlantState) -> nalgebra::Matrix3<f64> {
    let r = x.r.normalize();
    let n = x.r.cross(&x.v).normalize();
    let t = n.cross(&r);
    nalgebra::Matrix3::from_columns(&[r, t, n])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosahedron_geometry() {
        let ns = icosahedron_normals();
        assert_eq!(ns.len(), 20);
        let mut dots: Vec<f64> = Vec::new();
        for (i, a) in ns.iter().enumerate() {
            assert!((a.norm() - 1.0).abs() < 1e-15);
            assert!(ns.iter().any(|b| (a + b).norm() < 1e-12));
            for b in &ns[i + 1..] {
                dots.push(a.dot(b));
            }
        }
        // face normals of the icosahedron meet at cosines +-sqrt5/3, +-1/3, -1
        let allowed = [
            5f64.sqrt() / 3.0,
            1.0 / 3.0,
            -1.0 / 3.0,
            -(5f64.sqrt()) / 3.0,
            -1.0,
        ];
        for d in &dots {
            assert!(allowed.iter().any(|a| (a - d).abs() < 1e-12), "{d}");
        }
        let nearest = dots
            .iter()
            .filter(|d| (**d - 5f64.sqrt() / 3.0).abs() < 1e-12)
            .count();
        assert_eq!(nearest, 30);
        assert!((icosahedron_inradius_ratio() - 0.7946544722917661).abs() < 1e-12);
    }
}
