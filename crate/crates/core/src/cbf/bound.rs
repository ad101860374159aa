use super::{zone_profile, BarrierFamily, BarrierKind, CenterState, LipschitzProfile};
use crate::dynamics::{predict_many, PlantState, StateDomain};
use crate::error::Result;
use crate::uncertainty::{CompanionExp, UncertaintyBound};

/// Model constants needed to bound barriers along predicted coasts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionContext {
    pub mu: f64,
    pub domain: StateDomain,
    /// Lipschitz constant of gravity in position.
    pub l_fr: f64,
    /// Sampling step of the trajectory bound.
    pub grid_step: f64,
    /// Relative tolerance of the prediction integrator.
    pub rtol: f64,
}

/// `psi_h` and the trajectory Lipschitz profile of one family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyBound {
    pub psi: f64,
    pub lip: LipschitzProfile,
}

impl FamilyBound {
    /// `psi_h + l_h^p . q`.
    pub fn value(&self, q: &UncertaintyBound) -> f64 {
        self.psi + self.lip.dot(q)
    }
}

/// Sampling grid over `[t, tau]` with the reference states of every family
/// precomputed, so many candidate estimates can be bounded cheaply.
#[derive(Debug, Clone)]
pub struct Horizon<'a> {
    families: &'a [BarrierFamily],
    ctx: PredictionContext,
    times: Vec<f64>,
    /// `centers[slot][k]`, shared between families with the same reference.
    centers: Vec<Vec<CenterState>>,
    slot: Vec<usize>,
}

impl<'a> Horizon<'a> {
    pub fn new(families: &'a [BarrierFamily], ctx: &PredictionContext, t: f64, tau: f64) -> Self {
        let span = (tau - t).max(0.0);
        let mut times = vec![t];
        if span > 0.0 {
            let n = ((span / ctx.grid_step) - 1e-9).ceil().max(1.0) as usize;
            for k in 1..n {
                times.push(t + k as f64 * ctx.grid_step);
            }
            times.push(tau);
        }
        let mut orbits = Vec::new();
        let mut slot = Vec::with_capacity(families.len());
        for f in families {
            match orbits.iter().position(|o| *o == f.center) {
                Some(i) => slot.push(i),
                None => {
                    orbits.push(f.center);
                    slot.push(orbits.len() - 1);
                }
            }
        }
        let centers = orbits
            .iter()
            .map(|o| times.iter().map(|&s| CenterState::of(o, s)).collect())
            .collect();
        Self {
            families,
            ctx: *ctx,
            times,
            centers,
            slot,
        }
    }

    pub fn t(&self) -> f64 {
        self.times[0]
    }

    pub fn tau(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn families(&self) -> &[BarrierFamily] {
        self.families
    }

    pub fn predict(&self, x_hat: &PlantState) -> Result<Vec<PlantState>> {
        let mut out = vec![*x_hat];
        if self.times.len() > 1 {
            out.extend(predict_many(
                self.times[0],
                x_hat,
                &self.times[1..],
                self.ctx.mu,
                &self.ctx.domain,
                self.ctx.rtol,
            )?);
        }
        Ok(out)
    }

    /// Bounds for each family from a prediction made by [`Horizon::predict`];
    /// `q_end` is the error radius at `tau`.
    pub fn bounds_from(&self, path: &[PlantState], q_end: &UncertaintyBound) -> Vec<FamilyBound> {
        self.families
            .iter()
            .zip(&self.slot)
            .map(|(f, &s)| family_bound(f, &self.ctx, &self.times, path, &self.centers[s], q_end))
            .collect()
    }

    pub fn bounds(&self, x_hat: &PlantState, q_end: &UncertaintyBound) -> Result<Vec<FamilyBound>> {
        Ok(self.bounds_from(&self.predict(x_hat)?, q_end))
    }

    /// `max_i (psi_i + l_i . q_end)`.
    pub fn worst(&self, x_hat: &PlantState, q_end: &UncertaintyBound) -> Result<(f64, usize)> {
        let b = self.bounds(x_hat, q_end)?;
        Ok(argmax(b.iter().map(|fb| fb.value(q_end))))
    }

    /// Barrier values of every family along a prediction.
    pub fn values_along(&self, path: &[PlantState]) -> Vec<Vec<f64>> {
        self.families
            .iter()
            .zip(&self.slot)
            .map(|(f, &s)| {
                path.iter()
                    .zip(&self.centers[s])
                    .map(|(x, c)| f.value(x, c))
                    .collect()
            })
            .collect()
    }
}

pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in values.enumerate() {
        if v > best.0 || v.is_nan() {
            best = (if v.is_nan() { f64::INFINITY } else { v }, i);
        }
    }
    best
}

fn family_bound(
    f: &BarrierFamily,
    ctx: &PredictionContext,
    times: &[f64],
    path: &[PlantState],
    centers: &[CenterState],
    q_end: &UncertaintyBound,
) -> FamilyBound {
    let h: Vec<f64> = path
        .iter()
        .zip(centers)
        .map(|(x, c)| f.value(x, c))
        .collect();
    let base_lip = match f.kind {
        BarrierKind::ExclusionZone { gamma, .. } if gamma > 0.0 => LipschitzProfile {
            l_hr: 1.0,
            l_hv: gamma,
        },
        BarrierKind::ExclusionZone { .. } => LipschitzProfile {
            l_hr: 1.0,
            l_hv: 0.0,
        },
        BarrierKind::Halfspace { gamma, .. } => LipschitzProfile {
            l_hr: 1.0,
            l_hv: gamma,
        },
    };
    if times.len() == 1 {
        let lip = f.lipschitz_with(&path[0], &centers[0], q_end);
        return FamilyBound { psi: h[0], lip };
    }
    let mut psi = f64::NEG_INFINITY;
    let mut lip = base_lip;
    for k in 0..times.len() - 1 {
        let delta = times[k + 1] - times[k];
        let rel = |j: usize| {
            let r = (path[j].r - centers[j].r).norm();
            let w = (path[j].v - centers[j].v).norm();
            (r, w)
        };
        let (d0, w0) = rel(k);
        let (d1, w1) = rel(k + 1);
        let e = CompanionExp::new(delta, ctx.l_fr, 0.0);
        let fwd = e.apply(nalgebra::Vector2::new(d0, w0), 0.0);
        let bwd = e.apply(nalgebra::Vector2::new(d1, w1), 0.0);
        let r_bar = fwd[0].min(bwd[0]);
        let w_bar = fwd[1].min(bwd[1]);
        let (rate, seg_lip) = match f.kind {
            BarrierKind::ExclusionZone { gamma, .. } => {
                let d_low = 0.5 * (d0 + d1 - delta * w_bar);
                if gamma == 0.0 {
                    (w_bar, base_lip)
                } else if d_low > 0.0 {
                    let rate = w_bar + gamma * (w_bar * w_bar / d_low + ctx.l_fr * r_bar);
                    (
                        rate,
                        zone_profile(gamma, d_low - q_end.rho_r, w_bar + q_end.rho_v),
                    )
                } else {
                    (f64::INFINITY, zone_profile(gamma, 0.0, 0.0))
                }
            }
            BarrierKind::Halfspace { gamma, .. } => (w_bar + gamma * ctx.l_fr * r_bar, base_lip),
        };
        let chord = 0.5 * (h[k] + h[k + 1]) + 0.5 * delta * rate;
        psi = psi.max(chord);
        lip = lip.max(&seg_lip);
    }
    FamilyBound { psi, lip }
}

/// Upper bound on `h(s, p(s, t, x_hat))` over `s` in `[t, tau]`.
pub fn psi_h(
    family: &BarrierFamily,
    ctx: &PredictionContext,
    tau: f64,
    t: f64,
    x_hat: &PlantState,
) -> Result<f64> {
    let fams = std::slice::from_ref(family);
    let hz = Horizon::new(fams, ctx, t, tau);
    Ok(hz.bounds(x_hat, &UncertaintyBound::ZERO)?[0].psi)
}

/// Lipschitz profile valid along the predicted coast with error radii up to
/// `q(tau - t, rho)`, supplied as `q_end`.
pub fn lip_along_traj(
    family: &BarrierFamily,
    ctx: &PredictionContext,
    tau: f64,
    t: f64,
    x_hat: &PlantState,
    q_end: &UncertaintyBound,
) -> Result<LipschitzProfile> {
    let fams = std::slice::from_ref(family);
    let hz = Horizon::new(fams, ctx, t, tau);
    Ok(hz.bounds(x_hat, q_end)?[0].lip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{KeplerOrbit, OrbitElements, Vec3, MU_EARTH};

    fn target() -> KeplerOrbit {
        OrbitElements {
            a: 7.775e6,
            e: 0.1,
            inc_deg: 0.0,
            raan_deg: 0.0,
            argp_deg: 0.0,
            true_anomaly_deg: 0.0,
        }
        .orbit(MU_EARTH, 0.0)
        .unwrap()
    }

    fn ctx(step: f64) -> PredictionContext {
        let domain = StateDomain::new(6.99e6, 8.56e6, 1e4);
        PredictionContext {
            mu: MU_EARTH,
            domain,
            l_fr: domain.lipschitz_r(MU_EARTH),
            grid_step: step,
            rtol: crate::dynamics::PREDICT_RTOL,
        }
    }

    fn zone(gamma: f64) -> BarrierFamily {
        BarrierFamily::new(
            0,
            BarrierKind::ExclusionZone {
                radius: 200.0,
                gamma,
            },
            target(),
        )
        .unwrap()
    }

    #[test]
    fn degenerate_interval() {
        let f = zone(30.0);
        let c = f.center_at(0.0);
        let x = PlantState::new(
            c.r + Vec3::new(500.0, 0.0, 0.0),
            c.v + Vec3::new(0.1, 0.0, 0.0),
        );
        let p = psi_h(&f, &ctx(25.0), 0.0, 0.0, &x).unwrap();
        assert_eq!(p, f.h_eval(0.0, &x).unwrap().h);
    }

    #[test]
    fn receding_path_stays_near_start() {
        let f = zone(0.0);
        let c = f.center_at(0.0);
        let x = PlantState::new(
            c.r + Vec3::new(0.0, 300.0, 0.0),
            c.v + Vec3::new(0.0, 0.5, 0.0),
        );
        let step = 25.0;
        let p = psi_h(&f, &ctx(step), 300.0, 0.0, &x).unwrap();
        let h0 = f.h_eval(0.0, &x).unwrap().h;
        assert!(p >= h0 && p <= h0 + 0.5 * step * 0.6);
    }

    #[test]
    fn grid_ends_exactly() {
        let fams = [zone(1.0)];
        let hz = Horizon::new(&fams, &ctx(25.0), 10.0, 310.0);
        assert_eq!(hz.times().len(), 13);
        assert_eq!(hz.tau(), 310.0);
        let hz = Horizon::new(&fams, &ctx(25.0), 10.0, 320.0);
        assert_eq!(hz.times().len(), 14);
    }

    #[test]
    fn halfspace_profile_constant() {
        let f = BarrierFamily::new(
            0,
            BarrierKind::Halfspace {
                normal: Vec3::new(1.0, 0.0, 0.0),
                offset: 1000.0,
                gamma: 120.0,
            },
            target(),
        )
        .unwrap();
        let x = f.center_at(0.0);
        let x = PlantState::new(x.r, x.v);
        for tau in [0.0, 10.0, 500.0] {
            let l = lip_along_traj(
                &f,
                &ctx(25.0),
                tau,
                0.0,
                &x,
                &UncertaintyBound::new(3.0, 0.1),
            )
            .unwrap();
            assert_eq!(
                l,
                LipschitzProfile {
                    l_hr: 1.0,
                    l_hv: 120.0
                }
            );
        }
    }
}
