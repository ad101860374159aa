use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::{ball_point, HaltonSampler};
use crate::config::ActuationMode;
use crate::controller::ImpulseObjective;
use crate::controller::{build_rt_constraints, impulse_search, joint_margin, SearchMode};
use crate::dynamics::{PlantState, Vec3};
use crate::error::{Error, Result};
use crate::observer::EstimateState;
use crate::scenario::{neighbour_velocity, Scenario};
use crate::uncertainty::{propagate_q_star, UncertaintyBound};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    /// Impulsive condition over the horizon `delta_r` with `rho <= q3`.
    Rit,
    /// Continuous condition with `rho <= q4`, all families jointly.
    Rt,
}

impl VerifyMode {
    pub fn for_scenario(scn: &Scenario) -> Self {
        match scn.mode() {
            ActuationMode::Impulsive => VerifyMode::Rit,
            ActuationMode::Continuous => VerifyMode::Rt,
        }
    }
}

/// Sample at which the condition fails (or holds with the least margin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub x_hat: PlantState,
    pub rho_hat: UncertaintyBound,
    pub margin: f64,
    pub u: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub mode: VerifyMode,
    #[serde(rename = "T_M")]
    pub t_mx: f64,
    /// Holds at every evaluated sample (verification at the stated resolution).
    pub verified: bool,
    /// Smallest margin over evaluated samples; nonnegative means satisfied.
    pub worst_margin: f64,
    pub witness: Option<Witness>,
    pub sampler: String,
    pub seed: u64,
    pub samples_requested: usize,
    pub samples_evaluated: usize,
    pub samples_outside_safe_set: usize,
    /// Sampled time window: one period of the reference orbit.
    pub time_window: [f64; 2],
    pub rel_r_max: f64,
    pub rel_v_max: f64,
    pub uncertainty_bound: UncertaintyBound,
    /// Evaluation stopped at the first failing sample.
    pub early_exit: bool,
}

const SAMPLER: &str = "halton/cranley-patterson";

struct Sample {
    t: f64,
    est: EstimateState,
}

/// Uncertainty of a sample. Impulsive mode scales the worst case `q3`;
/// continuous mode walks the reachable tube from the station's error over
/// `[0, T_M]`.
fn sample_rho(
    scn: &Scenario,
    mode: VerifyMode,
    q: &UncertaintyBound,
    frac: f64,
) -> UncertaintyBound {
    match mode {
        VerifyMode::Rit => q.scale(frac),
        VerifyMode::Rt => propagate_q_star(
            frac * scn.timing.t_mx,
            scn.rho_bar,
            &scn.lip,
            scn.bounds.w_c,
            scn.w_g_sup(),
        ),
    }
}

fn safe(scn: &Scenario, t: f64, est: &EstimateState) -> bool {
    scn.domain().contains(&est.x_hat) && scn.families.iter().all(|f| f.h_hat(t, est) <= 0.0)
}

/// Draws `(t, x_hat, rho_hat)` around the reference. A draw outside the safe
/// set is pulled towards the reference onto the boundary of the set; draws
/// whose reference point is itself unsafe are skipped.
fn draw_samples(scn: &Scenario, mode: VerifyMode, q: &UncertaintyBound) -> (Vec<Sample>, usize) {
    let s = scn.config.verifier;
    let dim = scn.dim();
    let ball_dims = if dim == 2 { 2 } else { 3 };
    let sampler = HaltonSampler::new(2 + 2 * ball_dims, s.seed);
    let period = scn.reference.period();
    let mut kept = Vec::new();
    let mut skipped = 0;
    for p in sampler.take(s.samples) {
        let t = p[0] * period;
        let dr = Vec3::from(ball_point(&p[1..1 + ball_dims], dim, s.rel_r_max));
        let dv = Vec3::from(ball_point(
            &p[1 + ball_dims..1 + 2 * ball_dims],
            dim,
            s.rel_v_max,
        ));
        let rho = sample_rho(scn, mode, q, p[1 + 2 * ball_dims]);
        let rf = scn.reference.state_at(t);
        let at = |k: f64| {
            let r = dr * k;
            EstimateState::new(
                PlantState::new(rf.r + r, neighbour_velocity(&rf, &r) + dv * k),
                rho,
            )
        };
        let est = at(1.0);
        if safe(scn, t, &est) {
            kept.push(Sample { t, est });
            continue;
        }
        if !safe(scn, t, &at(0.0)) {
            skipped += 1;
            continue;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if safe(scn, t, &at(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        kept.push(Sample { t, est: at(lo) });
    }
    (kept, skipped)
}

fn margin_at(scn: &Scenario, mode: VerifyMode, smp: &Sample) -> (f64, Vec3) {
    match mode {
        VerifyMode::Rit => {
            let res = impulse_search(
                scn,
                &smp.est,
                smp.t,
                scn.timing.delta_r(),
                SearchMode::FirstFeasible,
                ImpulseObjective::MinBound,
            );
            (-res.bound, res.u)
        }
        VerifyMode::Rt => match build_rt_constraints(scn, smp.t, &smp.est) {
            Ok(cons) => (
                joint_margin(scn.dim(), &cons, scn.config.controller.u_max),
                Vec3::zeros(),
            ),
            Err(_) => (f64::NEG_INFINITY, Vec3::zeros()),
        },
    }
}

fn verify(scn: &Scenario, t_mx: f64, mode: VerifyMode, early_exit: bool) -> Result<VerifyReport> {
    let scn = scn.with_horizon(t_mx)?;
    let q = match mode {
        VerifyMode::Rit => scn.q3().q3(),
        VerifyMode::Rt => scn.q4(),
    };
    let (samples, skipped) = draw_samples(&scn, mode, &q);
    if samples.is_empty() {
        return Err(Error::DomainEmpty);
    }
    let worst = if early_exit {
        samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| (i, margin_at(&scn, mode, s)))
            .find_any(|(_, (m, _))| *m < 0.0)
            .map(|(i, (m, u))| (i, m, u))
    } else {
        None
    };
    let (idx, margin, u) = match worst {
        Some(w) => w,
        None if early_exit => (0, 0.0, Vec3::zeros()),
        None => samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let (m, u) = margin_at(&scn, mode, s);
                (i, m, u)
            })
            .reduce(
                || (usize::MAX, f64::INFINITY, Vec3::zeros()),
                |a, b| {
                    if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                        b
                    } else {
                        a
                    }
                },
            ),
    };
    let s = scn.config.verifier;
    let witness = samples.get(idx).map(|smp| Witness {
        t: smp.t,
        x_hat: smp.est.x_hat,
        rho_hat: smp.est.rho_hat,
        margin,
        u,
    });
    Ok(VerifyReport {
        mode,
        t_mx,
        verified: margin >= 0.0,
        worst_margin: margin,
        witness: if early_exit && margin >= 0.0 {
            None
        } else {
            witness
        },
        sampler: SAMPLER.into(),
        seed: s.seed,
        samples_requested: s.samples,
        samples_evaluated: samples.len(),
        samples_outside_safe_set: skipped,
        time_window: [0.0, scn.reference.period()],
        rel_r_max: s.rel_r_max,
        rel_v_max: s.rel_v_max,
        uncertainty_bound: q,
        early_exit,
    })
}

/// Sampled check of the impulsive barrier condition at a candidate `T_M`.
pub fn verify_rit_cbf(scn: &Scenario, t_mx: f64) -> Result<VerifyReport> {
    verify(scn, t_mx, VerifyMode::Rit, false)
}

/// Sampled check of the continuous barrier condition at a candidate `T_M`.
pub fn verify_rt_cbf(scn: &Scenario, t_mx: f64) -> Result<VerifyReport> {
    verify(scn, t_mx, VerifyMode::Rt, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    #[serde(rename = "T_M")]
    pub t_mx: f64,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxHorizonReport {
    pub mode: VerifyMode,
    /// Largest verified `T_M` found.
    #[serde(rename = "T_M")]
    pub t_mx: f64,
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    pub probes: Vec<Probe>,
    /// Every verified probe lies below every failed probe.
    pub monotone: bool,
    pub sampler: String,
    pub seed: u64,
    pub samples: usize,
}

/// Bisection for the largest `T_M` passing verification.
pub fn max_horizon(
    scn: &Scenario,
    mode: VerifyMode,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<MaxHorizonReport> {
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::Bracket(format!(
            "need lo < hi and tol > 0 (lo = {lo}, hi = {hi}, tol = {tol})"
        )));
    }
    let mut probes = Vec::new();
    let probe = |t: f64, probes: &mut Vec<Probe>| -> Result<bool> {
        let ok = match verify(scn, t, mode, true) {
            Ok(r) => r.verified,
            Err(Error::Timing(e)) => return Err(Error::Bracket(format!("T_M = {t}: {e}"))),
            Err(Error::DomainEmpty) => false,
            Err(e) => return Err(e),
        };
        probes.push(Probe {
            t_mx: t,
            verified: ok,
        });
        Ok(ok)
    };
    if !probe(lo, &mut probes)? {
        return Err(Error::Bracket(format!("verification fails at lo = {lo}")));
    }
    let (mut a, mut b) = (lo, hi);
    if hi - lo > tol {
        if probe(hi, &mut probes)? {
            return Err(Error::Bracket(format!("verification passes at hi = {hi}")));
        }
        while b - a > tol {
            let mid = 0.5 * (a + b);
            if probe(mid, &mut probes)? {
                a = mid;
            } else {
                b = mid;
            }
        }
        for k in 1..4 {
            let t = lo + (a - lo) * k as f64 / 4.0;
            probe(t, &mut probes)?;
        }
    }
    let max_ok = probes
        .iter()
        .filter(|p| p.verified)
        .map(|p| p.t_mx)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_bad = probes
        .iter()
        .filter(|p| !p.verified)
        .map(|p| p.t_mx)
        .fold(f64::INFINITY, f64::min);
    Ok(MaxHorizonReport {
        mode,
        t_mx: a,
        lo,
        hi,
        tol,
        probes,
        monotone: max_ok < min_bad,
        sampler: SAMPLER.into(),
        seed: scn.config.verifier.seed,
        samples: scn.config.verifier.samples,
    })
}
