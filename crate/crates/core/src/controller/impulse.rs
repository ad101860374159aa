use std::cell::Cell;

use serde::{Deserialize, Serialize};

use super::{ImpulseObjective, Policy};
use crate::cbf::{BarrierFamily, Horizon};
use crate::dynamics::{PlantState, Vec3};
use crate::observer::EstimateState;
use crate::scenario::Scenario;
use crate::timing::{is_guaranteed_opportunity, is_impulse_opportunity, Timers};
use crate::uncertainty::{propagate_q, UncertaintyBound};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// Run the full search and return the smallest bound found.
    Minimize,
    /// Stop at the first impulse whose bound is nonpositive.
    FirstFeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpulseResult {
    pub u: Vec3,
    /// Largest `psi_h + l_h^p . q` over the families at `u`.
    pub bound: f64,
    pub evaluations: usize,
}

/// Bound on every barrier until `t + delta` when coasting from `est`.
/// Returns the worst value and its family; prediction failures give `+inf`.
pub fn coast_bound(scn: &Scenario, hz: &Horizon, est: &EstimateState) -> (f64, usize) {
    let delta = hz.tau() - hz.t();
    let q = propagate_q(delta, est.rho_hat, &scn.lip, scn.bounds.w_c);
    hz.worst(&est.x_hat, &q).unwrap_or((f64::INFINITY, 0))
}

struct Evaluator<'a> {
    scn: &'a Scenario,
    hz: Horizon<'a>,
    est: EstimateState,
    delta: f64,
    calls: Cell<usize>,
}

impl Evaluator<'_> {
    fn bound(&self, u: &Vec3) -> (f64, usize) {
        self.calls.set(self.calls.get() + 1);
        let x = PlantState::new(self.est.x_hat.r, self.est.x_hat.v + u);
        let rho = UncertaintyBound::new(
            self.est.rho_hat.rho_r,
            self.est.rho_hat.rho_v + self.scn.bounds.w_g(u.norm()),
        );
        let q = propagate_q(self.delta, rho, &self.scn.lip, self.scn.bounds.w_c);
        self.hz.worst(&x, &q).unwrap_or((f64::INFINITY, 0))
    }

    fn j(&self, u: &Vec3) -> f64 {
        self.bound(u).0
    }
}

fn start_directions(dim: usize, count: usize) -> Vec<Vec3> {
    if dim == 2 {
        return (0..count)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / count as f64;
                Vec3::new(th.cos(), th.sin(), 0.0)
            })
            .collect();
    }
    if count == 26 {
        let mut out = Vec::with_capacity(26);
        for x in -1i32..=1 {
            for y in -1i32..=1 {
                for z in -1i32..=1 {
                    if (x, y, z) != (0, 0, 0) {
                        out.push(Vec3::new(x as f64, y as f64, z as f64).normalize());
                    }
                }
            }
        }
        return out;
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
            let s = (1.0 - z * z).sqrt();
            let th = golden * k as f64;
            Vec3::new(s * th.cos(), s * th.sin(), z)
        })
        .collect()
}

fn clamp_ball(u: Vec3, u_max: f64, dim: usize) -> Vec3 {
    let mut u = u;
    if dim == 2 {
        u.z = 0.0;
    }
    let n = u.norm();
    if n > u_max {
        u * (u_max / n)
    } else {
        u
    }
}

/// Search the impulse ball for a command making the bound over
/// `[t, t + delta]` nonpositive.
pub fn impulse_search(
    scn: &Scenario,
    est: &EstimateState,
    t: f64,
    delta: f64,
    mode: SearchMode,
    objective: ImpulseObjective,
) -> ImpulseResult {
    let families: &[BarrierFamily] = &scn.families;
    let ev = Evaluator {
        scn,
        hz: Horizon::new(families, &scn.ctx(), t, t + delta),
        est: *est,
        delta,
        calls: Cell::new(0),
    };
    let u_max = scn.u_norm_max();
    let dim = scn.dim();
    let done = |j: f64| mode == SearchMode::FirstFeasible && j <= 0.0;
    let finish = |u: Vec3, j: f64| ImpulseResult {
        u,
        bound: j,
        evaluations: ev.calls.get(),
    };

    let (j0, worst) = ev.bound(&Vec3::zeros());
    let mut best = (Vec3::zeros(), j0);
    if done(j0) || !(u_max > 0.0) {
        return finish(best.0, best.1);
    }
    let mut starts: Vec<Vec3> = Vec::new();
    let fam = &families[worst];
    if let Ok(e) = fam.h_eval(t, &est.x_hat) {
        if let Some(away) = (-e.grad_v).try_normalize(0.0) {
            let away = clamp_ball(away, 1.0, dim)
                .try_normalize(0.0)
                .unwrap_or(away);
            for s in [1.0, 2.0 / 3.0, 1.0 / 3.0] {
                starts.push(away * (s * u_max));
            }
        }
    }
    let ms = scn.config.controller.multistart;
    for d in start_directions(dim, ms.directions) {
        for k in 1..=ms.magnitudes {
            starts.push(d * (u_max * k as f64 / ms.magnitudes as f64));
        }
    }
    for u in starts {
        let j = ev.j(&u);
        if j < best.1 {
            best = (u, j);
            if done(j) {
                return finish(best.0, best.1);
            }
        }
    }
    best = nelder_mead(&ev, best, u_max, dim, ms.iterations, mode);
    if mode == SearchMode::Minimize && best.1 <= 0.0 {
        if let ImpulseObjective::MinNorm { slack } = objective {
            best = shrink(&ev, best, -slack);
        }
    }
    finish(best.0, best.1)
}

fn nelder_mead(
    ev: &Evaluator,
    start: (Vec3, f64),
    u_max: f64,
    dim: usize,
    iterations: usize,
    mode: SearchMode,
) -> (Vec3, f64) {
    let tol = 1e-6 * u_max;
    let f = |u: &Vec3| {
        let c = clamp_ball(*u, u_max, dim);
        (c, ev.j(&c))
    };
    let mut simplex: Vec<(Vec3, f64)> = vec![start];
    for k in 0..dim {
        let mut u = start.0;
        u[k] += 0.1 * u_max;
        simplex.push(f(&u));
    }
    let sort = |s: &mut Vec<(Vec3, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    sort(&mut simplex);
    for _ in 0..iterations {
        if mode == SearchMode::FirstFeasible && simplex[0].1 <= 0.0 {
            break;
        }
        let diameter = simplex[1..]
            .iter()
            .map(|(u, _)| (u - simplex[0].0).norm())
            .fold(0.0, f64::max);
        if diameter < tol {
            break;
        }
        let n = simplex.len() - 1;
        let centroid = simplex[..n].iter().map(|(u, _)| *u).sum::<Vec3>() / n as f64;
        let worst = simplex[n];
        let reflect = f(&(centroid + (centroid - worst.0)));
        if reflect.1 < simplex[0].1 {
            let expand = f(&(centroid + (centroid - worst.0) * 2.0));
            simplex[n] = if expand.1 < reflect.1 {
                expand
            } else {
                reflect
            };
        } else if reflect.1 < simplex[n - 1].1 {
            simplex[n] = reflect;
        } else {
            let contract = if reflect.1 < worst.1 {
                f(&(centroid + (reflect.0 - centroid) * 0.5))
            } else {
                f(&(centroid + (worst.0 - centroid) * 0.5))
            };
            if contract.1 < worst.1.min(reflect.1) {
                simplex[n] = contract;
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    *v = f(&(best + (v.0 - best) * 0.5));
                }
            }
        }
        sort(&mut simplex);
    }
    simplex[0]
}

/// Smallest multiple of the best impulse whose bound stays below
/// `max(best bound, floor)`.
fn shrink(ev: &Evaluator, best: (Vec3, f64), floor: f64) -> (Vec3, f64) {
    let target = best.1.max(floor);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut kept = best;
    let j0 = ev.j(&Vec3::zeros());
    if j0 <= target {
        return (Vec3::zeros(), j0);
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        let u = best.0 * mid;
        let j = ev.j(&u);
        if j <= target {
            hi = mid;
            kept = (u, j);
        } else {
            lo = mid;
        }
        if hi - lo < 1e-4 {
            break;
        }
    }
    kept
}

/// The impulse program at a sample instant, over the horizon `delta_2`.
pub fn impulse_program(scn: &Scenario, est: &EstimateState, t: f64, sigma_m: f64) -> ImpulseResult {
    let delta = scn.timing.horizon_delta2(sigma_m);
    impulse_search(
        scn,
        est,
        t,
        delta,
        SearchMode::Minimize,
        scn.config.controller.impulse_objective,
    )
}

/// Per measurement cycle controller memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CycleState {
    pub actuated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    /// Coasting is certified until the next guaranteed opportunity.
    Coast,
    /// An impulse with a nonpositive bound over `delta_2`.
    Impulse,
    /// No actuation possible now; the previous certificate still covers
    /// the time until the next guaranteed opportunity.
    CoastCovered,
    /// Neither condition could be met at an opportunity.
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpulsiveDecision {
    pub b: bool,
    pub u: Vec3,
    pub kind: DecisionKind,
    /// Bound certified by the decision (or the best found when infeasible).
    pub margin: f64,
    pub horizon: f64,
    /// Best impulse found when infeasible.
    pub fallback: Vec3,
}

impl ImpulsiveDecision {
    fn coast(kind: DecisionKind, margin: f64, horizon: f64) -> Self {
        Self {
            b: false,
            u: Vec3::zeros(),
            kind,
            margin,
            horizon,
            fallback: Vec3::zeros(),
        }
    }
}

/// Coast-or-impulse decision at a sample instant.
pub fn decide_impulsive(
    scn: &Scenario,
    est: &EstimateState,
    t: f64,
    timers: &Timers,
    cycle: &mut CycleState,
) -> ImpulsiveDecision {
    let timing = &scn.timing;
    let delta1 = timing.horizon_delta1(timers.sigma_m);
    let coast_hz = Horizon::new(&scn.families, &scn.ctx(), t, t + delta1);
    let (coast, _) = coast_bound(scn, &coast_hz, est);
    let opportunity = is_impulse_opportunity(timers, timing);
    let force = scn.config.controller.policy == Policy::AlwaysActuate
        && !cycle.actuated
        && is_guaranteed_opportunity(timers, timing);
    if coast <= 0.0 && !force {
        return ImpulsiveDecision::coast(DecisionKind::Coast, coast, delta1);
    }
    if !opportunity {
        return ImpulsiveDecision::coast(DecisionKind::CoastCovered, coast, delta1);
    }
    let res = impulse_program(scn, est, t, timers.sigma_m);
    let delta2 = timing.horizon_delta2(timers.sigma_m);
    if res.bound <= 0.0 && !(res.u == Vec3::zeros() && coast <= 0.0) {
        cycle.actuated = true;
        return ImpulsiveDecision {
            b: true,
            u: res.u,
            kind: DecisionKind::Impulse,
            margin: res.bound,
            horizon: delta2,
            fallback: res.u,
        };
    }
    if coast <= 0.0 {
        return ImpulsiveDecision::coast(DecisionKind::Coast, coast, delta1);
    }
    ImpulsiveDecision {
        b: false,
        u: Vec3::zeros(),
        kind: DecisionKind::Infeasible,
        margin: res.bound,
        horizon: delta2,
        fallback: res.u,
    }
}
