use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::qp::{solve_qp, QpProblem};
use crate::dynamics::{gravity, Vec3};
use crate::error::{Error, Result};
use crate::observer::EstimateState;
use crate::scenario::Scenario;

/// Affine condition `a . u <= c` enforcing `d/dt h_hat <= alpha(-h_hat)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RtConstraint {
    pub family: usize,
    pub a: Vec3,
    pub c: f64,
    pub h_hat: f64,
}

impl RtConstraint {
    pub fn residual(&self, u: &Vec3) -> f64 {
        self.a.dot(u) - self.c
    }
}

/// One constraint per family at the estimate `est`, with the actuation error
/// bounded by `W_g`. Lipschitz profiles are taken as locally constant.
pub fn build_rt_constraints(
    scn: &Scenario,
    t: f64,
    est: &EstimateState,
) -> Result<Vec<RtConstraint>> {
    let alpha = scn.config.controller.alpha_slope;
    let f = gravity(&est.x_hat.r, scn.mu());
    let rho = est.rho_hat;
    let rho_v_rate =
        scn.lip.l_fr * rho.rho_r + scn.lip.l_fv * rho.rho_v + scn.bounds.w_c + scn.w_g_sup();
    scn.families
        .iter()
        .map(|fam| {
            let c = fam.center_at(t);
            let e = fam.eval_with(&est.x_hat, &c)?;
            let lip = fam.lipschitz_with(&est.x_hat, &c, &rho);
            let h_hat = e.h + lip.dot(&rho);
            let drift = e.dh_dt
                + e.grad_r.dot(&est.x_hat.v)
                + e.grad_v.dot(&f)
                + lip.l_hr * rho.rho_v
                + lip.l_hv * rho_v_rate;
            Ok(RtConstraint {
                family: fam.index,
                a: e.grad_v,
                c: alpha * (-h_hat) - drift,
                h_hat,
            })
        })
        .collect()
}

fn to_problem(dim: usize, cons: &[RtConstraint], u_max: Option<f64>, shift: f64) -> QpProblem {
    let mut p = QpProblem::new(DVector::zeros(dim));
    for c in cons {
        p.push(
            DVector::from_iterator(dim, c.a.iter().take(dim).copied()),
            c.c - shift,
        );
    }
    p.u_max = u_max;
    p
}

/// Minimum-norm thrust satisfying every constraint and the per-axis bound.
pub fn qp_filter(scn: &Scenario, t: f64, est: &EstimateState) -> Result<(Vec3, Vec<RtConstraint>)> {
    let cons = build_rt_constraints(scn, t, est)?;
    Ok((solve_filter(scn, &cons)?, cons))
}

/// Minimum-norm thrust for prebuilt constraints.
pub fn solve_filter(scn: &Scenario, cons: &[RtConstraint]) -> Result<Vec3> {
    let dim = scn.dim();
    let sol = solve_qp(&to_problem(dim, cons, scn.config.controller.u_max, 0.0))?;
    let mut u = Vec3::zeros();
    for k in 0..dim {
        u[k] = sol.u[k];
    }
    Ok(u)
}

/// Thrust for an infeasible filter: the constraints are relaxed by the
/// smallest uniform amount that restores feasibility. Returns the relaxation.
pub fn relaxed_filter(scn: &Scenario, cons: &[RtConstraint]) -> Result<(Vec3, f64)> {
    let dim = scn.dim();
    let u_max = scn.config.controller.u_max;
    let s = joint_margin(dim, cons, u_max);
    let sol = solve_qp(&to_problem(dim, cons, u_max, s.min(0.0)))?;
    let mut u = Vec3::zeros();
    for k in 0..dim {
        u[k] = sol.u[k];
    }
    Ok((u, -s.min(0.0)))
}

/// Largest uniform tightening `s` for which `a_i . u <= c_i - s` stays
/// jointly feasible (negative when the constraints are already infeasible).
pub fn joint_margin(dim: usize, cons: &[RtConstraint], u_max: Option<f64>) -> f64 {
    let feasible = |s: f64| match solve_qp(&to_problem(dim, cons, u_max, s)) {
        Ok(_) => true,
        Err(Error::QpInfeasible) => false,
        Err(_) => false,
    };
    let scale = cons.iter().map(|c| c.c.abs()).fold(1e-9, f64::max);
    let (mut lo, mut hi);
    if feasible(0.0) {
        lo = 0.0;
        hi = scale;
        let mut n = 0;
        while feasible(hi) && n < 60 {
            lo = hi;
            hi *= 2.0;
            n += 1;
        }
    } else {
        hi = 0.0;
        lo = -scale;
        let mut n = 0;
        while !feasible(lo) && n < 60 {
            hi = lo;
            lo *= 2.0;
            n += 1;
        }
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 * scale {
            break;
        }
    }
    lo
}
