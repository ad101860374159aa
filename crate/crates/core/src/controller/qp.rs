//! Dense strictly convex QP `min |u - u_nom|^2  s.t.  a_i.u <= c_i, |u|_inf <= u_max`
//! solved by the Goldfarb-Idnani dual active-set method.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub u_nom: DVector<f64>,
    /// Rows `(a_i, c_i)` meaning `a_i . u <= c_i`.
    pub constraints: Vec<(DVector<f64>, f64)>,
    /// Componentwise bound on `u`, if any.
    pub u_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: DVector<f64>,
    /// Multipliers of the general rows followed by the box rows.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

pub const MAX_DIM: usize = 6;
pub const MAX_CONSTRAINTS: usize = 64;

impl QpProblem {
    pub fn new(u_nom: DVector<f64>) -> Self {
        Self {
            u_nom,
            constraints: Vec::new(),
            u_max: None,
        }
    }

    pub fn push(&mut self, a: DVector<f64>, c: f64) {
        self.constraints.push((a, c));
    }

    fn rows(&self) -> Vec<(DVector<f64>, f64)> {
        let n = self.u_nom.len();
        let mut rows = self.constraints.clone();
        if let Some(m) = self.u_max {
            for s in [1.0, -1.0] {
                for k in 0..n {
                    let mut a = DVector::zeros(n);
                    a[k] = s;
                    rows.push((a, m));
                }
            }
        }
        rows
    }

    fn validate(&self) -> Result<()> {
        let n = self.u_nom.len();
        if n == 0 || n > MAX_DIM {
            return Err(Error::QpMalformed(format!(
                "dimension {n} outside 1..={MAX_DIM}"
            )));
        }
        if self.constraints.len() > MAX_CONSTRAINTS {
            return Err(Error::QpMalformed(format!(
                "{} constraints exceed {MAX_CONSTRAINTS}",
                self.constraints.len()
            )));
        }
        let finite = self.u_nom.iter().all(|x| x.is_finite())
            && self
                .constraints
                .iter()
                .all(|(a, c)| a.len() == n && c.is_finite() && a.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::QpMalformed(
                "non-finite entry or wrong row length".into(),
            ));
        }
        if let Some(m) = self.u_max {
            if !(m >= 0.0) {
                return Err(Error::QpMalformed(format!("box bound {m} is negative")));
            }
        }
        Ok(())
    }
}

/// Pseudo-inverse pieces for the active normals `N` (columns): returns
/// `(I - N N^+) v` and `N^+ v`.
fn project(nmat: &[DVector<f64>], v: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    if nmat.is_empty() {
        return (v.clone(), DVector::zeros(0));
    }
    let n = v.len();
    let q = nmat.len();
    let m = DMatrix::from_fn(n, q, |i, j| nmat[j][i]);
    let gram = m.transpose() * &m;
    let rhs = m.transpose() * v;
    let r = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(q)),
    };
    let z = v - &m * &r;
    (z, r)
}

pub fn solve_qp(problem: &QpProblem) -> Result<QpSolution> {
    problem.validate()?;
    let rows = problem.rows();
    let m = rows.len();
    let scale = 1.0 + problem.u_nom.amax() + rows.iter().map(|(_, c)| c.abs()).fold(0.0, f64::max);
    let tol = 1e-12 * scale;
    let limit = 10 * m.max(1);
    // Goldfarb-Idnani works with n_i.x >= b_i; here n_i = -a_i, b_i = -c_i.
    let normals: Vec<DVector<f64>> = rows.iter().map(|(a, _)| -a).collect();
    let rhs: Vec<f64> = rows.iter().map(|(_, c)| -c).collect();
    let mut x = problem.u_nom.clone();
    let mut active: Vec<usize> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new();
    let mut iterations = 0;
    loop {
        let mut pick: Option<(usize, f64)> = None;
        for i in 0..m {
            if active.contains(&i) || normals[i].norm() == 0.0 {
                if normals[i].norm() == 0.0 && rhs[i] > tol {
                    return Err(Error::QpInfeasible);
                }
                continue;
            }
            let s = normals[i].dot(&x) - rhs[i];
            if s < -tol && pick.map_or(true, |(_, best)| s < best) {
                pick = Some((i, s));
            }
        }
        let Some((p, _)) = pick else { break };
        let mut lam_p = 0.0;
        loop {
            iterations += 1;
            if iterations > limit {
                return Err(Error::QpIterationLimit(limit));
            }
            let cols: Vec<DVector<f64>> = active.iter().map(|&j| normals[j].clone()).collect();
            let (z, r) = project(&cols, &normals[p]);
            let mut t1 = f64::INFINITY;
            let mut drop: Option<usize> = None;
            for (k, &rk) in r.iter().enumerate() {
                if rk > 1e-14 {
                    let ratio = lambda[k] / rk;
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(k);
                    }
                }
            }
            let zn = z.dot(&normals[p]);
            let s = normals[p].dot(&x) - rhs[p];
            let subtracted: f64 = r
                .iter()
                .zip(&active)
                .map(|(rk, &j)| rk.abs() * normals[j].norm())
                .sum();
            let z_floor = 1e-10 * (normals[p].norm() + subtracted);
            let t2 = if z.norm() > z_floor && zn > 0.0 {
                -s / zn
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if t.is_infinite() {
                return Err(Error::QpInfeasible);
            }
            if t2.is_finite() {
                x += &z * t;
            }
            for (k, rk) in r.iter().enumerate() {
                lambda[k] -= t * rk;
            }
            lam_p += t;
            if t2 <= t1 {
                active.push(p);
                lambda.push(lam_p);
                break;
            }
            let k = drop.expect("partial step drops a constraint");
            active.remove(k);
            lambda.remove(k);
            if normals[p].dot(&x) - rhs[p] >= -tol {
                active.push(p);
                lambda.push(lam_p);
                break;
            }
        }
    }
    let mut multipliers = vec![0.0; m];
    for (k, &j) in active.iter().enumerate() {
        multipliers[j] = lambda[k].max(0.0);
    }
    if !active.is_empty() {
        // re-solve the equality-constrained projection on the final active set
        let cols: Vec<DVector<f64>> = active.iter().map(|&j| rows[j].0.clone()).collect();
        let n = x.len();
        let a = DMatrix::from_fn(active.len(), n, |i, k| cols[i][k]);
        let c = DVector::from_iterator(active.len(), active.iter().map(|&j| rows[j].1));
        if let Some(mu) = (&a * a.transpose()).lu().solve(&(&a * &problem.u_nom - c)) {
            let polished = &problem.u_nom - a.transpose() * &mu;
            if mu.iter().all(|v| *v >= 0.0 && v.is_finite())
                && max_violation(&rows, &polished) <= max_violation(&rows, &x).max(tol)
            {
                x = polished;
                for (k, &j) in active.iter().enumerate() {
                    multipliers[j] = mu[k];
                }
            }
        }
    }
    Ok(QpSolution {
        u: x,
        multipliers,
        iterations,
    })
}

fn max_violation(rows: &[(DVector<f64>, f64)], x: &DVector<f64>) -> f64 {
    rows.iter().map(|(a, c)| a.dot(x) - c).fold(0.0, f64::max)
}

/// Largest KKT residual of a solution: stationarity, primal feasibility,
/// complementarity and dual sign.
pub fn kkt_residual(problem: &QpProblem, sol: &QpSolution) -> f64 {
    let rows = problem.rows();
    let mut grad = &sol.u - &problem.u_nom;
    let mut scale = 1.0 + grad.amax();
    let mut worst: f64 = 0.0;
    for ((a, c), &mu) in rows.iter().zip(&sol.multipliers) {
        grad += a * mu;
        scale += mu.abs() * a.amax();
        let slack = a.dot(&sol.u) - c;
        let row_scale = 1.0 + a.amax() * sol.u.amax() + c.abs();
        worst = worst
            .max(slack / row_scale)
            .max(-mu)
            .max((mu * slack).abs() / ((1.0 + mu.abs()) * row_scale));
    }
    worst.max(grad.amax() / scale)
}
