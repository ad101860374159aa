use super::{nominal_accel, PlantState, StateDomain, Vec3};
use crate::error::{Error, Result};

/// Relative tolerance of the adaptive prediction integrator.
pub const PREDICT_RTOL: f64 = 1e-10;

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B_LOW: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

type Deriv = (Vec3, Vec3);

struct Rk45<'a> {
    mu: f64,
    domain: &'a StateDomain,
    rtol: f64,
}

impl Rk45<'_> {
    fn f(&self, x: &PlantState) -> Result<Deriv> {
        Ok((x.v, nominal_accel(&x.r, self.mu, self.domain.r_min)?))
    }

    /// One Dormand-Prince step; returns the 5th-order state and the scaled error.
    fn step(&self, x: &PlantState, k1: &Deriv, h: f64) -> Result<(PlantState, Deriv, f64)> {
        let mut k: [Deriv; 7] = [*k1; 7];
        for s in 1..7 {
            let mut r = x.r;
            let mut v = x.v;
            for (j, kj) in k.iter().enumerate().take(s) {
                let aij = A[s][j];
                if aij != 0.0 {
                    r += kj.0 * (h * aij);
                    v += kj.1 * (h * aij);
                }
            }
            k[s] = self.f(&PlantState::new(r, v))?;
        }
        let mut r = x.r;
        let mut v = x.v;
        let mut er = Vec3::zeros();
        let mut ev = Vec3::zeros();
        for s in 0..7 {
            r += k[s].0 * (h * B[s]);
            v += k[s].1 * (h * B[s]);
            let d = B[s] - B_LOW[s];
            er += k[s].0 * (h * d);
            ev += k[s].1 * (h * d);
        }
        let scale_r = self.rtol * x.r.norm().max(r.norm());
        let scale_v = self.rtol * x.v.norm().max(v.norm()).max(1e-30);
        let err = (er.norm() / scale_r).max(ev.norm() / scale_v);
        Ok((PlantState::new(r, v), k[6], err))
    }
}

/// Nominal state at each requested time (non-decreasing, all `>= t`),
/// integrated once through all of them.
pub fn predict_many(
    t: f64,
    x: &PlantState,
    taus: &[f64],
    mu: f64,
    domain: &StateDomain,
    rtol: f64,
) -> Result<Vec<PlantState>> {
    let ig = Rk45 { mu, domain, rtol };
    let mut out = Vec::with_capacity(taus.len());
    let mut cur = *x;
    let mut now = t;
    let mut k1 = ig.f(&cur)?;
    let mut h = 0.0f64;
    for &tau in taus {
        if tau < now {
            return Err(Error::Config(format!(
                "prediction times must be non-decreasing and >= t ({tau} < {now})"
            )));
        }
        while now < tau {
            if h <= 0.0 {
                let rn = cur.r.norm();
                h = 0.01 * (rn * rn * rn / mu).sqrt();
            }
            let remaining = tau - now;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            let (next, k7, err) = ig.step(&cur, &k1, step)?;
            if err <= 1.0 {
                cur = next;
                k1 = k7;
                now = if last { tau } else { now + step };
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if !(last && err <= 1.0) || factor < 1.0 {
                h = step * factor;
            }
            if !(h > 1e-9 * (1.0 + now.abs())) {
                return Err(Error::StepSize(h));
            }
        }
        out.push(cur);
    }
    Ok(out)
}

/// `p(tau, t, x)`: nominal coast from `(t, x)` to `tau`.
pub fn predict_p(
    tau: f64,
    t: f64,
    x: &PlantState,
    mu: f64,
    domain: &StateDomain,
) -> Result<PlantState> {
    if tau == t {
        return Ok(*x);
    }
    Ok(predict_many(t, x, &[tau], mu, domain, PREDICT_RTOL)?[0])
}
