//! Independent reference computations used by the integration tests.

use nalgebra::{Matrix2, Vector2, Vector3};

/// `e^{M}` by scaling and squaring of a truncated Taylor series.
pub fn series_expm(m: Matrix2<f64>) -> Matrix2<f64> {
    let norm = m.amax() * 2.0;
    let mut s = 0;
    while norm / f64::powi(2.0, s) > 0.25 {
        s += 1;
    }
    let scaled = m / f64::powi(2.0, s);
    let mut sum = Matrix2::identity();
    let mut term = Matrix2::identity();
    for k in 1..30 {
        term = term * scaled / k as f64;
        sum += term;
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

/// RK4 integration of `rho' = A rho + [0; w]` with a fixed step.
pub fn rk4_tube(a: Matrix2<f64>, rho0: Vector2<f64>, w: f64, t: f64, h: f64) -> Vector2<f64> {
    let f = |x: Vector2<f64>| a * x + Vector2::new(0.0, w);
    let steps = (t / h).ceil() as usize;
    let mut x = rho0;
    let mut carry = Vector2::zeros();
    for k in 0..steps {
        let dt = if k + 1 == steps { t - h * k as f64 } else { h };
        let k1 = f(x);
        let k2 = f(x + k1 * (dt / 2.0));
        let k3 = f(x + k2 * (dt / 2.0));
        let k4 = f(x + k3 * dt);
        // Kahan-compensated update
        let inc = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0) - carry;
        let next = x + inc;
        carry = (next - x) - inc;
        x = next;
    }
    x
}

/// Largest accumulated actuation error over admissible impulse schedules.
///
/// Earlier impulses occupy a 1 s grid over `[0, span - t_a]` with spacing at
/// least `t_a`; each component of the summed response is maximised
/// separately by dynamic programming.
pub fn q2_dp(a: Matrix2<f64>, span: f64, t_a: f64, w_g: f64) -> Vector2<f64> {
    if span < t_a {
        return Vector2::zeros();
    }
    let last = (span - t_a).floor() as usize;
    let gap = t_a.ceil() as usize;
    let mut out = Vector2::zeros();
    for comp in 0..2 {
        let gain = |k: usize| {
            let e = series_expm(a * (span - k as f64));
            e[(comp, 1)] * w_g
        };
        let mut best = vec![0.0f64; last + gap + 2];
        for k in (0..=last).rev() {
            let take = gain(k) + best[k + gap];
            best[k] = best[k + 1].max(take);
        }
        out[comp] = best[0];
    }
    out
}

/// Two-body trajectory by classical RK4 with a fixed step, sampled at
/// `times` (ascending, starting at or after `t0`). Returns `(r, v)` pairs.
pub fn rk4_two_body(
    mu: f64,
    r0: Vector3<f64>,
    v0: Vector3<f64>,
    t0: f64,
    times: &[f64],
    h: f64,
) -> Vec<(Vector3<f64>, Vector3<f64>)> {
    let acc = |r: &Vector3<f64>| -mu * r / r.norm().powi(3);
    let mut out = Vec::with_capacity(times.len());
    let (mut r, mut v, mut t) = (r0, v0, t0);
    for &target in times {
        while target - t > 0.0 {
            let dt = h.min(target - t);
            let k1r = v;
            let k1v = acc(&r);
            let k2r = v + k1v * (dt / 2.0);
            let k2v = acc(&(r + k1r * (dt / 2.0)));
            let k3r = v + k2v * (dt / 2.0);
            let k3v = acc(&(r + k2r * (dt / 2.0)));
            let k4r = v + k3v * dt;
            let k4v = acc(&(r + k3r * dt));
            r += (k1r + k2r * 2.0 + k3r * 2.0 + k4r) * (dt / 6.0);
            v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0);
            t = if dt == h { t + dt } else { target };
        }
        out.push((r, v));
    }
    out
}
