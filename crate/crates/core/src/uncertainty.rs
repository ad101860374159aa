//! Worst-case growth of the estimation error radii.
//!
//! Between jumps the radii `rho = (rho_r, rho_v)` obey the linear
//! time-invariant flow
//!
//! ```text
//! d/dt rho = A rho + [0; w],   A = [[0, 1], [l_fr, l_fv]]
//! ```
//!
//! so every tube used by the controller and the verifiers has a closed form.
//! Because `A` is a companion matrix, `e^{A t} = p0(t) I + p1(t) A`, and the
//! forced response `Phi(t) e2 = [q1(t); p1(t)]` with `q1 = int_0^t p1`. These
//! scalar coefficients are evaluated per eigenvalue branch without ever
//! inverting `A`, so `l_fr = 0` is handled exactly.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::timing::TimingConfig;

/// Radii of the position and velocity error balls.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UncertaintyBound {
    pub rho_r: f64,
    pub rho_v: f64,
}

impl UncertaintyBound {
    pub const ZERO: Self = Self {
        rho_r: 0.0,
        rho_v: 0.0,
    };

    pub fn new(rho_r: f64, rho_v: f64) -> Self {
        Self { rho_r, rho_v }
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.rho_r, self.rho_v)
    }

    pub fn from_vector(v: Vector2<f64>) -> Self {
        Self::new(v[0], v[1])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.rho_r * s, self.rho_v * s)
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.rho_r <= other.rho_r && self.rho_v <= other.rho_v
    }
}

impl std::ops::Add for UncertaintyBound {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.rho_r + o.rho_r, self.rho_v + o.rho_v)
    }
}

/// Lipschitz constants of the nominal acceleration in position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzPair {
    pub l_fr: f64,
    pub l_fv: f64,
}

impl LipschitzPair {
    pub fn new(l_fr: f64, l_fv: f64) -> Self {
        Self { l_fr, l_fv }
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(0.0, 1.0, self.l_fr, self.l_fv)
    }
}

/// Flow disturbance bound `w_c` and actuation error `w_g(l) = min(slope l, cap)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceBounds {
    pub w_c: f64,
    pub w_g_slope: f64,
    pub w_g_cap: f64,
}

impl DisturbanceBounds {
    pub fn new(w_c: f64, w_g_slope: f64, w_g_cap: f64) -> Self {
        Self {
            w_c,
            w_g_slope,
            w_g_cap,
        }
    }

    pub fn w_g(&self, magnitude: f64) -> f64 {
        (self.w_g_slope * magnitude).min(self.w_g_cap)
    }

    /// Supremum of `w_g` over inputs of norm at most `max_norm`
    /// (infinite `max_norm` gives the cap).
    pub fn sup_w_g(&self, max_norm: f64) -> f64 {
        if max_norm.is_finite() {
            self.w_g(max_norm)
        } else {
            self.w_g_cap
        }
    }
}

/// Scalar coefficients of the companion-matrix exponential at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompanionExp {
    pub p0: f64,
    pub p1: f64,
    /// `int_0^t p1(s) ds`.
    pub q1: f64,
    a: f64,
    b: f64,
}

/// Below this value of `(omega t)^2` the near-repeated series is used.
const SERIES_THRESHOLD: f64 = 1e-6;

impl CompanionExp {
    /// Coefficients for `A = [[0, 1], [a, b]]` at time `t >= 0`.
    /// `a` and `b` may be any reals; `q1` is accurate for `b >= 0`.
    pub fn new(t: f64, a: f64, b: f64) -> Self {
        let disc = b * b + 4.0 * a;
        let omega_sq = disc / 4.0;
        let c = b / 2.0;
        let x2 = omega_sq * t * t;
        let (p0, p1, q1) = if x2.abs() < SERIES_THRESHOLD {
            // cosh / sinhc series in (omega t)^2; valid for either sign.
            let mut cosh = 1.0;
            let mut sinhc = 1.0;
            let mut term_c = 1.0;
            let mut term_s = 1.0;
            for k in 1..6 {
                let k = k as f64;
                term_c *= x2 / ((2.0 * k - 1.0) * (2.0 * k));
                term_s *= x2 / ((2.0 * k) * (2.0 * k + 1.0));
                cosh += term_c;
                sinhc += term_s;
            }
            let ez = (c * t).exp();
            let s = t * sinhc;
            let p1 = ez * s;
            let p0 = ez * (cosh - c * s);
            // q1 = sum_k omega^{2k}/(2k+1)! t^{2k+2} g_{2k+1}(c t)
            let z = c * t;
            let mut q1 = 0.0;
            let mut coeff = 1.0; // omega^{2k} / (2k+1)!
            let mut tpow = t * t;
            for k in 0..4 {
                let m = 2 * k + 1;
                q1 += coeff * tpow * moment_exp(m, z);
                let kf = (k + 1) as f64;
                coeff *= omega_sq / ((2.0 * kf) * (2.0 * kf + 1.0));
                tpow *= t * t;
            }
            (p0, p1, q1)
        } else if disc > 0.0 {
            let omega = disc.sqrt() / 2.0;
            let (l1, l2) = if c >= 0.0 {
                let l1 = c + omega;
                (l1, -a / l1)
            } else {
                let l2 = c - omega;
                (-a / l2, l2)
            };
            let gap = 2.0 * omega;
            let e2 = (l2 * t).exp();
            let p1 = e2 * (gap * t).exp_m1() / gap;
            let p0 = e2 - l2 * p1;
            let q1 = (phi1(l1, t) - phi1(l2, t)) / gap;
            (p0, p1, q1)
        } else {
            let omega = (-disc).sqrt() / 2.0;
            let ez = (c * t).exp();
            let (sn, cs) = (omega * t).sin_cos();
            let s = sn / omega;
            let p1 = ez * s;
            let p0 = ez * (cs - c * s);
            let mod_sq = c * c + omega * omega;
            let q1 = (ez * (c * sn - omega * cs) + omega) / (omega * mod_sq);
            (p0, p1, q1)
        };
        Self { p0, p1, q1, a, b }
    }

    /// `e^{A t}`.
    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(
            self.p0,
            self.p1,
            self.a * self.p1,
            self.p0 + self.b * self.p1,
        )
    }

    /// `Phi(t) [0; 1] = int_0^t e^{A s} ds [0; 1]`.
    pub fn forcing(&self) -> Vector2<f64> {
        Vector2::new(self.q1, self.p1)
    }

    /// `e^{A t} rho + Phi(t) [0; w]`.
    pub fn apply(&self, rho: Vector2<f64>, w: f64) -> Vector2<f64> {
        let r = self.p0 * rho[0] + self.p1 * rho[1] + self.q1 * w;
        let v = self.a * self.p1 * rho[0] + (self.p0 + self.b * self.p1) * rho[1] + self.p1 * w;
        Vector2::new(r, v)
    }
}

/// `(e^{l t} - 1) / l`, equal to `t` at `l = 0`.
fn phi1(l: f64, t: f64) -> f64 {
    if l == 0.0 {
        t
    } else {
        (l * t).exp_m1() / l
    }
}

/// `int_0^1 x^m e^{z x} dx`.
fn moment_exp(m: usize, z: f64) -> f64 {
    if z.abs() <= 1.0 {
        let mut sum = 0.0;
        let mut zk = 1.0; // z^j / j!
        for j in 0..40 {
            let term = zk / (m + j + 1) as f64;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
            zk *= z / (j + 1) as f64;
        }
        sum
    } else {
        let ez = z.exp();
        let mut g = z.exp_m1() / z;
        for k in 1..=m {
            g = (ez - k as f64 * g) / z;
        }
        g
    }
}

/// `e^{A delta}` for the error-radius flow matrix.
pub fn expm_a(delta: f64, lip: &LipschitzPair) -> Matrix2<f64> {
    CompanionExp::new(delta, lip.l_fr, lip.l_fv).matrix()
}

/// Error radii after coasting `delta` seconds with flow disturbance `w_c`.
pub fn propagate_q(
    delta: f64,
    rho: UncertaintyBound,
    lip: &LipschitzPair,
    w_c: f64,
) -> UncertaintyBound {
    let e = CompanionExp::new(delta, lip.l_fr, lip.l_fv);
    UncertaintyBound::from_vector(e.apply(rho.as_vector(), w_c))
}

/// Continuous-actuation variant: the actuation error is bounded by `w_g_sup`.
pub fn propagate_q_star(
    delta: f64,
    rho: UncertaintyBound,
    lip: &LipschitzPair,
    w_c: f64,
    w_g_sup: f64,
) -> UncertaintyBound {
    propagate_q(delta, rho, lip, w_c + w_g_sup)
}

/// Components of the worst-case uncertainty present before an impulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreActuationBound {
    /// Coasting growth from the station's maximal error over `T_M - T_m`.
    pub q1: UncertaintyBound,
    /// Accumulated actuation error of all earlier impulses.
    pub q2: UncertaintyBound,
    /// Number of impulses that fit in `T_M - T_m`, including the pending one.
    pub impulses: u64,
}

impl PreActuationBound {
    pub fn q3(&self) -> UncertaintyBound {
        self.q1 + self.q2
    }
}

pub fn pre_actuation_bound_impulsive(
    cfg: &TimingConfig,
    lip: &LipschitzPair,
    w_c: f64,
    w_g_sup: f64,
    rho_max: UncertaintyBound,
) -> PreActuationBound {
    let span = (cfg.t_mx - cfg.t_m).max(0.0);
    let q1 = propagate_q(span, rho_max, lip, w_c);
    let impulses = 1 + (span / cfg.t_a).floor() as u64;
    let mut q2 = Vector2::zeros();
    if w_g_sup > 0.0 {
        for i in 1..impulses {
            let age = span - cfg.t_a * (i - 1) as f64;
            let e = CompanionExp::new(age, lip.l_fr, lip.l_fv);
            q2 += e.apply(Vector2::new(0.0, w_g_sup), 0.0);
        }
    }
    PreActuationBound {
        q1,
        q2: UncertaintyBound::from_vector(q2),
        impulses,
    }
}

/// Largest uncertainty between a measurement and an actuation under
/// continuous thrust.
pub fn pre_actuation_bound_continuous(
    cfg: &TimingConfig,
    lip: &LipschitzPair,
    w_c: f64,
    w_g_sup: f64,
    rho_max: UncertaintyBound,
) -> UncertaintyBound {
    propagate_q_star(cfg.t_mx, rho_max, lip, w_c, w_g_sup)
}
