//! Timers, timing constants, jump-set classification and the look-ahead
//! horizons used by the impulsive safety conditions.
//!
//! The three timers count down during flow:
//!
//! * `sigma_s`: time until the next controller sample, in `[0, T_s]`;
//! * `sigma_a`: actuator cool-down, in `(-inf, T_a]`, actuation allowed when `<= 0`;
//! * `sigma_m`: time until the next measurement, in `[0, T_M]`.
//!
//! Zero tests are exact: the executor snaps the clock to scheduled event
//! timestamps, so a timer that is due reads exactly `0.0`.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Timing constants of the sampled, dwell-time constrained actuator and the
/// sporadic measurement schedule (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    /// Controller sample period.
    #[serde(rename = "T_s")]
    pub t_s: f64,
    /// Minimum dwell between nonzero impulses.
    #[serde(rename = "T_a")]
    pub t_a: f64,
    /// Blackout before each measurement during which no impulse may fire.
    #[serde(rename = "T_m")]
    pub t_m: f64,
    /// Minimum time between measurements.
    #[serde(rename = "T_L")]
    pub t_l: f64,
    /// Maximum time between measurements.
    #[serde(rename = "T_M")]
    pub t_mx: f64,
}

/// The inequality a [`TimingConfig`] failed.
#[derive(Debug, Clone, PartialEq)]
pub enum TimingViolation {
    NonPositive {
        name: &'static str,
        value: f64,
    },
    Negative {
        name: &'static str,
        value: f64,
    },
    /// `T_L <= T_m + T_s + max(T_a - T_m, 0)`: a measurement cycle may pass
    /// without a guaranteed impulse opportunity.
    GuaranteedOpportunity {
        t_l: f64,
        required: f64,
    },
    /// `T_L > T_M`.
    IntervalOrder {
        t_l: f64,
        t_mx: f64,
    },
}

impl fmt::Display for TimingViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimingViolation::NonPositive { name, value } => {
                write!(f, "{name} must be > 0 (got {value})")
            }
            TimingViolation::Negative { name, value } => {
                write!(f, "{name} must be >= 0 (got {value})")
            }
            TimingViolation::GuaranteedOpportunity { t_l, required } => write!(
                f,
                "T_L > T_m + T_s + max(T_a - T_m, 0) violated: T_L = {t_l} <= {required}"
            ),
            TimingViolation::IntervalOrder { t_l, t_mx } => {
                write!(f, "T_L <= T_M violated: T_L = {t_l} > T_M = {t_mx}")
            }
        }
    }
}

impl std::error::Error for TimingViolation {}

impl TimingConfig {
    pub fn new(t_s: f64, t_a: f64, t_m: f64, t_l: f64, t_mx: f64) -> Self {
        Self {
            t_s,
            t_a,
            t_m,
            t_l,
            t_mx,
        }
    }

    /// Checks positivity, `T_L <= T_M`, and that every measurement cycle
    /// contains at least one guaranteed impulse opportunity.
    pub fn validate(&self) -> Result<(), TimingViolation> {
        for (name, value) in [
            ("T_s", self.t_s),
            ("T_a", self.t_a),
            ("T_L", self.t_l),
            ("T_M", self.t_mx),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(TimingViolation::NonPositive { name, value });
            }
        }
        if !(self.t_m >= 0.0) || !self.t_m.is_finite() {
            return Err(TimingViolation::Negative {
                name: "T_m",
                value: self.t_m,
            });
        }
        if self.t_l > self.t_mx {
            return Err(TimingViolation::IntervalOrder {
                t_l: self.t_l,
                t_mx: self.t_mx,
            });
        }
        let required = self.t_m + self.t_s + (self.t_a - self.t_m).max(0.0);
        if !(self.t_l > required) {
            return Err(TimingViolation::GuaranteedOpportunity {
                t_l: self.t_l,
                required,
            });
        }
        Ok(())
    }

    /// Look-ahead after choosing to coast: the next guaranteed impulse
    /// opportunity occurs no later than this.
    pub fn horizon_delta1(&self, sigma_m: f64) -> f64 {
        if sigma_m <= self.t_m + self.t_s {
            sigma_m + self.t_s
        } else {
            self.t_s
        }
    }

    /// Look-ahead after firing an impulse.
    pub fn horizon_delta2(&self, sigma_m: f64) -> f64 {
        if sigma_m <= self.t_a + self.t_m + self.t_s {
            sigma_m.max(self.t_a) + self.t_s
        } else {
            self.t_a + self.t_s
        }
    }

    /// Uniform upper bound on [`horizon_delta2`](Self::horizon_delta2).
    pub fn delta_r(&self) -> f64 {
        self.t_a + self.t_m + 2.0 * self.t_s
    }
}

/// Timer triple `(sigma_s, sigma_a, sigma_m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timers {
    pub sigma_s: f64,
    pub sigma_a: f64,
    pub sigma_m: f64,
}

impl Timers {
    pub fn new(sigma_s: f64, sigma_a: f64, sigma_m: f64) -> Self {
        Self {
            sigma_s,
            sigma_a,
            sigma_m,
        }
    }

    /// Membership in the timer set `[0,T_s] x (-inf,T_a] x [0,T_M]`.
    pub fn in_domain(&self, cfg: &TimingConfig) -> bool {
        (0.0..=cfg.t_s).contains(&self.sigma_s)
            && self.sigma_a <= cfg.t_a
            && (0.0..=cfg.t_mx).contains(&self.sigma_m)
    }
}

/// Hybrid time `(t, j)`, ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct HybridTime {
    pub t: f64,
    pub j: u64,
}

impl HybridTime {
    pub fn new(t: f64, j: u64) -> Self {
        Self { t, j }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JumpLabel {
    Measure,
    Actuate,
    SampleReset,
}

impl JumpLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            JumpLabel::Measure => "measure",
            JumpLabel::Actuate => "actuate",
            JumpLabel::SampleReset => "sample_reset",
        }
    }
}

/// Jump labels whose jump set contains `(b, sigma)`. Empty means flow.
///
/// Returned in executor priority order (Measure, Actuate, SampleReset).
pub fn classify_jumps(b: bool, sigma: &Timers, cfg: &TimingConfig) -> Vec<JumpLabel> {
    let mut labels = Vec::with_capacity(2);
    if sigma.sigma_m == 0.0 {
        labels.push(JumpLabel::Measure);
    }
    if sigma.sigma_s == 0.0 {
        if is_impulse_opportunity(sigma, cfg) && b {
            labels.push(JumpLabel::Actuate);
        }
        if sigma.sigma_a >= 0.0 || sigma.sigma_m <= cfg.t_m || !b {
            labels.push(JumpLabel::SampleReset);
        }
    }
    labels
}

/// `sigma_s = 0`, cool-down elapsed, and outside the measurement blackout.
pub fn is_impulse_opportunity(sigma: &Timers, cfg: &TimingConfig) -> bool {
    sigma.sigma_s == 0.0 && sigma.sigma_a <= 0.0 && sigma.sigma_m >= cfg.t_m
}

/// Strict interior of the opportunity set, where the choice of `b` alone
/// decides between Actuate and SampleReset.
pub fn is_guaranteed_opportunity(sigma: &Timers, cfg: &TimingConfig) -> bool {
    sigma.sigma_s == 0.0 && sigma.sigma_a < 0.0 && sigma.sigma_m > cfg.t_m
}
