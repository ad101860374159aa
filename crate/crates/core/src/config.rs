//! Serialized scenario description.

use serde::{Deserialize, Serialize};

use crate::cbf::VerifierSampling;
use crate::controller::ControllerConfig;
use crate::dynamics::{DisturbanceMode, OrbitSpec, StateDomain, MU_EARTH};
use crate::error::{Error, Result};
use crate::timing::TimingConfig;
use crate::uncertainty::LipschitzPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActuationMode {
    Impulsive,
    Continuous,
}

/// Timing constants; `T_L` defaults to `T_M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSpec {
    #[serde(rename = "T_s")]
    pub t_s: f64,
    #[serde(rename = "T_a")]
    pub t_a: f64,
    #[serde(rename = "T_m")]
    pub t_m: f64,
    #[serde(rename = "T_L", default, skip_serializing_if = "Option::is_none")]
    pub t_l: Option<f64>,
    #[serde(rename = "T_M")]
    pub t_mx: f64,
}

impl TimingSpec {
    pub fn timing(&self) -> TimingConfig {
        TimingConfig::new(
            self.t_s,
            self.t_a,
            self.t_m,
            self.t_l.unwrap_or(self.t_mx),
            self.t_mx,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSpec {
    pub w_c: f64,
    pub w_g_slope: f64,
    pub w_g_cap: f64,
    #[serde(default)]
    pub mode: DisturbanceMode,
}

fn one() -> f64 {
    1.0
}

fn noise_default() -> f64 {
    0.9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    /// Largest reported position radius, m.
    pub rho_r: f64,
    /// Largest reported velocity radius, m/s.
    pub rho_v: f64,
    /// Factor (at most 1) applied to the reported radii.
    #[serde(default = "one")]
    pub shrink_factor: f64,
    /// Truth is corrupted by noise uniform in this fraction of the radii.
    #[serde(default = "noise_default")]
    pub noise_fraction: f64,
    /// Measure exactly every `T_M` instead of uniformly in `[T_L, T_M]`.
    #[serde(default)]
    pub pin_interval: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    #[default]
    Inertial,
    /// Radial, along-track, cross-track axes of the reference orbit.
    Rtn,
    /// The same axes rotating with the reference: `dv` is the velocity seen
    /// by an observer riding on the reference orbit.
    Lvlh,
}

/// Initial truth as an offset from the reference orbit at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub dr: [f64; 3],
    pub dv: [f64; 3],
    #[serde(default)]
    pub frame: Frame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum BarrierSpec {
    ExclusionZone {
        center: OrbitSpec,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    Halfspace {
        center: OrbitSpec,
        normal: [f64; 3],
        offset: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    /// Twenty halfspaces of the regular icosahedron inscribed in a sphere.
    Icosahedron {
        center: OrbitSpec,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    /// Truth step; defaults to `min(T_s, 1 s) / 10`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_dt: Option<f64>,
    #[serde(default = "predict_tol_default")]
    pub predict_tol: f64,
}

fn predict_tol_default() -> f64 {
    crate::dynamics::PREDICT_RTOL
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            truth_dt: None,
            predict_tol: predict_tol_default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogSpec {
    /// Spacing of flow records, s; jumps are always logged. Defaults to `T_s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cadence: Option<f64>,
}

fn mu_default() -> f64 {
    MU_EARTH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: ActuationMode,
    pub dimension: usize,
    #[serde(default = "mu_default")]
    pub mu: f64,
    pub timing: TimingSpec,
    pub domain: StateDomain,
    /// Overrides the shell-derived Lipschitz constants of gravity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<LipschitzPair>,
    pub disturbances: DisturbanceSpec,
    pub measurement: MeasurementSpec,
    pub reference: OrbitSpec,
    pub initial: InitialSpec,
    pub barriers: Vec<BarrierSpec>,
    pub controller: ControllerConfig,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    pub verifier: VerifierSampling,
    #[serde(default)]
    pub log: LogSpec,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Replace one numeric field addressed by a dotted path such as `timing.T_M`.
    pub fn with_param(&self, path: &str, value: f64) -> Result<Self> {
        let mut doc = serde_json::to_value(self).expect("config serializes");
        let mut node = &mut doc;
        let keys: Vec<&str> = path.split('.').collect();
        for (depth, key) in keys.iter().enumerate() {
            let last = depth + 1 == keys.len();
            node = match node {
                serde_json::Value::Object(map) => {
                    if last && !map.contains_key(*key) {
                        map.insert(key.to_string(), serde_json::Value::Null);
                    }
                    map.get_mut(*key)
                        .ok_or_else(|| Error::Config(format!("unknown parameter path `{path}`")))?
                }
                serde_json::Value::Array(items) => {
                    let i: usize = key
                        .parse()
                        .map_err(|_| Error::Config(format!("unknown parameter path `{path}`")))?;
                    items
                        .get_mut(i)
                        .ok_or_else(|| Error::Config(format!("index out of range in `{path}`")))?
                }
                _ => return Err(Error::Config(format!("unknown parameter path `{path}`"))),
            };
        }
        *node = if value.fract() == 0.0 && value.abs() < 9.0e15 {
            serde_json::json!(value as i64)
        } else {
            serde_json::json!(value)
        };
        serde_json::from_value(doc).map_err(|e| Error::Config(format!("`{path}` = {value}: {e}")))
    }
}
