//! Hybrid executor, scenario builders and Monte Carlo runner.

mod monte_carlo;
mod scenarios;
mod station;

pub use monte_carlo::{monte_carlo, worker_count, MonteCarloReport};
pub use scenarios::{build_rendezvous_scenario, build_stationkeeping_scenario};
pub use station::GroundStation;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cbf::CenterState;
use crate::config::{ActuationMode, ScenarioConfig};
use crate::controller::{
    build_rt_constraints, decide_impulsive, relaxed_filter, solve_filter, CycleState, DecisionKind,
    InfeasiblePolicy,
};
use crate::dynamics::{
    apply_impulse, true_flow_step, DisturbanceGenerator, DisturbanceMode, KeplerOrbit, PlantState,
    Vec3,
};
use crate::error::{Error, Result};
use crate::observer::{
    observer_actuation_jump, observer_flow_step, observer_measurement_jump, EstimateState,
    ObserverModel,
};
use crate::scenario::Scenario;
use crate::timing::{classify_jumps, HybridTime, JumpLabel, Timers};
use crate::uncertainty::UncertaintyBound;

/// Most jumps allowed at one instant.
pub const ZENO_LIMIT: usize = 3;

/// What produced a log record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    Flow,
    Jump(JumpLabel),
}

impl Event {
    pub fn as_str(&self) -> &'static str {
        match self {
            Event::Flow => "flow",
            Event::Jump(l) => l.as_str(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "flow" => Event::Flow,
            "measure" => Event::Jump(JumpLabel::Measure),
            "actuate" => Event::Jump(JumpLabel::Actuate),
            "sample_reset" => Event::Jump(JumpLabel::SampleReset),
            _ => return None,
        })
    }
}

/// Annotations on a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Accepted,
    Rejected,
    Coast,
    CoastCovered,
    Impulse,
    Infeasible,
    Unsound,
    Violation,
}

impl Flag {
    pub const ALL: [Flag; 8] = [
        Flag::Accepted,
        Flag::Rejected,
        Flag::Coast,
        Flag::CoastCovered,
        Flag::Impulse,
        Flag::Infeasible,
        Flag::Unsound,
        Flag::Violation,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::Accepted => "accepted",
            Flag::Rejected => "rejected",
            Flag::Coast => "coast",
            Flag::CoastCovered => "coast_covered",
            Flag::Impulse => "impulse",
            Flag::Infeasible => "infeasible",
            Flag::Unsound => "unsound",
            Flag::Violation => "violation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

/// One logged hybrid-time sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub time: HybridTime,
    pub event: Event,
    pub truth: PlantState,
    pub est: EstimateState,
    pub timers: Timers,
    pub b: bool,
    pub u: Vec3,
    pub h: Vec<f64>,
    pub h_hat: Vec<f64>,
    pub flags: Vec<Flag>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub dimension: usize,
    pub families: usize,
    pub records: Vec<Record>,
}

/// Summary of one run. Safety and soundness counters are evaluated at every
/// truth integration step and every jump, not only at logged samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub name: String,
    pub seed: u64,
    pub mode: ActuationMode,
    pub duration: f64,
    pub max_h: Vec<f64>,
    pub max_h_overall: f64,
    /// Instants after the first jump with some true `h_i > 0`.
    pub violations: usize,
    pub measurements_accepted: usize,
    pub measurements_rejected: usize,
    pub impulses: usize,
    /// Sum of impulse magnitudes (m/s).
    pub total_dv: f64,
    /// Integral of the continuous thrust norm (m/s).
    pub control_effort: f64,
    pub max_u_norm: f64,
    pub infeasible_events: usize,
    /// Samples where the truth left the estimate balls.
    pub unsound_samples: usize,
    /// Accepted measurements that increased some `h_hat`.
    pub hhat_increases: usize,
    pub max_jumps_per_instant: usize,
    pub decisions: usize,
    pub truth_steps: usize,
    pub wall_time_s: f64,
}

/// Run a scenario from its configuration.
pub fn run_scenario(config: &ScenarioConfig, seed: u64) -> Result<(RunLog, RunMetrics)> {
    let scn = Scenario::from_config(config)?;
    run_prepared(&scn, seed, true)
}

/// Run an already validated scenario. With `keep_log = false` only the
/// metrics are produced.
pub fn run_prepared(scn: &Scenario, seed: u64, keep_log: bool) -> Result<(RunLog, RunMetrics)> {
    Executor::new(scn, seed, keep_log).run()
}

/// Reference states of the distinct family centres.
struct Centers {
    orbits: Vec<KeplerOrbit>,
    map: Vec<usize>,
}

impl Centers {
    fn new(scn: &Scenario) -> Self {
        let mut orbits: Vec<KeplerOrbit> = Vec::new();
        let mut map = Vec::new();
        for f in &scn.families {
            let k = match orbits.iter().position(|o| *o == f.center) {
                Some(k) => k,
                None => {
                    orbits.push(f.center);
                    orbits.len() - 1
                }
            };
            map.push(k);
        }
        Self { orbits, map }
    }

    fn at(&self, t: f64) -> Vec<CenterState> {
        let unique: Vec<CenterState> = self.orbits.iter().map(|o| CenterState::of(o, t)).collect();
        self.map.iter().map(|&k| unique[k]).collect()
    }
}

struct Decision {
    b: bool,
    u: Vec3,
    flag: Option<Flag>,
}

struct Executor<'a> {
    scn: &'a Scenario,
    keep_log: bool,
    model: ObserverModel,
    centers: Centers,
    dist: DisturbanceGenerator,
    station: GroundStation,
    t: f64,
    j: u64,
    truth: PlantState,
    est: EstimateState,
    next_sample: f64,
    next_measure: f64,
    act_ready: f64,
    u_hold: Vec3,
    cycle: CycleState,
    decision: Option<Decision>,
    measured: bool,
    hint: Option<Vec3>,
    log: RunLog,
    m: RunMetrics,
}

impl<'a> Executor<'a> {
    fn new(scn: &'a Scenario, seed: u64, keep_log: bool) -> Self {
        let cfg = &scn.config;
        let dim = scn.dim();
        let n = scn.families.len();
        let inf = UncertaintyBound::new(f64::INFINITY, f64::INFINITY);
        Self {
            scn,
            keep_log,
            model: ObserverModel {
                mu: scn.mu(),
                domain: scn.domain(),
                lip: scn.lip,
                bounds: scn.bounds,
            },
            centers: Centers::new(scn),
            dist: DisturbanceGenerator::new(
                cfg.disturbances.mode,
                scn.bounds,
                dim,
                seed.wrapping_mul(2).wrapping_add(1),
            ),
            station: GroundStation::new(
                scn.rho_bar.scale(cfg.measurement.shrink_factor),
                cfg.measurement.noise_fraction,
                cfg.measurement.pin_interval,
                dim,
                seed.wrapping_mul(2),
            ),
            t: 0.0,
            j: 0,
            truth: scn.initial,
            est: EstimateState::new(scn.initial, inf),
            next_sample: 0.0,
            next_measure: 0.0,
            act_ready: 0.0,
            u_hold: Vec3::zeros(),
            cycle: CycleState::default(),
            decision: None,
            measured: false,
            hint: None,
            log: RunLog {
                dimension: dim,
                families: n,
                records: Vec::new(),
            },
            m: RunMetrics {
                name: cfg.name.clone(),
                seed,
                mode: cfg.mode,
                duration: cfg.duration,
                max_h: vec![f64::NEG_INFINITY; n],
                max_h_overall: f64::NEG_INFINITY,
                violations: 0,
                measurements_accepted: 0,
                measurements_rejected: 0,
                impulses: 0,
                total_dv: 0.0,
                control_effort: 0.0,
                max_u_norm: 0.0,
                infeasible_events: 0,
                unsound_samples: 0,
                hhat_increases: 0,
                max_jumps_per_instant: 0,
                decisions: 0,
                truth_steps: 0,
                wall_time_s: 0.0,
            },
        }
    }

    fn timers(&self) -> Timers {
        Timers::new(
            self.next_sample - self.t,
            self.act_ready - self.t,
            self.next_measure - self.t,
        )
    }

    fn run(mut self) -> Result<(RunLog, RunMetrics)> {
        let start = Instant::now();
        let t_end = self.scn.config.duration;
        self.jumps()?;
        while self.t < t_end {
            let t_next = self.next_sample.min(self.next_measure).min(t_end);
            self.flow_to(t_next)?;
            self.jumps()?;
        }
        self.m.wall_time_s = start.elapsed().as_secs_f64();
        Ok((self.log, self.m))
    }

    /// Checks safety and soundness at the current instant and returns the
    /// barrier values with their estimate bounds.
    fn observe(&mut self, flags: &mut Vec<Flag>, with_hat: bool) -> (Vec<f64>, Vec<f64>) {
        let centers = self.centers.at(self.t);
        let mut h = Vec::with_capacity(centers.len());
        let mut h_hat = Vec::with_capacity(centers.len());
        let mut worst = (f64::NEG_INFINITY, 0);
        for (i, (f, c)) in self.scn.families.iter().zip(&centers).enumerate() {
            let v = f.value(&self.truth, c);
            if v > worst.0 {
                worst = (v, i);
            }
            self.m.max_h[i] = self.m.max_h[i].max(v);
            h.push(v);
            if with_hat {
                h_hat.push(f.h_hat_with(&self.est, c));
            }
        }
        self.m.max_h_overall = self.m.max_h_overall.max(worst.0);
        if self.j > 0 && worst.0 > 0.0 {
            self.m.violations += 1;
            flags.push(Flag::Violation);
        }
        if self.measured && !self.est.contains(&self.truth) {
            self.m.unsound_samples += 1;
            flags.push(Flag::Unsound);
        }
        if self.dist.mode() == DisturbanceMode::WorstCaseRadial {
            let f = &self.scn.families[worst.1];
            self.hint = f.eval_with(&self.truth, &centers[worst.1]).ok().map(|e| {
                if e.grad_v.norm() > 0.0 {
                    e.grad_v
                } else {
                    e.grad_r
                }
            });
        }
        (h, h_hat)
    }

    fn record(&mut self, event: Event, b: bool, u: Vec3, mut flags: Vec<Flag>) {
        let (h, h_hat) = self.observe(&mut flags, self.keep_log);
        if self.keep_log {
            self.log.records.push(Record {
                time: HybridTime::new(self.t, self.j),
                event,
                truth: self.truth,
                est: self.est,
                timers: self.timers(),
                b,
                u,
                h,
                h_hat,
                flags,
            });
        }
    }

    fn flow_to(&mut self, t_next: f64) -> Result<()> {
        let span = t_next - self.t;
        if span <= 0.0 {
            return Ok(());
        }
        let continuous = self.scn.mode() == ActuationMode::Continuous;
        let cadence = self.scn.config.log.cadence.unwrap_or(self.scn.timing.t_s);
        let t0 = self.t;
        let segments = (span / cadence).ceil().max(1.0) as usize;
        for k in 0..segments {
            let seg_end = if k + 1 == segments {
                t_next
            } else {
                t0 + span * (k + 1) as f64 / segments as f64
            };
            let seg = seg_end - self.t;
            let steps = (seg / self.scn.truth_dt).ceil().max(1.0) as usize;
            let dt = seg / steps as f64;
            for s in 0..steps {
                let mut extra = self.dist.flow(self.hint.as_ref());
                if continuous {
                    extra += self.u_hold + self.dist.actuation(&self.u_hold, self.hint.as_ref());
                }
                self.truth =
                    true_flow_step(&self.truth, &extra, dt, self.model.mu, &self.model.domain)?;
                let thrust = continuous.then_some(&self.u_hold);
                self.est = observer_flow_step(&self.est, dt, &self.model, thrust)?;
                self.t = if s + 1 == steps { seg_end } else { self.t + dt };
                self.m.truth_steps += 1;
                if continuous {
                    self.m.control_effort += self.u_hold.norm() * dt;
                }
                if s + 1 < steps {
                    self.observe(&mut Vec::new(), false);
                }
            }
            let u = if continuous {
                self.u_hold
            } else {
                Vec3::zeros()
            };
            self.record(Event::Flow, false, u, Vec::new());
        }
        Ok(())
    }

    fn jumps(&mut self) -> Result<()> {
        let mut count = 0;
        loop {
            let timers = self.timers();
            if timers.sigma_m == 0.0 {
                self.measure();
            } else if timers.sigma_s == 0.0 {
                if self.decision.is_none() {
                    self.decision = Some(self.decide(&timers)?);
                }
                let d = self.decision.as_ref().expect("decision made above");
                let (b, u, flag) = (d.b, d.u, d.flag);
                match classify_jumps(b, &timers, &self.scn.timing).first() {
                    Some(JumpLabel::Actuate) => self.actuate(u, flag.into_iter().collect())?,
                    Some(JumpLabel::SampleReset) => {
                        self.next_sample = self.t + self.scn.timing.t_s;
                        self.decision = None;
                        if self.scn.mode() == ActuationMode::Continuous {
                            self.u_hold = u;
                            self.m.max_u_norm = self.m.max_u_norm.max(u.norm());
                        }
                        self.j += 1;
                        let flags = if b {
                            Vec::new()
                        } else {
                            flag.into_iter().collect()
                        };
                        self.record(Event::Jump(JumpLabel::SampleReset), b, u, flags);
                    }
                    _ => break,
                }
            } else {
                break;
            }
            count += 1;
            self.m.max_jumps_per_instant = self.m.max_jumps_per_instant.max(count);
            if count > ZENO_LIMIT {
                return Err(Error::Zeno { t: self.t, count });
            }
        }
        Ok(())
    }

    fn measure(&mut self) {
        let meas = self
            .station
            .measure(&self.truth, &self.est, &self.scn.timing);
        let (est, accepted) = observer_measurement_jump(&self.est, &meas);
        if accepted {
            self.m.measurements_accepted += 1;
            if self.measured {
                let centers = self.centers.at(self.t);
                let increased = self
                    .scn
                    .families
                    .iter()
                    .zip(&centers)
                    .any(|(f, c)| f.h_hat_with(&est, c) > f.h_hat_with(&self.est, c));
                if increased {
                    self.m.hhat_increases += 1;
                }
            }
        } else {
            self.m.measurements_rejected += 1;
        }
        self.est = est;
        self.measured = true;
        self.next_measure = self.t + meas.sigma_m_next;
        self.cycle = CycleState::default();
        self.j += 1;
        let flag = if accepted {
            Flag::Accepted
        } else {
            Flag::Rejected
        };
        self.record(
            Event::Jump(JumpLabel::Measure),
            false,
            Vec3::zeros(),
            vec![flag],
        );
    }

    fn infeasible(&mut self, reason: String) -> Result<()> {
        self.m.infeasible_events += 1;
        match self.scn.config.controller.on_infeasible {
            InfeasiblePolicy::Abort => Err(Error::SafetyInfeasible { t: self.t, reason }),
            InfeasiblePolicy::Continue => Ok(()),
        }
    }

    fn decide(&mut self, timers: &Timers) -> Result<Decision> {
        self.m.decisions += 1;
        match self.scn.mode() {
            ActuationMode::Impulsive => {
                let d = decide_impulsive(self.scn, &self.est, self.t, timers, &mut self.cycle);
                Ok(match d.kind {
                    DecisionKind::Coast => Decision {
                        b: false,
                        u: d.u,
                        flag: Some(Flag::Coast),
                    },
                    DecisionKind::CoastCovered => Decision {
                        b: false,
                        u: d.u,
                        flag: Some(Flag::CoastCovered),
                    },
                    DecisionKind::Impulse => Decision {
                        b: true,
                        u: d.u,
                        flag: Some(Flag::Impulse),
                    },
                    DecisionKind::Infeasible => {
                        self.infeasible(format!(
                            "no certified impulse, best bound {:.6e}",
                            d.margin
                        ))?;
                        self.cycle.actuated = true;
                        Decision {
                            b: true,
                            u: d.fallback,
                            flag: Some(Flag::Infeasible),
                        }
                    }
                })
            }
            ActuationMode::Continuous => {
                let cons = build_rt_constraints(self.scn, self.t, &self.est)?;
                match solve_filter(self.scn, &cons) {
                    Ok(u) => Ok(Decision {
                        b: false,
                        u,
                        flag: None,
                    }),
                    Err(Error::QpInfeasible) => {
                        let (u, relax) = relaxed_filter(self.scn, &cons)?;
                        self.infeasible(format!("filter infeasible, relaxed by {relax:.6e}"))?;
                        Ok(Decision {
                            b: false,
                            u,
                            flag: Some(Flag::Infeasible),
                        })
                    }
                    Err(e) => Err(e),
                }
            }
        }
    }

    fn actuate(&mut self, u: Vec3, flags: Vec<Flag>) -> Result<()> {
        let d_g = self.dist.actuation(&u, self.hint.as_ref());
        self.truth = apply_impulse(&self.truth, &u, &d_g, self.scn.u_norm_max())?;
        self.est = observer_actuation_jump(&self.est, &u, &self.scn.bounds);
        self.act_ready = self.t + self.scn.timing.t_a;
        self.m.impulses += 1;
        self.m.total_dv += u.norm();
        self.m.max_u_norm = self.m.max_u_norm.max(u.norm());
        self.j += 1;
        self.record(Event::Jump(JumpLabel::Actuate), true, u, flags);
        Ok(())
    }
}
