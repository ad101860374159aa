use crate::cbf::VerifierSampling;
use crate::config::{
    ActuationMode, BarrierSpec, DisturbanceSpec, Frame, InitialSpec, IntegratorSpec, LogSpec,
    MeasurementSpec, ScenarioConfig, TimingSpec,
};
use crate::controller::{
    ControllerConfig, ImpulseObjective, InfeasiblePolicy, MultistartConfig, Policy,
};
use crate::dynamics::{
    DisturbanceMode, KeplerOrbit, OrbitElements, OrbitSpec, StateDomain, Vec3, MU_EARTH,
};
use crate::error::Result;
use crate::scenario::relative_to;

/// Target orbit of the rendezvous study.
pub const RENDEZVOUS_A: f64 = 7.775e6;
pub const RENDEZVOUS_E: f64 = 0.1;
/// Geosynchronous radius, m.
pub const GEO_RADIUS: f64 = 42_164_000.0;

const RENDEZVOUS_START_ANOMALY_DEG: f64 = 150.0;
/// Chaser start relative to the target, radial/along-track/cross-track.
const CHASER_DR: [f64; 3] = [-400.0, -2000.0, 0.0];
const CHASER_DV: [f64; 3] = [0.0, 0.3, 0.0];
/// Exclusion zones: crossing time of the chaser's coasting path (s), offset
/// from that path at the crossing and velocity relative to the chaser there,
/// both in the chaser's rotating frame (m, m/s).
const ZONES: [(f64, [f64; 2], [f64; 2]); 7] = [
    (600.0, [0.0, 0.0], [0.5, 0.1]),
    (900.0, [40.0, 0.0], [-0.5, 0.1]),
    (1200.0, [-40.0, 0.0], [0.45, -0.2]),
    (1500.0, [0.0, 0.0], [-0.5, -0.1]),
    (1800.0, [80.0, 0.0], [0.4, 0.3]),
    (2100.0, [-80.0, 0.0], [-0.45, 0.2]),
    (2400.0, [0.0, 0.0], [0.5, -0.2]),
];

fn rendezvous_reference() -> OrbitElements {
    OrbitElements {
        a: RENDEZVOUS_A,
        e: RENDEZVOUS_E,
        inc_deg: 0.0,
        raan_deg: 0.0,
        argp_deg: 0.0,
        true_anomaly_deg: RENDEZVOUS_START_ANOMALY_DEG,
    }
}

/// Zone centres on Kepler orbits that cross the chaser's coasting path.
fn rendezvous_zones() -> Result<Vec<BarrierSpec>> {
    let target = rendezvous_reference().orbit(MU_EARTH, 0.0)?;
    let x0 = target.state_at(0.0);
    let chaser = relative_to(&x0, &Vec3::from(CHASER_DR), &Vec3::from(CHASER_DV));
    let coast = KeplerOrbit::from_state(&chaser, 0.0, MU_EARTH)?;
    ZONES
        .iter()
        .map(|(t, dr, dv)| {
            let z = relative_to(
                &coast.state_at(*t),
                &Vec3::new(dr[0], dr[1], 0.0),
                &Vec3::new(dv[0], dv[1], 0.0),
            );
            Ok(BarrierSpec::ExclusionZone {
                center: OrbitSpec::State {
                    r: z.r.into(),
                    v: z.v.into(),
                    epoch: *t,
                },
                radius: 200.0,
                gamma: None,
            })
        })
        .collect()
}

fn apply(mut cfg: ScenarioConfig, overrides: &[(&str, f64)]) -> Result<ScenarioConfig> {
    for (path, value) in overrides {
        cfg = cfg.with_param(path, *value)?;
    }
    Ok(cfg)
}

/// Planar impulsive rendezvous near an elliptical target orbit among seven
/// moving exclusion zones.
pub fn build_rendezvous_scenario(t_mx: f64, overrides: &[(&str, f64)]) -> Result<ScenarioConfig> {
    let cfg = ScenarioConfig {
        name: "rendezvous".into(),
        mode: ActuationMode::Impulsive,
        dimension: 2,
        mu: MU_EARTH,
        timing: TimingSpec {
            t_s: 10.0,
            t_a: 120.0,
            t_m: 30.0,
            t_l: None,
            t_mx,
        },
        domain: StateDomain::new(6.99e6, 8.56e6, 9.0e3),
        lipschitz: None,
        disturbances: DisturbanceSpec {
            w_c: 9.2e-6,
            w_g_slope: 0.05,
            w_g_cap: 5.0,
            mode: DisturbanceMode::RandomBall,
        },
        measurement: MeasurementSpec {
            rho_r: 5.0,
            rho_v: 0.005,
            shrink_factor: 1.0,
            noise_fraction: 0.9,
            pin_interval: true,
        },
        reference: OrbitSpec::Elements(rendezvous_reference()),
        initial: InitialSpec {
            dr: CHASER_DR,
            dv: CHASER_DV,
            frame: Frame::Lvlh,
        },
        barriers: rendezvous_zones()?,
        controller: ControllerConfig {
            gamma: Some(50.0),
            alpha_slope: 0.0,
            u_max: Some(1.5),
            policy: Policy::FuelMin,
            multistart: MultistartConfig::default(),
            psi_grid: 12,
            impulse_objective: ImpulseObjective::MinNorm { slack: 1.0 },
            on_infeasible: InfeasiblePolicy::Abort,
        },
        integrator: IntegratorSpec::default(),
        verifier: VerifierSampling {
            samples: 1024,
            seed: 7,
            rel_r_max: 3000.0,
            rel_v_max: 0.3,
        },
        log: LogSpec::default(),
        duration: 3000.0,
        seed: 1,
    };
    apply(cfg, overrides)
}

/// Continuous-thrust stationkeeping of a geosynchronous chaser inside the
/// icosahedron inscribed in a 10 km sphere around a virtual target.
pub fn build_stationkeeping_scenario(
    t_mx: f64,
    overrides: &[(&str, f64)],
) -> Result<ScenarioConfig> {
    let geo = OrbitSpec::Elements(OrbitElements {
        a: GEO_RADIUS,
        e: 0.0,
        inc_deg: 0.0,
        raan_deg: 0.0,
        argp_deg: 0.0,
        true_anomaly_deg: 0.0,
    });
    let cfg = ScenarioConfig {
        name: "stationkeeping".into(),
        mode: ActuationMode::Continuous,
        dimension: 3,
        mu: MU_EARTH,
        timing: TimingSpec {
            t_s: 10.0,
            t_a: 10.0,
            t_m: 0.0,
            t_l: None,
            t_mx,
        },
        domain: StateDomain::new(4.2e7, 4.24e7, 3.3e3),
        lipschitz: None,
        disturbances: DisturbanceSpec {
            w_c: 4.56e-6,
            w_g_slope: 0.02,
            w_g_cap: 5e-5,
            mode: DisturbanceMode::RandomBall,
        },
        measurement: MeasurementSpec {
            rho_r: 5.0,
            rho_v: 0.005,
            shrink_factor: 1.0,
            noise_fraction: 0.9,
            pin_interval: true,
        },
        reference: geo,
        initial: InitialSpec {
            dr: [1000.0, -1500.0, 500.0],
            dv: [0.05, -0.02, 0.01],
            frame: Frame::Rtn,
        },
        barriers: vec![BarrierSpec::Icosahedron {
            center: geo,
            radius: 10_000.0,
            gamma: None,
        }],
        controller: ControllerConfig {
            gamma: Some(120.0),
            alpha_slope: 0.004,
            u_max: None,
            policy: Policy::FuelMin,
            multistart: MultistartConfig::default(),
            psi_grid: 12,
            impulse_objective: ImpulseObjective::default(),
            on_infeasible: InfeasiblePolicy::Continue,
        },
        integrator: IntegratorSpec::default(),
        verifier: VerifierSampling {
            samples: 1024,
            seed: 11,
            rel_r_max: 6000.0,
            rel_v_max: 0.5,
        },
        log: LogSpec {
            cadence: Some(60.0),
        },
        duration: 2.0 * t_mx,
        seed: 1,
    };
    apply(cfg, overrides)
}
