use ritcbf::config::ActuationMode;
use ritcbf::controller::InfeasiblePolicy;
use ritcbf::io::{read_run_csv, write_run_csv};
use ritcbf::scenario::Scenario;
use ritcbf::sim::{
    build_rendezvous_scenario, build_stationkeeping_scenario, monte_carlo, run_scenario, Event,
    Flag, RunLog, RunMetrics, ZENO_LIMIT,
};
use ritcbf::timing::JumpLabel;
use ritcbf::Error;

fn rendezvous(duration: f64) -> ritcbf::config::ScenarioConfig {
    build_rendezvous_scenario(300.0, &[("duration", duration)]).unwrap()
}

fn count(log: &RunLog, label: JumpLabel) -> usize {
    log.records
        .iter()
        .filter(|r| r.event == Event::Jump(label))
        .count()
}

fn flagged(log: &RunLog, flag: Flag) -> usize {
    log.records
        .iter()
        .filter(|r| r.flags.contains(&flag))
        .count()
}

fn same_metrics(a: &RunMetrics, b: &RunMetrics) {
    let mut a = a.clone();
    let mut b = b.clone();
    a.wall_time_s = 0.0;
    b.wall_time_s = 0.0;
    assert_eq!(a, b);
}

#[test]
fn zero_duration_runs_initial_chain_only() {
    let (log, m) = run_scenario(&rendezvous(0.0), 3).unwrap();
    let events: Vec<Event> = log.records.iter().map(|r| r.event).collect();
    assert_eq!(
        events,
        vec![
            Event::Jump(JumpLabel::Measure),
            Event::Jump(JumpLabel::SampleReset)
        ]
    );
    assert!(log.records.iter().all(|r| r.time.t == 0.0));
    assert_eq!(log.records[0].time.j, 1);
    assert_eq!(log.records[1].time.j, 2);
    assert_eq!(m.measurements_accepted, 1);
    assert_eq!(m.truth_steps, 0);
}

#[test]
fn hybrid_time_structure() {
    let (log, m) = run_scenario(&rendezvous(3000.0), 2).unwrap();
    let mut prev = log.records[0].time;
    let mut at_instant = 1;
    for w in log.records.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        assert!(b.time.t >= a.time.t);
        match b.event {
            Event::Flow => {
                assert_eq!(b.time.j, a.time.j);
                assert!(b.time.t > a.time.t);
                at_instant = 0;
            }
            Event::Jump(_) => {
                assert_eq!(b.time.j, a.time.j + 1);
                if b.time.t == prev.t && a.event != Event::Flow {
                    at_instant += 1;
                } else {
                    at_instant = 1;
                }
                assert!(at_instant <= ZENO_LIMIT);
            }
        }
        if a.event == Event::Jump(JumpLabel::Actuate) {
            assert_eq!(b.event, Event::Jump(JumpLabel::SampleReset));
            assert_eq!(b.time.t, a.time.t);
        }
        prev = b.time;
    }
    assert!(m.max_jumps_per_instant <= ZENO_LIMIT);
}

#[test]
fn timers_hit_zero_at_events() {
    let (log, _) = run_scenario(&rendezvous(1500.0), 4).unwrap();
    for r in &log.records {
        match r.event {
            Event::Jump(JumpLabel::Measure) => assert!(r.timers.sigma_m > 0.0),
            Event::Jump(JumpLabel::SampleReset) => assert_eq!(r.timers.sigma_s, 10.0),
            Event::Jump(JumpLabel::Actuate) => assert_eq!(r.timers.sigma_a, 120.0),
            Event::Flow => assert!(r.timers.sigma_s >= 0.0 && r.timers.sigma_m >= 0.0),
        }
    }
    let measures: Vec<f64> = log
        .records
        .iter()
        .filter(|r| r.event == Event::Jump(JumpLabel::Measure))
        .map(|r| r.time.t)
        .collect();
    assert_eq!(measures, vec![0.0, 300.0, 600.0, 900.0, 1200.0, 1500.0]);
}

#[test]
fn metrics_agree_with_log() {
    let (log, m) = run_scenario(&rendezvous(3000.0), 5).unwrap();
    assert_eq!(m.impulses, count(&log, JumpLabel::Actuate));
    assert_eq!(m.measurements_accepted, flagged(&log, Flag::Accepted));
    assert_eq!(m.measurements_rejected, flagged(&log, Flag::Rejected));
    let dv: f64 = log
        .records
        .iter()
        .filter(|r| r.event == Event::Jump(JumpLabel::Actuate))
        .map(|r| r.u.norm())
        .sum();
    assert!((dv - m.total_dv).abs() <= 1e-12 * (1.0 + dv));
    for (i, &mh) in m.max_h.iter().enumerate() {
        let logged = log
            .records
            .iter()
            .map(|r| r.h[i])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(mh >= logged);
    }
    assert_eq!(m.violations, 0);
    assert_eq!(m.unsound_samples, 0);
    assert_eq!(m.hhat_increases, 0);
}

#[test]
fn estimate_covers_truth_after_first_measurement() {
    let (log, _) = run_scenario(&rendezvous(3000.0), 6).unwrap();
    for r in &log.records {
        assert!(r.est.contains(&r.truth), "t = {}", r.time.t);
        for (h, hh) in r.h.iter().zip(&r.h_hat) {
            assert!(h <= hh, "t = {}: {h} > {hh}", r.time.t);
        }
    }
}

#[test]
fn replay_is_bit_exact() {
    let cfg = rendezvous(3000.0);
    let (a, ma) = run_scenario(&cfg, 9).unwrap();
    let (b, mb) = run_scenario(&cfg, 9).unwrap();
    assert_eq!(a, b);
    same_metrics(&ma, &mb);
    let mut buf = Vec::new();
    write_run_csv(&a, &mut buf).unwrap();
    let back = read_run_csv(buf.as_slice()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn seeds_change_the_run() {
    let cfg = rendezvous(1000.0);
    let (a, _) = run_scenario(&cfg, 1).unwrap();
    let (b, _) = run_scenario(&cfg, 2).unwrap();
    assert_ne!(a, b);
}

#[test]
fn single_run_monte_carlo_matches_direct_run() {
    let cfg = rendezvous(1200.0);
    let rep = monte_carlo(&cfg, 1, Some(&[17])).unwrap();
    let (_, m) = run_scenario(&cfg, 17).unwrap();
    same_metrics(&rep.runs[0], &m);
    assert_eq!(rep.seeds, vec![17]);
    assert_eq!(rep.violations, m.violations);
    assert_eq!(rep.dv_max, m.total_dv);
}

#[test]
fn monte_carlo_rejects_bad_seed_lists() {
    let cfg = rendezvous(100.0);
    assert!(matches!(monte_carlo(&cfg, 0, None), Err(Error::Config(_))));
    assert!(matches!(
        monte_carlo(&cfg, 2, Some(&[1])),
        Err(Error::Config(_))
    ));
    let rep = monte_carlo(&cfg, 3, None).unwrap();
    assert_eq!(rep.seeds, vec![cfg.seed, cfg.seed + 1, cfg.seed + 2]);
}

#[test]
fn zero_thrust_aborts_when_avoidance_is_needed() {
    let mut cfg = build_rendezvous_scenario(300.0, &[("controller.u_max", 0.0)]).unwrap();
    cfg.controller.on_infeasible = InfeasiblePolicy::Abort;
    match run_scenario(&cfg, 1) {
        Err(Error::SafetyInfeasible { t, .. }) => assert!(t > 0.0 && t < 3000.0),
        other => panic!("expected abort, got {other:?}"),
    }
    cfg.controller.on_infeasible = InfeasiblePolicy::Continue;
    let (log, m) = run_scenario(&cfg, 1).unwrap();
    assert!(m.infeasible_events > 0);
    assert_eq!(m.infeasible_events, flagged(&log, Flag::Infeasible));
}

#[test]
fn rendezvous_builder_shape() {
    let cfg = build_rendezvous_scenario(360.0, &[]).unwrap();
    assert_eq!(cfg.mode, ActuationMode::Impulsive);
    assert_eq!(cfg.dimension, 2);
    assert_eq!(cfg.timing.t_mx, 360.0);
    assert_eq!(cfg.disturbances.w_c, 9.2e-6);
    assert_eq!(cfg.disturbances.w_g_slope, 0.05);
    assert_eq!(cfg.disturbances.w_g_cap, 5.0);
    let scn = Scenario::from_config(&cfg).unwrap();
    assert_eq!(scn.families.len(), 7);
    let start = scn.reference.state_at(0.0);
    let gap = (scn.initial.r - start.r).norm();
    assert!((gap - (400f64.powi(2) + 2000f64.powi(2)).sqrt()).abs() < 1e-6);
    let over = build_rendezvous_scenario(360.0, &[("controller.gamma", 5.0)]).unwrap();
    assert_eq!(over.controller.gamma, Some(5.0));
}

#[test]
fn stationkeeping_builder_shape() {
    let cfg = build_stationkeeping_scenario(41_040.0, &[]).unwrap();
    assert_eq!(cfg.mode, ActuationMode::Continuous);
    assert_eq!(cfg.dimension, 3);
    assert_eq!(cfg.controller.gamma, Some(120.0));
    assert_eq!(cfg.controller.alpha_slope, 0.004);
    assert_eq!(cfg.disturbances.w_c, 4.56e-6);
    assert_eq!(cfg.disturbances.w_g_cap, 5e-5);
    assert_eq!((cfg.measurement.rho_r, cfg.measurement.rho_v), (5.0, 0.005));
    let scn = Scenario::from_config(&cfg).unwrap();
    assert_eq!(scn.families.len(), 20);
    assert!((scn.initial.r - scn.reference.state_at(0.0).r).norm() < 10_000.0);
}

#[test]
fn stationkeeping_short_run() {
    let cfg = build_stationkeeping_scenario(3600.0, &[("duration", 7200.0)]).unwrap();
    let (log, m) = run_scenario(&cfg, 1).unwrap();
    assert_eq!(m.violations, 0);
    assert_eq!(m.infeasible_events, 0);
    assert_eq!(m.unsound_samples, 0);
    assert_eq!(m.impulses, 0);
    assert_eq!(count(&log, JumpLabel::Measure), 3);
    assert!(m.max_u_norm <= 8e-4);
    let flows: Vec<f64> = log
        .records
        .iter()
        .filter(|r| r.event == Event::Flow)
        .map(|r| r.time.t)
        .collect();
    for w in flows.windows(2) {
        assert!(w[1] - w[0] <= 60.0 + 1e-9);
    }
    let logged_u = log.records.iter().map(|r| r.u.norm()).fold(0.0, f64::max);
    assert!(logged_u <= m.max_u_norm);
    assert!(m.control_effort <= m.max_u_norm * 7200.0 + 1e-12);
}

#[test]
fn shipped_scenarios_match_builders() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let rdv = ritcbf::io::load_config(&dir.join("rendezvous.json")).unwrap();
    assert_eq!(rdv, build_rendezvous_scenario(300.0, &[]).unwrap());
    let geo = ritcbf::io::load_config(&dir.join("stationkeeping.json")).unwrap();
    assert_eq!(geo, build_stationkeeping_scenario(41_040.0, &[]).unwrap());
}

#[test]
fn config_round_trip() {
    for cfg in [
        build_rendezvous_scenario(300.0, &[]).unwrap(),
        build_stationkeeping_scenario(41_040.0, &[]).unwrap(),
    ] {
        let back = ritcbf::config::ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        let a: serde_json::Value = serde_json::from_str(&cfg.to_json()).unwrap();
        let b: serde_json::Value = serde_json::from_str(&back.to_json()).unwrap();
        assert_eq!(a, b);
    }
}
