use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use ritcbf::cbf::{max_horizon, verify_rit_cbf, verify_rt_cbf, VerifyMode};
use ritcbf::config::ScenarioConfig;
use ritcbf::io::{load_config, write_json, write_run_csv_file};
use ritcbf::scenario::Scenario;
use ritcbf::sim::run_scenario;
use ritcbf::Error;

/// Exit codes.
const OK: u8 = 0;
const CONFIG_ERROR: u8 = 1;
const SAFETY_INFEASIBLE: u8 = 2;
const VIOLATION: u8 = 3;
const NOT_VERIFIED: u8 = 4;
const BRACKET_ERROR: u8 = 5;

#[derive(Parser)]
#[command(
    name = "ritcbf",
    version,
    about = "Barrier-function safety under sporadic measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one seeded run; writes run.csv and metrics.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Sampled barrier-condition check at one T_M; writes report.json.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        tm: f64,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Bisection for the largest verified T_M; writes report.json.
    MaxHorizon {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long)]
        tol: f64,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// One run per value of a numeric parameter; writes sweep.json.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

type Outcome = Result<u8, Failure>;

fn fail(code: u8, e: impl std::fmt::Display) -> Failure {
    Failure {
        code,
        message: e.to_string(),
    }
}

fn config_err(e: Error) -> Failure {
    fail(CONFIG_ERROR, e)
}

fn prepare(path: &Path) -> Result<ScenarioConfig, Failure> {
    let cfg = load_config(path).map_err(config_err)?;
    Scenario::from_config(&cfg).map_err(config_err)?;
    Ok(cfg)
}

fn out_dir(out: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out).map_err(|e| fail(CONFIG_ERROR, format!("{}: {e}", out.display())))
}

fn run(config: &Path, seed: Option<u64>, out: &Path, duration: Option<f64>) -> Outcome {
    let mut cfg = prepare(config)?;
    if let Some(d) = duration {
        cfg.duration = d;
    }
    Scenario::from_config(&cfg).map_err(config_err)?;
    out_dir(out)?;
    let seed = seed.unwrap_or(cfg.seed);
    let (log, metrics) = match run_scenario(&cfg, seed) {
        Ok(r) => r,
        Err(e @ Error::SafetyInfeasible { .. }) => return Err(fail(SAFETY_INFEASIBLE, e)),
        Err(e) => return Err(config_err(e)),
    };
    write_run_csv_file(&out.join("run.csv"), &log).map_err(config_err)?;
    write_json(&out.join("metrics.json"), &metrics).map_err(config_err)?;
    Ok(if metrics.violations > 0 {
        VIOLATION
    } else if metrics.infeasible_events > 0 {
        SAFETY_INFEASIBLE
    } else {
        OK
    })
}

fn with_samples(mut cfg: ScenarioConfig, samples: Option<usize>) -> ScenarioConfig {
    if let Some(n) = samples {
        cfg.verifier.samples = n;
    }
    cfg
}

fn verify(config: &Path, tm: f64, samples: Option<usize>, out: &Path) -> Outcome {
    let cfg = with_samples(prepare(config)?, samples);
    let scn = Scenario::from_config(&cfg).map_err(config_err)?;
    let report = match VerifyMode::for_scenario(&scn) {
        VerifyMode::Rit => verify_rit_cbf(&scn, tm),
        VerifyMode::Rt => verify_rt_cbf(&scn, tm),
    };
    let report = match report {
        Ok(r) => r,
        Err(Error::DomainEmpty) => return Err(fail(NOT_VERIFIED, Error::DomainEmpty)),
        Err(e) => return Err(config_err(e)),
    };
    out_dir(out)?;
    write_json(&out.join("report.json"), &report).map_err(config_err)?;
    Ok(if report.verified { OK } else { NOT_VERIFIED })
}

fn horizon(
    config: &Path,
    lo: f64,
    hi: f64,
    tol: f64,
    samples: Option<usize>,
    out: &Path,
) -> Outcome {
    let cfg = with_samples(prepare(config)?, samples);
    let scn = Scenario::from_config(&cfg).map_err(config_err)?;
    let report = match max_horizon(&scn, VerifyMode::for_scenario(&scn), lo, hi, tol) {
        Ok(r) => r,
        Err(e @ Error::Bracket(_)) => return Err(fail(BRACKET_ERROR, e)),
        Err(e) => return Err(config_err(e)),
    };
    out_dir(out)?;
    write_json(&out.join("report.json"), &report).map_err(config_err)?;
    Ok(OK)
}

fn parse_values(text: &str) -> Result<Vec<f64>, Failure> {
    let values = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| fail(CONFIG_ERROR, format!("not a number: `{s}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(fail(CONFIG_ERROR, "empty value list"));
    }
    Ok(values)
}

fn sweep(config: &Path, param: &str, values: &str, seed: Option<u64>, out: &Path) -> Outcome {
    let base = prepare(config)?;
    let values = parse_values(values)?;
    let seed = seed.unwrap_or(base.seed);
    let configs = values
        .iter()
        .map(|&v| {
            let cfg = base.with_param(param, v)?;
            Scenario::from_config(&cfg)?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>, Error>>()
        .map_err(config_err)?;
    let mut results = Map::new();
    for (v, cfg) in values.iter().zip(&configs) {
        let entry = match run_scenario(cfg, seed) {
            Ok((_, m)) => json!({ "metrics": m }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        results.insert(v.to_string(), entry);
    }
    out_dir(out)?;
    let doc = json!({
        "param": param,
        "values": values,
        "seed": seed,
        "results": Value::Object(results),
    });
    write_json(&out.join("sweep.json"), &doc).map_err(config_err)?;
    Ok(OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { CONFIG_ERROR } else { OK });
        }
    };
    let outcome = match &cli.command {
        Command::Run {
            config,
            seed,
            out,
            duration,
        } => run(config, *seed, out, *duration),
        Command::Verify {
            config,
            tm,
            samples,
            out,
        } => verify(config, *tm, *samples, out),
        Command::MaxHorizon {
            config,
            lo,
            hi,
            tol,
            samples,
            out,
        } => horizon(config, *lo, *hi, *tol, *samples, out),
        Command::Sweep {
            config,
            param,
            values,
            seed,
            out,
        } => sweep(config, param, values, *seed, out),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
