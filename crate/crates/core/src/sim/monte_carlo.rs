use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_prepared, RunMetrics};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Worker count: `RITCBF_THREADS` when set to a positive integer, otherwise
/// the available parallelism.
pub fn worker_count() -> usize {
    std::env::var("RITCBF_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub name: String,
    pub n_runs: usize,
    pub seeds: Vec<u64>,
    /// Total instants with a true barrier violation over all runs.
    pub violations: usize,
    pub runs_with_violation: usize,
    pub max_h: f64,
    pub unsound_samples: usize,
    pub hhat_increases: usize,
    pub max_jumps_per_instant: usize,
    pub infeasible_events: usize,
    pub measurements_rejected: usize,
    pub dv_p50: f64,
    pub dv_p95: f64,
    pub dv_max: f64,
    pub max_u_norm: f64,
    pub wall_time_s: f64,
    pub runs: Vec<RunMetrics>,
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Independent seeded runs of one scenario. Seeds default to
/// `config.seed + k`. Runs are distributed over `worker_count()` threads.
pub fn monte_carlo(
    config: &ScenarioConfig,
    n_runs: usize,
    seeds: Option<&[u64]>,
) -> Result<MonteCarloReport> {
    if n_runs == 0 {
        return Err(Error::Config("n_runs must be at least 1".into()));
    }
    let seeds: Vec<u64> = match seeds {
        Some(s) if s.len() == n_runs => s.to_vec(),
        Some(s) => {
            return Err(Error::Config(format!(
                "{} seeds given for {n_runs} runs",
                s.len()
            )));
        }
        None => (0..n_runs as u64)
            .map(|k| config.seed.wrapping_add(k))
            .collect(),
    };
    let scn = Scenario::from_config(config)?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunMetrics>> = pool.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .map(|(run, &seed)| {
                run_prepared(&scn, seed, false)
                    .map(|(_, m)| m)
                    .map_err(|e| Error::Run {
                        run,
                        seed,
                        source: Box::new(e),
                    })
            })
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut dv: Vec<f64> = runs.iter().map(|m| m.total_dv).collect();
    dv.sort_by(f64::total_cmp);
    Ok(MonteCarloReport {
        name: config.name.clone(),
        n_runs,
        seeds,
        violations: runs.iter().map(|m| m.violations).sum(),
        runs_with_violation: runs.iter().filter(|m| m.violations > 0).count(),
        max_h: runs
            .iter()
            .map(|m| m.max_h_overall)
            .fold(f64::NEG_INFINITY, f64::max),
        unsound_samples: runs.iter().map(|m| m.unsound_samples).sum(),
        hhat_increases: runs.iter().map(|m| m.hhat_increases).sum(),
        max_jumps_per_instant: runs
            .iter()
            .map(|m| m.max_jumps_per_instant)
            .max()
            .unwrap_or(0),
        infeasible_events: runs.iter().map(|m| m.infeasible_events).sum(),
        measurements_rejected: runs.iter().map(|m| m.measurements_rejected).sum(),
        dv_p50: percentile(&dv, 50.0),
        dv_p95: percentile(&dv, 95.0),
        dv_max: dv.last().copied().unwrap_or(0.0),
        max_u_norm: runs.iter().map(|m| m.max_u_norm).fold(0.0, f64::max),
        wall_time_s: start.elapsed().as_secs_f64(),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let d = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&d, 50.0), 2.0);
        assert_eq!(percentile(&d, 95.0), 4.0);
        assert_eq!(percentile(&d, 0.0), 1.0);
        assert_eq!(percentile(&[], 50.0), 0.0);
    }
}
