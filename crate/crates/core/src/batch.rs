//! Batches of independent runs with derived seeds.
//!
//! Run `i` uses seed `base_seed + i`. Runs are distributed over a fixed
//! rayon pool and joined in index order, so the report does not depend on the
//! worker count.

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{classify_run, sync_frequency, RunClass};
use crate::scenario::{ModelSpec, Scenario, ScenarioError};
use crate::sim::integrate;

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("batch needs at least one run")]
    NoRuns,
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSpec {
    pub runs: usize,
    pub base_seed: u64,
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub index: usize,
    pub seed: u64,
    pub class: RunClass,
    pub max_deviation: f64,
    pub final_deviation: f64,
    pub aborted: bool,
    pub reason: String,
}

/// Per-sample extremes of a single run over its buses.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub summary: RunSummary,
    pub omega_max: Vec<f64>,
    pub omega_min: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub convergent: usize,
    pub oscillatory: usize,
    pub divergent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub runs: Vec<RunSummary>,
    pub tally: Tally,
    pub t: Vec<f64>,
    /// Largest frequency over all runs and buses at each sample.
    pub omega_max: Vec<f64>,
    pub omega_min: Vec<f64>,
    pub omega_star: f64,
}

impl BatchReport {
    /// Largest `|omega - omega*|` over the envelope.
    pub fn envelope_max_deviation(&self) -> f64 {
        self.omega_max
            .iter()
            .zip(&self.omega_min)
            .fold(0.0f64, |m, (hi, lo)| m.max((hi - self.omega_star).abs()).max((lo - self.omega_star).abs()))
    }

    pub fn all_convergent(&self) -> bool {
        self.tally.convergent == self.runs.len()
    }
}

/// Runs `f(i)` for `i in 0..runs` on `workers` threads, results in index order.
pub fn run_indexed<T, F>(runs: usize, workers: usize, f: F) -> Result<Vec<T>, BatchError>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| BatchError::Pool(e.to_string()))?;
    Ok(pool.install(|| (0..runs).into_par_iter().map(&f).collect()))
}

/// Simulates one run of the scenario with `seed` and reduces it to a trace.
pub fn run_one(
    scenario: &Scenario,
    model: Option<ModelSpec>,
    index: usize,
    seed: u64,
    omega_star: f64,
) -> Result<RunTrace, ScenarioError> {
    let policy = scenario.policy(seed)?;
    let config = scenario.sim_config(model);
    let initial = scenario.initial_state(model)?;
    let escape = match &scenario.file.policy {
        crate::scenario::PolicySpec::Destabilizer { escape_radius, .. } => Some(*escape_radius),
        _ => None,
    };
    let traj = integrate(&scenario.network, &initial, &config, &policy)
        .map_err(|e| ScenarioError::Invalid { context: "simulation".into(), message: e.to_string() })?;
    let aborted = traj.outcome.is_aborted();
    let (class, max_deviation, final_deviation, reason) = match classify_run(&traj, omega_star, escape) {
        Ok(c) => (c.class, c.max_deviation, c.final_deviation, c.reason),
        Err(e) => (RunClass::Divergent, f64::INFINITY, f64::INFINITY, e.to_string()),
    };
    let mut omega_max = Vec::with_capacity(traj.len());
    let mut omega_min = Vec::with_capacity(traj.len());
    for w in &traj.omega {
        if w.iter().all(|v| v.is_finite()) {
            omega_max.push(w.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            omega_min.push(w.iter().copied().fold(f64::INFINITY, f64::min));
        } else {
            break;
        }
    }
    Ok(RunTrace {
        summary: RunSummary { index, seed, class, max_deviation, final_deviation, aborted, reason },
        omega_max,
        omega_min,
    })
}

/// Merges run traces (in index order) into a report.
pub fn merge(traces: Vec<RunTrace>, step: f64, samples: usize, omega_star: f64) -> BatchReport {
    let mut omega_max = vec![f64::NEG_INFINITY; samples];
    let mut omega_min = vec![f64::INFINITY; samples];
    let mut tally = Tally::default();
    let mut runs = Vec::with_capacity(traces.len());
    for tr in traces {
        for (i, (hi, lo)) in tr.omega_max.iter().zip(&tr.omega_min).enumerate().take(samples) {
            omega_max[i] = omega_max[i].max(*hi);
            omega_min[i] = omega_min[i].min(*lo);
        }
        match tr.summary.class {
            RunClass::Convergent => tally.convergent += 1,
            RunClass::Oscillatory => tally.oscillatory += 1,
            RunClass::Divergent => tally.divergent += 1,
        }
        runs.push(tr.summary);
    }
    // samples no run reached (all aborted early) are dropped
    let keep = omega_max.iter().take_while(|v| v.is_finite()).count();
    omega_max.truncate(keep);
    omega_min.truncate(keep);
    let t = (0..keep).map(|i| i as f64 * step).collect();
    BatchReport { runs, tally, t, omega_max, omega_min, omega_star }
}

/// Runs `spec.runs` copies of the scenario with seeds `base_seed + i`.
pub fn run_batch(
    scenario: &Scenario,
    spec: &BatchSpec,
    model: Option<ModelSpec>,
    workers: usize,
) -> Result<BatchReport, BatchError> {
    if spec.runs == 0 {
        return Err(BatchError::NoRuns);
    }
    let omega_star = sync_frequency(&scenario.network, &scenario.final_loads())
        .map_err(|e| ScenarioError::Invalid { context: "equilibrium".into(), message: e.to_string() })?;
    let results = run_indexed(spec.runs, workers, |i| {
        run_one(scenario, model, i, spec.base_seed.wrapping_add(i as u64), omega_star)
    })?;
    let traces = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let config = scenario.sim_config(model);
    Ok(merge(traces, config.step, config.step_count() + 1, omega_star))
}
