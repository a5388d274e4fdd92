//! `inertia`: certify supplies, solve equilibria and simulate networks with
//! time-varying inertia from a scenario file.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical abort, 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use inertia_core::analysis::{
    check_dissipation, classify_run, find_equilibrium, gamma_point, sync_frequency, DissipationOptions,
};
use inertia_core::batch::{run_batch, BatchSpec};
use inertia_core::inertia::InertiaPolicy;
use inertia_core::output;
use inertia_core::passivity::Passivity;
use inertia_core::scenario::{load_scenario, ModelSpec, PolicySpec, Scenario, ScenarioError};
use inertia_core::sim::{integrate, Outcome, Trajectory};

#[derive(Parser)]
#[command(name = "inertia", version, about = "Power networks with time-varying inertia")]
struct Cli {
    /// Scenario JSON file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory for CSV files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed override (randomized scheme; batch base seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flow model override.
    #[arg(long, global = true, value_enum)]
    model: Option<Model>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Nonlinear,
    Linear,
}

impl From<Model> for ModelSpec {
    fn from(m: Model) -> Self {
        match m {
            Model::Nonlinear => ModelSpec::Nonlinear,
            Model::Linear => ModelSpec::Linear,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Strictness constant and storage matrix of every bus supply.
    Certify,
    /// Synchronous equilibrium.
    Equilibrium {
        /// Use the loads after all disturbances.
        #[arg(long)]
        after_disturbances: bool,
    },
    /// Gamma-point with one bus pinned.
    Gamma {
        /// Id of the pinned bus.
        #[arg(long)]
        bus: String,
        /// Pinned frequency; defaults to the equilibrium frequency plus `delta`.
        #[arg(long)]
        omega_bar: Option<f64>,
        /// Offset from the equilibrium frequency.
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
    },
    /// Simulate and write frequency and inertia traces.
    Simulate,
    /// Simulate and check the Lyapunov dissipation inequality.
    Verify,
    /// Run the destabilizer policy of the scenario.
    Destabilize,
    /// Independent runs with seeds base + index.
    Batch {
        /// Number of runs; defaults to `batch.runs` of the scenario, else 1.
        #[arg(long)]
        runs: Option<usize>,
        /// Worker threads.
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
}

enum Failure {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<output::OutputError> for Failure {
    fn from(e: output::OutputError) -> Self {
        Failure::Io(e.to_string())
    }
}

fn numerical(e: impl ToString) -> Failure {
    Failure::Numerical(e.to_string())
}

fn print(value: serde_json::Value) {
    use std::io::Write;
    // a closed pipe (e.g. `| head`) is not an error worth reporting
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&value).expect("json"));
}

struct Ctx {
    scenario: Scenario,
    out: PathBuf,
    seed: u64,
    model: Option<ModelSpec>,
}

impl Ctx {
    fn out_file(&self, name: &str) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| Failure::Io(format!("cannot create {}: {e}", self.out.display())))?;
        Ok(self.out.join(name))
    }

    fn simulate(&self, policy: &InertiaPolicy) -> Result<Trajectory, Failure> {
        let initial = self.scenario.initial_state(self.model)?;
        integrate(&self.scenario.network, &initial, &self.scenario.sim_config(self.model), policy)
            .map_err(|e| Failure::Validation(e.to_string()))
    }

    fn write_traces(&self, traj: &Trajectory, v: Option<&[f64]>) -> Result<(), Failure> {
        let graph = self.scenario.network.graph();
        output::to_file(&self.out_file("trajectory.csv")?, |w| output::write_trajectory(w, graph, traj, v))?;
        output::to_file(&self.out_file("inertia.csv")?, |w| output::write_inertia_trace(w, graph, traj))?;
        Ok(())
    }

    fn omega_star(&self) -> Result<f64, Failure> {
        sync_frequency(&self.scenario.network, &self.scenario.final_loads()).map_err(numerical)
    }
}

fn outcome_json(o: &Outcome) -> serde_json::Value {
    match o {
        Outcome::Completed => json!({"status": "completed"}),
        Outcome::Stopped { t, reason } => json!({"status": "stopped", "t": t, "reason": reason}),
        Outcome::Aborted { t, reason } => json!({"status": "aborted", "t": t, "reason": reason}),
    }
}

fn escape_radius(s: &Scenario) -> Option<f64> {
    match &s.file.policy {
        PolicySpec::Destabilizer { escape_radius, .. } => Some(*escape_radius),
        _ => None,
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let path = cli.scenario.ok_or_else(|| Failure::Validation("--scenario is required".into()))?;
    let scenario = load_scenario(&path)?;
    let ctx = Ctx {
        seed: cli.seed.unwrap_or(scenario.file.seed),
        scenario,
        out: cli.out,
        model: cli.model.map(Into::into),
    };
    let net = &ctx.scenario.network;
    let ids = ctx.scenario.bus_ids();
    match cli.command {
        Command::Certify => {
            let certs = ctx.scenario.certify();
            output::to_file(&ctx.out_file("certificates.csv")?, |w| {
                output::write_certificates(w, net.graph(), &certs)
            })?;
            let rows: Vec<_> = ids
                .iter()
                .zip(&certs)
                .map(|(id, c)| match c {
                    Ok(Passivity::Strict(cert)) => json!({
                        "bus": id,
                        "strict": true,
                        "rho": cert.rho,
                        "max_inertia_rate": cert.max_inertia_rate(),
                        "rho_margined": cert.storage.rho_margined,
                        "storage": cert.storage.p.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
                    }),
                    Ok(Passivity::NotStrict { infimum, .. }) => {
                        json!({"bus": id, "strict": false, "infimum": infimum})
                    }
                    Err(e) => json!({"bus": id, "strict": false, "error": e.to_string()}),
                })
                .collect();
            print(json!({ "certificates": rows }));
            if certs.iter().any(|c| c.is_err()) {
                return Err(Failure::Numerical("certification failed for some buses".into()));
            }
        }
        Command::Equilibrium { after_disturbances } => {
            let loads = if after_disturbances { ctx.scenario.final_loads() } else { net.loads() };
            let model = ctx.scenario.model(ctx.model).flow_model();
            let eq = find_equilibrium(net, &loads, model).map_err(numerical)?;
            print(json!({ "equilibrium": eq, "loads": loads }));
        }
        Command::Gamma { bus, omega_bar, delta } => {
            let k = net
                .graph()
                .bus_index(&bus)
                .ok_or_else(|| Failure::Validation(format!("unknown bus {bus:?}")))?;
            let loads = net.loads();
            let w = match omega_bar {
                Some(w) => w,
                None => sync_frequency(net, &loads).map_err(numerical)? + delta,
            };
            let gp = gamma_point(net, &loads, w, k).map_err(numerical)?;
            print(json!({ "gamma_point": gp }));
        }
        Command::Simulate => {
            let policy = ctx.scenario.policy(ctx.seed)?;
            let traj = ctx.simulate(&policy)?;
            ctx.write_traces(&traj, None)?;
            let c = classify_run(&traj, ctx.omega_star()?, escape_radius(&ctx.scenario)).map_err(numerical)?;
            print(json!({ "outcome": outcome_json(&traj.outcome), "classification": c, "samples": traj.len() }));
            if traj.outcome.is_aborted() {
                return Err(Failure::Numerical("simulation aborted on a non-finite state".into()));
            }
        }
        Command::Verify => {
            let policy = ctx.scenario.policy(ctx.seed)?;
            let traj = ctx.simulate(&policy)?;
            let loads = ctx.scenario.final_loads();
            let model = traj.model.flow_model();
            let eq = find_equilibrium(net, &loads, model).map_err(numerical)?;
            let (rho, storage) = ctx.scenario.dissipation_inputs();
            let report = check_dissipation(
                net,
                &traj,
                &eq.operating_point(net.bus_count()),
                &rho,
                &storage,
                DissipationOptions::for_trajectory(&traj),
            );
            let v: Vec<f64> = report.values.iter().map(|v| v.v).collect();
            ctx.write_traces(&traj, Some(&v))?;
            output::to_file(&ctx.out_file("lyapunov.csv")?, |w| output::write_lyapunov(w, &report))?;
            print(json!({
                "outcome": outcome_json(&traj.outcome),
                "monotone_ok": report.monotone_ok,
                "positive_jumps": report.positive_jumps.len(),
                "max_positive_jump": report.max_positive_jump,
                "tolerance": report.tolerance,
                "bound_ok": report.bound_ok,
                "bound_violations": report.bound_violations,
                "missing_storage": report.missing_storage,
            }));
            if traj.outcome.is_aborted() {
                return Err(Failure::Numerical("simulation aborted on a non-finite state".into()));
            }
        }
        Command::Destabilize => {
            let policy = ctx.scenario.policy(ctx.seed)?;
            if !matches!(policy, InertiaPolicy::Destabilizer(_)) {
                return Err(Failure::Validation("scenario policy is not a destabilizer".into()));
            }
            let traj = ctx.simulate(&policy)?;
            ctx.write_traces(&traj, None)?;
            let log = &traj.destabilizer;
            let cycles: Vec<_> = log
                .cycles
                .iter()
                .map(|c| {
                    json!({
                        "release_time": c.release_time,
                        "release_deviation": c.release_deviation,
                        "peak_time": c.peak_time,
                        "peak_deviation": c.peak_deviation,
                    })
                })
                .collect();
            print(json!({
                "outcome": outcome_json(&traj.outcome),
                "cycles": cycles,
                "strictly_increasing": log.strictly_increasing(),
                "escape_time": log.escape_time,
                "result": if log.escape_time.is_some() { "escaped" } else { "no divergence observed" },
            }));
            if traj.outcome.is_aborted() {
                return Err(Failure::Numerical("simulation aborted on a non-finite state".into()));
            }
        }
        Command::Batch { runs, workers } => {
            let runs = runs.or(ctx.scenario.file.batch.as_ref().map(|b| b.runs)).unwrap_or(1);
            let spec = BatchSpec { runs, base_seed: ctx.seed };
            let report = run_batch(&ctx.scenario, &spec, ctx.model, workers).map_err(|e| match e {
                inertia_core::batch::BatchError::Scenario(s) => Failure::from(s),
                other => Failure::Validation(other.to_string()),
            })?;
            output::to_file(&ctx.out_file("envelope.csv")?, |w| output::write_envelope(w, &report))?;
            output::to_file(&ctx.out_file("runs.csv")?, |w| output::write_batch_runs(w, &report))?;
            print(json!({
                "runs": report.runs.len(),
                "tally": report.tally,
                "envelope_max_deviation": report.envelope_max_deviation(),
                "omega_star": report.omega_star,
            }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // usage errors are validation failures (1); clap would use 2
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
