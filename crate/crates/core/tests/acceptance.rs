//! Acceptance suite: ten criteria, one PASS/FAIL line each, with runtimes.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always
//! printed; exits non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use inertia_core::analysis::{
    check_dissipation, classify_run, find_equilibrium, gamma_point, sync_frequency, DissipationOptions, RunClass,
};
use inertia_core::batch::{run_batch, BatchSpec};
use inertia_core::grid::FlowModel;
use inertia_core::inertia::{InertiaPolicy, OpenLoopProfile};
use inertia_core::passivity::{real_part_infimum, strictness_constant, verify_rho, Passivity};
use inertia_core::scenario::{PolicySpec, SupplySpec};
use inertia_core::sim::{integrate, integrate_fixed_bus, rhs, Network, SimConfig, SimModel, SystemState};
use inertia_core::supply::{LtiSupply, TurbineGovernor, BUS36_GOVERNOR};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn c1_first_order_rho() -> Outcome {
    let mut rng = common::rng(1);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let tau = rng.random_range(0.05..20.0);
        let k = rng.random_range(0.1..100.0);
        let lambda = rng.random_range(0.01..50.0);
        let sys = common::first_order(tau, k, lambda);
        let rho = match strictness_constant(&sys).map_err(|e| e.to_string())? {
            Passivity::Strict(c) => c.rho,
            other => return Err(format!("({tau}, {k}, {lambda}) not strict: {other:?}")),
        };
        worst = worst.max((rho - lambda).abs());
    }
    ensure(worst <= 1e-8, format!("max |rho - lambda| = {worst:e}"))?;
    Ok(format!("max |rho - lambda| = {worst:.2e} over 50 triples"))
}

fn c2_bus36_rho() -> Outcome {
    let sys = TurbineGovernor::new(BUS36_GOVERNOR).and_then(|g| g.tf_to_state_space()).map_err(|e| e.to_string())?;
    let p = strictness_constant(&sys).map_err(|e| e.to_string())?;
    let rho = p.rho();
    ensure(matches!(p, Passivity::Strict(_)), "bus-36 governor not strictly passive")?;
    ensure((27.5..=28.5).contains(&rho), format!("rho = {rho}"))?;
    Ok(format!("rho = {rho:.4}, realization order {}", sys.order()))
}

/// Largest `rho` with `G - rho` positive real, by bisection on the
/// Hamiltonian test alone.
fn bisect_rho(sys: &LtiSupply) -> Result<f64, String> {
    let verify = |r: f64| verify_rho(sys, r).map_err(|e| e.to_string());
    let mut hi = sys.d() + 1.0;
    let mut lo = sys.d() - 1.0;
    let mut width = 1.0;
    while !verify(lo)? {
        width *= 2.0;
        lo = sys.d() - width;
        if width > 1e9 {
            return Err("no lower bracket".into());
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if verify(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn c3_oracle_equivalence() -> Outcome {
    let mut rng = common::rng(3);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = 2 + i % 2;
        let sys = common::random_stable(&mut rng, n);
        let (sweep, _) = real_part_infimum(&sys);
        let bis = bisect_rho(&sys)?;
        let gap = (sweep - bis).abs();
        ensure(gap <= 1e-6, format!("system {i}: sweep {sweep} vs bisection {bis}"))?;
        worst = worst.max(gap);
    }
    Ok(format!("max |sweep - bisection| = {worst:.2e} over 100 systems"))
}

fn c4_rate_limited() -> Result<(String, f64), String> {
    let sc = common::scenario("ring4_rate_limited.json");
    check_ring(&sc.network)?;
    let PolicySpec::RateLimited { tau_vi, epsilon, .. } = sc.file.policy else {
        return Err("scenario policy is not rate-limited".into());
    };
    ensure(tau_vi == 100.0 && epsilon == 1e-4, "tau/epsilon differ from 100 / 1e-4")?;
    let traj = integrate(&sc.network, &sc.initial_state(None).unwrap(), &sc.sim_config(None), &sc.policy(0).unwrap())
        .map_err(|e| e.to_string())?;
    let eq = find_equilibrium(&sc.network, &sc.final_loads(), FlowModel::Nonlinear).map_err(|e| e.to_string())?;
    let c = classify_run(&traj, eq.omega_sync, None).map_err(|e| e.to_string())?;
    let (rho, storage) = sc.dissipation_inputs();
    let rep = check_dissipation(
        &sc.network,
        &traj,
        &eq.operating_point(4),
        &rho,
        &storage,
        DissipationOptions::for_trajectory(&traj),
    );
    ensure(c.class == RunClass::Convergent, format!("class {}", c.class))?;
    ensure(c.final_deviation < 1e-4, format!("final deviation {:e}", c.final_deviation))?;
    ensure(rep.monotone_ok, format!("{} positive jumps", rep.positive_jumps.len()))?;
    Ok((
        format!("convergent, final deviation {:.2e} Hz, monotone_ok, max dV {:.1e}", c.final_deviation, rep.max_positive_jump),
        c.max_deviation,
    ))
}

/// The desk ring: 4 buses, first-order supplies, lambda in [0.5, 2].
fn check_ring(net: &Network) -> Result<(), String> {
    ensure(net.bus_count() == 4 && net.line_count() == 4, "not a 4-bus ring")?;
    for s in net.supplies() {
        ensure(s.order() == 1 && (0.5..=2.0).contains(&s.d()), "supply outside first-order, lambda in [0.5, 2]")?;
    }
    Ok(())
}

fn c5_bang_bang() -> Outcome {
    let sc = common::scenario("ring4_bang_bang.json");
    check_ring(&sc.network)?;
    let policy = sc.policy(0).unwrap();
    let InertiaPolicy::BangBang(p) = &policy else { return Err("not bang-bang".into()) };
    let max_m0 = sc.network.m0().into_iter().fold(0.0, f64::max);
    ensure(p.ma == 5.0 * max_m0 && p.threshold == 0.02, "Ma or threshold differ from 5 max M0 / 0.02")?;
    ensure(sc.file.simulation.horizon == 60.0, "horizon is not 60 s")?;
    let traj = integrate(&sc.network, &sc.initial_state(None).unwrap(), &sc.sim_config(None), &policy)
        .map_err(|e| e.to_string())?;
    let eq = find_equilibrium(&sc.network, &sc.final_loads(), FlowModel::Nonlinear).map_err(|e| e.to_string())?;
    let c = classify_run(&traj, eq.omega_sync, None).map_err(|e| e.to_string())?;
    let (rho, storage) = sc.dissipation_inputs();
    let rep = check_dissipation(
        &sc.network,
        &traj,
        &eq.operating_point(4),
        &rho,
        &storage,
        DissipationOptions::for_trajectory(&traj),
    );
    ensure(c.class != RunClass::Convergent, "run converged")?;
    ensure(rep.positive_jumps.len() >= 5, format!("only {} positive jumps", rep.positive_jumps.len()))?;
    Ok(format!("{}, final deviation {:.2e} Hz, {} positive jumps", c.class, c.final_deviation, rep.positive_jumps.len()))
}

fn c6_randomized(case4_max: f64) -> Outcome {
    let sc = common::scenario("ring4_randomized.json");
    check_ring(&sc.network)?;
    let runs = sc.file.batch.as_ref().map(|b| b.runs).unwrap_or(0);
    ensure(runs == 500, format!("batch has {runs} runs"))?;
    let report = run_batch(&sc, &BatchSpec { runs, base_seed: sc.file.seed }, None, 4).map_err(|e| e.to_string())?;
    let env = report.envelope_max_deviation();
    ensure(report.all_convergent(), format!("tally {:?}", report.tally))?;
    ensure(env <= 2.0 * case4_max, format!("envelope {env} vs case 4 {case4_max}"))?;
    Ok(format!("{}/500 convergent, envelope max {env:.4} Hz vs case 4 {case4_max:.4} Hz", report.tally.convergent))
}

fn c7_destabilizer() -> Outcome {
    let sc = common::scenario("two_bus_destabilizer.json");
    ensure(sc.network.bus_count() == 2, "not a 2-bus system")?;
    let PolicySpec::Destabilizer { target, escape_radius, .. } = &sc.file.policy else {
        return Err("not a destabilizer scenario".into());
    };
    ensure(*escape_radius == 0.5, "escape radius is not 0.5 Hz")?;
    let k = sc.network.graph().bus_index(target).unwrap();
    match &sc.file.buses[k].supply {
        SupplySpec::SecondOrder(s) => ensure(s.damping_ratio <= 0.2, "damping ratio above 0.2")?,
        _ => return Err("target supply is not second-order".into()),
    }
    let initial = sc.initial_state(None).unwrap();
    let w_star = sync_frequency(&sc.network, &sc.final_loads()).map_err(|e| e.to_string())?;
    let delta = (initial.omega[k] - w_star).abs();
    ensure((delta - 1e-3).abs() < 1e-12, format!("start deviation {delta}"))?;

    // overshoot certificate: constant inertia from the same start
    let pre_cfg = SimConfig::new(sc.file.simulation.step, 30.0, sc.sim_config(None).model);
    let pre = integrate(&sc.network, &initial, &pre_cfg, &InertiaPolicy::Constant).map_err(|e| e.to_string())?;
    let pre_peak = pre.omega.iter().map(|w| (w[k] - w_star).abs()).fold(0.0, f64::max);
    ensure(pre_peak > delta, format!("no overshoot: peak {pre_peak} <= {delta}"))?;

    let traj = integrate(&sc.network, &initial, &sc.sim_config(None), &sc.policy(0).unwrap()).map_err(|e| e.to_string())?;
    let log = &traj.destabilizer;
    let c = classify_run(&traj, w_star, Some(*escape_radius)).map_err(|e| e.to_string())?;
    ensure(log.cycles.len() >= 4, format!("{} cycles", log.cycles.len()))?;
    ensure(log.strictly_increasing(), format!("peaks {:?}", log.peaks()))?;
    let Some(t_escape) = log.escape_time else { return Err("no escape within the horizon".into()) };
    ensure(c.class == RunClass::Divergent, format!("classified {}", c.class))?;
    Ok(format!(
        "overshoot {:.2}x, {} cycles, peaks {:?}, escape at t = {t_escape:.2} s",
        pre_peak / delta,
        log.cycles.len(),
        log.peaks().iter().map(|p| format!("{p:.2e}")).collect::<Vec<_>>()
    ))
}

fn c8_fixed_bus_limit() -> Outcome {
    let net = common::network(
        &["1", "2", "3"],
        &[("1", "2", 5.0), ("2", "3", 5.0), ("1", "3", 5.0)],
        &[1.0; 3],
        &[0.0; 3],
        (0..3).map(|j| common::first_order(1.0 + j as f64, 10.0, 1.0)).collect(),
    );
    let (k, omega_bar) = (0, 1e-3);
    let mut initial = SystemState::zeros(&net);
    initial.omega[k] = omega_bar;
    let cfg = SimConfig::new(0.01, 10.0, SimModel::Linear);
    let fixed = integrate_fixed_bus(&net, &initial, k, omega_bar, &cfg, &InertiaPolicy::Constant)
        .map_err(|e| e.to_string())?;
    let m0 = net.m0()[k];
    let mut gaps = Vec::new();
    for mult in [10.0, 100.0, 1000.0] {
        let mut bp = vec![Vec::new(); 3];
        bp[k] = vec![(0.0, mult * m0)];
        let full = integrate(&net, &initial, &cfg, &InertiaPolicy::OpenLoop(OpenLoopProfile { breakpoints: bp }))
            .map_err(|e| e.to_string())?;
        ensure(full.len() == fixed.len(), "trajectory lengths differ")?;
        let gap = full
            .omega
            .iter()
            .zip(&fixed.omega)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        gaps.push(gap);
    }
    ensure(gaps.windows(2).all(|w| w[1] < w[0]), format!("gaps not decreasing: {gaps:?}"))?;
    ensure(gaps[2] < 1e-3, format!("final gap {:e}", gaps[2]))?;
    Ok(format!("gaps {:?} Hz", gaps.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>()))
}

fn sup_rhs(net: &Network, state: &SystemState, loads: &[f64], model: SimModel, skip: Option<usize>) -> f64 {
    let d = rhs(net, state, loads, model).expect("positive inertia");
    let omega = d.omega.iter().enumerate().filter(|(j, _)| Some(*j) != skip).map(|(_, v)| v.abs());
    d.eta.iter().chain(&d.xs).map(|v| v.abs()).chain(omega).fold(0.0, f64::max)
}

fn c9_residuals() -> Outcome {
    let mut corpus: Vec<(String, Network, Vec<f64>)> = vec![
        ("two-bus".into(), common::two_bus(2.0, 1.0, [0.3, -0.1]), vec![0.3, -0.1]),
        ("triangle".into(), common::triangle([0.4, 0.1, -0.2]), vec![0.4, 0.1, -0.2]),
        ("ring4".into(), common::ring4(), vec![2.0, 0.0, 0.0, 0.0]),
        ("ring4-spread".into(), common::ring4(), vec![0.5, -0.3, 0.8, 0.2]),
    ];
    for name in ["bus36_governor.json", "two_bus_destabilizer.json", "ring4_rate_limited.json"] {
        let sc = common::scenario(name);
        let loads = sc.final_loads();
        corpus.push((name.into(), sc.network.clone(), loads));
    }
    let (mut worst_eq, mut worst_gp, mut worst_inv, mut worst_slack) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (name, net, loads) in &corpus {
        for (mode, model) in [(FlowModel::Nonlinear, SimModel::Nonlinear), (FlowModel::Linear, SimModel::Linear)] {
            let eq = find_equilibrium(net, loads, mode).map_err(|e| format!("{name}: {e}"))?;
            worst_eq = worst_eq.max(sup_rhs(net, &eq.to_state(net.bus_count()), loads, model, None));
        }
        let w_star = sync_frequency(net, loads).map_err(|e| e.to_string())?;
        let omega_bar = w_star + 0.01;
        let reference = gamma_point(net, loads, omega_bar, 0).map_err(|e| e.to_string())?;
        for k in 0..net.bus_count() {
            let gp = gamma_point(net, loads, omega_bar, k).map_err(|e| e.to_string())?;
            let model = SimModel::FixedBus { bus: k, omega_bar };
            worst_gp = worst_gp.max(sup_rhs(net, &gp.to_state(net.bus_count()), loads, model, Some(k)));
            let inv = gp
                .xs_hat
                .iter()
                .zip(&reference.xs_hat)
                .map(|(a, b)| (a - b).abs())
                .fold((gp.omega_bar - reference.omega_bar).abs(), f64::max);
            worst_inv = worst_inv.max(inv);
            let at_eq = gamma_point(net, loads, w_star, k).map_err(|e| e.to_string())?;
            worst_slack = worst_slack.max(at_eq.slack_injection.abs());
        }
    }
    ensure(worst_eq < 1e-8, format!("equilibrium residual {worst_eq:e}"))?;
    ensure(worst_gp < 1e-8, format!("gamma-point residual {worst_gp:e}"))?;
    ensure(worst_inv < 1e-10, format!("slack-bus dependence {worst_inv:e}"))?;
    ensure(worst_slack < 1e-8, format!("slack at omega* {worst_slack:e}"))?;
    Ok(format!(
        "{} networks: eq {worst_eq:.1e}, gamma {worst_gp:.1e}, invariance {worst_inv:.1e}, slack {worst_slack:.1e}",
        corpus.len()
    ))
}

fn c10_integrator_order() -> Outcome {
    let net = common::triangle([0.3, -0.1, 0.2]);
    let mut initial = SystemState::zeros(&net);
    initial.omega = vec![0.05, -0.02, 0.01];
    initial.eta = vec![0.1, -0.05, 0.02];
    let profile = OpenLoopProfile { breakpoints: vec![vec![(0.5, 0.0), (2.5, 3.0)], Vec::new(), vec![(1.0, 1.0)]] };
    let policy = InertiaPolicy::OpenLoop(profile);
    let finals: Vec<Vec<f64>> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&h| {
            let traj = integrate(&net, &initial, &SimConfig::new(h, 5.0, SimModel::Nonlinear), &policy).unwrap();
            let s = traj.last_state().unwrap();
            s.eta.into_iter().chain(s.omega).chain(s.xs).collect()
        })
        .collect();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let (d1, d2) = (diff(&finals[0], &finals[1]), diff(&finals[1], &finals[2]));
    let order = (d1 / d2).log2();
    ensure((3.5..=4.5).contains(&order), format!("order {order}"))?;
    Ok(format!("observed order {order:.3} (differences {d1:.2e}, {d2:.2e})"))
}

fn report(n: usize, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (ok, detail) = match result {
        Ok(d) if elapsed <= limit => (true, d),
        Ok(d) => (false, format!("{d}; runtime over the {limit:?} limit")),
        Err(e) => (false, e),
    };
    println!("{} criterion {n:>2} [{:.2?} / {limit:?}]: {detail}", if ok { "PASS" } else { "FAIL" }, elapsed);
    ok
}

fn main() {
    let s = Duration::from_secs;
    let mut ok = true;
    ok &= report(1, s(1), c1_first_order_rho);
    ok &= report(2, s(1), c2_bus36_rho);
    ok &= report(3, s(30), c3_oracle_equivalence);
    let mut case4_max = None;
    ok &= report(4, s(10), || {
        c4_rate_limited().map(|(d, m)| {
            case4_max = Some(m);
            d
        })
    });
    ok &= report(5, s(10), c5_bang_bang);
    ok &= report(6, s(300), || match case4_max {
        Some(m) => c6_randomized(m),
        None => Err("needs the criterion 4 run".into()),
    });
    ok &= report(7, s(30), c7_destabilizer);
    ok &= report(8, s(10), c8_fixed_bus_limit);
    ok &= report(9, s(5), c9_residuals);
    ok &= report(10, s(5), c10_integrator_order);
    if !ok {
        std::process::exit(1);
    }
}
