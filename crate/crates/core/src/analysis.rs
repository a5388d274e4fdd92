//! Equilibria, gamma-points, Lyapunov functions and run classification.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::grid::FlowModel;
use crate::sim::{Network, Outcome, SystemState, Trajectory};
use crate::supply::SupplyDynamics;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("aggregate dc supply gain {0} is not positive; the frequency balance has no unique root")]
    NoAggregateResponse(f64),
    #[error("supply at bus {0} has no steady state")]
    Supply(usize),
    #[error("line {line} overloaded: flow {flow} exceeds capacity {capacity}; no equilibrium with |eta| < pi/2")]
    LineOverload { line: usize, flow: f64, capacity: f64 },
    #[error("equilibrium residual {0:e} exceeds tolerance")]
    Residual(f64),
    #[error("least-squares flow solve failed")]
    FlowSolve,
    #[error("bus index {0} out of range")]
    Bus(usize),
    #[error("trajectory too short to classify ({0} samples)")]
    TooShort(usize),
}

const BISECTION_BRACKET: f64 = 10.0;
const BISECTION_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-8;

/// A synchronous equilibrium: common frequency, angles, supply states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub omega_sync: f64,
    pub eta_star: Vec<f64>,
    pub flows: Vec<f64>,
    pub xs_star: Vec<f64>,
    pub s_star: Vec<f64>,
    pub assumption1_ok: bool,
    /// Dimension of the cycle space; angle offsets along cycles are not unique.
    pub cycle_rank: usize,
    pub residual: f64,
}

impl Equilibrium {
    pub fn operating_point(&self, buses: usize) -> OperatingPoint {
        OperatingPoint {
            omega: vec![self.omega_sync; buses],
            eta: self.eta_star.clone(),
            xs: self.xs_star.clone(),
        }
    }

    /// The equilibrium as a simulation state with zero virtual inertia.
    pub fn to_state(&self, buses: usize) -> SystemState {
        SystemState {
            t: 0.0,
            eta: self.eta_star.clone(),
            omega: vec![self.omega_sync; buses],
            xs: self.xs_star.clone(),
            mv: vec![0.0; buses],
        }
    }
}

/// Quasi-equilibrium with bus `bus` pinned at `omega_bar` (linear flows).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaPoint {
    pub omega_bar: f64,
    pub bus: usize,
    pub eta_hat: Vec<f64>,
    pub flows: Vec<f64>,
    pub xs_hat: Vec<f64>,
    pub s_hat: Vec<f64>,
    /// Power imbalance `-pL_k + s_k - (H p)_k` left at the pinned bus.
    pub slack_injection: f64,
    pub residual: f64,
}

impl GammaPoint {
    pub fn operating_point(&self, buses: usize) -> OperatingPoint {
        OperatingPoint {
            omega: vec![self.omega_bar; buses],
            eta: self.eta_hat.clone(),
            xs: self.xs_hat.clone(),
        }
    }

    pub fn to_state(&self, buses: usize) -> SystemState {
        SystemState {
            t: 0.0,
            eta: self.eta_hat.clone(),
            omega: vec![self.omega_bar; buses],
            xs: self.xs_hat.clone(),
            mv: vec![0.0; buses],
        }
    }
}

/// Reference point the Lyapunov functions are centred on.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub omega: Vec<f64>,
    pub eta: Vec<f64>,
    pub xs: Vec<f64>,
}

fn aggregate_balance(net: &Network, loads: &[f64], omega: f64) -> Result<f64, AnalysisError> {
    let mut acc = 0.0;
    for (j, (sup, pl)) in net.supplies().iter().zip(loads).enumerate() {
        let (_, s) = sup.steady_state(omega).map_err(|_| AnalysisError::Supply(j))?;
        acc += -pl + s;
    }
    Ok(acc)
}

/// Root of the aggregate balance `sum_j (-pL_j + s*_j(omega)) = 0` by
/// bisection on `[-10, 10]`.
pub fn sync_frequency_bisection(net: &Network, loads: &[f64]) -> Result<f64, AnalysisError> {
    let (mut lo, mut hi) = (-BISECTION_BRACKET, BISECTION_BRACKET);
    let mut f_lo = aggregate_balance(net, loads, lo)?;
    let f_hi = aggregate_balance(net, loads, hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(AnalysisError::NoAggregateResponse(f_lo - f_hi));
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let f_mid = aggregate_balance(net, loads, mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `omega* = -sum pL / sum G_j(0)` when every supply reports a dc gain,
/// bisection otherwise.
pub fn sync_frequency(net: &Network, loads: &[f64]) -> Result<f64, AnalysisError> {
    let gains: Option<Vec<f64>> = net.supplies().iter().map(|s| s.dc_gain()).collect();
    match gains {
        Some(g) => {
            let total: f64 = g.iter().sum();
            if !(total > 0.0) {
                return Err(AnalysisError::NoAggregateResponse(total));
            }
            Ok(-loads.iter().sum::<f64>() / total)
        }
        None => sync_frequency_bisection(net, loads),
    }
}

fn static_supplies(net: &Network, omega: f64) -> Result<(Vec<f64>, Vec<f64>), AnalysisError> {
    let mut xs = Vec::with_capacity(net.supply_state_count());
    let mut s = Vec::with_capacity(net.bus_count());
    for (j, sup) in net.supplies().iter().enumerate() {
        let (x, out) = sup.steady_state(omega).map_err(|_| AnalysisError::Supply(j))?;
        xs.extend(x.iter());
        s.push(out);
    }
    Ok((xs, s))
}

fn min_norm_solve(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>, AnalysisError> {
    if h.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    let svd = h.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(1.0);
    svd.solve(rhs, eps).map_err(|_| AnalysisError::FlowSolve)
}

/// Supremum-norm residual of the equilibrium conditions at a candidate point.
pub fn equilibrium_residual(
    net: &Network,
    loads: &[f64],
    omega: &[f64],
    eta: &[f64],
    xs: &[f64],
    mode: FlowModel,
    skip_bus: Option<usize>,
) -> f64 {
    let graph = net.graph();
    let mut res: f64 = 0.0;
    for r in graph.angle_rates(omega).expect("omega dimension").iter() {
        res = res.max(r.abs());
    }
    let flows = graph.power_flow(eta, mode).expect("eta dimension");
    let inj = graph.net_injection(flows.as_slice()).expect("flow dimension");
    for (j, sup) in net.supplies().iter().enumerate() {
        let lo = net.supply_offset(j);
        let x = &xs[lo..lo + sup.order()];
        let mut dx = vec![0.0; sup.order()];
        sup.rhs(x, omega[j], &mut dx);
        for v in dx {
            res = res.max(v.abs());
        }
        if Some(j) != skip_bus {
            let balance = -loads[j] + sup.output(x, omega[j]) - inj[j];
            res = res.max(balance.abs());
        }
    }
    res
}

/// Equilibrium of the network at loads `loads` under the given flow map.
///
/// Flows are the minimum-norm solution of `H p = -pL + s*`; on graphs with
/// cycles other flow patterns differing by circulations are also equilibria.
pub fn find_equilibrium(net: &Network, loads: &[f64], mode: FlowModel) -> Result<Equilibrium, AnalysisError> {
    let omega = sync_frequency(net, loads)?;
    let (xs, s) = static_supplies(net, omega)?;
    let graph = net.graph();
    let rhs = DVector::from_iterator(loads.len(), loads.iter().zip(&s).map(|(pl, s)| -pl + s));
    let p = min_norm_solve(&graph.incidence(), &rhs)?;
    let mut eta = Vec::with_capacity(p.len());
    for (q, (line, &flow)) in graph.lines().iter().zip(p.iter()).enumerate() {
        let b = line.susceptance;
        eta.push(match mode {
            FlowModel::Linear => flow / b,
            FlowModel::Nonlinear => {
                if flow.abs() > b {
                    return Err(AnalysisError::LineOverload { line: q, flow, capacity: b });
                }
                (flow / b).asin()
            }
        });
    }
    let omegas = vec![omega; net.bus_count()];
    let residual = equilibrium_residual(net, loads, &omegas, &eta, &xs, mode, None);
    let scale = loads.iter().fold(1.0, |m: f64, v| m.max(v.abs()));
    if residual > RESIDUAL_TOL * scale {
        return Err(AnalysisError::Residual(residual));
    }
    Ok(Equilibrium {
        omega_sync: omega,
        assumption1_ok: eta.iter().all(|e| e.abs() < std::f64::consts::FRAC_PI_2),
        eta_star: eta,
        flows: p.iter().copied().collect(),
        xs_star: xs,
        s_star: s,
        cycle_rank: graph.cycle_rank(),
        residual,
    })
}

/// Gamma-point of the linearized network at pinned frequency `omega_bar` on
/// bus `k`; bus `k` absorbs whatever imbalance remains.
pub fn gamma_point(net: &Network, loads: &[f64], omega_bar: f64, k: usize) -> Result<GammaPoint, AnalysisError> {
    let n = net.bus_count();
    if k >= n {
        return Err(AnalysisError::Bus(k));
    }
    let (xs, s) = static_supplies(net, omega_bar)?;
    let graph = net.graph();
    let h = graph.incidence();
    let rows: Vec<usize> = (0..n).filter(|&j| j != k).collect();
    let h_red = h.select_rows(rows.iter());
    let r: Vec<f64> = loads.iter().zip(&s).map(|(pl, s)| -pl + s).collect();
    let r_red = DVector::from_iterator(rows.len(), rows.iter().map(|&j| r[j]));
    let p = min_norm_solve(&h_red, &r_red)?;
    let eta: Vec<f64> = graph.lines().iter().zip(p.iter()).map(|(l, f)| f / l.susceptance).collect();
    let inj = graph.net_injection(p.as_slice()).expect("flow dimension");
    let slack = r[k] - inj[k];
    let omegas = vec![omega_bar; n];
    let residual = equilibrium_residual(net, loads, &omegas, &eta, &xs, FlowModel::Linear, Some(k));
    let scale = loads.iter().fold(1.0, |m: f64, v| m.max(v.abs()));
    if residual > RESIDUAL_TOL * scale {
        return Err(AnalysisError::Residual(residual));
    }
    Ok(GammaPoint {
        omega_bar,
        bus: k,
        eta_hat: eta,
        flows: p.iter().copied().collect(),
        xs_hat: xs,
        s_hat: s,
        slack_injection: slack,
        residual,
    })
}

/// Components of the Lyapunov function at one state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LyapunovValue {
    pub v: f64,
    pub v_f: f64,
    pub v_p: f64,
    pub sum_vj: f64,
}

/// `B [(cos eta* - cos eta) - sin eta* (eta - eta*)]`, the integral of
/// `B (sin phi - sin eta*)` from `eta*` to `eta`.
pub fn potential_nonlinear(b: f64, eta_star: f64, eta: f64) -> f64 {
    b * ((eta_star.cos() - eta.cos()) - eta_star.sin() * (eta - eta_star))
}

pub fn potential_linear(b: f64, eta_star: f64, eta: f64) -> f64 {
    0.5 * b * (eta - eta_star).powi(2)
}

/// Lyapunov function `V_F + V_P + sum V_j` at a state.
///
/// With `skip_bus = Some(k)` the kinetic term omits bus `k` (fixed-bus
/// variant). Buses whose storage matrix is `None` contribute no `V_j`.
pub fn lyapunov_value(
    net: &Network,
    point: &OperatingPoint,
    storage: &[Option<DMatrix<f64>>],
    state: &SystemState,
    m: &[f64],
    mode: FlowModel,
    skip_bus: Option<usize>,
) -> LyapunovValue {
    let mut v_f = 0.0;
    for j in 0..net.bus_count() {
        if Some(j) == skip_bus {
            continue;
        }
        v_f += 0.5 * m[j] * (state.omega[j] - point.omega[j]).powi(2);
    }
    let mut v_p = 0.0;
    for (q, line) in net.graph().lines().iter().enumerate() {
        let (es, e) = (point.eta[q], state.eta[q]);
        v_p += match mode {
            FlowModel::Nonlinear => potential_nonlinear(line.susceptance, es, e),
            FlowModel::Linear => potential_linear(line.susceptance, es, e),
        };
    }
    let mut sum_vj = 0.0;
    for (j, sup) in net.supplies().iter().enumerate() {
        let Some(p) = storage.get(j).and_then(|p| p.as_ref()) else { continue };
        let lo = net.supply_offset(j);
        let n = sup.order();
        let dx = DVector::from_iterator(n, (0..n).map(|i| state.xs[lo + i] - point.xs[lo + i]));
        sum_vj += 0.5 * dx.dot(&(p * &dx));
    }
    LyapunovValue { v: v_f + v_p + sum_vj, v_f, v_p, sum_vj }
}

/// Lyapunov series of a trajectory with its dissipation checks.
///
/// Header notes: the invariant set and the passivity neighbourhoods of the
/// stability argument are existential and not computed; the series is
/// checked pointwise along the sampled trajectory only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub t: Vec<f64>,
    pub values: Vec<LyapunovValue>,
    /// Right-hand side of the pointwise bound on `dV/dt` per step.
    pub bound: Vec<f64>,
    pub tolerance: f64,
    pub c: f64,
    pub max_positive_jump: f64,
    /// Steps whose `V` increase exceeds the tolerance.
    pub positive_jumps: Vec<usize>,
    pub monotone_ok: bool,
    pub bound_ok: bool,
    pub bound_violations: usize,
    /// Buses whose `V_j` was omitted for lack of a storage matrix.
    pub missing_storage: Vec<usize>,
}

/// Options for [`check_dissipation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationOptions {
    /// Sample index where the analysis starts (after the last disturbance).
    pub start: usize,
    pub mode: FlowModel,
    pub skip_bus: Option<usize>,
    /// Multiplier on the `|dV/dt|` estimate (default 10).
    pub c_factor: f64,
}

impl DissipationOptions {
    pub fn for_trajectory(traj: &Trajectory) -> Self {
        Self {
            start: analysis_start(traj),
            mode: traj.model.flow_model(),
            skip_bus: traj.model.fixed_bus(),
            c_factor: 10.0,
        }
    }
}

/// First sample at which the load equals its final value.
pub fn analysis_start(traj: &Trajectory) -> usize {
    let Some(last) = traj.loads.last() else { return 0 };
    let mut start = traj.loads.len() - 1;
    while start > 0 && traj.loads[start - 1] == *last {
        start -= 1;
    }
    start
}

/// Evaluates `V` along the trajectory and checks that it never increases by
/// more than `c h^2` per step, with `c` the given factor times the largest
/// `|dV/dt|` seen over steps where no inertia jumps. Also checks
/// `dV/dt <= sum_j (dM_j/dt / 2 - rho_j) (omega_j - omega*_j)^2 + c h`.
pub fn check_dissipation(
    net: &Network,
    traj: &Trajectory,
    point: &OperatingPoint,
    rho: &[f64],
    storage: &[Option<DMatrix<f64>>],
    opts: DissipationOptions,
) -> LyapunovReport {
    let h = traj.step;
    let start = opts.start.min(traj.len());
    let missing_storage: Vec<usize> = (0..net.bus_count())
        .filter(|&j| net.supplies()[j].order() > 0 && storage.get(j).map_or(true, |p| p.is_none()))
        .collect();
    if !missing_storage.is_empty() {
        log::warn!("no storage matrix for buses {missing_storage:?}; their V_j terms are omitted");
    }
    let idx: Vec<usize> = (start..traj.len()).collect();
    let values: Vec<LyapunovValue> = idx
        .iter()
        .map(|&i| lyapunov_value(net, point, storage, &traj.state(i), &traj.inertia(i), opts.mode, opts.skip_bus))
        .collect();
    let t: Vec<f64> = idx.iter().map(|&i| traj.t[i]).collect();

    let steps = values.len().saturating_sub(1);
    let dv: Vec<f64> = (0..steps).map(|i| values[i + 1].v - values[i].v).collect();
    // an inertia jump is a change faster than the admissible 2 rho rate
    let smooth = |i: usize| {
        let (a, b) = (&traj.mv[idx[i]], &traj.mv[idx[i + 1]]);
        (0..net.bus_count()).all(|j| (b[j] - a[j]).abs() <= 2.0 * rho[j].max(0.0) * h * (1.0 + 1e-9) + 1e-15)
    };
    let mut rate = 0.0f64;
    let mut any_smooth = false;
    for i in 0..steps {
        if smooth(i) {
            any_smooth = true;
            rate = rate.max((dv[i] / h).abs());
        }
    }
    if !any_smooth {
        rate = dv.iter().fold(0.0, |m: f64, d| m.max((d / h).abs()));
    }
    let c = opts.c_factor * rate;
    let tolerance = c * h * h;

    let mut positive_jumps = Vec::new();
    let mut max_positive_jump = 0.0f64;
    let mut bound = Vec::with_capacity(steps);
    let mut bound_violations = 0;
    for i in 0..steps {
        if dv[i] > tolerance {
            positive_jumps.push(idx[i]);
        }
        max_positive_jump = max_positive_jump.max(dv[i]);
        let (a, b) = (idx[i], idx[i + 1]);
        let mut rhs = 0.0;
        for j in 0..net.bus_count() {
            if Some(j) == opts.skip_bus {
                continue;
            }
            let dm = traj.mv[b][j] - traj.mv[a][j];
            let za = traj.omega[a][j] - point.omega[j];
            let zb = traj.omega[b][j] - point.omega[j];
            let z2 = 0.5 * (za * za + zb * zb);
            rhs += (dm / (2.0 * h) - rho[j]) * z2;
        }
        let rhs = rhs + c * h;
        if dv[i] / h > rhs {
            bound_violations += 1;
        }
        bound.push(rhs);
    }
    LyapunovReport {
        t,
        values,
        bound,
        tolerance,
        c,
        max_positive_jump,
        monotone_ok: positive_jumps.is_empty(),
        positive_jumps,
        bound_ok: bound_violations == 0,
        bound_violations,
        missing_storage,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunClass {
    Convergent,
    Oscillatory,
    Divergent,
}

impl std::fmt::Display for RunClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunClass::Convergent => "convergent",
            RunClass::Oscillatory => "oscillatory",
            RunClass::Divergent => "divergent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub class: RunClass,
    pub max_deviation: f64,
    /// Max deviation over the final 10% of the run.
    pub final_deviation: f64,
    /// Time after which the deviation stays below the convergence band.
    pub settling_time: Option<f64>,
    /// Half-cycle peak deviations at the bus with the largest deviation.
    pub peaks: Vec<f64>,
    pub reason: String,
}

pub const CONVERGENCE_BAND: f64 = 1e-4;
const GROWTH_PER_CYCLE: f64 = 1.05;
const GROWTH_CYCLES: usize = 5;

/// Peak `|e|` of each complete lobe between sign changes of `e`.
fn lobe_peaks(e: &[f64]) -> Vec<f64> {
    let mut peaks = Vec::new();
    let mut current: Option<(f64, f64)> = None; // (sign, peak)
    let mut first = true;
    for &v in e {
        if v == 0.0 {
            continue;
        }
        let sign = v.signum();
        match current {
            Some((s, p)) if s == sign => current = Some((s, p.max(v.abs()))),
            Some((_, p)) => {
                if !first {
                    peaks.push(p);
                }
                first = false;
                current = Some((sign, v.abs()));
            }
            None => current = Some((sign, v.abs())),
        }
    }
    peaks
}

fn sustained_growth(peaks: &[f64]) -> bool {
    // compare same-sign lobes one full cycle apart
    let need = 2 * GROWTH_CYCLES;
    if peaks.len() <= need {
        return false;
    }
    let ok: Vec<bool> = (0..peaks.len() - 2)
        .map(|i| peaks[i] > 1e-12 && peaks[i + 2] >= GROWTH_PER_CYCLE * peaks[i])
        .collect();
    // a run of `need` consecutive lobe comparisons covers GROWTH_CYCLES cycles on each sign
    let mut run = 0;
    for v in ok {
        run = if v { run + 1 } else { 0 };
        if run >= need {
            return true;
        }
    }
    false
}

/// Classifies a run as convergent, oscillatory or divergent around `omega_star`.
pub fn classify_run(
    traj: &Trajectory,
    omega_star: f64,
    escape_radius: Option<f64>,
) -> Result<Classification, AnalysisError> {
    let n = traj.len();
    if n < 10 {
        return Err(AnalysisError::TooShort(n));
    }
    let skip = traj.model.fixed_bus();
    let dev = |i: usize| {
        traj.omega[i]
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != skip)
            .fold(0.0f64, |m, (_, w)| m.max((w - omega_star).abs()))
    };
    let devs: Vec<f64> = (0..n).map(dev).collect();
    let max_deviation = devs.iter().fold(0.0f64, |m, v| m.max(*v));
    let tail_start = ((0.9 * (n - 1) as f64).floor() as usize).min(n - 1);
    let final_deviation = devs[tail_start..].iter().fold(0.0f64, |m, v| m.max(*v));
    let settling_time = match devs.iter().rposition(|&d| d >= CONVERGENCE_BAND) {
        None => Some(traj.t[0]),
        Some(i) if i + 1 < n => Some(traj.t[i + 1]),
        Some(_) => None,
    };

    let worst_bus = (0..traj.omega[0].len())
        .filter(|j| Some(*j) != skip)
        .max_by(|&a, &b| {
            let ma = traj.omega.iter().fold(0.0f64, |m, w| m.max((w[a] - omega_star).abs()));
            let mb = traj.omega.iter().fold(0.0f64, |m, w| m.max((w[b] - omega_star).abs()));
            ma.total_cmp(&mb)
        })
        .unwrap_or(0);
    let peaks = lobe_peaks(&traj.omega.iter().map(|w| w[worst_bus] - omega_star).collect::<Vec<_>>());

    let escaped = escape_radius.is_some_and(|r| max_deviation > r);
    let finished_early = !matches!(traj.outcome, Outcome::Completed);
    let (class, reason) = if traj.outcome.is_aborted() {
        (RunClass::Divergent, "run aborted on a non-finite state".to_string())
    } else if escaped {
        (RunClass::Divergent, format!("deviation {max_deviation:.4} left the escape radius"))
    } else if !finished_early && final_deviation < CONVERGENCE_BAND {
        (RunClass::Convergent, format!("final deviation {final_deviation:.3e} below band"))
    } else if (0..traj.omega[0].len()).filter(|j| Some(*j) != skip).any(|j| {
        let e: Vec<f64> = traj.omega.iter().map(|w| w[j] - omega_star).collect();
        sustained_growth(&lobe_peaks(&e))
    }) {
        (RunClass::Divergent, "peak deviations grow by at least 5% per cycle".to_string())
    } else {
        (RunClass::Oscillatory, format!("final deviation {final_deviation:.3e} above band"))
    };
    Ok(Classification { class, max_deviation, final_deviation, settling_time, peaks, reason })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BusParams, NetworkGraph};
    use crate::supply::LtiSupply;

    fn gain_net(loads: [f64; 2], g: f64) -> Network {
        let graph = NetworkGraph::new(&["1", "2"], &[("1", "2", 1.0)]).unwrap();
        let params = loads.map(|load| BusParams { inertia: 1.0, virtual_damping: 0.0, load }).to_vec();
        Network::new(graph, params, vec![LtiSupply::gain(g), LtiSupply::gain(g)]).unwrap()
    }

    #[test]
    fn zero_load_equilibrium() {
        let net = gain_net([0.0, 0.0], 10.0);
        let eq = find_equilibrium(&net, &net.loads(), FlowModel::Nonlinear).unwrap();
        assert_eq!(eq.omega_sync, 0.0);
        assert!(eq.eta_star.iter().all(|e| *e == 0.0));
    }

    #[test]
    fn two_bus_balanced_transfer() {
        let net = gain_net([0.5, -0.5], 10.0);
        let eq = find_equilibrium(&net, &net.loads(), FlowModel::Nonlinear).unwrap();
        assert!(eq.omega_sync.abs() < 1e-15);
        assert!((eq.flows[0] + 0.5).abs() < 1e-12);
        assert!((eq.eta_star[0] - (-0.5f64).asin()).abs() < 1e-12);
        assert!((eq.eta_star[0] + 0.5236).abs() < 1e-4);
        assert!(eq.assumption1_ok);
    }

    #[test]
    fn two_bus_frequency_drop() {
        let net = gain_net([0.5, 0.5], 10.0);
        let eq = find_equilibrium(&net, &net.loads(), FlowModel::Linear).unwrap();
        assert!((eq.omega_sync + 0.05).abs() < 1e-15);
        let bis = sync_frequency_bisection(&net, &net.loads()).unwrap();
        assert!((bis + 0.05).abs() < 1e-11);
    }

    #[test]
    fn overload_rejected() {
        let net = gain_net([2.0, -2.0], 10.0);
        assert!(matches!(
            find_equilibrium(&net, &net.loads(), FlowModel::Nonlinear),
            Err(AnalysisError::LineOverload { line: 0, .. })
        ));
        assert!(find_equilibrium(&net, &net.loads(), FlowModel::Linear).is_ok());
    }

    #[test]
    fn gamma_two_bus() {
        let net = gain_net([0.0, 0.0], 10.0);
        let gp = gamma_point(&net, &net.loads(), 0.01, 0).unwrap();
        assert!((gp.s_hat[0] + 0.1).abs() < 1e-15 && (gp.s_hat[1] + 0.1).abs() < 1e-15);
        // bus 2 balance: -0 + (-0.1) - (-p) = 0, so p = 0.1 on the 1 -> 2 line
        assert!((gp.flows[0] - 0.1).abs() < 1e-12);
        assert!((gp.eta_hat[0] - 0.1).abs() < 1e-12);
        assert!((gp.slack_injection + 0.2).abs() < 1e-12);
        let other = gamma_point(&net, &net.loads(), 0.01, 1).unwrap();
        assert_eq!(other.xs_hat, gp.xs_hat);
        assert!((other.slack_injection + 0.2).abs() < 1e-12);
    }

    #[test]
    fn gamma_at_equilibrium_has_no_slack() {
        let net = gain_net([0.3, 0.1], 10.0);
        let eq = find_equilibrium(&net, &net.loads(), FlowModel::Linear).unwrap();
        let gp = gamma_point(&net, &net.loads(), eq.omega_sync, 1).unwrap();
        assert!(gp.slack_injection.abs() < 1e-12);
    }

    #[test]
    fn nonlinear_potential_example() {
        assert!((potential_nonlinear(1.0, 0.0, 0.2) - (1.0 - 0.2f64.cos())).abs() < 1e-15);
        assert!((potential_nonlinear(1.0, 0.0, 0.2) - 0.0199334).abs() < 1e-7);
    }

    #[test]
    fn kinetic_term_only() {
        let net = gain_net([0.0, 0.0], 10.0);
        let eq = find_equilibrium(&net, &net.loads(), FlowModel::Nonlinear).unwrap();
        let point = eq.operating_point(2);
        let mut s = eq.to_state(2);
        let at_eq = lyapunov_value(&net, &point, &[None, None], &s, &[1.0, 3.0], FlowModel::Nonlinear, None);
        assert_eq!(at_eq.v, 0.0);
        s.omega[1] += 0.1;
        let v = lyapunov_value(&net, &point, &[None, None], &s, &[1.0, 3.0], FlowModel::Nonlinear, None);
        assert!((v.v - 0.5 * 3.0 * 0.01).abs() < 1e-15);
        assert_eq!(v.v_p, 0.0);
    }

    #[test]
    fn lobes_and_growth() {
        let e: Vec<f64> = (0..2000).map(|i| (i as f64 * 0.05).sin() * 1.03f64.powf(i as f64 * 0.05)).collect();
        let peaks = lobe_peaks(&e);
        assert!(peaks.len() > 20);
        assert!(sustained_growth(&peaks));
        let decay: Vec<f64> = (0..2000).map(|i| (i as f64 * 0.05).sin() * 0.97f64.powf(i as f64 * 0.05)).collect();
        assert!(!sustained_growth(&lobe_peaks(&decay)));
    }
}
