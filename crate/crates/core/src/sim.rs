//! Fixed-step RK4 integration of the swing equations with time-varying inertia.
//!
//! ```text
//! eta'   = H^T omega
//! M omega' = -pL + s - H p,   p = B sin(eta)  or  B eta
//! x_j'   = A_j x_j + B_j (-omega_j),   s_j = C_j x_j + D_j (-omega_j)
//! ```
//!
//! `D_j` already includes the bus's virtual damping. `M = M0 + Mv` sits on
//! the left-hand side, so a jump in `Mv` changes `omega'` but never `omega`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{BusParams, FlowModel, NetworkGraph};
use crate::inertia::{Control, DestabilizerLog, InertiaPolicy, PolicyError, PolicyRuntime};
use crate::supply::{LtiSupply, SupplyDynamics};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("bus {bus}: invalid parameter {name} = {value}")]
    BusParameter { bus: usize, name: &'static str, value: f64 },
    #[error("invalid simulation setting {name} = {value}")]
    Config { name: &'static str, value: f64 },
    #[error("fixed bus index {0} out of range")]
    FixedBus(usize),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Buses, lines and supplies of one network; immutable once built.
#[derive(Debug, Clone)]
pub struct Network {
    graph: NetworkGraph,
    params: Vec<BusParams>,
    /// Supplies with virtual damping folded into `D`.
    supplies: Vec<LtiSupply>,
    offsets: Vec<usize>,
}

impl Network {
    pub fn new(graph: NetworkGraph, params: Vec<BusParams>, supplies: Vec<LtiSupply>) -> Result<Self, SimError> {
        let n = graph.bus_count();
        if params.len() != n || supplies.len() != n {
            return Err(SimError::Dimension(format!(
                "{n} buses but {} parameter sets and {} supplies",
                params.len(),
                supplies.len()
            )));
        }
        for (bus, p) in params.iter().enumerate() {
            if !(p.inertia > 0.0 && p.inertia.is_finite()) {
                return Err(SimError::BusParameter { bus, name: "inertia", value: p.inertia });
            }
            if !(p.virtual_damping >= 0.0 && p.virtual_damping.is_finite()) {
                return Err(SimError::BusParameter { bus, name: "virtual_damping", value: p.virtual_damping });
            }
            if !p.load.is_finite() {
                return Err(SimError::BusParameter { bus, name: "load", value: p.load });
            }
        }
        let supplies: Vec<LtiSupply> = supplies
            .iter()
            .zip(&params)
            .map(|(s, p)| s.with_feedthrough(s.d() + p.virtual_damping))
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0;
        for s in &supplies {
            offsets.push(acc);
            acc += s.order();
        }
        offsets.push(acc);
        Ok(Self { graph, params, supplies, offsets })
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn params(&self) -> &[BusParams] {
        &self.params
    }

    /// Effective supplies (virtual damping included).
    pub fn supplies(&self) -> &[LtiSupply] {
        &self.supplies
    }

    pub fn bus_count(&self) -> usize {
        self.params.len()
    }

    pub fn line_count(&self) -> usize {
        self.graph.line_count()
    }

    pub fn m0(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.inertia).collect()
    }

    pub fn loads(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.load).collect()
    }

    /// Start of bus `j`'s supply states within the concatenated vector.
    pub fn supply_offset(&self, bus: usize) -> usize {
        self.offsets[bus]
    }

    pub fn supply_state_count(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    #[default]
    Nonlinear,
    Linear,
    /// Linear flows with bus `bus` pinned at `omega_bar`.
    FixedBus { bus: usize, omega_bar: f64 },
}

impl SimModel {
    pub fn flow_model(&self) -> FlowModel {
        match self {
            SimModel::Nonlinear => FlowModel::Nonlinear,
            _ => FlowModel::Linear,
        }
    }

    pub fn fixed_bus(&self) -> Option<usize> {
        match self {
            SimModel::FixedBus { bus, .. } => Some(*bus),
            _ => None,
        }
    }
}

/// Step change of the load at `bus` by `delta_p` at time `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub bus: usize,
    pub delta_p: f64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub step: f64,
    pub horizon: f64,
    pub model: SimModel,
    pub disturbances: Vec<Disturbance>,
}

impl SimConfig {
    pub fn new(step: f64, horizon: f64, model: SimModel) -> Self {
        Self { step, horizon, model, disturbances: Vec::new() }
    }

    pub fn with_disturbance(mut self, bus: usize, delta_p: f64, time: f64) -> Self {
        self.disturbances.push(Disturbance { bus, delta_p, time });
        self
    }

    pub fn step_count(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    /// Loads once every disturbance has been applied.
    pub fn final_loads(&self, base: &[f64]) -> Vec<f64> {
        let mut loads = base.to_vec();
        for d in &self.disturbances {
            loads[d.bus] += d.delta_p;
        }
        loads
    }

    /// Time of the step boundary at which the last disturbance takes effect.
    pub fn last_disturbance_boundary(&self) -> f64 {
        self.disturbances
            .iter()
            .map(|d| (d.time / self.step - 1e-9).ceil().max(0.0) * self.step)
            .fold(0.0, f64::max)
    }

    fn validate(&self, net: &Network) -> Result<(), SimError> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(SimError::Config { name: "step", value: self.step });
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SimError::Config { name: "horizon", value: self.horizon });
        }
        for d in &self.disturbances {
            if d.bus >= net.bus_count() {
                return Err(SimError::Dimension(format!("disturbance at bus index {}", d.bus)));
            }
            if !d.delta_p.is_finite() || !d.time.is_finite() {
                return Err(SimError::Config { name: "disturbance", value: d.delta_p });
            }
        }
        if let SimModel::FixedBus { bus, omega_bar } = self.model {
            if bus >= net.bus_count() {
                return Err(SimError::FixedBus(bus));
            }
            if !omega_bar.is_finite() {
                return Err(SimError::Config { name: "omega_bar", value: omega_bar });
            }
        }
        Ok(())
    }
}

/// Full dynamic state `(eta, omega, x^s)` plus virtual inertia.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub eta: Vec<f64>,
    pub omega: Vec<f64>,
    /// Concatenated supply states in bus order.
    pub xs: Vec<f64>,
    pub mv: Vec<f64>,
}

impl SystemState {
    pub fn zeros(net: &Network) -> Self {
        Self {
            t: 0.0,
            eta: vec![0.0; net.line_count()],
            omega: vec![0.0; net.bus_count()],
            xs: vec![0.0; net.supply_state_count()],
            mv: vec![0.0; net.bus_count()],
        }
    }

    fn check(&self, net: &Network) -> Result<(), SimError> {
        let want = [net.line_count(), net.bus_count(), net.supply_state_count(), net.bus_count()];
        let got = [self.eta.len(), self.omega.len(), self.xs.len(), self.mv.len()];
        if want != got {
            return Err(SimError::Dimension(format!(
                "state (eta, omega, xs, mv) sizes {got:?}, network expects {want:?}"
            )));
        }
        Ok(())
    }
}

/// Time derivative of `state` at load `loads`, evaluated with the `Mv` in
/// `state`. Returns `None` if some `M_j <= 0`.
pub fn rhs(net: &Network, state: &SystemState, loads: &[f64], model: SimModel) -> Option<SystemState> {
    let layout = Layout::new(net, false);
    let mut flat = vec![0.0; layout.len];
    layout.pack(state, &mut flat);
    let mut out = vec![0.0; layout.len];
    let m: Vec<f64> = net.params.iter().zip(&state.mv).map(|(p, mv)| p.inertia + mv).collect();
    if m.iter().any(|&m| m <= 0.0) {
        return None;
    }
    let mut scratch = vec![0.0; net.line_count()];
    field(net, &layout, model, &flat, &m, loads, &mut scratch, &mut out);
    let mut d = layout.unpack(&out, state.t);
    d.mv = vec![0.0; net.bus_count()];
    Some(d)
}

#[derive(Debug, Clone)]
struct Layout {
    ne: usize,
    nb: usize,
    nx: usize,
    mv_integrated: bool,
    len: usize,
}

impl Layout {
    fn new(net: &Network, mv_integrated: bool) -> Self {
        let ne = net.line_count();
        let nb = net.bus_count();
        let nx = net.supply_state_count();
        let len = ne + nb + nx + if mv_integrated { nb } else { 0 };
        Self { ne, nb, nx, mv_integrated, len }
    }

    fn omega(&self) -> std::ops::Range<usize> {
        self.ne..self.ne + self.nb
    }

    fn xs(&self) -> std::ops::Range<usize> {
        self.ne + self.nb..self.ne + self.nb + self.nx
    }

    fn mv(&self) -> std::ops::Range<usize> {
        let start = self.ne + self.nb + self.nx;
        if self.mv_integrated {
            start..start + self.nb
        } else {
            start..start
        }
    }

    fn pack(&self, s: &SystemState, out: &mut [f64]) {
        out[..self.ne].copy_from_slice(&s.eta);
        out[self.omega()].copy_from_slice(&s.omega);
        out[self.xs()].copy_from_slice(&s.xs);
        if self.mv_integrated {
            out[self.mv()].copy_from_slice(&s.mv);
        }
    }

    fn unpack(&self, v: &[f64], t: f64) -> SystemState {
        SystemState {
            t,
            eta: v[..self.ne].to_vec(),
            omega: v[self.omega()].to_vec(),
            xs: v[self.xs()].to_vec(),
            mv: if self.mv_integrated { v[self.mv()].to_vec() } else { vec![0.0; self.nb] },
        }
    }
}

/// Network and supply part of the vector field; leaves the `Mv` slots alone.
#[allow(clippy::too_many_arguments)]
fn field(
    net: &Network,
    layout: &Layout,
    model: SimModel,
    y: &[f64],
    m: &[f64],
    loads: &[f64],
    flows: &mut [f64],
    dy: &mut [f64],
) {
    let (ne, nb) = (layout.ne, layout.nb);
    let eta = &y[..ne];
    let omega = &y[ne..ne + nb];
    let xs = &y[ne + nb..ne + nb + layout.nx];
    let nonlinear = matches!(model, SimModel::Nonlinear);
    for (q, line) in net.graph.lines().iter().enumerate() {
        dy[q] = omega[line.from] - omega[line.to];
        flows[q] = if nonlinear { line.susceptance * eta[q].sin() } else { line.susceptance * eta[q] };
    }
    // omega' first collects -pL + s, then subtracts H p
    for j in 0..nb {
        let (lo, hi) = (net.offsets[j], net.offsets[j + 1]);
        let sup = &net.supplies[j];
        sup.rhs(&xs[lo..hi], omega[j], &mut dy[ne + nb + lo..ne + nb + hi]);
        dy[ne + j] = -loads[j] + sup.output(&xs[lo..hi], omega[j]);
    }
    for (q, line) in net.graph.lines().iter().enumerate() {
        dy[ne + line.from] -= flows[q];
        dy[ne + line.to] += flows[q];
    }
    for j in 0..nb {
        dy[ne + j] /= m[j];
    }
    if let SimModel::FixedBus { bus, .. } = model {
        dy[ne + bus] = 0.0;
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Completed,
    /// The policy requested a stop (destabilizer escape).
    Stopped { t: f64, reason: String },
    /// Non-finite state or non-positive inertia; the trajectory is partial.
    Aborted { t: f64, reason: String },
}

impl Outcome {
    pub fn is_aborted(&self) -> bool {
        matches!(self, Outcome::Aborted { .. })
    }
}

/// Samples at every step boundary.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub step: f64,
    pub model: SimModel,
    pub m0: Vec<f64>,
    pub t: Vec<f64>,
    pub eta: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
    pub xs: Vec<Vec<f64>>,
    /// Effective virtual inertia held over the step starting at the sample.
    pub mv: Vec<Vec<f64>>,
    pub loads: Vec<Vec<f64>>,
    pub setpoint: Vec<Vec<f64>>,
    pub phase: Vec<Vec<&'static str>>,
    pub outcome: Outcome,
    pub destabilizer: DestabilizerLog,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Total inertia `M0 + Mv` at sample `i`.
    pub fn inertia(&self, i: usize) -> Vec<f64> {
        self.m0.iter().zip(&self.mv[i]).map(|(a, b)| a + b).collect()
    }

    pub fn state(&self, i: usize) -> SystemState {
        SystemState {
            t: self.t[i],
            eta: self.eta[i].clone(),
            omega: self.omega[i].clone(),
            xs: self.xs[i].clone(),
            mv: self.mv[i].clone(),
        }
    }

    pub fn last_state(&self) -> Option<SystemState> {
        (!self.is_empty()).then(|| self.state(self.len() - 1))
    }
}

/// Integrates from `initial` with classical fixed-step RK4.
pub fn integrate(
    net: &Network,
    initial: &SystemState,
    config: &SimConfig,
    policy: &InertiaPolicy,
) -> Result<Trajectory, SimError> {
    config.validate(net)?;
    initial.check(net)?;
    let mut runtime = PolicyRuntime::new(policy, net.bus_count())?;
    let layout = Layout::new(net, runtime.integrates_mv());
    let h = config.step;
    let steps = config.step_count();
    let nb = net.bus_count();
    let m0 = net.m0();

    let mut y = vec![0.0; layout.len];
    let mut start = initial.clone();
    if layout.mv_integrated {
        start.mv = initial.mv.iter().map(|v| v.max(0.0)).collect();
    }
    if let SimModel::FixedBus { bus, omega_bar } = config.model {
        start.omega[bus] = omega_bar;
    }
    layout.pack(&start, &mut y);

    let mut disturbances = config.disturbances.clone();
    disturbances.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut next_disturbance = 0;
    let mut loads = net.loads();

    let rows = steps + 1;
    let mut traj = Trajectory {
        step: h,
        model: config.model,
        m0: m0.clone(),
        t: Vec::with_capacity(rows),
        eta: Vec::with_capacity(rows),
        omega: Vec::with_capacity(rows),
        xs: Vec::with_capacity(rows),
        mv: Vec::with_capacity(rows),
        loads: Vec::with_capacity(rows),
        setpoint: Vec::with_capacity(rows),
        phase: Vec::with_capacity(rows),
        outcome: Outcome::Completed,
        destabilizer: DestabilizerLog::default(),
    };

    let mut k = vec![vec![0.0; layout.len]; 4];
    let mut stage = vec![0.0; layout.len];
    let mut flows = vec![0.0; layout.ne];
    let mut mv_eff = vec![0.0; nb];
    let mut m = vec![0.0; nb];

    for i in 0..=steps {
        let t = i as f64 * h;
        while next_disturbance < disturbances.len() && disturbances[next_disturbance].time <= t + 1e-9 * h {
            let d = disturbances[next_disturbance];
            loads[d.bus] += d.delta_p;
            next_disturbance += 1;
        }
        let control = runtime.sample(t, &y[layout.omega()]);
        runtime.mv_at(t, &y[layout.mv()], &mut mv_eff);

        traj.t.push(t);
        traj.eta.push(y[..layout.ne].to_vec());
        traj.omega.push(y[layout.omega()].to_vec());
        traj.xs.push(y[layout.xs()].to_vec());
        traj.mv.push(mv_eff.clone());
        traj.loads.push(loads.clone());
        traj.setpoint.push(runtime.setpoints().to_vec());
        traj.phase.push((0..nb).map(|b| runtime.phase_label(b)).collect());

        if let Control::Stop(reason) = control {
            traj.outcome = Outcome::Stopped { t, reason };
            break;
        }
        if i == steps {
            break;
        }

        let stage_times = [t, t + 0.5 * h, t + 0.5 * h, t + h];
        let weights = [0.0, 0.5 * h, 0.5 * h, h];
        let mut bad = None;
        for s in 0..4 {
            if s == 0 {
                stage.copy_from_slice(&y);
            } else {
                for (st, (yi, ki)) in stage.iter_mut().zip(y.iter().zip(&k[s - 1])) {
                    *st = yi + weights[s] * ki;
                }
            }
            runtime.mv_at(stage_times[s], &stage[layout.mv()], &mut mv_eff);
            for j in 0..nb {
                m[j] = m0[j] + mv_eff[j];
            }
            if let Some(j) = m.iter().position(|&v| !(v > 0.0)) {
                bad = Some(format!("non-positive inertia {} at bus {j}", m[j]));
                break;
            }
            field(net, &layout, config.model, &stage, &m, &loads, &mut flows, &mut k[s]);
            if layout.mv_integrated {
                let range = layout.mv();
                let (mv_stage, rate) = (&stage[range.clone()], &mut k[s][range]);
                runtime.mv_rate(mv_stage, rate);
            }
        }
        if let Some(reason) = bad {
            traj.outcome = Outcome::Aborted { t, reason };
            break;
        }
        for idx in 0..layout.len {
            y[idx] += h / 6.0 * (k[0][idx] + 2.0 * k[1][idx] + 2.0 * k[2][idx] + k[3][idx]);
        }
        if layout.mv_integrated {
            for v in &mut y[layout.mv()] {
                *v = v.max(0.0);
            }
        }
        if let SimModel::FixedBus { bus, omega_bar } = config.model {
            y[layout.ne + bus] = omega_bar;
        }
        if let Some(idx) = y.iter().position(|v| !v.is_finite()) {
            traj.outcome = Outcome::Aborted {
                t: t + h,
                reason: format!("non-finite state component {idx} after step at t = {t:.4}"),
            };
            break;
        }
    }
    traj.destabilizer = runtime.into_destabilizer_log();
    Ok(traj)
}

/// Integrates the system with bus `k` pinned at `omega_bar` (its swing
/// equation dropped) and linear flows.
pub fn integrate_fixed_bus(
    net: &Network,
    initial: &SystemState,
    k: usize,
    omega_bar: f64,
    config: &SimConfig,
    policy: &InertiaPolicy,
) -> Result<Trajectory, SimError> {
    let mut cfg = config.clone();
    cfg.model = SimModel::FixedBus { bus: k, omega_bar };
    integrate(net, initial, &cfg, policy)
}
