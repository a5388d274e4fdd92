//! Virtual-inertia trajectories `Mv_j(t)`.
//!
//! A policy is a static description ([`InertiaPolicy`]); a simulation drives
//! one [`PolicyRuntime`] per run. Feedback policies are sampled at step
//! boundaries and held across the step. Open-loop profiles and destabilizer
//! ramps are exact functions of time between samples, and the rate-limited
//! filter is integrated together with the network state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("bus index {bus} out of range for {buses} buses")]
    BusIndex { bus: usize, buses: usize },
    #[error("bus {bus}: rho = {rho} gives a non-positive rate cap 2 rho - epsilon with epsilon = {epsilon}")]
    RateCap { bus: usize, rho: f64, epsilon: f64 },
    #[error("invalid policy parameter {name} = {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("open-loop profile for bus {bus}: {reason}")]
    Profile { bus: usize, reason: String },
    #[error("expected {expected} strictness constants, got {got}")]
    RhoCount { expected: usize, got: usize },
}

pub const DEFAULT_THRESHOLD: f64 = 0.02;
pub const DEFAULT_TAU_VI: f64 = 100.0;
pub const DEFAULT_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BangBangParams {
    pub ma: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Buses carrying the switched inertia.
    pub buses: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateLimitedParams {
    pub ma: f64,
    #[serde(default = "default_tau")]
    pub tau_vi: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Strictness constant per bus (all buses, not only `buses`).
    pub rho: Vec<f64>,
    pub buses: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedParams {
    pub ma: f64,
    #[serde(default = "default_tau")]
    pub tau_vi: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_period")]
    pub update_period: f64,
    /// Set-point increment as a fraction of `ma`.
    #[serde(default = "default_step")]
    pub step: f64,
    pub rho: Vec<f64>,
    pub buses: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestabilizerParams {
    pub target: usize,
    pub m_hold: f64,
    #[serde(default = "default_settle")]
    pub settle_tolerance: f64,
    #[serde(default = "default_dwell")]
    pub dwell: f64,
    #[serde(default = "default_growth")]
    pub growth_threshold: f64,
    /// Ramp duration in seconds.
    pub ramp: f64,
    pub escape_radius: f64,
    /// Synchronous equilibrium frequency the deviations are measured from.
    #[serde(default)]
    pub omega_star: f64,
}

impl DestabilizerParams {
    /// Default thresholds: `M_hold = 100 M0_k`, ramp over two steps.
    pub fn with_defaults(target: usize, m0_target: f64, step: f64, escape_radius: f64) -> Self {
        Self {
            target,
            m_hold: 100.0 * m0_target,
            settle_tolerance: default_settle(),
            dwell: default_dwell(),
            growth_threshold: default_growth(),
            ramp: 2.0 * step,
            escape_radius,
            omega_star: 0.0,
        }
    }
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_tau() -> f64 {
    DEFAULT_TAU_VI
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_period() -> f64 {
    0.5
}
fn default_step() -> f64 {
    0.5
}
fn default_settle() -> f64 {
    1e-4
}
fn default_dwell() -> f64 {
    1.0
}
fn default_growth() -> f64 {
    1.05
}

/// Piecewise-linear `Mv(t)` per bus; constant before the first and after the
/// last breakpoint. Buses without breakpoints stay at zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OpenLoopProfile {
    pub breakpoints: Vec<Vec<(f64, f64)>>,
}

impl OpenLoopProfile {
    pub fn value(&self, bus: usize, t: f64) -> f64 {
        let Some(pts) = self.breakpoints.get(bus) else { return 0.0 };
        let (Some(first), Some(last)) = (pts.first(), pts.last()) else { return 0.0 };
        if t <= first.0 {
            return first.1;
        }
        if t >= last.0 {
            return last.1;
        }
        let i = pts.partition_point(|p| p.0 <= t);
        let (t0, v0) = pts[i - 1];
        let (t1, v1) = pts[i];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Largest slope over all segments of one bus.
    pub fn max_rate(&self, bus: usize) -> f64 {
        self.breakpoints
            .get(bus)
            .map(|pts| {
                pts.windows(2)
                    .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
                    .fold(0.0, f64::max)
            })
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InertiaPolicy {
    Constant,
    #[serde(rename = "open-loop-piecewise")]
    OpenLoop(OpenLoopProfile),
    BangBang(BangBangParams),
    RateLimited(RateLimitedParams),
    Randomized(RandomizedParams),
    Destabilizer(DestabilizerParams),
}

/// Declared growth-rate bound of a policy at one bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateBound {
    Bounded(f64),
    Unbounded,
}

impl InertiaPolicy {
    /// Checks indices and parameters against a network of `buses` buses.
    pub fn validate(&self, buses: usize) -> Result<(), PolicyError> {
        let check_bus = |bus: usize| {
            if bus < buses {
                Ok(())
            } else {
                Err(PolicyError::BusIndex { bus, buses })
            }
        };
        let non_negative = |name: &'static str, value: f64| {
            if value >= 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(PolicyError::Parameter { name, value })
            }
        };
        let positive = |name: &'static str, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(PolicyError::Parameter { name, value })
            }
        };
        let rate_caps = |rho: &[f64], epsilon: f64, set: &[usize]| {
            if rho.len() != buses {
                return Err(PolicyError::RhoCount { expected: buses, got: rho.len() });
            }
            for &bus in set {
                if !(rho[bus] > epsilon / 2.0) {
                    return Err(PolicyError::RateCap { bus, rho: rho[bus], epsilon });
                }
            }
            Ok(())
        };
        match self {
            InertiaPolicy::Constant => Ok(()),
            InertiaPolicy::OpenLoop(p) => {
                if p.breakpoints.len() > buses {
                    return Err(PolicyError::BusIndex { bus: p.breakpoints.len() - 1, buses });
                }
                for (bus, pts) in p.breakpoints.iter().enumerate() {
                    for w in pts.windows(2) {
                        if !(w[1].0 > w[0].0) {
                            return Err(PolicyError::Profile {
                                bus,
                                reason: "breakpoint times must be strictly increasing".into(),
                            });
                        }
                    }
                    if pts.iter().any(|&(t, v)| !t.is_finite() || !(v >= 0.0) || !v.is_finite()) {
                        return Err(PolicyError::Profile {
                            bus,
                            reason: "values must be finite and non-negative".into(),
                        });
                    }
                }
                Ok(())
            }
            InertiaPolicy::BangBang(p) => {
                p.buses.iter().try_for_each(|&b| check_bus(b))?;
                non_negative("ma", p.ma)?;
                non_negative("threshold", p.threshold)
            }
            InertiaPolicy::RateLimited(p) => {
                p.buses.iter().try_for_each(|&b| check_bus(b))?;
                non_negative("ma", p.ma)?;
                positive("tau_vi", p.tau_vi)?;
                positive("epsilon", p.epsilon)?;
                non_negative("threshold", p.threshold)?;
                rate_caps(&p.rho, p.epsilon, &p.buses)
            }
            InertiaPolicy::Randomized(p) => {
                p.buses.iter().try_for_each(|&b| check_bus(b))?;
                non_negative("ma", p.ma)?;
                positive("tau_vi", p.tau_vi)?;
                positive("epsilon", p.epsilon)?;
                positive("update_period", p.update_period)?;
                non_negative("step", p.step)?;
                rate_caps(&p.rho, p.epsilon, &p.buses)
            }
            InertiaPolicy::Destabilizer(p) => {
                check_bus(p.target)?;
                positive("m_hold", p.m_hold)?;
                positive("settle_tolerance", p.settle_tolerance)?;
                non_negative("dwell", p.dwell)?;
                positive("growth_threshold", p.growth_threshold)?;
                positive("ramp", p.ramp)?;
                positive("escape_radius", p.escape_radius)?;
                if !p.omega_star.is_finite() {
                    return Err(PolicyError::Parameter { name: "omega_star", value: p.omega_star });
                }
                Ok(())
            }
        }
    }

    /// Rate bound each bus's `Mv` honours by construction.
    pub fn declared_rate_bound(&self, bus: usize) -> RateBound {
        match self {
            InertiaPolicy::Constant => RateBound::Bounded(0.0),
            InertiaPolicy::OpenLoop(p) => RateBound::Bounded(p.max_rate(bus)),
            InertiaPolicy::BangBang(p) => {
                if p.buses.contains(&bus) && p.ma > 0.0 {
                    RateBound::Unbounded
                } else {
                    RateBound::Bounded(0.0)
                }
            }
            InertiaPolicy::RateLimited(RateLimitedParams { rho, epsilon, buses, .. })
            | InertiaPolicy::Randomized(RandomizedParams { rho, epsilon, buses, .. }) => {
                if buses.contains(&bus) {
                    RateBound::Bounded(2.0 * rho[bus] - epsilon)
                } else {
                    RateBound::Bounded(0.0)
                }
            }
            InertiaPolicy::Destabilizer(p) => {
                if bus == p.target {
                    RateBound::Bounded(p.m_hold / p.ramp)
                } else {
                    RateBound::Bounded(0.0)
                }
            }
        }
    }

    /// True when `Mv` is part of the integrated state.
    pub fn integrates_mv(&self) -> bool {
        matches!(self, InertiaPolicy::RateLimited(_) | InertiaPolicy::Randomized(_))
    }

    /// Replaces the randomized scheme's seed; other kinds are unchanged.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let InertiaPolicy::Randomized(p) = &mut self {
            p.seed = seed;
        }
        self
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            InertiaPolicy::Constant => "constant",
            InertiaPolicy::OpenLoop(_) => "open-loop-piecewise",
            InertiaPolicy::BangBang(_) => "bang-bang",
            InertiaPolicy::RateLimited(_) => "rate-limited",
            InertiaPolicy::Randomized(_) => "randomized",
            InertiaPolicy::Destabilizer(_) => "destabilizer",
        }
    }
}

/// `Ma` at every scheme bus when `max_i |omega_i| > threshold`, else 0.
pub fn bang_bang(omega: &[f64], params: &BangBangParams, buses: usize) -> Vec<f64> {
    let on = omega_max(omega) > params.threshold;
    let mut mv = vec![0.0; buses];
    if on {
        for &b in &params.buses {
            mv[b] = params.ma;
        }
    }
    mv
}

pub fn omega_max(omega: &[f64]) -> f64 {
    omega.iter().fold(0.0, |m, w| m.max(w.abs()))
}

/// `min(tau (u - Mv), cap)`, projected so `Mv` cannot leave `[0, inf)`.
pub fn rate_limited_rhs(mv: f64, u: f64, tau_vi: f64, cap: f64) -> f64 {
    let rate = (tau_vi * (u - mv)).min(cap);
    if mv <= 0.0 && rate < 0.0 {
        0.0
    } else {
        rate
    }
}

/// One update of the randomized set point for a uniform draw `r` in `[0, 1)`.
pub fn randomized_setpoint_update(u: f64, r: f64, ma: f64, step: f64) -> f64 {
    if r >= 0.5 {
        u + step * ma
    } else {
        (u - step * ma).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateViolation {
    pub bus: usize,
    pub t: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption4Report {
    pub violations: Vec<RateViolation>,
    /// Largest finite-difference `|dM/dt|` per bus (empirical Lipschitz constant).
    pub lipschitz: Vec<f64>,
    /// Largest finite-difference growth rate per bus.
    pub max_growth_rate: Vec<f64>,
}

impl Assumption4Report {
    pub fn compliant(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compares forward-difference growth rates of sampled inertia `m[i][bus]`
/// against `2 rho_bus`.
pub fn check_assumption4(t: &[f64], m: &[Vec<f64>], rho: &[f64]) -> Assumption4Report {
    let buses = rho.len();
    let mut report = Assumption4Report {
        violations: Vec::new(),
        lipschitz: vec![0.0; buses],
        max_growth_rate: vec![0.0; buses],
    };
    for i in 1..t.len().min(m.len()) {
        let h = t[i] - t[i - 1];
        if h <= 0.0 {
            continue;
        }
        for bus in 0..buses {
            let rate = (m[i][bus] - m[i - 1][bus]) / h;
            report.lipschitz[bus] = report.lipschitz[bus].max(rate.abs());
            report.max_growth_rate[bus] = report.max_growth_rate[bus].max(rate);
            if rate >= 2.0 * rho[bus] {
                report.violations.push(RateViolation { bus, t: t[i - 1], rate });
            }
        }
    }
    report
}

/// Phase of the destabilizer's state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DestabilizerPhase {
    Hold,
    RampDown,
    Released,
    RampUp,
}

impl DestabilizerPhase {
    pub fn label(self) -> &'static str {
        match self {
            DestabilizerPhase::Hold => "hold",
            DestabilizerPhase::RampDown => "ramp-down",
            DestabilizerPhase::Released => "release",
            DestabilizerPhase::RampUp => "ramp-up",
        }
    }
}

/// One completed HOLD/RELEASE cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DestabilizerCycle {
    pub release_time: f64,
    /// `|omega_k - omega*|` when the ramp-down started.
    pub release_deviation: f64,
    pub peak_time: f64,
    pub peak_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DestabilizerLog {
    pub cycles: Vec<DestabilizerCycle>,
    pub escape_time: Option<f64>,
}

impl DestabilizerLog {
    pub fn peaks(&self) -> Vec<f64> {
        self.cycles.iter().map(|c| c.peak_deviation).collect()
    }

    pub fn strictly_increasing(&self) -> bool {
        self.cycles.windows(2).all(|w| w[1].peak_deviation > w[0].peak_deviation)
    }
}

#[derive(Debug, Clone)]
struct DestabilizerMemory {
    phase: DestabilizerPhase,
    ramp_start: f64,
    settled_since: Option<f64>,
    /// Reference deviation the next release must exceed (times growth).
    reference: f64,
    armed: bool,
    last_dev: f64,
    last_t: f64,
    release_time: f64,
    release_deviation: f64,
}

/// What the simulator should do after a policy sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    Continue,
    Stop(String),
}

/// Per-run mutable policy state.
#[derive(Debug, Clone)]
pub struct PolicyRuntime {
    policy: InertiaPolicy,
    buses: usize,
    held: Vec<f64>,
    setpoint: Vec<f64>,
    rng: Option<ChaCha8Rng>,
    next_update: f64,
    destab: Option<DestabilizerMemory>,
    log: DestabilizerLog,
}

impl PolicyRuntime {
    pub fn new(policy: &InertiaPolicy, buses: usize) -> Result<Self, PolicyError> {
        policy.validate(buses)?;
        let rng = match policy {
            InertiaPolicy::Randomized(p) => Some(ChaCha8Rng::seed_from_u64(p.seed)),
            _ => None,
        };
        let destab = match policy {
            InertiaPolicy::Destabilizer(_) => Some(DestabilizerMemory {
                phase: DestabilizerPhase::Hold,
                ramp_start: 0.0,
                settled_since: None,
                reference: f64::NAN,
                armed: false,
                last_dev: 0.0,
                last_t: 0.0,
                release_time: 0.0,
                release_deviation: 0.0,
            }),
            _ => None,
        };
        Ok(Self {
            policy: policy.clone(),
            buses,
            held: vec![0.0; buses],
            setpoint: vec![0.0; buses],
            rng,
            next_update: 0.0,
            destab,
            log: DestabilizerLog::default(),
        })
    }

    pub fn policy(&self) -> &InertiaPolicy {
        &self.policy
    }

    pub fn integrates_mv(&self) -> bool {
        self.policy.integrates_mv()
    }

    /// Initial value of `Mv` (the integrated state or the held value).
    pub fn initial_mv(&self) -> Vec<f64> {
        match &self.policy {
            InertiaPolicy::Destabilizer(p) => {
                let mut mv = vec![0.0; self.buses];
                mv[p.target] = p.m_hold;
                mv
            }
            InertiaPolicy::OpenLoop(p) => (0..self.buses).map(|b| p.value(b, 0.0)).collect(),
            _ => vec![0.0; self.buses],
        }
    }

    /// Decision point at a step boundary.
    pub fn sample(&mut self, t: f64, omega: &[f64]) -> Control {
        match &self.policy {
            InertiaPolicy::Constant | InertiaPolicy::OpenLoop(_) => Control::Continue,
            InertiaPolicy::BangBang(p) => {
                self.held = bang_bang(omega, p, self.buses);
                Control::Continue
            }
            InertiaPolicy::RateLimited(p) => {
                let on = omega_max(omega) > p.threshold;
                for &b in &p.buses {
                    self.setpoint[b] = if on { p.ma } else { 0.0 };
                }
                Control::Continue
            }
            InertiaPolicy::Randomized(p) => {
                // small slack so accumulated step sums still hit the update grid
                let slack = 1e-9 * p.update_period.max(t.abs());
                if t + slack >= self.next_update {
                    let rng = self.rng.as_mut().expect("randomized policy owns an rng");
                    for &b in &p.buses {
                        let r: f64 = rng.random();
                        self.setpoint[b] = randomized_setpoint_update(self.setpoint[b], r, p.ma, p.step);
                    }
                    while self.next_update <= t + slack {
                        self.next_update += p.update_period;
                    }
                }
                Control::Continue
            }
            InertiaPolicy::Destabilizer(p) => {
                let p = p.clone();
                self.destabilizer_sample(&p, t, omega)
            }
        }
    }

    fn destabilizer_sample(&mut self, p: &DestabilizerParams, t: f64, omega: &[f64]) -> Control {
        let mem = self.destab.as_mut().expect("destabilizer memory");
        let wk = omega[p.target];
        let dev = (wk - p.omega_star).abs();
        if mem.reference.is_nan() {
            mem.reference = dev;
        }
        if dev > p.escape_radius {
            self.log.escape_time.get_or_insert(t);
            return Control::Stop(format!(
                "escape: |omega_k - omega*| = {dev:.6} exceeds {:.6} at t = {t:.3}",
                p.escape_radius
            ));
        }
        let spread = omega.iter().fold(0.0, |m: f64, w| m.max((w - wk).abs()));
        match mem.phase {
            DestabilizerPhase::Hold => {
                if spread < p.settle_tolerance {
                    let since = *mem.settled_since.get_or_insert(t);
                    if t - since >= p.dwell - 1e-9 {
                        mem.phase = DestabilizerPhase::RampDown;
                        mem.ramp_start = t;
                        mem.settled_since = None;
                        mem.release_time = t;
                        mem.release_deviation = dev;
                    }
                } else {
                    mem.settled_since = None;
                }
            }
            DestabilizerPhase::RampDown => {
                if t >= mem.ramp_start + p.ramp - 1e-9 {
                    mem.phase = DestabilizerPhase::Released;
                    mem.armed = false;
                    mem.last_dev = dev;
                    mem.last_t = t;
                }
            }
            DestabilizerPhase::Released => {
                if !mem.armed && dev > p.growth_threshold * mem.reference {
                    mem.armed = true;
                }
                if mem.armed && dev < mem.last_dev {
                    // the previous sample was the local maximum of the overshoot
                    self.log.cycles.push(DestabilizerCycle {
                        release_time: mem.release_time,
                        release_deviation: mem.release_deviation,
                        peak_time: mem.last_t,
                        peak_deviation: mem.last_dev,
                    });
                    mem.reference = mem.last_dev;
                    mem.phase = DestabilizerPhase::RampUp;
                    mem.ramp_start = t;
                }
                mem.last_dev = dev;
                mem.last_t = t;
            }
            DestabilizerPhase::RampUp => {
                if t >= mem.ramp_start + p.ramp - 1e-9 {
                    mem.phase = DestabilizerPhase::Hold;
                    mem.settled_since = None;
                }
            }
        }
        Control::Continue
    }

    /// Effective `Mv` at time `t` given the integrated `Mv` state (ignored by
    /// policies that do not integrate it).
    pub fn mv_at(&self, t: f64, mv_state: &[f64], out: &mut [f64]) {
        match &self.policy {
            InertiaPolicy::Constant => out.fill(0.0),
            InertiaPolicy::OpenLoop(p) => {
                for (b, o) in out.iter_mut().enumerate() {
                    *o = p.value(b, t);
                }
            }
            InertiaPolicy::BangBang(_) => out.copy_from_slice(&self.held),
            InertiaPolicy::RateLimited(_) | InertiaPolicy::Randomized(_) => {
                for (o, &m) in out.iter_mut().zip(mv_state) {
                    *o = m.max(0.0);
                }
            }
            InertiaPolicy::Destabilizer(p) => {
                out.fill(0.0);
                let mem = self.destab.as_ref().expect("destabilizer memory");
                let frac = ((t - mem.ramp_start) / p.ramp).clamp(0.0, 1.0);
                out[p.target] = match mem.phase {
                    DestabilizerPhase::Hold => p.m_hold,
                    DestabilizerPhase::RampDown => p.m_hold * (1.0 - frac),
                    DestabilizerPhase::Released => 0.0,
                    DestabilizerPhase::RampUp => p.m_hold * frac,
                };
            }
        }
    }

    /// Derivative of the integrated `Mv` state.
    pub fn mv_rate(&self, mv_state: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let (tau, epsilon, rho, buses) = match &self.policy {
            InertiaPolicy::RateLimited(p) => (p.tau_vi, p.epsilon, &p.rho, &p.buses),
            InertiaPolicy::Randomized(p) => (p.tau_vi, p.epsilon, &p.rho, &p.buses),
            _ => return,
        };
        for &b in buses {
            out[b] = rate_limited_rhs(mv_state[b], self.setpoint[b], tau, 2.0 * rho[b] - epsilon);
        }
    }

    /// Current set point per bus (held `Mv` for bang-bang).
    pub fn setpoints(&self) -> &[f64] {
        match &self.policy {
            InertiaPolicy::BangBang(_) => &self.held,
            _ => &self.setpoint,
        }
    }

    pub fn phase_label(&self, bus: usize) -> &'static str {
        match &self.policy {
            InertiaPolicy::Constant => "constant",
            InertiaPolicy::OpenLoop(_) => "open-loop",
            InertiaPolicy::BangBang(_) => {
                if self.held[bus] > 0.0 {
                    "on"
                } else {
                    "off"
                }
            }
            InertiaPolicy::RateLimited(_) | InertiaPolicy::Randomized(_) => {
                if self.setpoint[bus] > 0.0 {
                    "charge"
                } else {
                    "discharge"
                }
            }
            InertiaPolicy::Destabilizer(p) => {
                if bus == p.target {
                    self.destab.as_ref().map_or("hold", |m| m.phase.label())
                } else {
                    "constant"
                }
            }
        }
    }

    pub fn destabilizer_log(&self) -> &DestabilizerLog {
        &self.log
    }

    pub fn into_destabilizer_log(self) -> DestabilizerLog {
        self.log
    }
}
