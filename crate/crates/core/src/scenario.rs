//! Scenario files: JSON schema, validation and canonical output.
//!
//! Buses are referred to by their string ids everywhere in the file; the
//! loader resolves them to indices and rejects dangling references before any
//! numerical work starts. Tagged sections (`supply`, `policy`, `initial`)
//! are written as `{"type": ..., fields}` / `{"kind": ..., fields}` in the
//! file and held externally tagged in memory, which keeps error paths exact.
//! Units are seconds, Hz (deviation from nominal) and per-unit on
//! `base_mva`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{find_equilibrium, gamma_point, sync_frequency, AnalysisError};
use crate::grid::{BusParams, FlowModel, GridError, Line, NetworkGraph};
use crate::inertia::{
    BangBangParams, DestabilizerParams, InertiaPolicy, OpenLoopProfile, PolicyError, RandomizedParams,
    RateLimitedParams, DEFAULT_EPSILON, DEFAULT_TAU_VI, DEFAULT_THRESHOLD,
};
use crate::passivity::{strictness_constant, Passivity, PassivityError};
use crate::sim::{Network, SimConfig, SimError, SimModel, SystemState};
use crate::supply::{FirstOrderSupply, LtiSupply, SecondOrderSupply, SupplyError, TurbineGovernor};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("unsupported schema_version {0:?} (expected \"1\")")]
    Version(String),
    #[error("{context} references unknown bus {id:?}")]
    DanglingBus { context: String, id: String },
    #[error("{context}: {message}")]
    Invalid { context: String, message: String },
}

impl ScenarioError {
    fn invalid(context: impl Into<String>, message: impl ToString) -> Self {
        ScenarioError::Invalid { context: context.into(), message: message.to_string() }
    }
}

fn default_base_mva() -> f64 {
    100.0
}
fn default_step() -> f64 {
    0.01
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
fn default_half() -> f64 {
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

/// Top-level scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Power base; metadata only, all quantities are already per-unit.
    #[serde(default = "default_base_mva")]
    pub base_mva: f64,
    pub buses: Vec<BusSpec>,
    pub lines: Vec<LineSpec>,
    #[serde(default)]
    pub policy: PolicySpec,
    pub simulation: SimSpec,
    #[serde(default)]
    pub disturbances: Vec<DisturbanceSpec>,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<BatchSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusSpec {
    pub id: String,
    pub inertia: f64,
    #[serde(default)]
    pub virtual_damping: f64,
    #[serde(default)]
    pub load: f64,
    pub supply: SupplySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SupplySpec {
    FirstOrder(FirstOrderSupply),
    SecondOrder(SecondOrderSupply),
    Governor(TurbineGovernor),
    StateSpace(StateSpaceSpec),
    /// No supply dynamics; only the bus's virtual damping acts.
    None {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpaceSpec {
    /// Row-major rows of `A`.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
}

impl SupplySpec {
    pub fn to_lti(&self) -> Result<LtiSupply, SupplyError> {
        match self {
            SupplySpec::FirstOrder(s) => s.to_lti(),
            SupplySpec::SecondOrder(s) => s.to_lti(),
            SupplySpec::Governor(g) => {
                g.validate()?;
                g.tf_to_state_space()
            }
            SupplySpec::StateSpace(ss) => {
                let n = ss.a.len();
                if ss.a.iter().any(|row| row.len() != n) {
                    return Err(SupplyError::Dimension(format!("A must be {n}x{n}")));
                }
                let flat: Vec<f64> = ss.a.iter().flatten().copied().collect();
                LtiSupply::new(
                    DMatrix::from_row_slice(n, n, &flat),
                    DVector::from_column_slice(&ss.b),
                    RowDVector::from_row_slice(&ss.c),
                    ss.d,
                )
            }
            SupplySpec::None {} => Ok(LtiSupply::gain(0.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub from: String,
    pub to: String,
    pub susceptance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    #[default]
    Nonlinear,
    Linear,
}

impl ModelSpec {
    pub fn sim_model(self) -> SimModel {
        match self {
            ModelSpec::Nonlinear => SimModel::Nonlinear,
            ModelSpec::Linear => SimModel::Linear,
        }
    }

    pub fn flow_model(self) -> FlowModel {
        self.sim_model().flow_model()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(default = "default_step")]
    pub step: f64,
    pub horizon: f64,
    #[serde(default)]
    pub model: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSpec {
    pub bus: String,
    pub delta_p: f64,
    pub time: f64,
}

/// Where the run starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// All states zero (nominal operating point for zero load).
    Zero {},
    /// Equilibrium of the initial loads, with optional frequency offsets.
    Equilibrium {
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        omega_offset: BTreeMap<String, f64>,
    },
    /// Gamma-point with `bus` pinned at `omega* + delta` (linear flows).
    GammaPoint { bus: String, delta: f64 },
    Explicit {
        eta: Vec<f64>,
        omega: Vec<f64>,
        xs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mv: Option<Vec<f64>>,
    },
}

/// Inertia policy with bus ids. Strictness constants are certified from the
/// supplies unless given explicitly; the destabilizer's reference frequency
/// always comes from the equilibrium solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    Constant {},
    OpenLoopPiecewise {
        /// Breakpoints `[t, Mv]` per bus id.
        profiles: BTreeMap<String, Vec<(f64, f64)>>,
    },
    BangBang {
        ma: f64,
        #[serde(default = "default_threshold")]
        threshold: f64,
        /// Scheme buses; all buses when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        buses: Option<Vec<String>>,
    },
    RateLimited {
        ma: f64,
        #[serde(default = "default_tau")]
        tau_vi: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_threshold")]
        threshold: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        buses: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<BTreeMap<String, f64>>,
    },
    Randomized {
        ma: f64,
        #[serde(default = "default_tau")]
        tau_vi: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_half")]
        update_period: f64,
        #[serde(default = "default_half")]
        step: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        buses: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<BTreeMap<String, f64>>,
    },
    Destabilizer {
        target: String,
        /// Defaults to 100 times the target's physical inertia.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m_hold: Option<f64>,
        #[serde(default = "default_settle")]
        settle_tolerance: f64,
        #[serde(default = "default_dwell")]
        dwell: f64,
        #[serde(default = "default_growth")]
        growth_threshold: f64,
        /// Ramp duration; two integration steps when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ramp: Option<f64>,
        escape_radius: f64,
    },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Zero {}
    }
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec::Constant {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSection {
    pub runs: usize,
}

/// A validated scenario with its network assembled.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub network: Network,
}

/// Tagged sections as (path prefix, tag key); `*` matches any array index.
const TAGGED: [(&[&str], &str); 3] = [(&["buses", "*", "supply"], "type"), (&["policy"], "kind"), (&["initial"], "kind")];

fn visit_tagged(
    value: &mut serde_json::Value,
    pattern: &[&str],
    pointer: String,
    f: &mut dyn FnMut(&mut serde_json::Value, &str) -> Result<(), ScenarioError>,
) -> Result<(), ScenarioError> {
    let Some((head, rest)) = pattern.split_first() else {
        return f(value, &pointer);
    };
    if *head == "*" {
        if let Some(items) = value.as_array_mut() {
            for (i, item) in items.iter_mut().enumerate() {
                visit_tagged(item, rest, format!("{pointer}/{i}"), f)?;
            }
        }
    } else if let Some(child) = value.get_mut(*head) {
        visit_tagged(child, rest, format!("{pointer}/{head}"), f)?;
    }
    Ok(())
}

/// `{"kind": "x", ...}` to `{"x": {...}}`.
fn untag(value: &mut serde_json::Value) -> Result<(), ScenarioError> {
    for (pattern, tag) in TAGGED {
        visit_tagged(value, pattern, String::new(), &mut |v, pointer| {
            let Some(map) = v.as_object_mut() else {
                return Err(ScenarioError::Schema { pointer: pointer.into(), message: "expected an object".into() });
            };
            let name = match map.remove(tag) {
                Some(serde_json::Value::String(name)) => name,
                Some(_) => {
                    return Err(ScenarioError::Schema {
                        pointer: format!("{pointer}/{tag}"),
                        message: "expected a string".into(),
                    })
                }
                None => {
                    return Err(ScenarioError::Schema {
                        pointer: pointer.into(),
                        message: format!("missing field `{tag}`"),
                    })
                }
            };
            let body = serde_json::Value::Object(std::mem::take(map));
            map.insert(name, body);
            Ok(())
        })?;
    }
    Ok(())
}

/// Inverse of [`untag`].
fn retag(value: &mut serde_json::Value) {
    for (pattern, tag) in TAGGED {
        let _ = visit_tagged(value, pattern, String::new(), &mut |v, _| {
            if let Some(map) = v.as_object_mut() {
                if let Some((name, body)) = map.iter().next().map(|(k, b)| (k.clone(), b.clone())) {
                    map.clear();
                    map.insert(tag.to_string(), serde_json::Value::String(name));
                    if let serde_json::Value::Object(fields) = body {
                        map.extend(fields);
                    }
                }
            }
            Ok(())
        });
    }
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            // the variant name stands in for the tag, which is not a path element in the file
            Segment::Enum { .. } => {}
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Parses a scenario document without validating cross-references.
pub fn parse_scenario_file(text: &str) -> Result<ScenarioFile, ScenarioError> {
    // syntax errors first, so they report a position rather than a path
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if !value.is_object() {
        return Err(ScenarioError::Schema { pointer: "/".into(), message: "expected an object".into() });
    }
    match value.get("schema_version") {
        Some(serde_json::Value::String(v)) if v == SCHEMA_VERSION => {}
        Some(serde_json::Value::String(v)) => return Err(ScenarioError::Version(v.clone())),
        Some(_) => {
            return Err(ScenarioError::Schema {
                pointer: "/schema_version".into(),
                message: "expected a string".into(),
            })
        }
        None => {
            return Err(ScenarioError::Schema {
                pointer: "/".into(),
                message: "missing field `schema_version`".into(),
            })
        }
    }
    untag(&mut value)?;
    serde_path_to_error::deserialize(value).map_err(|e| ScenarioError::Schema {
        pointer: json_pointer(e.path()),
        message: e.inner().to_string(),
    })
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    Scenario::from_file(parse_scenario_file(text)?)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    parse_scenario(&text)
}

/// Canonical pretty-printed JSON (sorted keys) with a trailing newline.
pub fn to_canonical_json(file: &ScenarioFile) -> String {
    let mut value = serde_json::to_value(file).expect("scenario serializes");
    retag(&mut value);
    let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
    s.push('\n');
    s
}

pub fn save_scenario(file: &ScenarioFile, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    std::fs::write(path, to_canonical_json(file))
        .map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })
}

fn finite(context: &str, name: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::invalid(context, format!("{name} must be finite, got {v}")))
    }
}

impl Scenario {
    /// Validates a parsed document: references, parameters, supplies,
    /// policy and initial state. Everything downstream would reject is
    /// rejected here.
    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Version(file.schema_version.clone()));
        }
        if !(file.base_mva > 0.0 && file.base_mva.is_finite()) {
            return Err(ScenarioError::invalid("base_mva", "must be positive"));
        }
        let ids: Vec<String> = file.buses.iter().map(|b| b.id.clone()).collect();
        for (j, id) in ids.iter().enumerate() {
            if ids[..j].contains(id) {
                return Err(ScenarioError::invalid(format!("buses[{j}]"), format!("duplicate bus id {id:?}")));
            }
        }
        let index = |context: &str, id: &str| -> Result<usize, ScenarioError> {
            ids.iter()
                .position(|b| b == id)
                .ok_or_else(|| ScenarioError::DanglingBus { context: context.into(), id: id.into() })
        };
        let mut lines = Vec::with_capacity(file.lines.len());
        for (q, l) in file.lines.iter().enumerate() {
            let ctx = format!("lines[{q}]");
            lines.push(Line { from: index(&ctx, &l.from)?, to: index(&ctx, &l.to)?, susceptance: l.susceptance });
        }
        let graph = NetworkGraph::from_indices(ids.clone(), lines)
            .map_err(|e: GridError| ScenarioError::invalid("network", e))?;
        let mut params = Vec::with_capacity(file.buses.len());
        let mut supplies = Vec::with_capacity(file.buses.len());
        for b in &file.buses {
            let ctx = format!("bus {:?}", b.id);
            finite(&ctx, "load", b.load)?;
            params.push(BusParams { inertia: b.inertia, virtual_damping: b.virtual_damping, load: b.load });
            supplies.push(b.supply.to_lti().map_err(|e| ScenarioError::invalid(format!("{ctx} supply"), e))?);
        }
        let network =
            Network::new(graph, params, supplies).map_err(|e: SimError| ScenarioError::invalid("network", e))?;
        for (i, d) in file.disturbances.iter().enumerate() {
            let ctx = format!("disturbances[{i}]");
            index(&ctx, &d.bus)?;
            finite(&ctx, "delta_p", d.delta_p)?;
            finite(&ctx, "time", d.time)?;
            if d.time < 0.0 {
                return Err(ScenarioError::invalid(ctx, "time must be non-negative"));
            }
        }
        if let Some(batch) = &file.batch {
            if batch.runs == 0 {
                return Err(ScenarioError::invalid("batch.runs", "must be at least 1"));
            }
        }
        let scenario = Scenario { file, network };
        let config = scenario.sim_config(None);
        if !(config.step > 0.0 && config.step.is_finite() && config.horizon > 0.0 && config.horizon.is_finite()) {
            return Err(ScenarioError::invalid("simulation", "step and horizon must be positive and finite"));
        }
        if config.step > config.horizon {
            return Err(ScenarioError::invalid("simulation", "step exceeds horizon"));
        }
        let policy = scenario.policy(scenario.file.seed)?;
        policy
            .validate(scenario.network.bus_count())
            .map_err(|e: PolicyError| ScenarioError::invalid("policy", e))?;
        scenario.initial_state(None)?;
        Ok(scenario)
    }

    pub fn bus_ids(&self) -> &[String] {
        self.network.graph().bus_ids()
    }

    fn bus_index(&self, context: &str, id: &str) -> Result<usize, ScenarioError> {
        self.network
            .graph()
            .bus_index(id)
            .ok_or_else(|| ScenarioError::DanglingBus { context: context.into(), id: id.into() })
    }

    fn bus_set(&self, context: &str, buses: &Option<Vec<String>>) -> Result<Vec<usize>, ScenarioError> {
        match buses {
            None => Ok((0..self.network.bus_count()).collect()),
            Some(ids) => ids.iter().map(|id| self.bus_index(context, id)).collect(),
        }
    }

    /// Model from the file unless overridden.
    pub fn model(&self, over: Option<ModelSpec>) -> ModelSpec {
        over.unwrap_or(self.file.simulation.model)
    }

    pub fn sim_config(&self, model: Option<ModelSpec>) -> SimConfig {
        let mut cfg =
            SimConfig::new(self.file.simulation.step, self.file.simulation.horizon, self.model(model).sim_model());
        for d in &self.file.disturbances {
            // references were checked in from_file
            let bus = self.network.graph().bus_index(&d.bus).unwrap_or(usize::MAX);
            cfg = cfg.with_disturbance(bus, d.delta_p, d.time);
        }
        cfg
    }

    /// Loads once all disturbances have been applied.
    pub fn final_loads(&self) -> Vec<f64> {
        self.sim_config(None).final_loads(&self.network.loads())
    }

    /// Strictness certificates per bus (certification errors included).
    pub fn certify(&self) -> Vec<Result<Passivity, PassivityError>> {
        self.network.supplies().iter().map(strictness_constant).collect()
    }

    /// Margined strictness constants and storage matrices for the Lyapunov
    /// check. Buses without a certificate get `rho = 0` and no storage term.
    pub fn dissipation_inputs(&self) -> (Vec<f64>, Vec<Option<DMatrix<f64>>>) {
        self.certify()
            .into_iter()
            .map(|c| match c.ok().as_ref().and_then(|p| p.certificate()) {
                Some(cert) => (cert.storage.rho_margined, Some(cert.storage.p.clone())),
                None => (0.0, None),
            })
            .unzip()
    }

    fn rho_vector(&self, given: &Option<BTreeMap<String, f64>>) -> Result<Vec<f64>, ScenarioError> {
        let n = self.network.bus_count();
        let mut rho = vec![f64::NAN; n];
        if let Some(map) = given {
            for (id, v) in map {
                rho[self.bus_index("policy.rho", id)?] = *v;
            }
        }
        for (j, slot) in rho.iter_mut().enumerate() {
            if slot.is_nan() {
                let cert = strictness_constant(&self.network.supplies()[j]).map_err(|e| {
                    ScenarioError::invalid(format!("certifying bus {:?}", self.bus_ids()[j]), e)
                })?;
                *slot = cert.rho();
            }
        }
        Ok(rho)
    }

    /// The runtime policy, with bus ids resolved and `seed` applied to the
    /// randomized scheme.
    pub fn policy(&self, seed: u64) -> Result<InertiaPolicy, ScenarioError> {
        let n = self.network.bus_count();
        Ok(match &self.file.policy {
            PolicySpec::Constant {} => InertiaPolicy::Constant,
            PolicySpec::OpenLoopPiecewise { profiles } => {
                let mut breakpoints = vec![Vec::new(); n];
                for (id, pts) in profiles {
                    breakpoints[self.bus_index("policy.profiles", id)?] = pts.clone();
                }
                InertiaPolicy::OpenLoop(OpenLoopProfile { breakpoints })
            }
            PolicySpec::BangBang { ma, threshold, buses } => InertiaPolicy::BangBang(BangBangParams {
                ma: *ma,
                threshold: *threshold,
                buses: self.bus_set("policy.buses", buses)?,
            }),
            PolicySpec::RateLimited { ma, tau_vi, epsilon, threshold, buses, rho } => {
                InertiaPolicy::RateLimited(RateLimitedParams {
                    ma: *ma,
                    tau_vi: *tau_vi,
                    epsilon: *epsilon,
                    threshold: *threshold,
                    buses: self.bus_set("policy.buses", buses)?,
                    rho: self.rho_vector(rho)?,
                })
            }
            PolicySpec::Randomized { ma, tau_vi, epsilon, update_period, step, buses, rho } => {
                InertiaPolicy::Randomized(RandomizedParams {
                    ma: *ma,
                    tau_vi: *tau_vi,
                    epsilon: *epsilon,
                    update_period: *update_period,
                    step: *step,
                    buses: self.bus_set("policy.buses", buses)?,
                    rho: self.rho_vector(rho)?,
                    seed,
                })
            }
            PolicySpec::Destabilizer { target, m_hold, settle_tolerance, dwell, growth_threshold, ramp, escape_radius } => {
                let k = self.bus_index("policy.target", target)?;
                let omega_star = sync_frequency(&self.network, &self.final_loads())
                    .map_err(|e: AnalysisError| ScenarioError::invalid("policy", e))?;
                let m0 = self.network.params()[k].inertia;
                InertiaPolicy::Destabilizer(DestabilizerParams {
                    target: k,
                    m_hold: m_hold.unwrap_or(100.0 * m0),
                    settle_tolerance: *settle_tolerance,
                    dwell: *dwell,
                    growth_threshold: *growth_threshold,
                    ramp: ramp.unwrap_or(2.0 * self.file.simulation.step),
                    escape_radius: *escape_radius,
                    omega_star,
                })
            }
        })
    }

    /// Initial state for the given model; equilibria use that model's flows,
    /// gamma-points always linear flows.
    pub fn initial_state(&self, model: Option<ModelSpec>) -> Result<SystemState, ScenarioError> {
        let net = &self.network;
        let n = net.bus_count();
        let loads = net.loads();
        let analysis = |e: AnalysisError| ScenarioError::invalid("initial", e);
        let state = match &self.file.initial {
            InitialSpec::Zero {} => SystemState::zeros(net),
            InitialSpec::Equilibrium { omega_offset } => {
                let eq = find_equilibrium(net, &loads, self.model(model).flow_model()).map_err(analysis)?;
                let mut s = eq.to_state(n);
                for (id, dw) in omega_offset {
                    finite("initial.omega_offset", id, *dw)?;
                    s.omega[self.bus_index("initial.omega_offset", id)?] += dw;
                }
                s
            }
            InitialSpec::GammaPoint { bus, delta } => {
                finite("initial", "delta", *delta)?;
                let k = self.bus_index("initial.bus", bus)?;
                let w = sync_frequency(net, &loads).map_err(analysis)?;
                gamma_point(net, &loads, w + delta, k).map_err(analysis)?.to_state(n)
            }
            InitialSpec::Explicit { eta, omega, xs, mv } => {
                let mv = mv.clone().unwrap_or_else(|| vec![0.0; n]);
                let want = [net.line_count(), n, net.supply_state_count(), n];
                let got = [eta.len(), omega.len(), xs.len(), mv.len()];
                if want != got {
                    return Err(ScenarioError::invalid(
                        "initial",
                        format!("(eta, omega, xs, mv) lengths {got:?}, network needs {want:?}"),
                    ));
                }
                if eta.iter().chain(omega).chain(xs).chain(&mv).any(|v| !v.is_finite()) {
                    return Err(ScenarioError::invalid("initial", "non-finite entry"));
                }
                SystemState { t: 0.0, eta: eta.clone(), omega: omega.clone(), xs: xs.clone(), mv }
            }
        };
        Ok(state)
    }
}
