//! Network topology and the algebraic power-flow maps.
//!
//! Buses are indexed `0..n` in insertion order; every line carries a fixed,
//! arbitrary orientation `from -> to`. The angle difference on a line is
//! `eta = theta_from - theta_to` and a positive flow travels `from -> to`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("network has no buses")]
    Empty,
    #[error("duplicate bus id {0:?}")]
    DuplicateBus(String),
    #[error("line {line} references unknown bus {bus:?}")]
    UnknownBus { line: usize, bus: String },
    #[error("line {0} connects a bus to itself")]
    SelfLoop(usize),
    #[error("line {line} duplicates an existing connection between {a:?} and {b:?}")]
    ParallelLine { line: usize, a: String, b: String },
    #[error("line {line} has non-positive susceptance {value}")]
    BadSusceptance { line: usize, value: f64 },
    #[error("network is disconnected; components: {components:?}")]
    Disconnected { components: Vec<Vec<String>> },
    #[error("expected {expected} entries, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// A transmission line between two buses (indices into the bus list).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
}

/// Per-bus physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BusParams {
    /// Physical inertia `M0 > 0`.
    pub inertia: f64,
    /// Virtual damping `Dv >= 0`, folded into the bus supply feedthrough.
    pub virtual_damping: f64,
    /// Constant, frequency-independent load.
    pub load: f64,
}

/// Connected, oriented graph of buses and lossless lines.
///
/// Immutable after construction. The susceptances are kept as a vector (the
/// diagonal of `B`) and the incidence matrix is only materialized on request.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    bus_ids: Vec<String>,
    lines: Vec<Line>,
}

impl NetworkGraph {
    /// Builds a graph from bus ids and `(from, to, susceptance)` triples that
    /// reference those ids.
    pub fn new<S: AsRef<str>>(bus_ids: &[S], lines: &[(S, S, f64)]) -> Result<Self, GridError> {
        let ids: Vec<String> = bus_ids.iter().map(|s| s.as_ref().to_string()).collect();
        let lookup = |line: usize, id: &str| {
            ids.iter().position(|b| b == id).ok_or_else(|| GridError::UnknownBus {
                line,
                bus: id.to_string(),
            })
        };
        let mut indexed = Vec::with_capacity(lines.len());
        for (q, (from, to, b)) in lines.iter().enumerate() {
            indexed.push(Line {
                from: lookup(q, from.as_ref())?,
                to: lookup(q, to.as_ref())?,
                susceptance: *b,
            });
        }
        Self::from_indices(ids, indexed)
    }

    pub fn from_indices(bus_ids: Vec<String>, lines: Vec<Line>) -> Result<Self, GridError> {
        if bus_ids.is_empty() {
            return Err(GridError::Empty);
        }
        for (i, id) in bus_ids.iter().enumerate() {
            if bus_ids[..i].contains(id) {
                return Err(GridError::DuplicateBus(id.clone()));
            }
        }
        let n = bus_ids.len();
        for (q, line) in lines.iter().enumerate() {
            for end in [line.from, line.to] {
                if end >= n {
                    return Err(GridError::UnknownBus { line: q, bus: end.to_string() });
                }
            }
            if line.from == line.to {
                return Err(GridError::SelfLoop(q));
            }
            if !(line.susceptance > 0.0) || !line.susceptance.is_finite() {
                return Err(GridError::BadSusceptance { line: q, value: line.susceptance });
            }
            let clash = lines[..q].iter().any(|o| {
                (o.from == line.from && o.to == line.to) || (o.from == line.to && o.to == line.from)
            });
            if clash {
                return Err(GridError::ParallelLine {
                    line: q,
                    a: bus_ids[line.from].clone(),
                    b: bus_ids[line.to].clone(),
                });
            }
        }
        let graph = Self { bus_ids, lines };
        let components = graph.components();
        if components.len() > 1 {
            let named = components
                .into_iter()
                .map(|c| c.into_iter().map(|j| graph.bus_ids[j].clone()).collect())
                .collect();
            return Err(GridError::Disconnected { components: named });
        }
        Ok(graph)
    }

    fn components(&self) -> Vec<Vec<usize>> {
        let n = self.bus_ids.len();
        let mut label = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            label[start] = id;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for line in &self.lines {
                    let other = if line.from == v {
                        line.to
                    } else if line.to == v {
                        line.from
                    } else {
                        continue;
                    };
                    if label[other] == usize::MAX {
                        label[other] = id;
                        members.push(other);
                        stack.push(other);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn bus_count(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn bus_ids(&self) -> &[String] {
        &self.bus_ids
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.bus_ids.iter().position(|b| b == id)
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn susceptances(&self) -> DVector<f64> {
        DVector::from_iterator(self.lines.len(), self.lines.iter().map(|l| l.susceptance))
    }

    /// Dimension of the cycle space, `|E| - |N| + 1` for a connected graph.
    pub fn cycle_rank(&self) -> usize {
        self.lines.len() + 1 - self.bus_ids.len()
    }

    /// Returns a copy with the orientation of line `q` reversed.
    pub fn with_reversed_line(&self, q: usize) -> Self {
        let mut lines = self.lines.clone();
        let l = &mut lines[q];
        std::mem::swap(&mut l.from, &mut l.to);
        Self { bus_ids: self.bus_ids.clone(), lines }
    }

    /// Dense incidence matrix `H` (`|N| x |E|`).
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.bus_count(), self.line_count());
        for (q, line) in self.lines.iter().enumerate() {
            h[(line.from, q)] = 1.0;
            h[(line.to, q)] = -1.0;
        }
        h
    }

    /// `H * p`: net power leaving each bus through its lines.
    pub fn net_injection(&self, flows: &[f64]) -> Result<DVector<f64>, GridError> {
        self.check_edges(flows.len())?;
        let mut out = DVector::zeros(self.bus_count());
        for (line, p) in self.lines.iter().zip(flows) {
            out[line.from] += p;
            out[line.to] -= p;
        }
        Ok(out)
    }

    /// `H^T * omega`: rate of change of each line's angle difference.
    pub fn angle_rates(&self, omega: &[f64]) -> Result<DVector<f64>, GridError> {
        if omega.len() != self.bus_count() {
            return Err(GridError::Dimension { expected: self.bus_count(), got: omega.len() });
        }
        Ok(DVector::from_iterator(
            self.line_count(),
            self.lines.iter().map(|l| omega[l.from] - omega[l.to]),
        ))
    }

    /// `p_kl = B_kl sin(eta_kl)`.
    pub fn power_flow_nonlinear(&self, eta: &[f64]) -> Result<DVector<f64>, GridError> {
        self.check_edges(eta.len())?;
        Ok(DVector::from_iterator(
            eta.len(),
            self.lines.iter().zip(eta).map(|(l, e)| l.susceptance * e.sin()),
        ))
    }

    /// `p_kl = B_kl eta_kl`.
    pub fn power_flow_linear(&self, eta: &[f64]) -> Result<DVector<f64>, GridError> {
        self.check_edges(eta.len())?;
        Ok(DVector::from_iterator(
            eta.len(),
            self.lines.iter().zip(eta).map(|(l, e)| l.susceptance * e),
        ))
    }

    pub fn power_flow(&self, eta: &[f64], model: FlowModel) -> Result<DVector<f64>, GridError> {
        match model {
            FlowModel::Nonlinear => self.power_flow_nonlinear(eta),
            FlowModel::Linear => self.power_flow_linear(eta),
        }
    }

    fn check_edges(&self, got: usize) -> Result<(), GridError> {
        if got != self.line_count() {
            return Err(GridError::Dimension { expected: self.line_count(), got });
        }
        Ok(())
    }
}

/// Which line-flow map is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FlowModel {
    #[default]
    Nonlinear,
    Linear,
}
