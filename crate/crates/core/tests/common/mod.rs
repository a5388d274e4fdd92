#![allow(dead_code)]

use std::path::PathBuf;

use inertia_core::grid::{BusParams, NetworkGraph};
use inertia_core::scenario::{load_scenario, Scenario};
use inertia_core::sim::Network;
use inertia_core::supply::{FirstOrderSupply, LtiSupply, SecondOrderSupply};
use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn scenario(name: &str) -> Scenario {
    load_scenario(scenario_path(name)).unwrap()
}

pub fn first_order(tau: f64, k: f64, lambda: f64) -> LtiSupply {
    FirstOrderSupply::new(tau, k, lambda).unwrap().to_lti().unwrap()
}

pub fn network(ids: &[&str], lines: &[(&str, &str, f64)], m0: &[f64], loads: &[f64], supplies: Vec<LtiSupply>) -> Network {
    let g = NetworkGraph::new(ids, lines).unwrap();
    let params = m0
        .iter()
        .zip(loads)
        .map(|(&inertia, &load)| BusParams { inertia, virtual_damping: 0.0, load })
        .collect();
    Network::new(g, params, supplies).unwrap()
}

pub fn two_bus(m0: f64, b: f64, loads: [f64; 2]) -> Network {
    network(&["1", "2"], &[("1", "2", b)], &[m0, m0], &loads, vec![first_order(1.0, 10.0, 1.0), first_order(2.0, 8.0, 1.5)])
}

/// Triangle with first-order supplies on buses 1, 2 and a second-order one on bus 3.
pub fn triangle(loads: [f64; 3]) -> Network {
    let so = SecondOrderSupply { droop: 5.0, natural_frequency: 2.0, damping_ratio: 0.5, damping: 3.0 }
        .to_lti()
        .unwrap();
    network(
        &["a", "b", "c"],
        &[("a", "b", 4.0), ("b", "c", 3.0), ("c", "a", 5.0)],
        &[2.0, 3.0, 1.5],
        &loads,
        vec![first_order(1.5, 12.0, 1.0), first_order(0.8, 6.0, 2.0), so],
    )
}

/// 4-bus ring of the desk experiments.
pub fn ring4() -> Network {
    let tau = [2.0, 2.6, 1.4, 2.2];
    let lam = [1.0, 1.5, 2.0, 1.2];
    network(
        &["1", "2", "3", "4"],
        &[("1", "2", 10.0), ("2", "3", 10.0), ("3", "4", 10.0), ("4", "1", 10.0)],
        &[1.0, 1.0, 1.0, 8.0],
        &[0.0; 4],
        (0..4).map(|j| first_order(tau[j], 30.0, lam[j])).collect(),
    )
}

/// Random stable, minimal SISO realization of order `n`.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize) -> LtiSupply {
    loop {
        let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
        let shift = r.complex_eigenvalues().iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re));
        let a = r - DMatrix::identity(n, n) * (shift + rng.random_range(0.2..2.0));
        let b = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let c = RowDVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let d = rng.random_range(0.0..5.0);
        if let Ok(sys) = LtiSupply::new(a, b, c, d) {
            return sys;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
