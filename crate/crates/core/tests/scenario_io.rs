mod common;

use inertia_core::batch::{run_batch, BatchError, BatchSpec};
use inertia_core::output::{write_envelope, write_trajectory};
use inertia_core::scenario::{load_scenario, parse_scenario, parse_scenario_file, save_scenario, to_canonical_json, ScenarioError};
use inertia_core::sim::integrate;
use serde_json::{json, Value};

const FILES: [&str; 6] = [
    "bus36_governor.json",
    "ring4_bang_bang.json",
    "ring4_constant.json",
    "ring4_randomized.json",
    "ring4_rate_limited.json",
    "two_bus_destabilizer.json",
];

fn base() -> Value {
    json!({
        "schema_version": "1",
        "buses": [
            {"id": "1", "inertia": 2.0, "load": 0.0, "supply": {"type": "first_order", "tau": 1.0, "droop": 10.0, "damping": 1.0}},
            {"id": "2", "inertia": 2.0, "load": 0.0, "supply": {"type": "second_order", "droop": 5.0, "natural_frequency": 2.0, "damping_ratio": 0.5, "damping": 1.0}}
        ],
        "lines": [{"from": "1", "to": "2", "susceptance": 3.0}],
        "simulation": {"horizon": 30.0, "model": "nonlinear"},
        "disturbances": [{"bus": "2", "delta_p": 0.1, "time": 1.0}],
        "initial": {"kind": "zero"},
        "seed": 3
    })
}

fn parse(v: &Value) -> Result<inertia_core::scenario::Scenario, ScenarioError> {
    parse_scenario(&serde_json::to_string_pretty(v).unwrap())
}

fn edit(f: impl FnOnce(&mut Value)) -> ScenarioError {
    let mut v = base();
    f(&mut v);
    parse(&v).err().expect("scenario should be rejected")
}

#[test]
fn shipped_scenarios_load_and_round_trip() {
    for name in FILES {
        let text = std::fs::read_to_string(common::scenario_path(name)).unwrap();
        let sc = load_scenario(common::scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let once = to_canonical_json(&sc.file);
        let twice = to_canonical_json(&parse_scenario_file(&once).unwrap());
        assert_eq!(once, twice, "{name}");
        assert_eq!(once, text, "{name} is not in canonical form");
    }
}

#[test]
fn save_then_load_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let sc = parse(&base()).unwrap();
    let path = dir.path().join("s.json");
    save_scenario(&sc.file, &path).unwrap();
    let back = load_scenario(&path).unwrap();
    assert_eq!(back.file, sc.file);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), to_canonical_json(&sc.file));
}

#[test]
fn defaults_fill_in() {
    let sc = parse(&base()).unwrap();
    assert_eq!(sc.file.simulation.step, 0.01);
    assert_eq!(sc.file.base_mva, 100.0);
    assert_eq!(sc.bus_ids(), ["1", "2"]);
}

#[test]
fn syntax_errors_carry_a_position() {
    let text = "{\n  \"schema_version\": \"1\",\n  \"buses\": [,]\n}";
    match parse_scenario(text).unwrap_err() {
        ScenarioError::Parse { line, column, .. } => assert_eq!((line, column), (3, 13)),
        other => panic!("{other}"),
    }
}

#[test]
fn schema_errors_carry_a_pointer() {
    let cases: Vec<(Box<dyn FnOnce(&mut Value)>, &str)> = vec![
        (Box::new(|v| v["buses"][1]["inertia"] = json!("heavy")), "/buses/1/inertia"),
        (Box::new(|v| v["buses"][0]["supply"]["tau"] = json!([1])), "/buses/0/supply/tau"),
        (Box::new(|v| v["buses"][0]["supply"]["gain"] = json!(1.0)), "/buses/0/supply/gain"),
        (Box::new(|v| v["lines"][0]["susceptance"] = Value::Null), "/lines/0/susceptance"),
        (Box::new(|v| v["simulation"]["horizon"] = json!("long")), "/simulation/horizon"),
        (Box::new(|v| v["policy"] = json!({"kind": "bang-bang", "ma": "x", "threshold": 0.1})), "/policy/ma"),
        (Box::new(|v| v["surprise"] = json!(1)), "/surprise"),
    ];
    for (f, pointer) in cases {
        match edit(f) {
            ScenarioError::Schema { pointer: p, .. } => assert_eq!(p, pointer),
            other => panic!("expected schema error at {pointer}, got {other}"),
        }
    }
}

#[test]
fn unknown_variants_are_rejected() {
    let e = edit(|v| v["buses"][0]["supply"] = json!({"type": "steam", "tau": 1.0}));
    assert!(matches!(e, ScenarioError::Schema { ref message, .. } if message.contains("steam")), "{e}");
    let e = edit(|v| v["policy"] = json!({"kind": "telepathic"}));
    assert!(matches!(e, ScenarioError::Schema { ref message, .. } if message.contains("telepathic")), "{e}");
}

#[test]
fn version_is_checked() {
    assert!(matches!(edit(|v| v["schema_version"] = json!("2")), ScenarioError::Version(ref s) if s == "2"));
}

#[test]
fn dangling_bus_references() {
    let e = edit(|v| v["lines"][0]["to"] = json!("99"));
    assert!(matches!(e, ScenarioError::DanglingBus { ref id, .. } if id == "99"), "{e}");
    let e = edit(|v| v["disturbances"][0]["bus"] = json!("99"));
    assert!(matches!(e, ScenarioError::DanglingBus { ref id, .. } if id == "99"), "{e}");
    let e = edit(|v| v["policy"] = json!({"kind": "bang-bang", "ma": 1.0, "threshold": 0.1, "buses": ["99"]}));
    assert!(matches!(e, ScenarioError::DanglingBus { ref id, .. } if id == "99"), "{e}");
}

#[test]
fn semantic_errors() {
    let cases: Vec<Box<dyn FnOnce(&mut Value)>> = vec![
        Box::new(|v| v["batch"] = json!({"runs": 0})),
        Box::new(|v| v["buses"][0]["supply"]["tau"] = json!(-1.0)),
        Box::new(|v| v["buses"][1]["id"] = json!("1")),
        Box::new(|v| v["simulation"]["step"] = json!(0.0)),
        Box::new(|v| v["buses"][0]["inertia"] = json!(0.0)),
        Box::new(|v| v["policy"] = json!({"kind": "rate-limited", "ma": -1.0, "tau_vi": 100.0, "epsilon": 1e-4, "threshold": 0.02})),
        Box::new(|v| v["buses"][0]["supply"] = json!({"type": "state_space", "a": [[1.0]], "b": [1.0], "c": [1.0], "d": 0.0})),
    ];
    for f in cases {
        let e = edit(f);
        assert!(matches!(e, ScenarioError::Invalid { .. }), "{e}");
    }
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(load_scenario("/nonexistent/x.json"), Err(ScenarioError::Io { .. })));
}

#[test]
fn trajectory_csv_has_one_row_per_sample() {
    let sc = parse(&base()).unwrap();
    let traj = integrate(&sc.network, &sc.initial_state(None).unwrap(), &sc.sim_config(None), &sc.policy(0).unwrap()).unwrap();
    let mut buf = Vec::new();
    write_trajectory(&mut buf, sc.network.graph(), &traj, None).unwrap();
    let mut rd = csv::Reader::from_reader(buf.as_slice());
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["t", "omega_1", "omega_2", "eta_1_2", "Mv_1", "Mv_2"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3001);
    assert_eq!(rows.last().unwrap()[0].parse::<f64>().unwrap(), 30.0);
}

#[test]
fn batches_do_not_depend_on_worker_count() {
    let mut sc = common::scenario("ring4_randomized.json");
    sc.file.simulation.horizon = 5.0;
    let sc = inertia_core::scenario::Scenario::from_file(sc.file).unwrap();
    let spec = BatchSpec { runs: 12, base_seed: 40 };
    let a = run_batch(&sc, &spec, None, 1).unwrap();
    let b = run_batch(&sc, &spec, None, 4).unwrap();
    assert_eq!(a, b);
    let seeds: Vec<u64> = a.runs.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, (40..52).collect::<Vec<_>>());
    let mut ea = Vec::new();
    write_envelope(&mut ea, &a).unwrap();
    assert!(String::from_utf8(ea).unwrap().starts_with("t,omega_max,omega_min\n"));
    assert!(matches!(run_batch(&sc, &BatchSpec { runs: 0, base_seed: 0 }, None, 1), Err(BatchError::NoRuns)));
}

#[test]
fn single_run_envelope_is_the_trajectory_band() {
    let mut sc = common::scenario("ring4_randomized.json");
    sc.file.simulation.horizon = 5.0;
    let sc = inertia_core::scenario::Scenario::from_file(sc.file).unwrap();
    let rep = run_batch(&sc, &BatchSpec { runs: 1, base_seed: 9 }, None, 1).unwrap();
    let traj = integrate(&sc.network, &sc.initial_state(None).unwrap(), &sc.sim_config(None), &sc.policy(9).unwrap()).unwrap();
    assert_eq!(rep.t.len(), traj.len());
    for (i, w) in traj.omega.iter().enumerate() {
        assert_eq!(rep.omega_max[i], w.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        assert_eq!(rep.omega_min[i], w.iter().copied().fold(f64::INFINITY, f64::min));
    }
}
