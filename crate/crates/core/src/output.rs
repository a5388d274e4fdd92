//! CSV output: frequency, inertia and Lyapunov traces, batch envelopes and
//! certificates. Every file starts with a header row.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::analysis::LyapunovReport;
use crate::batch::BatchReport;
use crate::grid::NetworkGraph;
use crate::passivity::{ArgminFrequency, CertificationMethod, Passivity, PassivityError};
use crate::sim::Trajectory;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn num(v: f64) -> String {
    v.to_string()
}

/// `t, omega_<bus>..., eta_<from>_<to>..., Mv_<bus>...[, V]`.
pub fn write_trajectory<W: Write>(
    out: W,
    graph: &NetworkGraph,
    traj: &Trajectory,
    lyapunov: Option<&[f64]>,
) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    let ids = graph.bus_ids();
    let mut header = vec!["t".to_string()];
    header.extend(ids.iter().map(|id| format!("omega_{id}")));
    header.extend(graph.lines().iter().map(|l| format!("eta_{}_{}", ids[l.from], ids[l.to])));
    header.extend(ids.iter().map(|id| format!("Mv_{id}")));
    if lyapunov.is_some() {
        header.push("V".into());
    }
    w.write_record(&header)?;
    for i in 0..traj.len() {
        let mut row = vec![num(traj.t[i])];
        row.extend(traj.omega[i].iter().map(|v| num(*v)));
        row.extend(traj.eta[i].iter().map(|v| num(*v)));
        row.extend(traj.mv[i].iter().map(|v| num(*v)));
        if let Some(v) = lyapunov {
            // V is only defined from the analysis start onward
            let offset = traj.len() - v.len();
            row.push(if i >= offset { num(v[i - offset]) } else { String::new() });
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| OutputError::Io { path: "<stream>".into(), source })?;
    Ok(())
}

/// Long format `t, bus, Mv, u, phase`.
pub fn write_inertia_trace<W: Write>(out: W, graph: &NetworkGraph, traj: &Trajectory) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "bus", "Mv", "u", "phase"])?;
    for i in 0..traj.len() {
        for (j, id) in graph.bus_ids().iter().enumerate() {
            let u = traj.setpoint.get(i).and_then(|s| s.get(j)).copied().unwrap_or(f64::NAN);
            let phase = traj.phase.get(i).and_then(|p| p.get(j)).copied().unwrap_or("");
            w.write_record([num(traj.t[i]), id.clone(), num(traj.mv[i][j]), num(u), phase.to_string()])?;
        }
    }
    w.flush().map_err(|source| OutputError::Io { path: "<stream>".into(), source })?;
    Ok(())
}

/// `t, V, V_F, V_P, sumVj, bound`; the bound of the last sample is empty.
pub fn write_lyapunov<W: Write>(out: W, report: &LyapunovReport) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "V", "V_F", "V_P", "sumVj", "bound"])?;
    for (i, v) in report.values.iter().enumerate() {
        let bound = report.bound.get(i).map(|b| num(*b)).unwrap_or_default();
        w.write_record([num(report.t[i]), num(v.v), num(v.v_f), num(v.v_p), num(v.sum_vj), bound])?;
    }
    w.flush().map_err(|source| OutputError::Io { path: "<stream>".into(), source })?;
    Ok(())
}

/// `t, omega_max, omega_min`.
pub fn write_envelope<W: Write>(out: W, report: &BatchReport) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "omega_max", "omega_min"])?;
    for i in 0..report.t.len() {
        w.write_record([num(report.t[i]), num(report.omega_max[i]), num(report.omega_min[i])])?;
    }
    w.flush().map_err(|source| OutputError::Io { path: "<stream>".into(), source })?;
    Ok(())
}

/// `index, seed, class, max_deviation, final_deviation, aborted`.
pub fn write_batch_runs<W: Write>(out: W, report: &BatchReport) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "seed", "class", "max_deviation", "final_deviation", "aborted"])?;
    for r in &report.runs {
        w.write_record([
            r.index.to_string(),
            r.seed.to_string(),
            r.class.to_string(),
            num(r.max_deviation),
            num(r.final_deviation),
            r.aborted.to_string(),
        ])?;
    }
    w.flush().map_err(|source| OutputError::Io { path: "<stream>".into(), source })?;
    Ok(())
}

/// `bus, strict, rho, argmin_frequency, method, rho_margined, lmi_max_eigenvalue, error`.
pub fn write_certificates<W: Write>(
    out: W,
    graph: &NetworkGraph,
    certs: &[Result<Passivity, PassivityError>],
) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "bus",
        "strict",
        "rho",
        "argmin_frequency",
        "method",
        "rho_margined",
        "lmi_max_eigenvalue",
        "error",
    ])?;
    let freq = |a: &ArgminFrequency| match a {
        ArgminFrequency::Finite(w) => num(*w),
        ArgminFrequency::Infinite => "inf".to_string(),
    };
    for (id, cert) in graph.bus_ids().iter().zip(certs) {
        let row = match cert {
            Ok(Passivity::Strict(c)) => [
                id.clone(),
                "true".into(),
                num(c.rho),
                freq(&c.argmin_frequency),
                match c.method {
                    CertificationMethod::FrequencySweep => "frequency-sweep".into(),
                    CertificationMethod::RiccatiVerified => "riccati-verified".into(),
                },
                num(c.storage.rho_margined),
                num(c.storage.lmi_max_eigenvalue),
                String::new(),
            ],
            Ok(Passivity::NotStrict { infimum, argmin_frequency }) => [
                id.clone(),
                "false".into(),
                num(*infimum),
                freq(argmin_frequency),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ],
            Err(e) => [
                id.clone(),
                "false".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                e.to_string(),
            ],
        };
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| OutputError::Io { path: "<stream>".into(), source })?;
    Ok(())
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn to_file<F>(path: &Path, f: F) -> Result<(), OutputError>
where
    F: FnOnce(std::io::BufWriter<std::fs::File>) -> Result<(), OutputError>,
{
    let file = std::fs::File::create(path)
        .map_err(|source| OutputError::Io { path: path.display().to_string(), source })?;
    f(std::io::BufWriter::new(file))
}
