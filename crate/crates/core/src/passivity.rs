//! Input-strict-passivity certificates for LTI bus supplies.
//!
//! The strictness constant of a stable SISO system equals the infimum of
//! `Re G(jw)` over `w in [0, inf]`. It is located by a logarithmic sweep with
//! golden-section refinement, then certified: a Hamiltonian imaginary-axis
//! test at a slightly reduced constant, and a storage matrix `P` from the
//! stabilizing Riccati solution of the positive-real lemma for `G(s) - rho'`.
//! `P` satisfies the KYP block inequality
//!
//! ```text
//! [ A^T P + P A    P B - C^T ]
//! [ B^T P - C      -2 (D - rho') ]  <= 0
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{max_symmetric_eigenvalue, min_symmetric_eigenvalue, solve_care};
use crate::supply::LtiSupply;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PassivityError {
    #[error("supply is not Hurwitz (spectral abscissa {0:e}); no certificate exists")]
    NotHurwitz(f64),
    #[error("eigenvalue computation failed")]
    Eigen,
    #[error("storage matrix unavailable at rho = {rho}: {reason}")]
    Storage { rho: f64, reason: String },
}

const SWEEP_POINTS: usize = 2000;
const SWEEP_LO: f64 = 1e-4;
const SWEEP_HI: f64 = 1e6;
const GOLDEN_REL_WIDTH: f64 = 1e-10;
const IMAG_AXIS_TOL: f64 = 1e-7;
const SAMPLED_TOL: f64 = 1e-9;
const LMI_TOL: f64 = 1e-8;
/// Relative reduction of rho at which the storage matrix is computed.
pub const STORAGE_MARGIN: f64 = 1e-3;

/// Where `Re G(jw)` attains (or approaches) its infimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgminFrequency {
    Finite(f64),
    Infinite,
}

impl std::fmt::Display for ArgminFrequency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ArgminFrequency::Finite(w) => write!(f, "{w:.6e}"),
            ArgminFrequency::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificationMethod {
    /// Infimum reached only as `w -> inf`; certified on the sampled grid.
    FrequencySweep,
    /// Hamiltonian test passed and a Riccati storage matrix was recovered.
    RiccatiVerified,
}

impl std::fmt::Display for CertificationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CertificationMethod::FrequencySweep => "frequency-sweep",
            CertificationMethod::RiccatiVerified => "riccati-verified",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageMatrix {
    pub p: DMatrix<f64>,
    /// The reduced constant `rho'` the LMI was solved at.
    pub rho_margined: f64,
    pub margin: f64,
    /// Largest eigenvalue of the KYP block at `(P, rho')`.
    pub lmi_max_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassivityCertificate {
    pub rho: f64,
    pub storage: StorageMatrix,
    pub argmin_frequency: ArgminFrequency,
    pub method: CertificationMethod,
}

impl PassivityCertificate {
    /// Admissible inertia growth rate bound `2 rho`.
    pub fn max_inertia_rate(&self) -> f64 {
        max_inertia_rate(self.rho)
    }
}

/// Outcome of [`strictness_constant`].
#[derive(Debug, Clone, PartialEq)]
pub enum Passivity {
    Strict(PassivityCertificate),
    /// `inf Re G(jw) <= 0`: the supply is at best passive, not strictly so.
    NotStrict { infimum: f64, argmin_frequency: ArgminFrequency },
}

impl Passivity {
    pub fn certificate(&self) -> Option<&PassivityCertificate> {
        match self {
            Passivity::Strict(c) => Some(c),
            Passivity::NotStrict { .. } => None,
        }
    }

    pub fn rho(&self) -> f64 {
        match self {
            Passivity::Strict(c) => c.rho,
            Passivity::NotStrict { infimum, .. } => *infimum,
        }
    }
}

pub fn max_inertia_rate(rho: f64) -> f64 {
    2.0 * rho
}

fn re_g(sys: &LtiSupply, w: f64) -> f64 {
    sys.frequency_response(w).re
}

/// Infimum of `Re G(jw)` over `[0, inf]` and where it is approached.
pub fn real_part_infimum(sys: &LtiSupply) -> (f64, ArgminFrequency) {
    if sys.order() == 0 {
        return (sys.d(), ArgminFrequency::Infinite);
    }
    let log_lo = SWEEP_LO.ln();
    let step = (SWEEP_HI.ln() - log_lo) / (SWEEP_POINTS - 1) as f64;
    let logs: Vec<f64> = (0..SWEEP_POINTS).map(|i| log_lo + step * i as f64).collect();
    let vals: Vec<f64> = logs.iter().map(|l| re_g(sys, l.exp())).collect();

    let mut best = (re_g(sys, 0.0), ArgminFrequency::Finite(0.0));
    let last = SWEEP_POINTS - 1;
    for i in 0..SWEEP_POINTS {
        let left_ok = i == 0 || vals[i] <= vals[i - 1];
        let right_ok = i == last || vals[i] <= vals[i + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        let a = logs[i.saturating_sub(1)];
        let b = logs[(i + 1).min(last)];
        let (l, v) = golden_min(|l| re_g(sys, l.exp()), a, b);
        let (l, v) = if vals[i] < v { (logs[i], vals[i]) } else { (l, v) };
        if v < best.0 {
            best = (v, ArgminFrequency::Finite(l.exp()));
        }
    }
    if sys.d() <= best.0 {
        best = (sys.d(), ArgminFrequency::Infinite);
    }
    best
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    // log-frequency width; relative width in w is ~ the same number
    while (b - a).abs() > GOLDEN_REL_WIDTH {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let m = 0.5 * (a + b);
    (m, f(m))
}

/// Hamiltonian of the positive-real test for `G(s) - rho`, whose
/// imaginary-axis eigenvalues are exactly the frequencies where
/// `Re G(jw) = rho`. Requires `D - rho > 0`.
fn popov_hamiltonian(sys: &LtiSupply, rho: f64) -> DMatrix<f64> {
    let (f, g, q) = riccati_data(sys, rho);
    let n = sys.order();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&f);
    h.view_mut((0, n), (n, n)).copy_from(&g);
    h.view_mut((n, 0), (n, n)).copy_from(&(-&q));
    h.view_mut((n, n), (n, n)).copy_from(&(-f.transpose()));
    h
}

/// `(F, G, Q)` of the Riccati equation `F^T P + P F + P G P + Q = 0`
/// equivalent to the KYP block at equality, with `R = 2 (D - rho)`.
fn riccati_data(sys: &LtiSupply, rho: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let r = 2.0 * (sys.d() - rho);
    let b = sys.b();
    let c = sys.c();
    let f = sys.a() - b * c / r;
    let g = b * b.transpose() / r;
    let q = c.transpose() * c / r;
    (f, g, q)
}

/// The KYP block matrix at `(P, rho)`.
pub fn kyp_block(sys: &LtiSupply, p: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let n = sys.order();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    let a = sys.a();
    m.view_mut((0, 0), (n, n)).copy_from(&(a.transpose() * p + p * a));
    let off: DVector<f64> = p * sys.b() - sys.c().transpose();
    m.view_mut((0, n), (n, 1)).copy_from(&off);
    m.view_mut((n, 0), (1, n)).copy_from(&off.transpose());
    m[(n, n)] = -2.0 * (sys.d() - rho);
    m
}

/// True iff `G(s) - rho_candidate` is positive real.
pub fn verify_rho(sys: &LtiSupply, rho_candidate: f64) -> Result<bool, PassivityError> {
    check_hurwitz(sys)?;
    let d = sys.d();
    let tol = 1e-12 * d.abs().max(1.0);
    if rho_candidate > d + tol {
        return Ok(false);
    }
    if sys.order() == 0 {
        return Ok(true);
    }
    if d - rho_candidate <= tol {
        let (inf, _) = real_part_infimum(sys);
        return Ok(inf >= rho_candidate - SAMPLED_TOL);
    }
    let h = popov_hamiltonian(sys, rho_candidate);
    let schur = nalgebra::linalg::Schur::try_new(h, 1e-15, 10_000).ok_or(PassivityError::Eigen)?;
    let eig = schur.complex_eigenvalues();
    Ok(eig.iter().all(|z| z.re.abs() >= IMAG_AXIS_TOL))
}

fn check_hurwitz(sys: &LtiSupply) -> Result<(), PassivityError> {
    let abscissa = sys.spectral_abscissa();
    if abscissa >= 0.0 {
        return Err(PassivityError::NotHurwitz(abscissa));
    }
    Ok(())
}

/// Storage matrix for `rho`, computed at `rho (1 - margin)` with the margin
/// widened tenfold (up to 0.1) when the Riccati solve or LMI check fails.
pub fn storage_matrix(sys: &LtiSupply, rho: f64) -> Result<StorageMatrix, PassivityError> {
    check_hurwitz(sys)?;
    let mut reasons = Vec::new();
    let mut margin = STORAGE_MARGIN;
    while margin <= 0.1 + 1e-15 {
        let rho_m = if rho > 0.0 { rho * (1.0 - margin) } else { rho - margin * rho.abs().max(1.0) };
        match storage_at(sys, rho_m) {
            Ok((p, lmi)) => {
                return Ok(StorageMatrix { p, rho_margined: rho_m, margin, lmi_max_eigenvalue: lmi })
            }
            Err(reason) => reasons.push(format!("margin {margin:e}: {reason}")),
        }
        margin *= 10.0;
    }
    Err(PassivityError::Storage { rho, reason: reasons.join("; ") })
}

fn storage_at(sys: &LtiSupply, rho_m: f64) -> Result<(DMatrix<f64>, f64), String> {
    if !verify_rho(sys, rho_m).map_err(|e| e.to_string())? {
        return Err("G(s) - rho' is not positive real".into());
    }
    if sys.d() - rho_m <= 0.0 {
        return Err("feedthrough does not exceed rho'".into());
    }
    let p = if sys.order() == 0 {
        DMatrix::zeros(0, 0)
    } else {
        let (f, g, q) = riccati_data(sys, rho_m);
        solve_care(&f, &g, &q).ok_or_else(|| "Riccati solve failed".to_string())?
    };
    let lmi = max_symmetric_eigenvalue(&kyp_block(sys, &p, rho_m));
    if lmi > LMI_TOL {
        return Err(format!("KYP block eigenvalue {lmi:e} exceeds tolerance"));
    }
    let min_p = min_symmetric_eigenvalue(&p);
    let scale = p.amax().max(1.0);
    if min_p < -1e-9 * scale {
        return Err(format!("storage matrix has negative eigenvalue {min_p:e}"));
    }
    Ok((p, lmi))
}

/// Strictness constant of an LTI supply with its certificate.
pub fn strictness_constant(sys: &LtiSupply) -> Result<Passivity, PassivityError> {
    check_hurwitz(sys)?;
    let (rho, argmin_frequency) = real_part_infimum(sys);
    if rho <= 0.0 {
        return Ok(Passivity::NotStrict { infimum: rho, argmin_frequency });
    }
    let at_infinity = sys.d() - rho <= 1e-12 * sys.d().abs().max(1.0);
    let method = if at_infinity || sys.order() == 0 {
        CertificationMethod::FrequencySweep
    } else {
        CertificationMethod::RiccatiVerified
    };
    let storage = storage_matrix(sys, rho)?;
    Ok(Passivity::Strict(PassivityCertificate { rho, storage, argmin_frequency, method }))
}
