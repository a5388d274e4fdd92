//! Decentralized power-supply dynamics at each bus.
//!
//! Every model takes the local frequency deviation `omega` and feeds `-omega`
//! into its realization, so callers never handle the sign:
//!
//! ```text
//! x' = A x + B (-omega)
//! s  = C x + D (-omega)
//! ```

use nalgebra::{Complex, DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SupplyError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("state matrix is not Hurwitz (max real eigenvalue part {0:e})")]
    NotHurwitz(f64),
    #[error("realization is not minimal (controllable: {controllable}, observable: {observable})")]
    NotMinimal { controllable: bool, observable: bool },
    #[error("state matrix is singular")]
    Singular,
    #[error("transfer function is improper (numerator degree {num} > denominator degree {den})")]
    Improper { num: usize, den: usize },
    #[error("invalid parameter {name} = {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("non-finite entry in realization")]
    NonFinite,
}

/// Common interface the simulator and equilibrium solver use for bus supplies.
///
/// Only [`LtiSupply`] ships; nonlinear models may implement this trait but
/// cannot be passivity-certified here.
pub trait SupplyDynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    /// Writes the state derivative at local frequency deviation `omega` into `dx`.
    fn rhs(&self, x: &[f64], omega: f64, dx: &mut [f64]);
    fn output(&self, x: &[f64], omega: f64) -> f64;
    /// Equilibrium state and output for a constant frequency deviation.
    fn steady_state(&self, omega_bar: f64) -> Result<(DVector<f64>, f64), SupplyError>;
    /// Static gain from `-omega` to `s`, when the model is linear.
    fn dc_gain(&self) -> Option<f64> {
        None
    }
}

/// Minimal, Hurwitz state-space realization of a single-input single-output supply.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSupply {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: RowDVector<f64>,
    d: f64,
}

const RANK_TOL: f64 = 1e-8;

impl LtiSupply {
    /// Validating constructor: the realization must be finite, Hurwitz and minimal.
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: RowDVector<f64>,
        d: f64,
    ) -> Result<Self, SupplyError> {
        let sys = Self::new_unchecked(a, b, c, d)?;
        let max_re = sys.spectral_abscissa();
        if max_re >= 0.0 {
            return Err(SupplyError::NotHurwitz(max_re));
        }
        let (controllable, observable) = sys.minimality();
        if !(controllable && observable) {
            return Err(SupplyError::NotMinimal { controllable, observable });
        }
        Ok(sys)
    }

    /// Checks dimensions and finiteness only.
    pub fn new_unchecked(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: RowDVector<f64>,
        d: f64,
    ) -> Result<Self, SupplyError> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || c.len() != n {
            return Err(SupplyError::Dimension(format!(
                "A is {}x{}, B has {}, C has {}",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        let finite = a.iter().chain(b.iter()).chain(c.iter()).all(|v| v.is_finite());
        if !finite || !d.is_finite() {
            return Err(SupplyError::NonFinite);
        }
        Ok(Self { a, b, c, d })
    }

    /// Zero-state static gain `s = D (-omega)`.
    pub fn gain(d: f64) -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: DVector::zeros(0),
            c: RowDVector::zeros(0),
            d,
        }
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &RowDVector<f64> {
        &self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// Same dynamics with the feedthrough replaced.
    pub fn with_feedthrough(&self, d: f64) -> Self {
        Self { d, ..self.clone() }
    }

    /// Scales the output map `(C, D)` by `alpha`.
    pub fn scaled_output(&self, alpha: f64) -> Self {
        Self { c: &self.c * alpha, d: self.d * alpha, ..self.clone() }
    }

    /// Largest real part among the eigenvalues of `A` (`-inf` for a static gain).
    pub fn spectral_abscissa(&self) -> f64 {
        if self.order() == 0 {
            return f64::NEG_INFINITY;
        }
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Full-rank tests of the controllability and observability matrices.
    pub fn minimality(&self) -> (bool, bool) {
        let n = self.order();
        if n == 0 {
            return (true, true);
        }
        let mut ctrb = DMatrix::zeros(n, n);
        let mut obsv = DMatrix::zeros(n, n);
        let mut col = self.b.clone();
        let mut row = self.c.clone();
        for k in 0..n {
            ctrb.set_column(k, &col);
            obsv.set_row(k, &row);
            col = &self.a * col;
            row = &row * &self.a;
        }
        (full_rank(ctrb), full_rank(obsv))
    }

    /// `A x + B (-omega)`.
    pub fn supply_rhs(&self, x: &DVector<f64>, omega: f64) -> Result<DVector<f64>, SupplyError> {
        self.check_state(x.len())?;
        Ok(&self.a * x - &self.b * omega)
    }

    /// `C x + D (-omega)`.
    pub fn supply_output(&self, x: &DVector<f64>, omega: f64) -> Result<f64, SupplyError> {
        self.check_state(x.len())?;
        Ok(self.c.dot(&x.transpose()) - self.d * omega)
    }

    /// `(x_bar, s_bar)` with `x_bar = -A^{-1} B (-omega_bar)`.
    pub fn static_characteristic(&self, omega_bar: f64) -> Result<(DVector<f64>, f64), SupplyError> {
        let n = self.order();
        if n == 0 {
            return Ok((DVector::zeros(0), -self.d * omega_bar));
        }
        let lu = self.a.clone().lu();
        let sol = lu.solve(&self.b).ok_or(SupplyError::Singular)?;
        if !sol.iter().all(|v| v.is_finite()) {
            return Err(SupplyError::Singular);
        }
        let x_bar = sol * omega_bar;
        let s_bar = self.c.dot(&x_bar.transpose()) - self.d * omega_bar;
        Ok((x_bar, s_bar))
    }

    /// `G(0) = D - C A^{-1} B`.
    pub fn dc_gain_checked(&self) -> Result<f64, SupplyError> {
        self.static_characteristic(-1.0).map(|(_, s)| s)
    }

    /// `G(j w) = C (j w I - A)^{-1} B + D`.
    pub fn frequency_response(&self, w: f64) -> Complex<f64> {
        let n = self.order();
        if n == 0 {
            return Complex::new(self.d, 0.0);
        }
        if w.is_infinite() {
            return Complex::new(self.d, 0.0);
        }
        let m = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { Complex::new(0.0, w) } else { Complex::new(0.0, 0.0) };
            diag - Complex::new(self.a[(i, j)], 0.0)
        });
        let rhs = self.b.map(|v| Complex::new(v, 0.0));
        match m.lu().solve(&rhs) {
            Some(x) => {
                let mut acc = Complex::new(self.d, 0.0);
                for k in 0..n {
                    acc += x[k] * self.c[k];
                }
                acc
            }
            None => Complex::new(f64::NAN, f64::NAN),
        }
    }

    fn check_state(&self, got: usize) -> Result<(), SupplyError> {
        if got != self.order() {
            return Err(SupplyError::Dimension(format!(
                "state has {got} entries, model order is {}",
                self.order()
            )));
        }
        Ok(())
    }
}

fn full_rank(m: DMatrix<f64>) -> bool {
    let n = m.nrows();
    let sv = m.svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return false;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * max).count() == n
}

impl SupplyDynamics for LtiSupply {
    fn state_dim(&self) -> usize {
        self.order()
    }

    fn rhs(&self, x: &[f64], omega: f64, dx: &mut [f64]) {
        let n = self.order();
        for i in 0..n {
            let mut acc = -self.b[i] * omega;
            for j in 0..n {
                acc += self.a[(i, j)] * x[j];
            }
            dx[i] = acc;
        }
    }

    fn output(&self, x: &[f64], omega: f64) -> f64 {
        let mut acc = -self.d * omega;
        for (c, x) in self.c.iter().zip(x) {
            acc += c * x;
        }
        acc
    }

    fn steady_state(&self, omega_bar: f64) -> Result<(DVector<f64>, f64), SupplyError> {
        self.static_characteristic(omega_bar)
    }

    fn dc_gain(&self) -> Option<f64> {
        self.dc_gain_checked().ok()
    }
}

/// `tau x' = -x - K omega`, `s = x - lambda omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirstOrderSupply {
    pub tau: f64,
    pub droop: f64,
    pub damping: f64,
}

impl FirstOrderSupply {
    pub fn new(tau: f64, droop: f64, damping: f64) -> Result<Self, SupplyError> {
        let s = Self { tau, droop, damping };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SupplyError> {
        positive("tau", self.tau)?;
        positive("droop", self.droop)?;
        positive("damping", self.damping)
    }

    pub fn to_lti(&self) -> Result<LtiSupply, SupplyError> {
        self.validate()?;
        LtiSupply::new(
            DMatrix::from_element(1, 1, -1.0 / self.tau),
            DVector::from_element(1, self.droop / self.tau),
            RowDVector::from_element(1, 1.0),
            self.damping,
        )
    }
}

/// Lightly damped second-order droop response plus static damping:
/// `G(s) = K wn^2 / (s^2 + 2 zeta wn s + wn^2) + lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondOrderSupply {
    pub droop: f64,
    pub natural_frequency: f64,
    pub damping_ratio: f64,
    pub damping: f64,
}

impl SecondOrderSupply {
    pub fn validate(&self) -> Result<(), SupplyError> {
        positive("droop", self.droop)?;
        positive("natural_frequency", self.natural_frequency)?;
        positive("damping_ratio", self.damping_ratio)?;
        non_negative("damping", self.damping)
    }

    pub fn to_lti(&self) -> Result<LtiSupply, SupplyError> {
        self.validate()?;
        let wn = self.natural_frequency;
        LtiSupply::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -wn * wn, -2.0 * self.damping_ratio * wn]),
            DVector::from_column_slice(&[0.0, 1.0]),
            RowDVector::from_row_slice(&[self.droop * wn * wn, 0.0]),
            self.damping,
        )
    }
}

/// Turbine-governor model
/// `G(s) = K (1 + s T3)(1 + s T4) / ((1 + s Ts)(1 + s Tc)(1 + s T5)) + lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurbineGovernor {
    pub droop: f64,
    pub ts: f64,
    pub t3: f64,
    pub tc: f64,
    pub t4: f64,
    pub t5: f64,
    pub damping: f64,
}

/// Relative tolerance under which a lead and a lag time constant cancel.
const CANCEL_TOL: f64 = 1e-9;

impl TurbineGovernor {
    pub fn new(values: [f64; 7]) -> Result<Self, SupplyError> {
        let [droop, ts, t3, tc, t4, t5, damping] = values;
        let g = Self { droop, ts, t3, tc, t4, t5, damping };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), SupplyError> {
        non_negative("droop", self.droop)?;
        non_negative("damping", self.damping)?;
        for (name, t) in [("ts", self.ts), ("t3", self.t3), ("tc", self.tc), ("t4", self.t4), ("t5", self.t5)] {
            if !t.is_finite() {
                return Err(SupplyError::Parameter { name, value: t });
            }
        }
        Ok(())
    }

    /// Evaluates the transfer function directly from its factored form.
    pub fn eval(&self, s: Complex<f64>) -> Complex<f64> {
        let one = Complex::new(1.0, 0.0);
        let num = (one + s * self.t3) * (one + s * self.t4);
        let den = (one + s * self.ts) * (one + s * self.tc) * (one + s * self.t5);
        num / den * self.droop + self.damping
    }

    /// Lead and lag time constants after dropping zeros and cancelling
    /// coincident pole-zero pairs.
    fn reduced_factors(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lags: Vec<f64> = [self.ts, self.tc, self.t5].into_iter().filter(|&t| t != 0.0).collect();
        let mut leads = Vec::new();
        for t in [self.t3, self.t4].into_iter().filter(|&t| t != 0.0) {
            let hit = lags
                .iter()
                .position(|&l| (l - t).abs() <= CANCEL_TOL * l.abs().max(t.abs()));
            match hit {
                Some(i) => {
                    lags.remove(i);
                }
                None => leads.push(t),
            }
        }
        (leads, lags)
    }

    /// Controllable-canonical realization of the reduced transfer function.
    pub fn tf_to_state_space(&self) -> Result<LtiSupply, SupplyError> {
        self.validate()?;
        let (leads, lags) = self.reduced_factors();
        if let Some(&t) = lags.iter().find(|&&t| t < 0.0) {
            return Err(SupplyError::NotHurwitz(-1.0 / t));
        }
        let num: Vec<f64> = poly_from_time_constants(&leads).into_iter().map(|c| c * self.droop).collect();
        let den = poly_from_time_constants(&lags);
        realize(&num, &den, self.damping)
    }
}

/// Coefficients (ascending powers) of `prod (1 + s T_i)`.
fn poly_from_time_constants(ts: &[f64]) -> Vec<f64> {
    let mut p = vec![1.0];
    for &t in ts {
        let mut next = vec![0.0; p.len() + 1];
        for (i, c) in p.iter().enumerate() {
            next[i] += c;
            next[i + 1] += c * t;
        }
        p = next;
    }
    p
}

/// Controllable canonical form of `num/den + extra_d` (ascending coefficients).
fn realize(num: &[f64], den: &[f64], extra_d: f64) -> Result<LtiSupply, SupplyError> {
    let n = den.len() - 1;
    let num_deg = num.len() - 1;
    if num_deg > n {
        return Err(SupplyError::Improper { num: num_deg, den: n });
    }
    let lead = den[n];
    let a_coef: Vec<f64> = den.iter().map(|c| c / lead).collect();
    let mut b_coef: Vec<f64> = num.iter().map(|c| c / lead).collect();
    b_coef.resize(n + 1, 0.0);
    let d_tf = b_coef[n];
    // strictly proper remainder num/lead - d_tf * den/lead
    let rem: Vec<f64> = (0..n).map(|i| b_coef[i] - d_tf * a_coef[i]).collect();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -a_coef[j];
    }
    let mut b = DVector::zeros(n);
    if n > 0 {
        b[n - 1] = 1.0;
    }
    let c = RowDVector::from_row_slice(&rem);
    LtiSupply::new(a, b, c, d_tf + extra_d)
}

fn positive(name: &'static str, value: f64) -> Result<(), SupplyError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SupplyError::Parameter { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<(), SupplyError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SupplyError::Parameter { name, value })
    }
}

/// Bus-36 governor in `new` argument order `(K, Ts, T3, Tc, T4, T5, lambda)`.
/// The published tuple lists the toolbox columns `(Ts, Tc, T3)`, so the 0.1 s
/// constant is the governor lag `Tc` and the transient-gain lead `T3` is 0.
pub const BUS36_GOVERNOR: [f64; 7] = [110.1, 0.45, 0.0, 0.1, 13.25, 54.0, 30.3];
