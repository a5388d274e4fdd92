//! Small dense solvers: continuous Lyapunov and algebraic Riccati equations.

use nalgebra::DMatrix;

/// Solves `A^T X + X A + Q = 0` through the Kronecker form. Intended for the
/// handful of states a bus supply carries.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    // vec(A^T X + X A) = (I (x) A^T + A^T (x) I) vec(X)
    let at = a.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    let k = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -DMatrix::from_column_slice(n * n, 1, q.as_slice());
    let sol = k.lu().solve(&rhs)?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Some((&x + x.transpose()) * 0.5)
}

/// Matrix sign function by scaled Newton iteration. Fails when the matrix
/// has (numerically) imaginary-axis eigenvalues.
pub fn matrix_sign(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let size = m.nrows();
    let mut z = m.clone();
    for _ in 0..100 {
        let inv = z.clone().try_inverse()?;
        let det = z.determinant().abs();
        let scale = if det > 0.0 && det.is_finite() {
            det.powf(-1.0 / size as f64)
        } else {
            1.0
        };
        let next = (&z * scale + inv / scale) * 0.5;
        let diff = (&next - &z).abs().sum();
        let norm = next.abs().sum();
        z = next;
        if !norm.is_finite() {
            return None;
        }
        if diff <= 1e-13 * norm {
            // one more unscaled step to settle
            let inv = z.clone().try_inverse()?;
            return Some((&z + inv) * 0.5);
        }
    }
    None
}

/// Stabilizing solution of `F^T P + P F + P G P + Q = 0` (so that `F + G P`
/// is Hurwitz), via the stable invariant subspace of the Hamiltonian
/// `[[F, G], [-Q, -F^T]]`, then polished by Newton steps.
pub fn solve_care(f: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = f.nrows();
    if n == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(f);
    h.view_mut((0, n), (n, n)).copy_from(g);
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-f.transpose()));
    let w = matrix_sign(&h)?;
    let eye = DMatrix::<f64>::identity(n, n);
    // (W + I) [I; P] = 0 on the stable subspace
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w.view((n, 0), (n, n))));
    let mut p = lhs.svd(true, true).solve(&rhs, 1e-14).ok()?;
    p = (&p + p.transpose()) * 0.5;
    for _ in 0..3 {
        let closed = f + g * &p;
        let residual = riccati_residual(f, g, q, &p);
        let step = solve_lyapunov(&closed, &residual)?;
        p += step;
        p = (&p + p.transpose()) * 0.5;
    }
    let closed = f + g * &p;
    let stable = closed.complex_eigenvalues().iter().all(|z| z.re < 0.0);
    if !stable || !p.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some(p)
}

pub fn riccati_residual(
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    q: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    f.transpose() * p + p * f + p * g * p + q
}

/// Largest eigenvalue of a symmetric matrix (`-inf` for an empty one).
pub fn max_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().max()
}

pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lyapunov_scalar() {
        let a = DMatrix::from_element(1, 1, -2.0);
        let q = DMatrix::from_element(1, 1, 4.0);
        let x = solve_lyapunov(&a, &q).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn care_matches_quadratic_formula() {
        // -2p + p^2 g + q = 0 with f = -1, stabilizing root p = (1 - sqrt(1 - g q)) / g
        let (g, q) = (0.5, 1.2);
        let p = solve_care(
            &DMatrix::from_element(1, 1, -1.0),
            &DMatrix::from_element(1, 1, g),
            &DMatrix::from_element(1, 1, q),
        )
        .unwrap();
        let expect = (1.0 - (1.0 - g * q).sqrt()) / g;
        assert!((p[(0, 0)] - expect).abs() < 1e-13);
    }

    #[test]
    fn care_two_state_residual() {
        let f = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -1.5]);
        let g = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.2]);
        let q = DMatrix::from_row_slice(2, 2, &[0.3, 0.05, 0.05, 0.2]);
        let p = solve_care(&f, &g, &q).unwrap();
        assert!(riccati_residual(&f, &g, &q, &p).amax() < 1e-12);
    }
}
