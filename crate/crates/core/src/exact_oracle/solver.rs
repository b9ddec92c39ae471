//! Linear solves for the killed-walk operator `I - P_D`.
//!
//! `P_D` is the one-step transition matrix of SRW restricted to the domain
//! (rows sum to at most 1, strictly less next to the boundary), so `I - P_D`
//! is symmetric positive definite. Small systems use a dense Cholesky
//! factorization; larger ones run matrix-free conjugate gradients.

use nalgebra::{DMatrix, DVector};

use super::domain::{FiniteDomain, NO_SITE};
use super::OracleError;

pub const CG_TOLERANCE: f64 = 1e-12;
pub const CG_MAX_ITERATIONS: usize = 100_000;
/// Largest domain for which the dense factorization is used.
pub const DENSE_SOLVE_LIMIT: usize = 2000;

/// Dense `I - P_D`.
pub(crate) fn dense_operator(domain: &FiniteDomain) -> DMatrix<f64> {
    let n = domain.len();
    let mut a = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for &j in domain.neighbor_row(i) {
            if j != NO_SITE {
                a[(i, j as usize)] -= 1.0 / 6.0;
            }
        }
    }
    a
}

/// `y = (I - P_D) x`.
#[inline]
pub(crate) fn apply_operator(domain: &FiniteDomain, x: &[f64], y: &mut [f64]) {
    for (i, yi) in y.iter_mut().enumerate() {
        let mut s = 0.0;
        for &j in domain.neighbor_row(i) {
            if j != NO_SITE {
                s += x[j as usize];
            }
        }
        *yi = x[i] - s / 6.0;
    }
}

/// Full inverse `(I - P_D)^{-1}` by Cholesky.
pub(crate) fn dense_inverse(domain: &FiniteDomain) -> Result<DMatrix<f64>, OracleError> {
    let a = dense_operator(domain);
    let chol = a.cholesky().ok_or(OracleError::SolveFailure {
        residual: f64::NAN,
        detail: "operator not positive definite".into(),
    })?;
    Ok(chol.inverse())
}

/// Solves `(I - P_D) x = b` densely.
pub(crate) fn dense_solve(domain: &FiniteDomain, b: &[f64]) -> Result<Vec<f64>, OracleError> {
    let a = dense_operator(domain);
    let chol = a.cholesky().ok_or(OracleError::SolveFailure {
        residual: f64::NAN,
        detail: "operator not positive definite".into(),
    })?;
    let x = chol.solve(&DVector::from_column_slice(b));
    Ok(x.as_slice().to_vec())
}

/// Conjugate gradients with Jacobi preconditioning.
///
/// The operator's diagonal is identically 1, so the preconditioner reduces
/// to the identity; it is kept explicit so the iteration stays the standard
/// preconditioned form. Stops once `|r| <= tol * |b|`.
pub(crate) fn cg_solve(
    domain: &FiniteDomain,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize), OracleError> {
    let n = domain.len();
    let inv_diag = 1.0;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().map(|v| v * inv_diag).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((x, 0));
    }
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        if norm(&r) <= tol * b_norm {
            return Ok((x, it));
        }
        apply_operator(domain, &p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(OracleError::SolveFailure {
        residual: norm(&r) / b_norm,
        detail: format!("conjugate gradients did not converge in {max_iter} iterations"),
    })
}

/// `|(I - P_D) x - b|_inf`.
pub(crate) fn residual_inf(domain: &FiniteDomain, x: &[f64], b: &[f64]) -> f64 {
    let mut y = vec![0.0; x.len()];
    apply_operator(domain, x, &mut y);
    y.iter().zip(b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max)
}

/// Solves `(I - P_D) x = b`, dense below [`DENSE_SOLVE_LIMIT`] sites and by
/// conjugate gradients above.
pub(crate) fn solve(domain: &FiniteDomain, b: &[f64]) -> Result<Vec<f64>, OracleError> {
    if domain.len() <= DENSE_SOLVE_LIMIT {
        dense_solve(domain, b)
    } else {
        cg_solve(domain, b, CG_TOLERANCE, CG_MAX_ITERATIONS).map(|(x, _)| x)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
