use nalgebra::DMatrix;

use super::domain::{FiniteDomain, NO_SITE};
use super::solver::{self, CG_MAX_ITERATIONS, CG_TOLERANCE, DENSE_SOLVE_LIMIT};
use super::{Oracle, OracleError, RESIDUAL_TOLERANCE};
use crate::lattice::LatticePoint;

/// Largest domain for which a full dense table is built (the matrix alone
/// takes `8 n^2` bytes).
pub const DENSE_TABLE_LIMIT: usize = 6000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GreenSolver {
    /// Dense up to [`DENSE_SOLVE_LIMIT`] sites, iterative above.
    Auto,
    Dense,
    /// One conjugate-gradient solve per column.
    Iterative,
}

/// `G_D(x, y)`: expected number of visits to `y` before leaving `D`, from `x`.
#[derive(Clone, Debug)]
pub struct GreenTable {
    domain: FiniteDomain,
    values: DMatrix<f64>,
}

impl GreenTable {
    pub(crate) fn from_parts(domain: FiniteDomain, values: DMatrix<f64>) -> Self {
        GreenTable { domain, values }
    }

    pub fn domain(&self) -> &FiniteDomain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Zero when either point lies outside the domain.
    pub fn get(&self, x: LatticePoint, y: LatticePoint) -> f64 {
        match (self.domain.index_of(x), self.domain.index_of(y)) {
            (Some(i), Some(j)) => self.values[(i, j)],
            _ => 0.0,
        }
    }

    pub fn get_index(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// `|(I - P_D) G - I|_inf`.
    pub fn residual_inf(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            let row = self.domain.neighbor_row(i);
            for j in 0..n {
                let mut s = 0.0;
                for &k in row {
                    if k != NO_SITE {
                        s += self.values[(k as usize, j)];
                    }
                }
                let r = self.values[(i, j)] - s / 6.0 - if i == j { 1.0 } else { 0.0 };
                worst = worst.max(r.abs());
            }
        }
        worst
    }
}

impl Oracle {
    pub fn green_matrix(&self, domain: &FiniteDomain) -> Result<GreenTable, OracleError> {
        self.green_matrix_with(domain, GreenSolver::Auto)
    }

    pub fn green_matrix_with(
        &self,
        domain: &FiniteDomain,
        method: GreenSolver,
    ) -> Result<GreenTable, OracleError> {
        self.check(domain)?;
        let n = domain.len();
        if n > DENSE_TABLE_LIMIT {
            return Err(OracleError::CapExceeded { sites: n, cap: DENSE_TABLE_LIMIT });
        }
        let dense = match method {
            GreenSolver::Auto => n <= DENSE_SOLVE_LIMIT,
            GreenSolver::Dense => true,
            GreenSolver::Iterative => false,
        };
        let values = if dense {
            let mut g = solver::dense_inverse(domain)?;
            g.fill_lower_triangle_with_upper_triangle();
            g
        } else {
            let mut g = DMatrix::<f64>::zeros(n, n);
            let mut e = vec![0.0; n];
            for j in 0..n {
                e[j] = 1.0;
                let (col, _) = solver::cg_solve(domain, &e, CG_TOLERANCE, CG_MAX_ITERATIONS)?;
                e[j] = 0.0;
                g.set_column(j, &nalgebra::DVector::from_vec(col));
            }
            // Average with the transpose to remove solver asymmetry.
            let t = g.transpose();
            (g + t) * 0.5
        };
        let table = GreenTable { domain: domain.clone(), values };
        let residual = table.residual_inf();
        if residual.is_finite() && residual < RESIDUAL_TOLERANCE {
            Ok(table)
        } else {
            Err(OracleError::SolveFailure {
                residual,
                detail: "green table residual above tolerance".into(),
            })
        }
    }

    /// `G_D(., y)` as a vector over the domain's site order.
    pub fn green_column(&self, domain: &FiniteDomain, y: LatticePoint) -> Result<Vec<f64>, OracleError> {
        self.check(domain)?;
        let j = domain.index_of(y).ok_or(OracleError::NotInDomain(y))?;
        let mut e = vec![0.0; domain.len()];
        e[j] = 1.0;
        self.solve_checked(domain, &e)
    }

    /// `G_D(v, v)`; 1 by convention when `v` is not in `D`.
    pub fn green_diagonal(&self, domain: &FiniteDomain, v: LatticePoint) -> Result<f64, OracleError> {
        match domain.index_of(v) {
            Some(i) => Ok(self.green_column(domain, v)?[i]),
            None => Ok(1.0),
        }
    }

    /// Solves `(I - P_D) x = b` and checks the residual.
    pub(crate) fn solve_checked(&self, domain: &FiniteDomain, b: &[f64]) -> Result<Vec<f64>, OracleError> {
        self.check(domain)?;
        let x = solver::solve(domain, b)?;
        let residual = solver::residual_inf(domain, &x, b);
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if residual.is_finite() && residual < RESIDUAL_TOLERANCE * scale {
            Ok(x)
        } else {
            Err(OracleError::SolveFailure { residual, detail: "solution residual above tolerance".into() })
        }
    }
}
