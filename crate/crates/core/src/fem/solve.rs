//! Symmetric positive-definite solves: Jacobi-preconditioned conjugate
//! gradients for production use and a dense Cholesky path for small
//! problems.

use nalgebra::{Cholesky, DVector, Dyn};

use super::sparse::SparseSymMatrix;
use crate::error::{check_dim, Error, Result};

pub const DEFAULT_SOLVE_TOL: f64 = 1e-12;

/// Largest dimension for which a dense factorization is allowed.
pub const DENSE_SOLVE_MAX_DIM: usize = 2000;

/// Solves `matrix · x = rhs` with Jacobi-preconditioned CG until
/// `‖matrix·x − rhs‖₂ ≤ tol·‖rhs‖₂`.
pub fn solve_spd(matrix: &SparseSymMatrix, rhs: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    pcg(matrix, rhs, tol, default_max_iters(matrix.dim()))
}

fn default_max_iters(n: usize) -> usize {
    10 * n + 100
}

pub fn pcg(
    matrix: &SparseSymMatrix,
    rhs: &DVector<f64>,
    tol: f64,
    max_iters: usize,
) -> Result<DVector<f64>> {
    let n = matrix.dim();
    check_dim(n, rhs.len())?;
    let rhs_norm = rhs.norm();
    let mut x = DVector::zeros(n);
    if rhs_norm == 0.0 {
        return Ok(x);
    }
    let inv_diag = matrix.diagonal().map(|d| 1.0 / d);
    let mut r = rhs.clone();
    let mut z = r.component_mul(&inv_diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let target = tol * rhs_norm;

    for iter in 0..max_iters {
        let ap = matrix.mul_vec(&p);
        let curvature = p.dot(&ap);
        if curvature <= 0.0 {
            return Err(Error::SolverFailure {
                iterations: iter,
                residual: r.norm() / rhs_norm,
            });
        }
        let step = rz / curvature;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &ap, 1.0);
        if r.norm() <= target {
            return Ok(x);
        }
        z = r.component_mul(&inv_diag);
        let rz_next = r.dot(&z);
        p *= rz_next / rz;
        p += &z;
        rz = rz_next;
    }
    Err(Error::SolverFailure {
        iterations: max_iters,
        residual: r.norm() / rhs_norm,
    })
}

/// A reusable solve context for one SPD matrix.
#[derive(Debug, Clone)]
pub enum SpdSolver {
    Pcg { tol: f64, max_iters: usize },
    Dense(Box<Cholesky<f64, Dyn>>),
}

impl SpdSolver {
    pub fn pcg(n: usize, tol: f64) -> Self {
        SpdSolver::Pcg {
            tol,
            max_iters: default_max_iters(n),
        }
    }

    /// Dense Cholesky factorization; only for `n ≤ DENSE_SOLVE_MAX_DIM`.
    pub fn dense(matrix: &SparseSymMatrix) -> Result<Self> {
        if matrix.dim() > DENSE_SOLVE_MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "dense factorization limited to n <= {DENSE_SOLVE_MAX_DIM}, got {}",
                matrix.dim()
            )));
        }
        let chol = Cholesky::new(matrix.to_dense())
            .ok_or_else(|| Error::InvalidArgument("matrix is not positive definite".into()))?;
        Ok(SpdSolver::Dense(Box::new(chol)))
    }

    pub fn solve(&self, matrix: &SparseSymMatrix, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(matrix.dim(), rhs.len())?;
        match self {
            SpdSolver::Pcg { tol, max_iters } => pcg(matrix, rhs, *tol, *max_iters),
            SpdSolver::Dense(chol) => Ok(chol.solve(rhs)),
        }
    }
}

/// A matrix paired with its solver.
#[derive(Debug, Clone)]
pub struct FactoredMatrix {
    matrix: SparseSymMatrix,
    solver: SpdSolver,
}

impl FactoredMatrix {
    pub fn new(matrix: SparseSymMatrix, solver: SpdSolver) -> Self {
        Self { matrix, solver }
    }

    pub fn with_pcg(matrix: SparseSymMatrix, tol: f64) -> Self {
        let solver = SpdSolver::pcg(matrix.dim(), tol);
        Self { matrix, solver }
    }

    pub fn matrix(&self) -> &SparseSymMatrix {
        &self.matrix
    }

    pub fn solver(&self) -> &SpdSolver {
        &self.solver
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.matrix.try_mul_vec(x)
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.solver.solve(&self.matrix, rhs)
    }
}
