//! The mass-weighted parameter space `ℝⁿ_M`.
//!
//! Finite-element coefficient vectors carry the inner product
//! `(u, v)_M = uᵀMv`, the discrete analogue of the L² inner product.
//! Adjoints of operators into, out of, or within this space therefore
//! differ from plain transposes:
//!
//! | operator shape | adjoint      |
//! |----------------|--------------|
//! | `ℝⁿ_M → ℝⁿ_M`  | `M⁻¹BᵀM`     |
//! | `ℝⁿ_M → ℝ^q`   | `M⁻¹Fᵀ`      |
//! | `ℝ^q → ℝⁿ_M`   | `VᵀM`        |

use nalgebra::{DMatrix, DVector};

use super::mesh::Mesh;
use super::solve::{FactoredMatrix, SpdSolver};
use super::sparse::SparseSymMatrix;
use super::assembly::assemble_mass;
use crate::error::{check_dim, Error, Result};

/// Largest dimension for which the exact dense `M^{±1/2}` may be built.
/// Mass matrices are well conditioned, so their solves can run close to
/// round-off.
pub const MASS_SOLVE_TOL: f64 = 1e-14;

pub const EXACT_SQRT_MAX_DIM: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqrtPower {
    Half,
    NegHalf,
}

#[derive(Debug, Clone)]
struct ExactSqrt {
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct MSpace {
    mass: FactoredMatrix,
    lumped_diag: DVector<f64>,
    exact_sqrt: Option<ExactSqrt>,
}

impl MSpace {
    pub fn new(mass: SparseSymMatrix) -> Result<Self> {
        let solver = SpdSolver::pcg(mass.dim(), MASS_SOLVE_TOL);
        Self::with_solver(mass, solver)
    }

    pub fn from_mesh(mesh: &Mesh) -> Result<Self> {
        Self::new(assemble_mass(mesh))
    }

    pub fn with_solver(mass: SparseSymMatrix, solver: SpdSolver) -> Result<Self> {
        let lumped_diag = mass.row_sums();
        if let Some(i) = lumped_diag.iter().position(|&d| !(d > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "lumped mass entry {i} is not positive"
            )));
        }
        Ok(Self {
            mass: FactoredMatrix::new(mass, solver),
            lumped_diag,
            exact_sqrt: None,
        })
    }

    /// Builds the exact symmetric `M^{1/2}` and `M^{−1/2}` by dense
    /// eigendecomposition. Once present they replace the lumped
    /// approximation in [`MSpace::sqrt_apply`].
    pub fn with_exact_sqrt(mut self) -> Result<Self> {
        let n = self.dim();
        if n > EXACT_SQRT_MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "exact mass square root limited to n <= {EXACT_SQRT_MAX_DIM}, got {n}"
            )));
        }
        let eig = self.mass.matrix().to_dense().symmetric_eigen();
        let basis = &eig.eigenvectors;
        let scaled = |f: fn(f64) -> f64| {
            let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
            basis * d * basis.transpose()
        };
        self.exact_sqrt = Some(ExactSqrt {
            sqrt: scaled(f64::sqrt),
            inv_sqrt: scaled(|x| 1.0 / x.sqrt()),
        });
        Ok(self)
    }

    pub fn has_exact_sqrt(&self) -> bool {
        self.exact_sqrt.is_some()
    }

    pub fn dim(&self) -> usize {
        self.mass.dim()
    }

    pub fn mass(&self) -> &SparseSymMatrix {
        self.mass.matrix()
    }

    pub fn lumped_diag(&self) -> &DVector<f64> {
        &self.lumped_diag
    }

    pub fn apply_mass(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.mass.apply(v)
    }

    pub fn solve_mass(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.mass.solve(rhs)
    }

    /// `(u, v)_M = uᵀMv`
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), u.len())?;
        check_dim(self.dim(), v.len())?;
        Ok(self.mass.matrix().quad_form(u, v))
    }

    pub fn norm(&self, u: &DVector<f64>) -> Result<f64> {
        Ok(self.inner(u, u)?.max(0.0).sqrt())
    }

    /// Componentwise scaling by the lumped mass diagonal to the power ±1/2.
    pub fn lumped_sqrt_apply(&self, v: &DVector<f64>, power: SqrtPower) -> Result<DVector<f64>> {
        check_dim(self.dim(), v.len())?;
        Ok(match power {
            SqrtPower::Half => v.component_mul(&self.lumped_diag.map(f64::sqrt)),
            SqrtPower::NegHalf => v.component_div(&self.lumped_diag.map(f64::sqrt)),
        })
    }

    /// `M^{±1/2}v`, exact when the dense square root was built and lumped
    /// otherwise.
    pub fn sqrt_apply(&self, v: &DVector<f64>, power: SqrtPower) -> Result<DVector<f64>> {
        match &self.exact_sqrt {
            None => self.lumped_sqrt_apply(v, power),
            Some(exact) => {
                check_dim(self.dim(), v.len())?;
                Ok(match power {
                    SqrtPower::Half => &exact.sqrt * v,
                    SqrtPower::NegHalf => &exact.inv_sqrt * v,
                })
            }
        }
    }
}

/// A linear map that can apply itself and its Euclidean transpose.
pub trait MatrixOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;
    fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64>;
}

impl MatrixOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }
    fn ncols(&self) -> usize {
        self.ncols()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self * x
    }
    fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        self.tr_mul(y)
    }
}

impl MatrixOperator for SparseSymMatrix {
    fn nrows(&self) -> usize {
        self.dim()
    }
    fn ncols(&self) -> usize {
        self.dim()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.mul_vec(x)
    }
    fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        self.mul_vec(y)
    }
}

/// Domain and codomain roles of an operator relative to `ℝⁿ_M` and the
/// Euclidean observation space `ℝ^q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorShape {
    /// `ℝⁿ_M → ℝⁿ_M`
    ParamToParam,
    /// `ℝⁿ_M → ℝ^q`
    ParamToData,
    /// `ℝ^q → ℝⁿ_M`
    DataToParam,
}

/// Applies the adjoint of `op` with respect to the M-weighted inner product
/// on whichever sides of the operator live in `ℝⁿ_M`.
pub fn adjoint_apply<Op: MatrixOperator + ?Sized>(
    op: &Op,
    shape: OperatorShape,
    x: &DVector<f64>,
    mspace: &MSpace,
) -> Result<DVector<f64>> {
    let n = mspace.dim();
    match shape {
        OperatorShape::ParamToParam => {
            check_dim(n, op.nrows())?;
            check_dim(n, op.ncols())?;
            check_dim(n, x.len())?;
            let mx = mspace.apply_mass(x)?;
            mspace.solve_mass(&op.apply_transpose(&mx))
        }
        OperatorShape::ParamToData => {
            check_dim(n, op.ncols())?;
            check_dim(op.nrows(), x.len())?;
            mspace.solve_mass(&op.apply_transpose(x))
        }
        OperatorShape::DataToParam => {
            check_dim(n, op.nrows())?;
            check_dim(n, x.len())?;
            Ok(op.apply_transpose(&mspace.apply_mass(x)?))
        }
    }
}
