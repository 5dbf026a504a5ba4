//! Gaussian prior `N(m₀, Γ_prior)` with `Γ_prior = A⁻²`, where
//! `A = M⁻¹K` is the discretized elliptic operator `α(−∇·Θ∇ + I)` with
//! homogeneous Neumann boundary conditions.
//!
//! Nothing here forms a dense covariance: every action is a pair of
//! elliptic solves and mass-matrix products.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::fem::{
    assemble_prior_stiffness, FactoredMatrix, MSpace, Mesh, SparseSymMatrix, SpdSolver, SqrtPower,
    ThetaSpec, DEFAULT_SOLVE_TOL,
};

/// Overall precision scale used for the global seismic setting.
pub const DEFAULT_ALPHA: f64 = 1.5e-2;
/// Radial-to-tangential diffusion ratio at the rim of the ball.
pub const DEFAULT_THETA: f64 = 4e-2;
/// `β = DEFAULT_BETA_SCALE · r²` for a domain of radius `r`.
pub const DEFAULT_BETA_SCALE: f64 = 7.5e-3;

/// Radially anisotropic tensor with the default hyperparameters rescaled
/// to a domain of radius `radius`.
pub fn default_theta(radius: f64) -> ThetaSpec {
    ThetaSpec::RadialAnisotropic {
        beta: DEFAULT_BETA_SCALE * radius * radius,
        theta: DEFAULT_THETA,
        radius,
    }
}

#[derive(Debug, Clone)]
pub struct PriorModel {
    mesh: Mesh,
    mspace: MSpace,
    stiffness: FactoredMatrix,
    mean: DVector<f64>,
    alpha: f64,
    theta: ThetaSpec,
}

impl PriorModel {
    pub fn new(mesh: &Mesh, alpha: f64, theta: ThetaSpec, mean: DVector<f64>) -> Result<Self> {
        let mspace = MSpace::from_mesh(mesh)?;
        Self::with_mspace(mesh, mspace, alpha, theta, mean)
    }

    pub fn with_mspace(
        mesh: &Mesh,
        mspace: MSpace,
        alpha: f64,
        theta: ThetaSpec,
        mean: DVector<f64>,
    ) -> Result<Self> {
        check_dim(mesh.num_nodes(), mspace.dim())?;
        check_dim(mesh.num_nodes(), mean.len())?;
        let k = assemble_prior_stiffness(mesh, alpha, &theta)?;
        let stiffness = FactoredMatrix::with_pcg(k, DEFAULT_SOLVE_TOL);
        Ok(Self {
            mesh: mesh.clone(),
            mspace,
            stiffness,
            mean,
            alpha,
            theta,
        })
    }

    /// Replaces the iterative K- and M-solves with dense Cholesky
    /// factorizations. Only for small meshes.
    pub fn with_dense_solves(mut self) -> Result<Self> {
        let k = self.stiffness.matrix().clone();
        let solver = SpdSolver::dense(&k)?;
        self.stiffness = FactoredMatrix::new(k, solver);
        let m = self.mspace.mass().clone();
        let exact = self.mspace.has_exact_sqrt();
        let mut mspace = MSpace::with_solver(m.clone(), SpdSolver::dense(&m)?)?;
        if exact {
            mspace = mspace.with_exact_sqrt()?;
        }
        self.mspace = mspace;
        Ok(self)
    }

    /// Uses the exact dense `M^{1/2}` instead of the lumped diagonal when
    /// sampling.
    pub fn with_exact_mass_sqrt(mut self) -> Result<Self> {
        self.mspace = self.mspace.with_exact_sqrt()?;
        Ok(self)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mspace(&self) -> &MSpace {
        &self.mspace
    }

    pub fn stiffness(&self) -> &SparseSymMatrix {
        self.stiffness.matrix()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> &ThetaSpec {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn solve_stiffness(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.stiffness.solve(rhs)
    }

    /// `Γ_prior^{1/2} v = A⁻¹v = K⁻¹Mv`
    pub fn apply_gamma_prior_sqrt(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), v.len())?;
        self.stiffness.solve(&self.mspace.apply_mass(v)?)
    }

    /// `Γ_prior v = K⁻¹MK⁻¹Mv`
    pub fn apply_gamma_prior(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let half = self.apply_gamma_prior_sqrt(v)?;
        self.apply_gamma_prior_sqrt(&half)
    }

    /// `A v = M⁻¹Kv`
    pub fn apply_precision_sqrt(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), v.len())?;
        self.mspace.solve_mass(&self.stiffness.apply(v)?)
    }

    /// `Γ_prior⁻¹ v = M⁻¹KM⁻¹Kv`
    pub fn apply_gamma_prior_inv(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let half = self.apply_precision_sqrt(v)?;
        self.apply_precision_sqrt(&half)
    }

    /// `−½‖A(m − m₀)‖²_M = −½(m−m₀)ᵀKM⁻¹K(m−m₀)`
    pub fn log_density_unnormalized(&self, m: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), m.len())?;
        let dev = m - &self.mean;
        let kd = self.stiffness.apply(&dev)?;
        let ad = self.mspace.solve_mass(&kd)?;
        Ok(-0.5 * kd.dot(&ad))
    }

    /// `m₀ + K⁻¹M^{1/2}n̂` for a standard normal `n̂`. `M^{1/2}` is the
    /// lumped diagonal unless the exact square root was requested.
    pub fn sample(&self, noise: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), noise.len())?;
        let rhs = self.mspace.sqrt_apply(noise, SqrtPower::Half)?;
        Ok(&self.mean + self.stiffness.solve(&rhs)?)
    }

    /// Prior covariance function `c(x, y) = Φ(x)ᵀK⁻¹MK⁻¹Φ(y)`.
    pub fn covariance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let n = self.dim();
        let wx = self.stiffness.solve(&self.mesh.eval_basis(x)?.to_dense(n))?;
        let wy = self.stiffness.solve(&self.mesh.eval_basis(y)?.to_dense(n))?;
        self.mspace.inner(&wx, &wy)
    }

    /// Pointwise variance `Φ(x)ᵀK⁻¹MK⁻¹Φ(x)`, one K-solve per point.
    pub fn pointwise_variance(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.dim();
        points
            .par_iter()
            .map(|x| {
                let w = self.stiffness.solve(&self.mesh.eval_basis(x)?.to_dense(n))?;
                self.mspace.inner(&w, &w)
            })
            .collect()
    }

    /// Pointwise variance at every mesh node.
    pub fn nodal_variance(&self) -> Result<Vec<f64>> {
        self.pointwise_variance(self.mesh.nodes())
    }
}

/// Covariance function `c(x, y) = Φ(x)ᵀ Γ M⁻¹ Φ(y)` of any covariance
/// operator given by its action on `ℝⁿ_M`.
pub fn covariance_function<F>(
    mesh: &Mesh,
    mspace: &MSpace,
    gamma: F,
    x: &[f64],
    y: &[f64],
) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = mspace.dim();
    let phi_x = mesh.eval_basis(x)?;
    let phi_y = mesh.eval_basis(y)?.to_dense(n);
    let applied = gamma(&mspace.solve_mass(&phi_y)?)?;
    if applied.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: applied.len(),
        });
    }
    Ok(phi_x.dot(&applied))
}
