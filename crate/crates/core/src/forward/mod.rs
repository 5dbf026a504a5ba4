//! Parameter-to-observable maps `f: ℝⁿ_M → ℝ^q` with their linearizations.
//!
//! A [`ForwardModel`] only has to supply the Euclidean Jacobian and its
//! transpose. The M-adjoint `F* = M⁻¹Fᵀ`, the misfit gradient and the
//! Gauss–Newton Hessian action are built generically on top of that.

pub mod linear;
pub mod observation;
pub mod wave;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::fem::MSpace;
use crate::rng::standard_normal_vector;

pub use linear::LinearMapModel;
pub use observation::{ObservationOperator, ObservationSetup};
pub use wave::{AdjointSolution, SourceSpec, StateHistory, WaveConfig, WaveLinearization, WaveModel};

/// A parameter-to-observable map with additive noise `N(0, σ²I)`.
pub trait ForwardModel: Sync {
    /// Everything needed to apply the linearization at a parameter point,
    /// e.g. the stored forward wavefield.
    type Linearization: Sync;

    fn param_dim(&self) -> usize;

    fn obs_dim(&self) -> usize;

    fn noise_sigma(&self) -> f64;

    /// Evaluates the map at `m` and keeps whatever the Jacobian needs.
    fn linearize(&self, m: &DVector<f64>) -> Result<Self::Linearization>;

    /// `f(m)` at the linearization point.
    fn predicted<'a>(&self, lin: &'a Self::Linearization) -> &'a DVector<f64>;

    /// `F·dm`
    fn jacobian_apply(&self, lin: &Self::Linearization, dm: &DVector<f64>) -> Result<DVector<f64>>;

    /// `Fᵀ·dy`, the plain Euclidean transpose.
    fn jacobian_transpose_apply(
        &self,
        lin: &Self::Linearization,
        dy: &DVector<f64>,
    ) -> Result<DVector<f64>>;

    fn observe(&self, m: &DVector<f64>) -> Result<DVector<f64>> {
        let lin = self.linearize(m)?;
        Ok(self.predicted(&lin).clone())
    }
}

/// `F·dm`
pub fn apply_f<F: ForwardModel>(model: &F, lin: &F::Linearization, dm: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(model.param_dim(), dm.len())?;
    model.jacobian_apply(lin, dm)
}

/// `F*·dy = M⁻¹Fᵀdy`, the adjoint with respect to `(·,·)_M`.
pub fn apply_f_star<F: ForwardModel>(
    model: &F,
    lin: &F::Linearization,
    mspace: &MSpace,
    dy: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim(model.obs_dim(), dy.len())?;
    mspace.solve_mass(&model.jacobian_transpose_apply(lin, dy)?)
}

/// `½‖f(m) − y_obs‖²_{Γ_noise⁻¹}`
pub fn misfit<F: ForwardModel>(model: &F, lin: &F::Linearization, y_obs: &DVector<f64>) -> Result<f64> {
    check_dim(model.obs_dim(), y_obs.len())?;
    let sigma2 = model.noise_sigma().powi(2);
    Ok(0.5 * (model.predicted(lin) - y_obs).norm_squared() / sigma2)
}

/// M-gradient of the data misfit: `F*Γ_noise⁻¹(f(m) − y_obs)`.
pub fn misfit_gradient<F: ForwardModel>(
    model: &F,
    lin: &F::Linearization,
    mspace: &MSpace,
    y_obs: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim(model.obs_dim(), y_obs.len())?;
    let weighted = (model.predicted(lin) - y_obs) / model.noise_sigma().powi(2);
    apply_f_star(model, lin, mspace, &weighted)
}

/// Gauss–Newton misfit Hessian action `F*Γ_noise⁻¹F·dm`.
pub fn misfit_gn_hessian_action<F: ForwardModel>(
    model: &F,
    lin: &F::Linearization,
    mspace: &MSpace,
    dm: &DVector<f64>,
) -> Result<DVector<f64>> {
    let dy = apply_f(model, lin, dm)? / model.noise_sigma().powi(2);
    apply_f_star(model, lin, mspace, &dy)
}

/// `y_obs = f(m_true) + σξ` with `ξ` drawn from `rng`.
pub fn synthesize_data<F: ForwardModel, R: Rng + ?Sized>(
    model: &F,
    m_true: &DVector<f64>,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise standard deviation must be nonnegative, got {noise_sigma}"
        )));
    }
    let clean = model.observe(m_true)?;
    let xi = standard_normal_vector(rng, clean.len());
    Ok(clean + xi * noise_sigma)
}
