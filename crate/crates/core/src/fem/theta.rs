//! Diffusion tensors for the prior's elliptic operator.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Diffusion tensor `Θ(x)` of the prior precision operator.
///
/// The radial variant is measured from the centre of the domain box and
/// shortens correlation lengths in the radial direction towards the rim of
/// the ball of radius `radius`. In 1D every variant reduces to the scalar
/// `beta`.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaSpec {
    Isotropic {
        beta: f64,
    },
    RadialAnisotropic {
        beta: f64,
        theta: f64,
        radius: f64,
    },
}

impl ThetaSpec {
    pub fn beta(&self) -> f64 {
        match *self {
            ThetaSpec::Isotropic { beta } | ThetaSpec::RadialAnisotropic { beta, .. } => beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ThetaSpec::Isotropic { beta } => check_beta(beta),
            ThetaSpec::RadialAnisotropic {
                beta,
                theta,
                radius,
            } => {
                check_beta(beta)?;
                if !(theta > 0.0 && theta <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "anisotropy ratio theta must lie in (0, 1], got {theta}"
                    )));
                }
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "anisotropy radius must be positive, got {radius}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Evaluates `Θ` at offset `x` from the domain centre as a `dim × dim`
    /// tensor and checks that it is SPD.
    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let dim = x.len();
        let tensor = match *self {
            _ if dim == 1 => DMatrix::from_element(1, 1, self.beta()),
            ThetaSpec::Isotropic { beta } => DMatrix::identity(dim, dim) * beta,
            ThetaSpec::RadialAnisotropic {
                beta,
                theta,
                radius,
            } => theta_radial_eval(x, beta, theta, radius)?,
        };
        if !is_spd(&tensor) {
            return Err(Error::InvalidArgument(format!(
                "diffusion tensor is not positive definite at offset {x:?}"
            )));
        }
        Ok(tensor)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "diffusion scale beta must be positive, got {beta}"
        )))
    }
}

fn is_spd(t: &DMatrix<f64>) -> bool {
    t.clone().cholesky().is_some()
}

/// `β(I − θ(x) x xᵀ)` with
/// `θ(x) = (1 − θ)/(r‖x‖²) · (2‖x‖ − ‖x‖²/r)` and `θ(0) = 0`.
///
/// At `‖x‖ = r` the radial eigenvalue is `βθ`; tangential eigenvalues are
/// always `β`.
pub fn theta_radial_eval(x: &[f64], beta: f64, theta: f64, radius: f64) -> Result<DMatrix<f64>> {
    let dim = x.len();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > radius * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "point at distance {norm} lies outside the anisotropy radius {radius}"
        )));
    }
    let scale = if norm == 0.0 {
        0.0
    } else {
        (1.0 - theta) / (radius * norm * norm) * (2.0 * norm - norm * norm / radius)
    };
    let xv = nalgebra::DVector::from_column_slice(x);
    Ok((DMatrix::identity(dim, dim) - &xv * xv.transpose() * scale) * beta)
}
