use nalgebra::{DMatrix, DVector};

use super::ForwardModel;
use crate::error::{check_dim, Error, Result};
use crate::fem::{MSpace, Mesh};

/// `f(m) = G·m`. Its linearization is exact, which makes it the reference
/// model for checking the posterior machinery against dense algebra.
#[derive(Debug, Clone)]
pub struct LinearMapModel {
    g: DMatrix<f64>,
    noise_sigma: f64,
}

impl LinearMapModel {
    pub fn new(g: DMatrix<f64>, noise_sigma: f64) -> Result<Self> {
        if !(noise_sigma > 0.0 && noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise standard deviation must be positive, got {noise_sigma}"
            )));
        }
        Ok(Self { g, noise_sigma })
    }

    /// Observations are local Gaussian averages
    /// `y_i = ∫ exp(−|x − c_i|²/2w²) m(x) dx`, discretized as `G = Φ_k M`
    /// where `Φ_k` holds the kernels sampled at the nodes.
    pub fn gaussian_kernels(
        mesh: &Mesh,
        mspace: &MSpace,
        centers: &[Vec<f64>],
        width: f64,
        noise_sigma: f64,
    ) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kernel width must be positive, got {width}"
            )));
        }
        let n = mesh.num_nodes();
        let mut g = DMatrix::zeros(centers.len(), n);
        for (i, c) in centers.iter().enumerate() {
            if !mesh.contains(c) {
                return Err(Error::OutsideDomain(c.clone()));
            }
            let kernel = DVector::from_fn(n, |j, _| {
                let d2: f64 = mesh.node(j).iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum();
                (-0.5 * d2 / (width * width)).exp()
            });
            g.set_row(i, &mspace.apply_mass(&kernel)?.transpose());
        }
        Self::new(g, noise_sigma)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }
}

impl ForwardModel for LinearMapModel {
    type Linearization = DVector<f64>;

    fn param_dim(&self) -> usize {
        self.g.ncols()
    }

    fn obs_dim(&self) -> usize {
        self.g.nrows()
    }

    fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    fn linearize(&self, m: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.param_dim(), m.len())?;
        Ok(&self.g * m)
    }

    fn predicted<'a>(&self, lin: &'a DVector<f64>) -> &'a DVector<f64> {
        lin
    }

    fn jacobian_apply(&self, _lin: &DVector<f64>, dm: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.param_dim(), dm.len())?;
        Ok(&self.g * dm)
    }

    fn jacobian_transpose_apply(&self, _lin: &DVector<f64>, dy: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.obs_dim(), dy.len())?;
        Ok(self.g.tr_mul(dy))
    }
}
