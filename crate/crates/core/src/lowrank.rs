//! Low-rank Gaussian posterior from the dominant eigenpairs of the
//! prior-preconditioned Gauss–Newton Hessian
//! `H̃ = Γ_prior^{1/2} H_misfit Γ_prior^{1/2}`.
//!
//! With `V` M-orthonormal, `D = diag(λ/(λ+1))` and `Ṽ = Γ_prior^{1/2}V`:
//!
//! ```text
//! Γ_post ≈ Γ_prior − Ṽ D Ṽ*
//! ```
//!
//! Eigenpairs come from Lanczos in the M-inner product, which only needs
//! Hessian actions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_dim, Error, Result};
use crate::fem::{MSpace, SqrtPower};
use crate::forward::{misfit_gn_hessian_action, ForwardModel};
use crate::prior::{covariance_function, PriorModel};
use crate::rng::{seeded, standard_normal_vector};

/// `H̃v = Γ_prior^{1/2} F*Γ_noise⁻¹F Γ_prior^{1/2} v`
pub fn apply_prior_preconditioned_hessian<F: ForwardModel>(
    prior: &PriorModel,
    model: &F,
    lin: &F::Linearization,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let half = prior.apply_gamma_prior_sqrt(v)?;
    let h = misfit_gn_hessian_action(model, lin, prior.mspace(), &half)?;
    prior.apply_gamma_prior_sqrt(&h)
}

/// Upper estimate of the discarded information `Σ λ/(λ+1)` over the
/// eigenvalues left out of the approximation.
pub fn truncation_error_bound(discarded: &[f64]) -> f64 {
    discarded.iter().map(|&l| l.max(0.0) / (l.max(0.0) + 1.0)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosConfig {
    /// Maximum number of eigenpairs kept.
    pub r_max: usize,
    /// Relative Ritz residual tolerance.
    pub eig_tol: f64,
    /// Eigenvalues below this carry little information and end the search.
    pub threshold: f64,
    /// Defaults to `min(n, 2·r_max + 20)`.
    pub max_iters: Option<usize>,
    pub seed: u64,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self {
            r_max: 50,
            eig_tol: 1e-6,
            threshold: 0.1,
            max_iters: None,
            seed: 0,
        }
    }
}

impl LanczosConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eig_tol > 0.0 && self.eig_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eig_tol must be positive, got {}",
                self.eig_tol
            )));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "threshold must be nonnegative, got {}",
                self.threshold
            )));
        }
        if self.max_iters == Some(0) {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// M-orthonormal eigenpairs in descending order.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub lambdas: Vec<f64>,
    /// Columns are the eigenvectors, `VᵀMV = I`.
    pub vectors: DMatrix<f64>,
    pub residual_norms: Vec<f64>,
    /// Ritz values that were computed but not kept.
    pub discarded: Vec<f64>,
    /// True when `r_max` pairs were kept while the spectrum above the
    /// threshold may continue.
    pub rank_limited: bool,
    /// True when the Krylov space became invariant.
    pub breakdown: bool,
    pub iterations: usize,
    pub diagnostic: Option<String>,
}

impl EigenDecomposition {
    pub fn rank(&self) -> usize {
        self.lambdas.len()
    }

    /// Estimated information lost by truncation, and whether that value is
    /// only an estimate (the unexplored spectrum may add to it).
    pub fn truncation_estimate(&self) -> (f64, bool) {
        (truncation_error_bound(&self.discarded), !self.breakdown)
    }

    /// Keeps only the `r` leading pairs.
    pub fn truncated(&self, r: usize) -> Self {
        let r = r.min(self.rank());
        let mut discarded: Vec<f64> = self.lambdas[r..].to_vec();
        discarded.extend_from_slice(&self.discarded);
        Self {
            lambdas: self.lambdas[..r].to_vec(),
            vectors: self.vectors.columns(0, r).into_owned(),
            residual_norms: self.residual_norms[..r].to_vec(),
            discarded,
            rank_limited: self.rank_limited || r < self.rank(),
            breakdown: self.breakdown,
            iterations: self.iterations,
            diagnostic: self.diagnostic.clone(),
        }
    }
}

/// Lanczos with full reorthogonalization in the M-inner product for an
/// M-self-adjoint, positive semidefinite operator.
pub fn lanczos_eigs<Op>(op: Op, mspace: &MSpace, config: &LanczosConfig) -> Result<EigenDecomposition>
where
    Op: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    config.validate()?;
    let n = mspace.dim();
    let max_iters = config
        .max_iters
        .unwrap_or(2 * config.r_max + 20)
        .min(n)
        .max(1);

    let mut rng = seeded(config.seed);
    let start = standard_normal_vector(&mut rng, n);
    let start_norm = mspace.norm(&start)?;
    let mut basis = vec![start / start_norm];
    let mut mass_basis = vec![mspace.apply_mass(&basis[0])?];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut breakdown = false;
    let mut ritz;

    loop {
        let j = alphas.len();
        let mut w = op(&basis[j])?;
        check_dim(n, w.len())?;
        let alpha = w.dot(&mass_basis[j]);
        w.axpy(-alpha, &basis[j], 1.0);
        if j > 0 {
            w.axpy(-betas[j - 1], &basis[j - 1], 1.0);
        }
        for _ in 0..2 {
            for (q, mq) in basis.iter().zip(&mass_basis) {
                let c = w.dot(mq);
                w.axpy(-c, q, 1.0);
            }
        }
        alphas.push(alpha);
        let beta = mspace.norm(&w)?;

        ritz = RitzSet::new(&alphas, &betas, beta);
        let scale = ritz.values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if beta <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            breakdown = true;
        }
        let k = alphas.len();
        if breakdown || k >= max_iters || k >= n {
            break;
        }
        if ritz.resolved(config) {
            break;
        }
        betas.push(beta);
        let next = w / beta;
        mass_basis.push(mspace.apply_mass(&next)?);
        basis.push(next);
    }

    let k = alphas.len();
    let exact = breakdown || k >= n;
    let tol_scale = config.eig_tol * ritz.max().max(1.0);
    let mut kept = Vec::new();
    let mut discarded = Vec::new();
    for i in 0..k {
        let value = ritz.values[i].max(0.0);
        let converged = exact || ritz.residuals[i] <= tol_scale;
        if value >= config.threshold && value > 0.0 && converged && kept.len() < config.r_max {
            kept.push(i);
        } else {
            discarded.push(value);
        }
    }
    let rank_limited = kept.len() == config.r_max
        && discarded.iter().any(|&v| v >= config.threshold && v > 0.0);

    let mut vectors = DMatrix::zeros(n, kept.len());
    for (c, &i) in kept.iter().enumerate() {
        let mut col = DVector::zeros(n);
        for (q, s) in basis.iter().zip(ritz.vectors.column(i).iter()) {
            col.axpy(*s, q, 1.0);
        }
        vectors.set_column(c, &col);
    }

    let diagnostic = if kept.is_empty() && breakdown {
        Some(format!("Krylov space became invariant after {k} iterations with no eigenvalue above {}", config.threshold))
    } else if !exact && !ritz.resolved(config) {
        Some(format!("Lanczos stopped after {k} iterations before all eigenvalues above {} converged", config.threshold))
    } else {
        None
    };
    if let Some(msg) = &diagnostic {
        log::warn!("{msg}");
    }
    if rank_limited {
        log::warn!("eigenvalue count reached r_max = {}; spectrum is truncated", config.r_max);
    }

    Ok(EigenDecomposition {
        lambdas: kept.iter().map(|&i| ritz.values[i].max(0.0)).collect(),
        vectors,
        residual_norms: kept
            .iter()
            .map(|&i| if exact { 0.0 } else { ritz.residuals[i] })
            .collect(),
        discarded,
        rank_limited,
        breakdown,
        iterations: k,
        diagnostic,
    })
}

/// Ritz pairs of the tridiagonal matrix, sorted descending.
struct RitzSet {
    values: Vec<f64>,
    residuals: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl RitzSet {
    fn new(alphas: &[f64], betas: &[f64], beta_next: f64) -> Self {
        let k = alphas.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut vectors = DMatrix::zeros(k, k);
        for (c, &i) in order.iter().enumerate() {
            vectors.set_column(c, &eig.eigenvectors.column(i));
        }
        Self {
            values: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
            residuals: order
                .iter()
                .map(|&i| beta_next * eig.eigenvectors[(k - 1, i)].abs())
                .collect(),
            vectors,
        }
    }

    fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// All Ritz values above the threshold have converged and a converged
    /// one below it (or `r_max` converged ones) closes the search.
    fn resolved(&self, config: &LanczosConfig) -> bool {
        let tol = config.eig_tol * self.max().max(1.0);
        let mut converged_above = 0;
        for (v, r) in self.values.iter().zip(&self.residuals) {
            let converged = *r <= tol;
            if *v >= config.threshold && *v > 0.0 {
                if !converged {
                    return false;
                }
                converged_above += 1;
                if converged_above >= config.r_max {
                    return true;
                }
            } else {
                return converged;
            }
        }
        false
    }
}

/// Low-rank approximation of the Gaussian (Laplace) posterior around a
/// MAP point.
#[derive(Debug, Clone)]
pub struct LowRankPosterior {
    prior: PriorModel,
    m_map: DVector<f64>,
    eig: EigenDecomposition,
    /// `λ/(λ+1)`
    d: DVector<f64>,
    /// `1/√(λ+1) − 1`
    p: DVector<f64>,
    /// `Γ_prior^{1/2}V`
    tilde_v: DMatrix<f64>,
}

impl LowRankPosterior {
    pub fn new(prior: &PriorModel, m_map: DVector<f64>, eig: EigenDecomposition) -> Result<Self> {
        let n = prior.dim();
        check_dim(n, m_map.len())?;
        check_dim(n, eig.vectors.nrows())?;
        if eig.lambdas.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::InvalidArgument("eigenvalues must be nonnegative".into()));
        }
        let r = eig.rank();
        let mut tilde_v = DMatrix::zeros(n, r);
        for k in 0..r {
            let col = prior.apply_gamma_prior_sqrt(&eig.vectors.column(k).into_owned())?;
            tilde_v.set_column(k, &col);
        }
        let d = DVector::from_iterator(r, eig.lambdas.iter().map(|l| l / (l + 1.0)));
        let p = DVector::from_iterator(r, eig.lambdas.iter().map(|l| 1.0 / (l + 1.0).sqrt() - 1.0));
        Ok(Self {
            prior: prior.clone(),
            m_map,
            eig,
            d,
            p,
            tilde_v,
        })
    }

    /// The same posterior built from the `r` leading eigenpairs only.
    pub fn truncated(&self, r: usize) -> Result<Self> {
        Self::new(&self.prior, self.m_map.clone(), self.eig.truncated(r))
    }

    pub fn prior(&self) -> &PriorModel {
        &self.prior
    }

    pub fn m_map(&self) -> &DVector<f64> {
        &self.m_map
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eig
    }

    pub fn rank(&self) -> usize {
        self.eig.rank()
    }

    pub fn tilde_v(&self) -> &DMatrix<f64> {
        &self.tilde_v
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    /// `Γ_post v = Γ_prior v − Ṽ D ṼᵀM v`
    pub fn apply_gamma_post(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let prior_part = self.prior.apply_gamma_prior(v)?;
        let mv = self.prior.mspace().apply_mass(v)?;
        let coeffs = self.tilde_v.tr_mul(&mv).component_mul(&self.d);
        Ok(prior_part - &self.tilde_v * coeffs)
    }

    /// `L n̂ = Γ_prior^{1/2}(V P VᵀM w + w)` with `w = M^{-1/2}n̂`, so that
    /// `L Lᵀ M = Γ_post` when `M^{1/2}` is exact.
    pub fn apply_sampling_factor(&self, noise: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.prior.dim(), noise.len())?;
        let ms = self.prior.mspace();
        let w = ms.sqrt_apply(noise, SqrtPower::NegHalf)?;
        let v = &self.eig.vectors;
        let coeffs = v.tr_mul(&ms.apply_mass(&w)?).component_mul(&self.p);
        self.prior.apply_gamma_prior_sqrt(&(v * coeffs + w))
    }

    /// `m_MAP + L n̂`
    pub fn sample(&self, noise: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.m_map + self.apply_sampling_factor(noise)?)
    }

    /// Posterior covariance function `c_post(x, y)`.
    pub fn covariance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        covariance_function(
            self.prior.mesh(),
            self.prior.mspace(),
            |v| self.apply_gamma_post(v),
            x,
            y,
        )
    }

    /// Pointwise variance `c_prior(x, x) − Σ_k d_k (Φ(x)ᵀṽ_k)²`, clamped at
    /// zero.
    pub fn pointwise_variance(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let prior_var = self.prior.pointwise_variance(points)?;
        let mesh = self.prior.mesh();
        let mut clamped = 0usize;
        let mut out = Vec::with_capacity(points.len());
        for (x, pv) in points.iter().zip(prior_var) {
            let phi = mesh.eval_basis(x)?;
            let mut reduction = 0.0;
            for k in 0..self.rank() {
                let t: f64 = phi
                    .nodes
                    .iter()
                    .zip(&phi.values)
                    .map(|(&j, &b)| b * self.tilde_v[(j, k)])
                    .sum();
                reduction += self.d[k] * t * t;
            }
            let var = pv - reduction;
            if var < 0.0 {
                clamped += 1;
            }
            out.push(var.max(0.0));
        }
        if clamped > 0 {
            log::warn!("{clamped} posterior variances were negative and clamped to zero");
        }
        Ok(out)
    }

    pub fn nodal_variance(&self) -> Result<Vec<f64>> {
        self.pointwise_variance(self.prior.mesh().nodes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{Mesh, ThetaSpec};

    fn mspace(n: usize) -> MSpace {
        let mesh = Mesh::uniform(&[n - 1], &[0.0], &[1.0]).unwrap();
        MSpace::from_mesh(&mesh).unwrap()
    }

    #[test]
    fn truncation_bound_sums_information() {
        assert_eq!(truncation_error_bound(&[]), 0.0);
        assert!((truncation_error_bound(&[1.0, 3.0]) - 1.25).abs() < 1e-15);
        assert_eq!(truncation_error_bound(&[-1e-14]), 0.0);
    }

    #[test]
    fn zero_operator_gives_empty_decomposition() {
        let ms = mspace(8);
        let eig = lanczos_eigs(|v| Ok(v * 0.0), &ms, &LanczosConfig::default()).unwrap();
        assert_eq!(eig.rank(), 0);
        assert!(eig.breakdown);
        assert!(eig.diagnostic.is_some());
    }

    #[test]
    fn scaled_identity_has_one_pair() {
        let ms = mspace(6);
        let eig = lanczos_eigs(|v| Ok(v * 2.5), &ms, &LanczosConfig::default()).unwrap();
        assert_eq!(eig.rank(), 1);
        assert!((eig.lambdas[0] - 2.5).abs() < 1e-12);
        let v = eig.vectors.column(0).into_owned();
        assert!((ms.inner(&v, &v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seed_determinism() {
        let ms = mspace(10);
        let weights = DVector::from_fn(10, |i, _| 1.0 / (1.0 + i as f64));
        let op = |v: &DVector<f64>| Ok(v.component_mul(&weights));
        let cfg = LanczosConfig {
            seed: 9,
            ..Default::default()
        };
        let a = lanczos_eigs(op, &ms, &cfg).unwrap();
        let b = lanczos_eigs(op, &ms, &cfg).unwrap();
        assert_eq!(a.lambdas, b.lambdas);
    }

    #[test]
    fn posterior_without_eigenpairs_is_prior() {
        let mesh = Mesh::uniform(&[10], &[0.0], &[1.0]).unwrap();
        let prior = PriorModel::new(
            &mesh,
            1.0,
            ThetaSpec::Isotropic { beta: 0.05 },
            DVector::zeros(11),
        )
        .unwrap();
        let eig = EigenDecomposition {
            lambdas: vec![],
            vectors: DMatrix::zeros(11, 0),
            residual_norms: vec![],
            discarded: vec![],
            rank_limited: false,
            breakdown: true,
            iterations: 1,
            diagnostic: None,
        };
        let post = LowRankPosterior::new(&prior, DVector::zeros(11), eig).unwrap();
        let v = DVector::from_fn(11, |i, _| (i as f64).cos());
        let diff = post.apply_gamma_post(&v).unwrap() - prior.apply_gamma_prior(&v).unwrap();
        assert_eq!(diff.amax(), 0.0);
        let pv = post.nodal_variance().unwrap();
        let prv = prior.nodal_variance().unwrap();
        assert_eq!(pv, prv);
    }
}
