//! One-dimensional first-order acoustic wave propagation
//!
//! ```text
//! ρ ∂v/∂t − ∂(ρc²e)/∂x = g,     ∂e/∂t − ∂v/∂x = 0,     e = 0 on ∂Ω
//! ```
//!
//! discretized with continuous linear elements, lumped mass and classical
//! RK4, and parameterized by the nodal wavespeed `c`. With
//! `C_ij = ∫ φ_j' φ_i` and lumped mass `W` the semi-discrete system is
//!
//! ```text
//! Wρ v̇ = −Cᵀ(ρc² e) + W g,      W ė = P C v
//! ```
//!
//! where `P` zeroes the Dirichlet rows of `e`. It conserves
//! `½vᵀWρv + ½eᵀWρc²e`.
//!
//! The adjoint and incremental solvers are the exact transposes and
//! tangents of the discrete time stepper, so gradients and Gauss–Newton
//! Hessian actions agree with finite differences of the discrete map to
//! round-off.

use nalgebra::DVector;

use super::observation::{ObservationOperator, ObservationSetup};
use super::ForwardModel;
use crate::error::{check_dim, Error, Result};
use crate::fem::Mesh;

/// Upper bound accepted for the configured Courant number.
pub const MAX_CFL: f64 = 0.5;

/// Field growth factor beyond which a solve is declared unstable.
const GROWTH_LIMIT: f64 = 1e6;

/// Smoothed point source `a · exp(−(x−x_s)²/2w²) · exp(−(t−t₀)²/2s²)`
/// acting on the momentum equation.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub location: f64,
    pub width: f64,
    pub time_center: f64,
    pub time_std: f64,
    pub amplitude: f64,
}

impl SourceSpec {
    pub fn spatial(&self, x: f64) -> f64 {
        (-0.5 * ((x - self.location) / self.width).powi(2)).exp()
    }

    pub fn temporal(&self, t: f64) -> f64 {
        self.amplitude * (-0.5 * ((t - self.time_center) / self.time_std).powi(2)).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveConfig {
    /// Nodal density; `None` means `ρ ≡ 1`.
    pub rho: Option<DVector<f64>>,
    pub final_time: f64,
    pub dt: f64,
    /// Maximum Courant number `dt·max(c)/h` accepted at solve time.
    pub cfl: f64,
    pub source: SourceSpec,
}

/// Nodal velocity `v` and dilatation `e` at every time step `0..=steps`.
/// For adjoint solves the same layout holds the adjoint velocity `w` and
/// adjoint dilatation `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateHistory {
    pub dt: f64,
    pub v: Vec<DVector<f64>>,
    pub e: Vec<DVector<f64>>,
}

impl StateHistory {
    fn zeros(n: usize, steps: usize, dt: f64) -> Self {
        Self {
            dt,
            v: vec![DVector::zeros(n); steps + 1],
            e: vec![DVector::zeros(n); steps + 1],
        }
    }

    pub fn steps(&self) -> usize {
        self.v.len() - 1
    }

    pub fn max_abs(&self) -> f64 {
        self.v
            .iter()
            .chain(&self.e)
            .map(|x| x.amax())
            .fold(0.0, f64::max)
    }
}

/// Forward wavefield at a parameter point together with the dilatation at
/// each RK stage, which the tangent and adjoint sweeps reuse.
#[derive(Debug, Clone)]
pub struct WaveLinearization {
    c: DVector<f64>,
    history: StateHistory,
    stage_e: Vec<[DVector<f64>; 4]>,
    predicted: DVector<f64>,
}

impl WaveLinearization {
    pub fn wavespeed(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn history(&self) -> &StateHistory {
        &self.history
    }
}

/// Result of a reverse sweep: adjoint fields and the Euclidean
/// sensitivity `Fᵀ·dy` with respect to the nodal wavespeed.
#[derive(Debug, Clone)]
pub struct AdjointSolution {
    pub history: StateHistory,
    pub sensitivity: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct WaveModel {
    mesh: Mesh,
    config: WaveConfig,
    setup: ObservationSetup,
    obs: ObservationOperator,
    steps: usize,
    rho: DVector<f64>,
    lumped: DVector<f64>,
    lumped_rho: DVector<f64>,
    /// `g(x_i)/ρ_i` before the temporal factor.
    source_profile: DVector<f64>,
    interior: Vec<bool>,
}

/// Tracks a stability reference from the accumulated drivers.
struct GrowthGuard {
    reference: f64,
}

impl GrowthGuard {
    fn new() -> Self {
        Self { reference: 0.0 }
    }

    fn add(&mut self, driver: f64) {
        self.reference += driver;
    }

    fn check(&self, step: usize, v: &DVector<f64>, e: &DVector<f64>) -> Result<()> {
        let size = v.amax().max(e.amax());
        if !size.is_finite() || size > GROWTH_LIMIT * self.reference.max(f64::MIN_POSITIVE) {
            return Err(Error::Stability { step });
        }
        Ok(())
    }
}

impl WaveModel {
    pub fn new(mesh: &Mesh, config: WaveConfig, setup: ObservationSetup) -> Result<Self> {
        if mesh.dim() != 1 {
            return Err(Error::InvalidArgument("the wave model needs a 1D mesh".into()));
        }
        let n = mesh.num_nodes();
        if !(config.dt > 0.0 && config.final_time > 0.0) {
            return Err(Error::Config("time step and final time must be positive".into()));
        }
        let ratio = config.final_time / config.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) || steps < 1.0 {
            return Err(Error::Config(format!(
                "final time {} is not an integer multiple of dt {}",
                config.final_time, config.dt
            )));
        }
        let steps = steps as usize;
        if !(config.cfl > 0.0 && config.cfl <= MAX_CFL) {
            return Err(Error::Config(format!(
                "Courant number must lie in (0, {MAX_CFL}], got {}",
                config.cfl
            )));
        }
        let src = &config.source;
        if !(src.width > 0.0 && src.time_std > 0.0 && src.amplitude.is_finite()) {
            return Err(Error::Config("source width and duration must be positive".into()));
        }
        let rho = config
            .rho
            .clone()
            .unwrap_or_else(|| DVector::from_element(n, 1.0));
        check_dim(n, rho.len())?;
        if rho.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::InvalidArgument("density must be positive".into()));
        }

        let mut lumped = DVector::zeros(n);
        for el in mesh.elements() {
            let h = (mesh.node(el[1])[0] - mesh.node(el[0])[0]).abs();
            lumped[el[0]] += 0.5 * h;
            lumped[el[1]] += 0.5 * h;
        }
        let lumped_rho = lumped.component_mul(&rho);
        let source_profile = DVector::from_fn(n, |i, _| src.spatial(mesh.node(i)[0]) / rho[i]);
        let interior = (0..n).map(|i| !mesh.is_boundary_node(i)).collect();
        let obs = ObservationOperator::new(mesh, &setup, config.dt, steps)?;

        Ok(Self {
            mesh: mesh.clone(),
            config,
            setup,
            obs,
            steps,
            rho,
            lumped,
            lumped_rho,
            source_profile,
            interior,
        })
    }

    /// The same physical setup on a mesh with `factor`× the elements and a
    /// time step `factor`× smaller.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let counts: Vec<usize> = self.mesh.counts().iter().map(|c| c * factor).collect();
        let fine = Mesh::uniform(&counts, self.mesh.lower(), self.mesh.upper())?;
        let rho = DVector::from_fn(fine.num_nodes(), |i, _| {
            self.mesh
                .interpolate(&self.rho, fine.node(i))
                .expect("refined nodes lie inside the coarse domain")
        });
        let config = WaveConfig {
            rho: Some(rho),
            dt: self.config.dt / factor as f64,
            ..self.config.clone()
        };
        Self::new(&fine, config, self.setup.clone())
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn config(&self) -> &WaveConfig {
        &self.config
    }

    pub fn observation_setup(&self) -> &ObservationSetup {
        &self.setup
    }

    pub fn observation(&self) -> &ObservationOperator {
        &self.obs
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    /// Physical times of the recorded samples.
    pub fn sample_times(&self) -> Vec<f64> {
        self.obs
            .sample_steps()
            .iter()
            .map(|&k| k as f64 * self.config.dt)
            .collect()
    }

    fn n(&self) -> usize {
        self.mesh.num_nodes()
    }

    /// `C v` with `C_ij = ∫ φ_j' φ_i`.
    fn conv(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n());
        for el in self.mesh.elements() {
            let half_jump = 0.5 * (v[el[1]] - v[el[0]]);
            out[el[0]] += half_jump;
            out[el[1]] += half_jump;
        }
        out
    }

    /// `Cᵀ s`
    fn conv_t(&self, s: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n());
        for el in self.mesh.elements() {
            let half_sum = 0.5 * (s[el[0]] + s[el[1]]);
            out[el[0]] -= half_sum;
            out[el[1]] += half_sum;
        }
        out
    }

    fn project_interior(&self, mut e: DVector<f64>) -> DVector<f64> {
        for (val, &keep) in e.iter_mut().zip(&self.interior) {
            if !keep {
                *val = 0.0;
            }
        }
        e
    }

    /// Semi-discrete right-hand side without the source, `A(c)·(v, e)`.
    fn rhs(&self, coef: &DVector<f64>, v: &DVector<f64>, e: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let dv = -self.conv_t(&coef.component_mul(e)).component_div(&self.lumped_rho);
        let de = self.project_interior(self.conv(v).component_div(&self.lumped));
        (dv, de)
    }

    /// `A(c)ᵀ·(v̄, ē)`
    fn rhs_t(&self, coef: &DVector<f64>, vbar: &DVector<f64>, ebar: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let out_v = self.conv_t(&self.project_interior(ebar.clone()).component_div(&self.lumped));
        let out_e = -coef.component_mul(&self.conv(&vbar.component_div(&self.lumped_rho)));
        (out_v, out_e)
    }

    /// Derivative of the right-hand side with respect to `c` at stage
    /// dilatation `e_z`, applied to `c̃`. Only the velocity row is nonzero.
    fn rhs_dc(&self, c: &DVector<f64>, e_z: &DVector<f64>, c_tilde: &DVector<f64>) -> DVector<f64> {
        let s = DVector::from_fn(self.n(), |i, _| 2.0 * self.rho[i] * c[i] * c_tilde[i] * e_z[i]);
        -self.conv_t(&s).component_div(&self.lumped_rho)
    }

    /// Transpose of [`WaveModel::rhs_dc`] applied to a velocity-row adjoint.
    fn rhs_dc_t(&self, c: &DVector<f64>, e_z: &DVector<f64>, vbar: &DVector<f64>) -> DVector<f64> {
        let back = self.conv(&vbar.component_div(&self.lumped_rho));
        DVector::from_fn(self.n(), |i, _| -2.0 * self.rho[i] * c[i] * e_z[i] * back[i])
    }

    fn coefficient(&self, c: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| self.rho[i] * c[i] * c[i])
    }

    /// Rejects wavespeeds that are nonpositive or violate the Courant limit.
    pub fn check_wavespeed(&self, c: &DVector<f64>) -> Result<()> {
        check_dim(self.n(), c.len())?;
        if let Some(i) = c.iter().position(|&ci| !(ci > 0.0 && ci.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "wavespeed at node {i} is {}, must be positive",
                c[i]
            )));
        }
        let h = self.mesh.spacing()[0];
        let courant = self.config.dt * c.max() / h;
        if courant > self.config.cfl * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "Courant number {courant:.4} exceeds the configured limit {}",
                self.config.cfl
            )));
        }
        Ok(())
    }

    /// Discrete energy `½Σ Wρv² + ½Σ Wρc²e²`.
    pub fn energy(&self, c: &DVector<f64>, v: &DVector<f64>, e: &DVector<f64>) -> f64 {
        let coef = self.coefficient(c);
        0.5 * (0..self.n())
            .map(|i| self.lumped_rho[i] * v[i] * v[i] + self.lumped[i] * coef[i] * e[i] * e[i])
            .sum::<f64>()
    }

    /// Forward solve from zero initial conditions.
    pub fn solve_forward(&self, c: &DVector<f64>) -> Result<WaveLinearization> {
        self.check_wavespeed(c)?;
        let n = self.n();
        let dt = self.config.dt;
        let coef = self.coefficient(c);
        let mut hist = StateHistory::zeros(n, self.steps, dt);
        let mut stage_e = Vec::with_capacity(self.steps);
        let mut guard = GrowthGuard::new();
        let mut v = DVector::zeros(n);
        let mut e = DVector::zeros(n);

        for k in 0..self.steps {
            let t = k as f64 * dt;
            let (s0, s_half, s1) = (
                self.config.source.temporal(t),
                self.config.source.temporal(t + 0.5 * dt),
                self.config.source.temporal(t + dt),
            );
            guard.add(dt * s0.abs().max(s_half.abs()).max(s1.abs()) * self.source_profile.amax());

            let e1 = e.clone();
            let (mut k1v, k1e) = self.rhs(&coef, &v, &e);
            k1v.axpy(s0, &self.source_profile, 1.0);
            let v2 = &v + &k1v * (0.5 * dt);
            let e2 = &e + &k1e * (0.5 * dt);
            let (mut k2v, k2e) = self.rhs(&coef, &v2, &e2);
            k2v.axpy(s_half, &self.source_profile, 1.0);
            let v3 = &v + &k2v * (0.5 * dt);
            let e3 = &e + &k2e * (0.5 * dt);
            let (mut k3v, k3e) = self.rhs(&coef, &v3, &e3);
            k3v.axpy(s_half, &self.source_profile, 1.0);
            let v4 = &v + &k3v * dt;
            let e4 = &e + &k3e * dt;
            let (mut k4v, k4e) = self.rhs(&coef, &v4, &e4);
            k4v.axpy(s1, &self.source_profile, 1.0);

            v += (k1v + (k2v + k3v) * 2.0 + k4v) * (dt / 6.0);
            e += (k1e + (k2e + k3e) * 2.0 + k4e) * (dt / 6.0);
            stage_e.push([e1, e2, e3, e4]);
            guard.check(k + 1, &v, &e)?;
            hist.v[k + 1] = v.clone();
            hist.e[k + 1] = e.clone();
        }

        let predicted = self.obs.observe(&hist.v);
        Ok(WaveLinearization {
            c: c.clone(),
            history: hist,
            stage_e,
            predicted,
        })
    }

    /// Tangent-linear (incremental forward) solve in direction `c̃`.
    pub fn solve_incremental_forward(
        &self,
        lin: &WaveLinearization,
        c_tilde: &DVector<f64>,
    ) -> Result<StateHistory> {
        check_dim(self.n(), c_tilde.len())?;
        let n = self.n();
        let dt = self.config.dt;
        let c = &lin.c;
        let coef = self.coefficient(c);
        let mut hist = StateHistory::zeros(n, self.steps, dt);
        let mut guard = GrowthGuard::new();
        let mut v = DVector::zeros(n);
        let mut e = DVector::zeros(n);

        for k in 0..self.steps {
            let stages = &lin.stage_e[k];
            let src: Vec<DVector<f64>> = stages.iter().map(|ez| self.rhs_dc(c, ez, c_tilde)).collect();
            guard.add(dt * src.iter().map(|s| s.amax()).fold(0.0, f64::max));

            let (mut k1v, k1e) = self.rhs(&coef, &v, &e);
            k1v += &src[0];
            let (mut k2v, k2e) = self.rhs(&coef, &(&v + &k1v * (0.5 * dt)), &(&e + &k1e * (0.5 * dt)));
            k2v += &src[1];
            let (mut k3v, k3e) = self.rhs(&coef, &(&v + &k2v * (0.5 * dt)), &(&e + &k2e * (0.5 * dt)));
            k3v += &src[2];
            let (mut k4v, k4e) = self.rhs(&coef, &(&v + &k3v * dt), &(&e + &k3e * dt));
            k4v += &src[3];

            v += (k1v + (k2v + k3v) * 2.0 + k4v) * (dt / 6.0);
            e += (k1e + (k2e + k3e) * 2.0 + k4e) * (dt / 6.0);
            guard.check(k + 1, &v, &e)?;
            hist.v[k + 1] = v.clone();
            hist.e[k + 1] = e.clone();
        }
        Ok(hist)
    }

    /// Reverse sweep driven by an observation-space vector `dy`: returns
    /// the adjoint wavefield and `Fᵀ·dy`. With `dy = Γ_noise⁻¹(f(c) − y_obs)`
    /// the sensitivity is the Euclidean gradient of the data misfit.
    pub fn solve_adjoint(&self, lin: &WaveLinearization, dy: &DVector<f64>) -> Result<AdjointSolution> {
        let series_bar = self.obs.transform_transpose(dy)?;
        let n = self.n();
        let dt = self.config.dt;
        let c = &lin.c;
        let coef = self.coefficient(c);
        let mut hist = StateHistory::zeros(n, self.steps, dt);
        let mut sens = DVector::zeros(n);
        let mut guard = GrowthGuard::new();
        let mut vbar = DVector::zeros(n);
        let mut ebar = DVector::zeros(n);

        for k in (1..=self.steps).rev() {
            if let Some(s) = self.obs.sample_at_step(k) {
                let inj = self.obs.velocity_source(&series_bar, s);
                guard.add(inj.amax());
                vbar += inj;
            }
            guard.check(k, &vbar, &ebar)?;
            hist.v[k] = vbar.clone();
            hist.e[k] = ebar.clone();

            let stages = &lin.stage_e[k - 1];
            let w = dt / 6.0;
            let (mut k1v, mut k1e) = (&vbar * w, &ebar * w);
            let (mut k2v, mut k2e) = (&vbar * (2.0 * w), &ebar * (2.0 * w));
            let (mut k3v, mut k3e) = (&vbar * (2.0 * w), &ebar * (2.0 * w));
            let (k4v, k4e) = (&vbar * w, &ebar * w);

            let (z4v, z4e) = self.rhs_t(&coef, &k4v, &k4e);
            sens += self.rhs_dc_t(c, &stages[3], &k4v);
            k3v.axpy(dt, &z4v, 1.0);
            k3e.axpy(dt, &z4e, 1.0);

            let (z3v, z3e) = self.rhs_t(&coef, &k3v, &k3e);
            sens += self.rhs_dc_t(c, &stages[2], &k3v);
            k2v.axpy(0.5 * dt, &z3v, 1.0);
            k2e.axpy(0.5 * dt, &z3e, 1.0);

            let (z2v, z2e) = self.rhs_t(&coef, &k2v, &k2e);
            sens += self.rhs_dc_t(c, &stages[1], &k2v);
            k1v.axpy(0.5 * dt, &z2v, 1.0);
            k1e.axpy(0.5 * dt, &z2e, 1.0);

            let (z1v, z1e) = self.rhs_t(&coef, &k1v, &k1e);
            sens += self.rhs_dc_t(c, &stages[0], &k1v);

            vbar += z4v + z3v + z2v + z1v;
            ebar += z4e + z3e + z2e + z1e;
        }
        hist.v[0] = vbar;
        hist.e[0] = ebar;
        Ok(AdjointSolution {
            history: hist,
            sensitivity: sens,
        })
    }

    /// Gauss–Newton incremental adjoint: the reverse sweep driven by
    /// `Γ_noise⁻¹ B ṽ`, with the second-order adjoint terms dropped.
    pub fn solve_incremental_adjoint(
        &self,
        lin: &WaveLinearization,
        incremental: &StateHistory,
    ) -> Result<AdjointSolution> {
        let dy = self.obs.observe(&incremental.v) / self.setup.noise_sigma.powi(2);
        self.solve_adjoint(lin, &dy)
    }

    /// Receiver-major velocity traces at the sample times (before any
    /// Fourier truncation).
    pub fn seismograms(&self, history: &StateHistory) -> DVector<f64> {
        self.obs.seismograms(&history.v)
    }
}

impl ForwardModel for WaveModel {
    type Linearization = WaveLinearization;

    fn param_dim(&self) -> usize {
        self.n()
    }

    fn obs_dim(&self) -> usize {
        self.obs.obs_dim()
    }

    fn noise_sigma(&self) -> f64 {
        self.setup.noise_sigma
    }

    fn linearize(&self, m: &DVector<f64>) -> Result<WaveLinearization> {
        self.solve_forward(m)
    }

    fn predicted<'a>(&self, lin: &'a WaveLinearization) -> &'a DVector<f64> {
        &lin.predicted
    }

    fn jacobian_apply(&self, lin: &WaveLinearization, dm: &DVector<f64>) -> Result<DVector<f64>> {
        let inc = self.solve_incremental_forward(lin, dm)?;
        Ok(self.obs.observe(&inc.v))
    }

    fn jacobian_transpose_apply(&self, lin: &WaveLinearization, dy: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.solve_adjoint(lin, dy)?.sensitivity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(n_el: usize, amplitude: f64) -> WaveModel {
        let mesh = Mesh::uniform(&[n_el], &[0.0], &[1.0]).unwrap();
        let config = WaveConfig {
            rho: None,
            final_time: 0.4,
            dt: 0.004,
            cfl: 0.5,
            source: SourceSpec {
                location: 0.3,
                width: 0.03,
                time_center: 0.08,
                time_std: 0.02,
                amplitude,
            },
        };
        let setup = ObservationSetup {
            receivers: vec![0.6],
            sample_times: ObservationSetup::uniform_times(0.02, 0.4),
            fourier_modes: None,
            noise_sigma: 0.01,
        };
        WaveModel::new(&mesh, config, setup).unwrap()
    }

    #[test]
    fn zero_source_gives_zero_history() {
        let m = model(50, 0.0);
        let lin = m.solve_forward(&DVector::from_element(51, 1.0)).unwrap();
        assert_eq!(lin.history().max_abs(), 0.0);
        assert_eq!(m.predicted(&lin).amax(), 0.0);
        let inc = m
            .solve_incremental_forward(&lin, &DVector::from_element(51, 0.1))
            .unwrap();
        assert_eq!(inc.max_abs(), 0.0);
        let adj = m.solve_adjoint(&lin, &DVector::zeros(m.obs_dim())).unwrap();
        assert_eq!(adj.history.max_abs(), 0.0);
    }

    #[test]
    fn rejects_nonpositive_wavespeed_and_cfl() {
        let m = model(50, 1.0);
        let mut c = DVector::from_element(51, 1.0);
        c[7] = -0.1;
        assert!(matches!(m.solve_forward(&c), Err(Error::InvalidParameter(_))));
        let fast = DVector::from_element(51, 10.0);
        assert!(matches!(m.solve_forward(&fast), Err(Error::Config(_))));
    }

    #[test]
    fn boundary_dilatation_stays_zero() {
        let m = model(40, 1.0);
        let lin = m.solve_forward(&DVector::from_element(41, 1.0)).unwrap();
        for e in &lin.history().e {
            assert_eq!(e[0], 0.0);
            assert_eq!(e[40], 0.0);
        }
    }

    #[test]
    fn config_validation() {
        let mesh = Mesh::uniform(&[10], &[0.0], &[1.0]).unwrap();
        let base = model(10, 1.0);
        let mut cfg = base.config().clone();
        cfg.dt = 0.003; // 0.4 / 0.003 is not integral
        assert!(WaveModel::new(&mesh, cfg, base.observation_setup().clone()).is_err());
        let mut cfg = base.config().clone();
        cfg.cfl = 0.8;
        assert!(WaveModel::new(&mesh, cfg, base.observation_setup().clone()).is_err());
    }

    #[test]
    fn refinement_keeps_observation_dimension() {
        let m = model(20, 1.0);
        let fine = m.refined(2).unwrap();
        assert_eq!(fine.mesh().num_nodes(), 41);
        assert_eq!(fine.steps(), 2 * m.steps());
        assert_eq!(fine.obs_dim(), m.obs_dim());
        assert_eq!(fine.sample_times().len(), m.sample_times().len());
    }
}
