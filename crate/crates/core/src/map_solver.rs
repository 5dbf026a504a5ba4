//! MAP estimation by inexact Gauss–Newton–CG with Armijo backtracking.
//!
//! Each outer iteration solves `(H_misfit + Γ_prior⁻¹) p = −g` with
//! conjugate gradients in the M-inner product, preconditioned by
//! `Γ_prior`. The inner solve is truncated by the forcing term
//! `η_k = min(η_max, (‖g_k‖_M/‖g_0‖_M)^γ)` or on nonpositive curvature.

use std::fmt;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::forward::{misfit, misfit_gn_hessian_action, misfit_gradient, ForwardModel};
use crate::prior::PriorModel;

/// Curvature below this fraction of `(d, d)_M` truncates CG.
const CURVATURE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct MapSolverConfig {
    /// Stop when `‖g‖_M ≤ grad_tol_rel · ‖g_0‖_M`.
    pub grad_tol_rel: f64,
    pub max_newton_iters: usize,
    pub max_cg_iters: usize,
    /// Exponent γ in the forcing term.
    pub forcing_exponent: f64,
    /// Cap η_max on the forcing term.
    pub forcing_max: f64,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
}

impl Default for MapSolverConfig {
    fn default() -> Self {
        Self {
            grad_tol_rel: 1e-6,
            max_newton_iters: 50,
            max_cg_iters: 200,
            forcing_exponent: 0.5,
            forcing_max: 0.5,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 30,
        }
    }
}

impl MapSolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grad_tol_rel", self.grad_tol_rel),
            ("forcing_exponent", self.forcing_exponent),
            ("forcing_max", self.forcing_max),
            ("armijo_c1", self.armijo_c1),
        ];
        for (name, val) in positive {
            if !(val > 0.0 && val.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {val}")));
            }
        }
        if self.max_newton_iters == 0 || self.max_cg_iters == 0 || self.max_backtracks == 0 {
            return Err(Error::InvalidArgument(
                "iteration limits must be positive".into(),
            ));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "backtrack_factor must lie in (0, 1), got {}",
                self.backtrack_factor
            )));
        }
        if self.armijo_c1 >= 1.0 {
            return Err(Error::InvalidArgument("armijo_c1 must be below 1".into()));
        }
        Ok(())
    }
}

/// One accepted Newton step.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub objective: f64,
    pub gradnorm: f64,
    pub cg_iters: usize,
    pub step_length: f64,
}

impl fmt::Display for IterationLog {
    /// `iteration\tobjective\tgradnorm\tcg_iters\tstep_length`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{:.16e}\t{:.16e}\t{}\t{:.16e}",
            self.iteration, self.objective, self.gradnorm, self.cg_iters, self.step_length
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Debug, Clone)]
pub struct MapResult {
    pub m_map: DVector<f64>,
    pub converged: bool,
    pub termination: Termination,
    pub newton_iters: usize,
    pub cg_iters_total: usize,
    /// Objective at the initial point followed by each accepted iterate.
    pub objective_history: Vec<f64>,
    /// M-norms of the gradient, aligned with `objective_history`.
    pub gradnorm_history: Vec<f64>,
    pub log: Vec<IterationLog>,
}

impl MapResult {
    /// `‖g_final‖_M / ‖g_0‖_M`, zero when the initial gradient vanished.
    pub fn gradnorm_reduction(&self) -> f64 {
        let first = self.gradnorm_history[0];
        let last = *self.gradnorm_history.last().unwrap_or(&first);
        if first == 0.0 {
            0.0
        } else {
            last / first
        }
    }
}

/// Negative log posterior
/// `½‖f(m) − y_obs‖²_{Γ_noise⁻¹} + ½‖A(m − m₀)‖²_M`.
pub fn objective<F: ForwardModel>(
    prior: &PriorModel,
    model: &F,
    y_obs: &DVector<f64>,
    m: &DVector<f64>,
) -> Result<f64> {
    let lin = model.linearize(m)?;
    objective_at(prior, model, &lin, y_obs, m)
}

fn objective_at<F: ForwardModel>(
    prior: &PriorModel,
    model: &F,
    lin: &F::Linearization,
    y_obs: &DVector<f64>,
    m: &DVector<f64>,
) -> Result<f64> {
    Ok(misfit(model, lin, y_obs)? - prior.log_density_unnormalized(m)?)
}

/// M-gradient of the negative log posterior:
/// `F*Γ_noise⁻¹(f(m) − y_obs) + Γ_prior⁻¹(m − m₀)`.
pub fn gradient<F: ForwardModel>(
    prior: &PriorModel,
    model: &F,
    y_obs: &DVector<f64>,
    m: &DVector<f64>,
) -> Result<DVector<f64>> {
    let lin = model.linearize(m)?;
    gradient_at(prior, model, &lin, y_obs, m)
}

fn gradient_at<F: ForwardModel>(
    prior: &PriorModel,
    model: &F,
    lin: &F::Linearization,
    y_obs: &DVector<f64>,
    m: &DVector<f64>,
) -> Result<DVector<f64>> {
    let data = misfit_gradient(model, lin, prior.mspace(), y_obs)?;
    Ok(data + prior.apply_gamma_prior_inv(&(m - prior.mean()))?)
}

struct CgOutcome {
    step: DVector<f64>,
    iterations: usize,
}

/// Prior-preconditioned CG on `(H_misfit + Γ_prior⁻¹) p = −g` in the
/// M-inner product.
fn gauss_newton_cg<F: ForwardModel>(
    prior: &PriorModel,
    model: &F,
    lin: &F::Linearization,
    grad: &DVector<f64>,
    rel_tol: f64,
    max_iters: usize,
) -> Result<CgOutcome> {
    let ms = prior.mspace();
    let hessian = |d: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(misfit_gn_hessian_action(model, lin, ms, d)? + prior.apply_gamma_prior_inv(d)?)
    };

    let mut step = DVector::zeros(grad.len());
    let mut r = -grad;
    let target = rel_tol * ms.norm(grad)?;
    let mut z = prior.apply_gamma_prior(&r)?;
    let mut d = z.clone();
    let mut rz = ms.inner(&r, &z)?;

    for iter in 0..max_iters {
        let hd = hessian(&d)?;
        let curvature = ms.inner(&d, &hd)?;
        if curvature <= CURVATURE_TOL * ms.inner(&d, &d)? {
            if iter == 0 {
                // preconditioned steepest descent
                step = d;
            }
            return Ok(CgOutcome {
                step,
                iterations: iter + 1,
            });
        }
        let alpha = rz / curvature;
        step.axpy(alpha, &d, 1.0);
        r.axpy(-alpha, &hd, 1.0);
        if ms.norm(&r)? <= target {
            return Ok(CgOutcome {
                step,
                iterations: iter + 1,
            });
        }
        z = prior.apply_gamma_prior(&r)?;
        let rz_next = ms.inner(&r, &z)?;
        d *= rz_next / rz;
        d += &z;
        rz = rz_next;
    }
    Ok(CgOutcome {
        step,
        iterations: max_iters,
    })
}

/// Minimizes the negative log posterior from `m_init`.
///
/// Fails only if `m_init` itself cannot be evaluated. Line-search failure
/// and iteration limits return the best iterate with `converged = false`.
pub fn find_map<F: ForwardModel>(
    prior: &PriorModel,
    model: &F,
    y_obs: &DVector<f64>,
    m_init: &DVector<f64>,
    config: &MapSolverConfig,
) -> Result<MapResult> {
    config.validate()?;
    let ms = prior.mspace();
    let mut m = m_init.clone();
    let mut lin = model.linearize(&m)?;
    let mut obj = objective_at(prior, model, &lin, y_obs, &m)?;
    let mut grad = gradient_at(prior, model, &lin, y_obs, &m)?;
    let mut gnorm = ms.norm(&grad)?;
    let g0 = gnorm;

    let mut result = MapResult {
        m_map: m.clone(),
        converged: false,
        termination: Termination::MaxIterations,
        newton_iters: 0,
        cg_iters_total: 0,
        objective_history: vec![obj],
        gradnorm_history: vec![gnorm],
        log: Vec::new(),
    };

    for iter in 0..config.max_newton_iters {
        if gnorm == 0.0 || gnorm <= config.grad_tol_rel * g0 {
            result.converged = true;
            result.termination = Termination::GradientTolerance;
            break;
        }
        let forcing = config
            .forcing_max
            .min((gnorm / g0).powf(config.forcing_exponent));
        let cg = gauss_newton_cg(prior, model, &lin, &grad, forcing, config.max_cg_iters)?;
        result.cg_iters_total += cg.iterations;

        let mut step = cg.step;
        let mut slope = ms.inner(&grad, &step)?;
        if !(slope < 0.0) {
            step = -prior.apply_gamma_prior(&grad)?;
            slope = ms.inner(&grad, &step)?;
        }

        let mut accepted = None;
        let mut length = 1.0;
        for _ in 0..config.max_backtracks {
            let trial = &m + &step * length;
            match model.linearize(&trial) {
                Ok(trial_lin) => {
                    let trial_obj = objective_at(prior, model, &trial_lin, y_obs, &trial)?;
                    if trial_obj <= obj + config.armijo_c1 * length * slope && trial_obj < obj {
                        accepted = Some((trial, trial_lin, trial_obj));
                        break;
                    }
                }
                Err(err) if err.is_parameter_dependent() => {}
                Err(err) => return Err(err),
            }
            length *= config.backtrack_factor;
        }

        let Some((trial, trial_lin, trial_obj)) = accepted else {
            log::warn!("line search failed at Newton iteration {iter}");
            result.termination = Termination::LineSearchFailure;
            break;
        };
        m = trial;
        lin = trial_lin;
        obj = trial_obj;
        grad = gradient_at(prior, model, &lin, y_obs, &m)?;
        gnorm = ms.norm(&grad)?;

        result.newton_iters = iter + 1;
        result.objective_history.push(obj);
        result.gradnorm_history.push(gnorm);
        let entry = IterationLog {
            iteration: iter + 1,
            objective: obj,
            gradnorm: gnorm,
            cg_iters: cg.iterations,
            step_length: length,
        };
        log::info!("{entry}");
        result.log.push(entry);
    }

    if !result.converged
        && result.termination == Termination::MaxIterations
        && (gnorm == 0.0 || gnorm <= config.grad_tol_rel * g0)
    {
        result.converged = true;
        result.termination = Termination::GradientTolerance;
    }
    result.m_map = m;
    Ok(result)
}
