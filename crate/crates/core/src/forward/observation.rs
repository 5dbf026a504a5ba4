//! Receiver observations of a time-stepped velocity field.
//!
//! The observation operator samples the velocity at receiver positions
//! (nodal-basis interpolation) at a subset of the time steps and, when a
//! Fourier truncation is configured, replaces each receiver's time series
//! by its leading real DFT coefficients.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::fem::{BasisEval, Mesh};

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSetup {
    pub receivers: Vec<f64>,
    /// Strictly increasing times in `(0, T]`; each must fall on the time
    /// step grid.
    pub sample_times: Vec<f64>,
    /// Number of retained Fourier modes per receiver; `None` keeps the raw
    /// time samples.
    pub fourier_modes: Option<usize>,
    pub noise_sigma: f64,
}

impl ObservationSetup {
    /// Uniformly spaced sample times `interval, 2·interval, …, ≤ T`.
    pub fn uniform_times(interval: f64, final_time: f64) -> Vec<f64> {
        let count = ((final_time / interval) + 1e-9).floor() as usize;
        (1..=count).map(|k| k as f64 * interval).collect()
    }

    pub fn samples_per_receiver(&self) -> usize {
        match self.fourier_modes {
            Some(modes) => 2 * modes - 1,
            None => self.sample_times.len(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.receivers.len() * self.samples_per_receiver()
    }
}

#[derive(Debug, Clone)]
pub struct ObservationOperator {
    receivers: Vec<BasisEval>,
    sample_steps: Vec<usize>,
    /// `step -> sample index`, sized `steps + 1`.
    step_lookup: Vec<Option<usize>>,
    fourier_modes: Option<usize>,
    n_nodes: usize,
}

impl ObservationOperator {
    pub fn new(mesh: &Mesh, setup: &ObservationSetup, dt: f64, steps: usize) -> Result<Self> {
        if !(setup.noise_sigma > 0.0 && setup.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise standard deviation must be positive, got {}",
                setup.noise_sigma
            )));
        }
        if setup.receivers.is_empty() || setup.sample_times.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one receiver and one sample time are required".into(),
            ));
        }
        let receivers = setup
            .receivers
            .iter()
            .map(|&x| mesh.eval_basis(&[x]))
            .collect::<Result<Vec<_>>>()?;

        let mut sample_steps = Vec::with_capacity(setup.sample_times.len());
        for &t in &setup.sample_times {
            let k = (t / dt).round();
            if (k * dt - t).abs() > 1e-8 * dt.max(t) || k < 1.0 || k as usize > steps {
                return Err(Error::Config(format!(
                    "sample time {t} is not a time step in (0, {}]",
                    steps as f64 * dt
                )));
            }
            let k = k as usize;
            if sample_steps.last().is_some_and(|&prev| prev >= k) {
                return Err(Error::Config("sample times must be strictly increasing".into()));
            }
            sample_steps.push(k);
        }

        if let Some(modes) = setup.fourier_modes {
            if modes == 0 || 2 * modes - 1 > sample_steps.len() {
                return Err(Error::Config(format!(
                    "{modes} Fourier modes need at least {} samples per receiver, have {}",
                    2 * modes.max(1) - 1,
                    sample_steps.len()
                )));
            }
        }

        let mut step_lookup = vec![None; steps + 1];
        for (s, &k) in sample_steps.iter().enumerate() {
            step_lookup[k] = Some(s);
        }
        Ok(Self {
            receivers,
            sample_steps,
            step_lookup,
            fourier_modes: setup.fourier_modes,
            n_nodes: mesh.num_nodes(),
        })
    }

    pub fn num_receivers(&self) -> usize {
        self.receivers.len()
    }

    pub fn num_samples(&self) -> usize {
        self.sample_steps.len()
    }

    pub fn sample_steps(&self) -> &[usize] {
        &self.sample_steps
    }

    pub fn obs_dim(&self) -> usize {
        let per = self.fourier_modes.map_or(self.num_samples(), |m| 2 * m - 1);
        self.num_receivers() * per
    }

    /// Sample index recorded at time step `step`, if any.
    pub fn sample_at_step(&self, step: usize) -> Option<usize> {
        self.step_lookup.get(step).copied().flatten()
    }

    /// Receiver time series, receiver-major: entry `r * samples + s`.
    pub fn seismograms(&self, velocity: &[DVector<f64>]) -> DVector<f64> {
        let ns = self.num_samples();
        let mut out = DVector::zeros(self.num_receivers() * ns);
        for (r, phi) in self.receivers.iter().enumerate() {
            for (s, &k) in self.sample_steps.iter().enumerate() {
                out[r * ns + s] = phi.dot(&velocity[k]);
            }
        }
        out
    }

    /// Full observation `B v`.
    pub fn observe(&self, velocity: &[DVector<f64>]) -> DVector<f64> {
        self.transform(&self.seismograms(velocity))
    }

    /// Applies the (optional) Fourier truncation to receiver-major series.
    pub fn transform(&self, series: &DVector<f64>) -> DVector<f64> {
        let Some(modes) = self.fourier_modes else {
            return series.clone();
        };
        let ns = self.num_samples();
        let per = 2 * modes - 1;
        let mut out = DVector::zeros(self.num_receivers() * per);
        for r in 0..self.num_receivers() {
            let trace = series.rows(r * ns, ns);
            for (slot, (k, is_sine)) in fourier_layout(modes).enumerate() {
                out[r * per + slot] = (0..ns)
                    .map(|s| fourier_weight(k, is_sine, s, ns) * trace[s])
                    .sum();
            }
        }
        out
    }

    /// Transpose of [`ObservationOperator::transform`].
    pub fn transform_transpose(&self, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.obs_dim(), coeffs.len())?;
        let Some(modes) = self.fourier_modes else {
            return Ok(coeffs.clone());
        };
        let ns = self.num_samples();
        let per = 2 * modes - 1;
        let mut out = DVector::zeros(self.num_receivers() * ns);
        for r in 0..self.num_receivers() {
            for (slot, (k, is_sine)) in fourier_layout(modes).enumerate() {
                let c = coeffs[r * per + slot];
                for s in 0..ns {
                    out[r * ns + s] += fourier_weight(k, is_sine, s, ns) * c;
                }
            }
        }
        Ok(out)
    }

    /// Adjoint source on the nodal velocity at sample `s`, given the
    /// time-domain series adjoint `series_bar`.
    pub fn velocity_source(&self, series_bar: &DVector<f64>, s: usize) -> DVector<f64> {
        let ns = self.num_samples();
        let mut out = DVector::zeros(self.n_nodes);
        for (r, phi) in self.receivers.iter().enumerate() {
            let w = series_bar[r * ns + s];
            for (&j, &b) in phi.nodes.iter().zip(&phi.values) {
                out[j] += b * w;
            }
        }
        out
    }
}

/// Coefficient order per receiver: `a₀, a₁, b₁, a₂, b₂, …`.
fn fourier_layout(modes: usize) -> impl Iterator<Item = (usize, bool)> {
    std::iter::once((0, false)).chain((1..modes).flat_map(|k| [(k, false), (k, true)]))
}

/// Orthonormal real DFT weights.
fn fourier_weight(k: usize, is_sine: bool, s: usize, ns: usize) -> f64 {
    let n = ns as f64;
    if k == 0 {
        return 1.0 / n.sqrt();
    }
    let phase = 2.0 * PI * (k * s) as f64 / n;
    let scale = (2.0 / n).sqrt();
    if is_sine {
        scale * phase.sin()
    } else {
        scale * phase.cos()
    }
}
