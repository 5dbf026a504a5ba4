//! Prior, forward model and synthetic truth assembled from a config.

use linbayes::fem::Mesh;
use linbayes::forward::{
    synthesize_data, ForwardModel, LinearMapModel, ObservationSetup, SourceSpec, WaveConfig,
    WaveLinearization, WaveModel,
};
use linbayes::prior::PriorModel;
use linbayes::rng::seeded;
use linbayes::{Error, Result};
use nalgebra::DVector;

use crate::config::{ModelSpec, PipelineConfig, WaveSpec};
use crate::error::{CliError, CliResult};

/// Either supported forward model behind one `ForwardModel` impl.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Linear(LinearMapModel),
    Wave(WaveModel),
}

pub enum AnyLinearization {
    Linear(DVector<f64>),
    Wave(WaveLinearization),
}

fn mismatch() -> Error {
    Error::InvalidArgument("linearization belongs to a different model".into())
}

impl ForwardModel for AnyModel {
    type Linearization = AnyLinearization;

    fn param_dim(&self) -> usize {
        match self {
            AnyModel::Linear(m) => m.param_dim(),
            AnyModel::Wave(m) => m.param_dim(),
        }
    }

    fn obs_dim(&self) -> usize {
        match self {
            AnyModel::Linear(m) => m.obs_dim(),
            AnyModel::Wave(m) => m.obs_dim(),
        }
    }

    fn noise_sigma(&self) -> f64 {
        match self {
            AnyModel::Linear(m) => m.noise_sigma(),
            AnyModel::Wave(m) => m.noise_sigma(),
        }
    }

    fn linearize(&self, m: &DVector<f64>) -> Result<AnyLinearization> {
        match self {
            AnyModel::Linear(model) => model.linearize(m).map(AnyLinearization::Linear),
            AnyModel::Wave(model) => model.linearize(m).map(AnyLinearization::Wave),
        }
    }

    fn predicted<'a>(&self, lin: &'a AnyLinearization) -> &'a DVector<f64> {
        match (self, lin) {
            (AnyModel::Linear(m), AnyLinearization::Linear(l)) => m.predicted(l),
            (AnyModel::Wave(m), AnyLinearization::Wave(l)) => m.predicted(l),
            _ => panic!("linearization belongs to a different model"),
        }
    }

    fn jacobian_apply(&self, lin: &AnyLinearization, dm: &DVector<f64>) -> Result<DVector<f64>> {
        match (self, lin) {
            (AnyModel::Linear(m), AnyLinearization::Linear(l)) => m.jacobian_apply(l, dm),
            (AnyModel::Wave(m), AnyLinearization::Wave(l)) => m.jacobian_apply(l, dm),
            _ => Err(mismatch()),
        }
    }

    fn jacobian_transpose_apply(&self, lin: &AnyLinearization, dy: &DVector<f64>) -> Result<DVector<f64>> {
        match (self, lin) {
            (AnyModel::Linear(m), AnyLinearization::Linear(l)) => m.jacobian_transpose_apply(l, dy),
            (AnyModel::Wave(m), AnyLinearization::Wave(l)) => m.jacobian_transpose_apply(l, dy),
            _ => Err(mismatch()),
        }
    }
}

/// Everything the pipeline stages share.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub prior: PriorModel,
    pub model: AnyModel,
    /// Truth on the inversion mesh.
    pub truth: DVector<f64>,
    /// Model and truth used to synthesize data when they differ from the
    /// inversion ones.
    truth_model: Option<(WaveModel, DVector<f64>)>,
}

fn setup_error(section: &str, e: Error) -> CliError {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::OutsideDomain(_) | Error::DimensionMismatch { .. } => {
            CliError::config(section, e.to_string())
        }
        other => CliError::model("setup", other),
    }
}

pub fn wave_model(mesh: &Mesh, spec: &WaveSpec) -> Result<WaveModel> {
    let config = WaveConfig {
        rho: None,
        final_time: spec.final_time,
        dt: spec.dt,
        cfl: spec.cfl,
        source: SourceSpec {
            location: spec.source.location,
            width: spec.source.width,
            time_center: spec.source.time_center,
            time_std: spec.source.time_std,
            amplitude: spec.source.amplitude,
        },
    };
    let setup = ObservationSetup {
        receivers: spec.receivers.clone(),
        sample_times: ObservationSetup::uniform_times(spec.sample_interval, spec.final_time),
        fourier_modes: spec.fourier_modes,
        noise_sigma: spec.noise_sigma,
    };
    WaveModel::new(mesh, config, setup)
}

impl Problem {
    pub fn build(config: &PipelineConfig) -> CliResult<Self> {
        let mesh = config.build_mesh()?;
        Self::build_on(config, mesh)
    }

    /// Same problem on a different inversion mesh, e.g. for mesh studies.
    pub fn build_on(config: &PipelineConfig, mesh: Mesh) -> CliResult<Self> {
        let theta = config.prior.theta.to_spec(&config.mesh);
        let mean = config.prior.mean.nodal(&mesh);
        let prior = PriorModel::new(&mesh, config.prior.alpha, theta, mean).map_err(|e| setup_error("prior", e))?;
        let truth = config.truth.nodal(&mesh);
        let (model, truth_model) = match &config.model {
            ModelSpec::Linear {
                centers,
                width,
                noise_sigma,
            } => {
                let model = LinearMapModel::gaussian_kernels(&mesh, prior.mspace(), centers, *width, *noise_sigma)
                    .map_err(|e| setup_error("model", e))?;
                (AnyModel::Linear(model), None)
            }
            ModelSpec::Wave1d(spec) => {
                let model = wave_model(&mesh, spec).map_err(|e| setup_error("model", e))?;
                let fine = if spec.truth_refinement > 1 {
                    let fine = model
                        .refined(spec.truth_refinement)
                        .map_err(|e| setup_error("model.truth_refinement", e))?;
                    let fine_truth = config.truth.nodal(fine.mesh());
                    Some((fine, fine_truth))
                } else {
                    None
                };
                (AnyModel::Wave(model), fine)
            }
        };
        Ok(Self {
            mesh,
            prior,
            model,
            truth,
            truth_model,
        })
    }

    /// `f(m_true) + σξ` with `ξ` from the data seed, computed on the
    /// refined truth model when one is configured.
    pub fn synthesize(&self, seed: u64) -> Result<DVector<f64>> {
        let mut rng = seeded(seed);
        let sigma = self.model.noise_sigma();
        match &self.truth_model {
            Some((model, truth)) => synthesize_data(model, truth, sigma, &mut rng),
            None => synthesize_data(&self.model, &self.truth, sigma, &mut rng),
        }
    }

    /// Receiver traces `(time, receiver, value)` of the truth, from the
    /// model that generated the data.
    pub fn truth_seismograms(&self) -> Result<Option<Vec<(f64, usize, f64)>>> {
        match (&self.model, &self.truth_model) {
            (AnyModel::Wave(_), Some((fine, truth))) => Ok(Some(traces(fine, truth)?)),
            (AnyModel::Wave(model), None) => Ok(Some(traces(model, &self.truth)?)),
            _ => Ok(None),
        }
    }

    pub fn seismograms(&self, m: &DVector<f64>) -> Result<Option<Vec<(f64, usize, f64)>>> {
        match &self.model {
            AnyModel::Wave(model) => Ok(Some(traces(model, m)?)),
            AnyModel::Linear(_) => Ok(None),
        }
    }
}

fn traces(model: &WaveModel, c: &DVector<f64>) -> Result<Vec<(f64, usize, f64)>> {
    let lin = model.solve_forward(c)?;
    let series = model.seismograms(lin.history());
    let times = model.sample_times();
    let per = times.len();
    Ok((0..model.observation().num_receivers())
        .flat_map(|r| (0..per).map(move |k| (r, k)))
        .map(|(r, k)| (times[k], r, series[r * per + k]))
        .collect())
}
