//! Pipeline stages. Each stage reads its inputs from state files in the
//! output directory, writes its artifacts, and updates the manifest, so
//! stages compose across invocations.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use linbayes::forward::ForwardModel;
use linbayes::lowrank::{apply_prior_preconditioned_hessian, lanczos_eigs, EigenDecomposition, LowRankPosterior};
use linbayes::map_solver::{find_map, Termination};
use linbayes::rng::{seeded, standard_normal_vector};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::artifacts::{
    field_csv, observations_csv, seismogram_csv, sha256_hex, spectrum_csv, Failure, Manifest, MapSummary,
    OutputDir, SpectrumSummary, StageRecord,
};
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::problem::Problem;

pub const STATE_SCHEMA_VERSION: u32 = 1;
pub const MAP_STATE: &str = "map.json";
pub const LOWRANK_STATE: &str = "lowrank.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Stage {
    Map,
    Spectrum,
    Variance,
    SamplePrior,
    SamplePosterior,
}

impl Stage {
    /// Stages of a full run, in order.
    pub const ALL: [Stage; 5] = [
        Stage::Map,
        Stage::Spectrum,
        Stage::Variance,
        Stage::SamplePrior,
        Stage::SamplePosterior,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Map => "map",
            Stage::Spectrum => "spectrum",
            Stage::Variance => "variance",
            Stage::SamplePrior => "sample-prior",
            Stage::SamplePosterior => "sample-posterior",
        }
    }

    /// File name prefixes owned by the stage; stale files with these
    /// prefixes are removed when the stage reruns.
    fn owned_prefixes(self) -> &'static [&'static str] {
        match self {
            Stage::Map => &["truth", "map", "observations", "seismograms_"],
            Stage::Spectrum => &["spectrum", "eigenvector_", "lowrank"],
            Stage::Variance => &["variance"],
            Stage::SamplePrior => &["prior_sample_"],
            Stage::SamplePosterior => &["posterior_sample_"],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed_data: Option<u64>,
    pub seed_sample: Option<u64>,
    pub seed_lanczos: Option<u64>,
    pub count: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, config: &mut PipelineConfig) {
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(s) = self.seed_data {
            config.seeds.data = s;
        }
        if let Some(s) = self.seed_sample {
            config.seeds.sample = s;
        }
        if let Some(s) = self.seed_lanczos {
            config.seeds.lanczos = s;
        }
        if let Some(c) = self.count {
            config.sample_count = c;
        }
    }
}

pub fn load_config(path: &Path, overrides: &Overrides) -> CliResult<PipelineConfig> {
    let mut config = PipelineConfig::from_path(path)?;
    overrides.apply(&mut config);
    config.validate()?;
    Ok(config)
}

/// Checksum of the config with the listed fields removed, so that a state
/// file stays valid when only unrelated settings change.
fn fingerprint(config: &serde_json::Value, ignored: &[&[&str]]) -> String {
    let mut v = config.clone();
    for path in ignored {
        let (last, parents) = path.split_last().expect("nonempty path");
        let mut node = Some(&mut v);
        for key in parents {
            node = node.and_then(|n| n.get_mut(*key));
        }
        if let Some(obj) = node.and_then(|n| n.as_object_mut()) {
            obj.remove(*last);
        }
    }
    sha256_hex(serde_json::to_string(&v).expect("value serializes").as_bytes())
}

const OUTPUT_ONLY: [&[&str]; 3] = [&["output_dir"], &["sample_count"], &["seeds", "sample"]];

fn map_key(config: &serde_json::Value) -> String {
    let mut ignored = OUTPUT_ONLY.to_vec();
    ignored.push(&["lowrank"]);
    ignored.push(&["seeds", "lanczos"]);
    fingerprint(config, &ignored)
}

fn lowrank_key(config: &serde_json::Value) -> String {
    fingerprint(config, &OUTPUT_ONLY)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapState {
    pub schema_version: u32,
    pub key: String,
    pub truth: Vec<f64>,
    pub y_obs: Vec<f64>,
    pub m_map: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowRankState {
    pub schema_version: u32,
    pub key: String,
    pub m_map: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Eigenvectors, one inner vector per mode.
    pub vectors: Vec<Vec<f64>>,
    pub residual_norms: Vec<f64>,
    pub discarded: Vec<f64>,
    pub rank_limited: bool,
    pub breakdown: bool,
    pub iterations: usize,
    pub diagnostic: Option<String>,
}

impl LowRankState {
    fn eigen(&self, n: usize) -> EigenDecomposition {
        let r = self.lambdas.len();
        let mut vectors = DMatrix::zeros(n, r);
        for (k, v) in self.vectors.iter().enumerate() {
            vectors.set_column(k, &DVector::from_column_slice(v));
        }
        EigenDecomposition {
            lambdas: self.lambdas.clone(),
            vectors,
            residual_norms: self.residual_norms.clone(),
            discarded: self.discarded.clone(),
            rank_limited: self.rank_limited,
            breakdown: self.breakdown,
            iterations: self.iterations,
            diagnostic: self.diagnostic.clone(),
        }
    }
}

/// An output directory bound to one effective configuration.
pub struct Pipeline {
    config: PipelineConfig,
    config_value: serde_json::Value,
    problem: Problem,
    out: OutputDir,
    manifest: Manifest,
}

impl Pipeline {
    pub fn open(config: PipelineConfig) -> CliResult<Self> {
        let problem = Problem::build(&config)?;
        let config_value = serde_json::to_value(&config).expect("config serializes");
        let out = OutputDir::acquire(&config.output_dir)?;
        let sha = sha256_hex(serde_json::to_string(&config_value).expect("value serializes").as_bytes());
        let manifest = match out.load_manifest()? {
            Some(mut m) if map_key(&m.config) == map_key(&config_value) => {
                m.config = config_value.clone();
                m.config_sha256 = sha;
                m
            }
            _ => Manifest::new(config_value.clone(), sha),
        };
        Ok(Self {
            config,
            config_value,
            problem,
            out,
            manifest,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn output_dir(&self) -> &Path {
        self.out.root()
    }

    /// Runs every stage in order, stopping at the first failure.
    pub fn run_all(&mut self) -> CliResult<Vec<String>> {
        Stage::ALL.iter().map(|&s| self.run_stage(s)).collect()
    }

    /// Runs one stage and returns a one-line summary. The manifest is
    /// saved whether or not the stage succeeds.
    pub fn run_stage(&mut self, stage: Stage) -> CliResult<String> {
        let start = Instant::now();
        self.clear_stage_files(stage);
        let result = match stage {
            Stage::Map => self.stage_map(),
            Stage::Spectrum => self.stage_spectrum(),
            Stage::Variance => self.stage_variance(),
            Stage::SamplePrior => self.stage_sample_prior(),
            Stage::SamplePosterior => self.stage_sample_posterior(),
        };
        let seconds = start.elapsed().as_secs_f64();
        let status = if result.is_ok() { "ok" } else { "failed" };
        self.manifest.stages.insert(
            stage.name().to_string(),
            StageRecord {
                status: status.into(),
                seconds,
            },
        );
        match &result {
            Ok(_) => {
                if self.manifest.failure.as_ref().is_some_and(|f| f.stage == stage.name()) {
                    self.manifest.failure = None;
                }
            }
            Err(e) => {
                self.manifest.failure = Some(Failure {
                    stage: stage.name().to_string(),
                    exit_code: e.exit_code(),
                    message: e.to_string(),
                });
            }
        }
        self.out.save_manifest(&self.manifest)?;
        result
    }

    fn clear_stage_files(&mut self, stage: Stage) {
        let stale: Vec<String> = self
            .manifest
            .files
            .keys()
            .filter(|name| stage.owned_prefixes().iter().any(|p| name.starts_with(p)))
            .cloned()
            .collect();
        for name in stale {
            self.manifest.files.remove(&name);
            let _ = std::fs::remove_file(self.out.path(&name));
        }
    }

    fn write_field(&mut self, name: &str, columns: &[(&str, &DVector<f64>)]) -> CliResult<()> {
        let bytes = field_csv(&self.problem.mesh, columns);
        self.out.write(&mut self.manifest, name, &bytes)
    }

    fn stage_map(&mut self) -> CliResult<String> {
        let err = |e| CliError::model("map", e);
        let p = &self.problem;
        let y_obs = p.synthesize(self.config.seeds.data).map_err(err)?;
        let result = find_map(&p.prior, &p.model, &y_obs, p.prior.mean(), &self.config.solver.to_config())
            .map_err(err)?;
        let predicted = p.model.observe(&result.m_map).map_err(err)?;
        let truth_traces = p.truth_seismograms().map_err(err)?;
        let map_traces = p.seismograms(&result.m_map).map_err(err)?;

        let truth = p.truth.clone();
        self.write_field("truth.csv", &[("value", &truth)])?;
        self.write_field("map.csv", &[("value", &result.m_map)])?;
        let obs = observations_csv(&y_obs, &predicted);
        self.out.write(&mut self.manifest, "observations.csv", &obs)?;
        if let (Some(t), Some(m)) = (truth_traces, map_traces) {
            self.out.write(&mut self.manifest, "seismograms_truth.csv", &seismogram_csv(&t))?;
            self.out.write(&mut self.manifest, "seismograms_map.csv", &seismogram_csv(&m))?;
        }
        let state = MapState {
            schema_version: STATE_SCHEMA_VERSION,
            key: map_key(&self.config_value),
            truth: truth.as_slice().to_vec(),
            y_obs: y_obs.as_slice().to_vec(),
            m_map: result.m_map.as_slice().to_vec(),
        };
        self.out.write_json(&mut self.manifest, MAP_STATE, &state)?;

        let reduction = result.gradnorm_reduction();
        self.manifest.map_gradnorm_reduction = Some(reduction);
        self.manifest.map = Some(MapSummary {
            converged: result.converged,
            termination: format!("{:?}", result.termination),
            newton_iters: result.newton_iters,
            cg_iters_total: result.cg_iters_total,
            objective_history: result.objective_history.clone(),
            gradnorm_history: result.gradnorm_history.clone(),
        });
        if !result.converged {
            log::warn!("MAP solver stopped without converging: {:?}", result.termination);
        }
        let how = match result.termination {
            Termination::GradientTolerance => "converged",
            Termination::MaxIterations => "hit the iteration limit",
            Termination::LineSearchFailure => "stopped on a line search failure",
        };
        Ok(format!(
            "map: {how} after {} Newton / {} CG iterations, gradient reduced by {reduction:.3e}",
            result.newton_iters, result.cg_iters_total
        ))
    }

    fn load_map(&self) -> CliResult<MapState> {
        let state: MapState = self.out.read_state(MAP_STATE, "map")?;
        if state.key != map_key(&self.config_value) || state.m_map.len() != self.problem.prior.dim() {
            return Err(CliError::missing("map", "map.json was produced by a different configuration"));
        }
        Ok(state)
    }

    fn load_lowrank(&self) -> CliResult<LowRankPosterior> {
        let state: LowRankState = self.out.read_state(LOWRANK_STATE, "spectrum")?;
        let n = self.problem.prior.dim();
        if state.key != lowrank_key(&self.config_value) || state.m_map.len() != n {
            return Err(CliError::missing(
                "spectrum",
                "lowrank.json was produced by a different configuration",
            ));
        }
        LowRankPosterior::new(&self.problem.prior, DVector::from_vec(state.m_map.clone()), state.eigen(n))
            .map_err(|e| CliError::model("spectrum", e))
    }

    fn stage_spectrum(&mut self) -> CliResult<String> {
        let err = |e| CliError::model("spectrum", e);
        let state = self.load_map()?;
        let p = &self.problem;
        let m_map = DVector::from_vec(state.m_map);
        let lin = p.model.linearize(&m_map).map_err(err)?;
        let eig = lanczos_eigs(
            |v| apply_prior_preconditioned_hessian(&p.prior, &p.model, &lin, v),
            p.prior.mspace(),
            &self.config.lowrank.to_config(self.config.seeds.lanczos),
        )
        .map_err(err)?;
        drop(lin);

        self.out.write(&mut self.manifest, "spectrum.csv", &spectrum_csv(&eig.lambdas))?;
        for k in 0..eig.rank() {
            let v = eig.vectors.column(k).into_owned();
            self.write_field(&format!("eigenvector_{:03}.csv", k + 1), &[("value", &v)])?;
        }
        let (estimate, is_estimate) = eig.truncation_estimate();
        let lowrank = LowRankState {
            schema_version: STATE_SCHEMA_VERSION,
            key: lowrank_key(&self.config_value),
            m_map: m_map.as_slice().to_vec(),
            lambdas: eig.lambdas.clone(),
            vectors: (0..eig.rank())
                .map(|k| eig.vectors.column(k).iter().copied().collect())
                .collect(),
            residual_norms: eig.residual_norms.clone(),
            discarded: eig.discarded.clone(),
            rank_limited: eig.rank_limited,
            breakdown: eig.breakdown,
            iterations: eig.iterations,
            diagnostic: eig.diagnostic.clone(),
        };
        self.out.write_json(&mut self.manifest, LOWRANK_STATE, &lowrank)?;
        if eig.rank_limited {
            log::warn!(
                "spectrum truncated at r_max = {} with informative eigenvalues left over",
                self.config.lowrank.r_max
            );
        }
        if let Some(d) = &eig.diagnostic {
            log::warn!("{d}");
        }
        self.manifest.spectrum = Some(SpectrumSummary {
            lambdas: eig.lambdas.clone(),
            residual_norms: eig.residual_norms.clone(),
            discarded: eig.discarded.clone(),
            rank: eig.rank(),
            rank_limited: eig.rank_limited,
            breakdown: eig.breakdown,
            iterations: eig.iterations,
            truncation_estimate: estimate,
            truncation_is_estimate: is_estimate,
            diagnostic: eig.diagnostic.clone(),
        });
        Ok(format!(
            "spectrum: kept {} eigenpairs after {} Lanczos steps, truncation estimate {estimate:.3e}",
            eig.rank(),
            eig.iterations
        ))
    }

    fn stage_variance(&mut self) -> CliResult<String> {
        let err = |e| CliError::model("variance", e);
        let post = self.load_lowrank()?;
        let prior_var = DVector::from_vec(self.problem.prior.nodal_variance().map_err(err)?);
        let post_var = DVector::from_vec(post.nodal_variance().map_err(err)?);
        self.write_field(
            "variance.csv",
            &[("prior_variance", &prior_var), ("posterior_variance", &post_var)],
        )?;
        let ratio = post_var.sum() / prior_var.sum();
        Ok(format!("variance: posterior/prior total variance ratio {ratio:.3e}"))
    }

    fn stage_sample_prior(&mut self) -> CliResult<String> {
        let err = |e| CliError::model("sample-prior", e);
        let n = self.problem.prior.dim();
        let mut rng = seeded(self.config.seeds.sample);
        for k in 0..self.config.sample_count {
            let s = self
                .problem
                .prior
                .sample(&standard_normal_vector(&mut rng, n))
                .map_err(err)?;
            self.write_field(&format!("prior_sample_{k:03}.csv"), &[("value", &s)])?;
        }
        Ok(format!("sample-prior: wrote {} samples", self.config.sample_count))
    }

    /// Uses the same seed as the prior sampler, so the k-th prior and
    /// posterior samples share their noise vector.
    fn stage_sample_posterior(&mut self) -> CliResult<String> {
        let err = |e| CliError::model("sample-posterior", e);
        let post = self.load_lowrank()?;
        let n = self.problem.prior.dim();
        let mut rng = seeded(self.config.seeds.sample);
        for k in 0..self.config.sample_count {
            let s = post.sample(&standard_normal_vector(&mut rng, n)).map_err(err)?;
            self.write_field(&format!("posterior_sample_{k:03}.csv"), &[("value", &s)])?;
        }
        Ok(format!("sample-posterior: wrote {} samples", self.config.sample_count))
    }
}

/// Full pipeline for a config file; the returned manifest references every
/// artifact by checksum.
pub fn run_pipeline(config_path: &Path, overrides: &Overrides) -> CliResult<Manifest> {
    let config = load_config(config_path, overrides)?;
    let mut pipeline = Pipeline::open(config)?;
    pipeline.run_all()?;
    Ok(pipeline.manifest().clone())
}
