//! Versioned JSON pipeline configuration.
//!
//! Unknown keys are rejected everywhere. Parse errors and validation
//! errors both carry the dotted path of the offending field.

use std::path::{Path, PathBuf};

use linbayes::fem::{Mesh, ThetaSpec};
use linbayes::lowrank::LanczosConfig;
use linbayes::map_solver::MapSolverConfig;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub mesh: MeshSpec,
    pub prior: PriorSpec,
    pub model: ModelSpec,
    pub truth: FieldSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub lowrank: LowRankSpec,
    pub seeds: Seeds,
    pub output_dir: PathBuf,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub counts: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub alpha: f64,
    pub theta: ThetaConfig,
    pub mean: FieldSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaConfig {
    Isotropic {
        beta: f64,
    },
    /// `radius` defaults to the circumradius of the box, centred at its
    /// midpoint.
    RadialAnisotropic {
        beta: f64,
        theta: f64,
        #[serde(default)]
        radius: Option<f64>,
    },
}

/// A scalar field given by formula, evaluated at mesh nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    /// `background + amplitude·exp(−|x − center|²/(2·width²))`
    GaussianBump {
        background: f64,
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Observations are Gaussian-weighted averages of the field.
    Linear {
        centers: Vec<Vec<f64>>,
        width: f64,
        noise_sigma: f64,
    },
    Wave1d(WaveSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSpec {
    pub final_time: f64,
    pub dt: f64,
    pub cfl: f64,
    pub source: SourceConfig,
    pub receivers: Vec<f64>,
    pub sample_interval: f64,
    #[serde(default)]
    pub fourier_modes: Option<usize>,
    pub noise_sigma: f64,
    /// Truth data come from a model refined by this factor in space and
    /// time; 1 turns the refinement off.
    #[serde(default = "default_truth_refinement")]
    pub truth_refinement: usize,
}

fn default_truth_refinement() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub location: f64,
    pub width: f64,
    pub time_center: f64,
    pub time_std: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub grad_tol_rel: f64,
    pub max_newton_iters: usize,
    pub max_cg_iters: usize,
    pub forcing_exponent: f64,
    pub forcing_max: f64,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = MapSolverConfig::default();
        Self {
            grad_tol_rel: d.grad_tol_rel,
            max_newton_iters: d.max_newton_iters,
            max_cg_iters: d.max_cg_iters,
            forcing_exponent: d.forcing_exponent,
            forcing_max: d.forcing_max,
            armijo_c1: d.armijo_c1,
            backtrack_factor: d.backtrack_factor,
            max_backtracks: d.max_backtracks,
        }
    }
}

impl SolverSpec {
    pub fn to_config(&self) -> MapSolverConfig {
        MapSolverConfig {
            grad_tol_rel: self.grad_tol_rel,
            max_newton_iters: self.max_newton_iters,
            max_cg_iters: self.max_cg_iters,
            forcing_exponent: self.forcing_exponent,
            forcing_max: self.forcing_max,
            armijo_c1: self.armijo_c1,
            backtrack_factor: self.backtrack_factor,
            max_backtracks: self.max_backtracks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LowRankSpec {
    pub r_max: usize,
    pub eig_tol: f64,
    pub threshold: f64,
    pub max_iters: Option<usize>,
}

impl Default for LowRankSpec {
    fn default() -> Self {
        let d = LanczosConfig::default();
        Self {
            r_max: d.r_max,
            eig_tol: d.eig_tol,
            threshold: d.threshold,
            max_iters: d.max_iters,
        }
    }
}

impl LowRankSpec {
    pub fn to_config(&self, seed: u64) -> LanczosConfig {
        LanczosConfig {
            r_max: self.r_max,
            eig_tol: self.eig_tol,
            threshold: self.threshold,
            max_iters: self.max_iters,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub data: u64,
    pub sample: u64,
    pub lanczos: u64,
}

impl PipelineConfig {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Parses and validates.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(if path == "." { "<root>".into() } else { path }, e.inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn dim(&self) -> usize {
        self.mesh.counts.len()
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        self.validate_mesh()?;
        let dim = self.dim();
        positive("prior.alpha", self.prior.alpha)?;
        match &self.prior.theta {
            ThetaConfig::Isotropic { beta } => positive("prior.theta.beta", *beta)?,
            ThetaConfig::RadialAnisotropic { beta, theta, radius } => {
                positive("prior.theta.beta", *beta)?;
                positive("prior.theta.theta", *theta)?;
                if let Some(r) = radius {
                    positive("prior.theta.radius", *r)?;
                }
                if dim < 2 {
                    return Err(CliError::config("prior.theta", "radial anisotropy needs a 2D mesh"));
                }
            }
        }
        self.prior
            .theta
            .to_spec(&self.mesh)
            .validate()
            .map_err(|e| CliError::config("prior.theta", e.to_string()))?;
        self.prior.mean.validate("prior.mean", dim)?;
        self.truth.validate("truth", dim)?;

        match &self.model {
            ModelSpec::Linear {
                centers,
                width,
                noise_sigma,
            } => {
                if centers.is_empty() {
                    return Err(CliError::config("model.centers", "at least one observation is needed"));
                }
                for (i, c) in centers.iter().enumerate() {
                    let path = format!("model.centers[{i}]");
                    if c.len() != dim {
                        return Err(CliError::config(path, format!("expected {dim} coordinates")));
                    }
                    finite(&path, c)?;
                }
                positive("model.width", *width)?;
                positive("model.noise_sigma", *noise_sigma)?;
            }
            ModelSpec::Wave1d(w) => {
                if dim != 1 {
                    return Err(CliError::config("model", "wave1d needs a 1D mesh"));
                }
                positive("model.final_time", w.final_time)?;
                positive("model.dt", w.dt)?;
                if !(w.cfl > 0.0 && w.cfl <= 0.5) {
                    return Err(CliError::config("model.cfl", format!("must lie in (0, 0.5], got {}", w.cfl)));
                }
                positive("model.source.width", w.source.width)?;
                positive("model.source.time_std", w.source.time_std)?;
                finite("model.source.location", &[w.source.location])?;
                finite("model.source.time_center", &[w.source.time_center])?;
                finite("model.source.amplitude", &[w.source.amplitude])?;
                if w.receivers.is_empty() {
                    return Err(CliError::config("model.receivers", "at least one receiver is needed"));
                }
                for (i, r) in w.receivers.iter().enumerate() {
                    if !(*r >= self.mesh.lower[0] && *r <= self.mesh.upper[0]) {
                        return Err(CliError::config(format!("model.receivers[{i}]"), "outside the domain"));
                    }
                }
                positive("model.sample_interval", w.sample_interval)?;
                if w.fourier_modes == Some(0) {
                    return Err(CliError::config("model.fourier_modes", "must be positive"));
                }
                positive("model.noise_sigma", w.noise_sigma)?;
                if w.truth_refinement == 0 {
                    return Err(CliError::config("model.truth_refinement", "must be at least 1"));
                }
            }
        }

        self.solver
            .to_config()
            .validate()
            .map_err(|e| CliError::config("solver", e.to_string()))?;
        self.lowrank
            .to_config(self.seeds.lanczos)
            .validate()
            .map_err(|e| CliError::config("lowrank", e.to_string()))?;
        if self.output_dir.as_os_str().is_empty() {
            return Err(CliError::config("output_dir", "must not be empty"));
        }
        Ok(())
    }

    fn validate_mesh(&self) -> CliResult<()> {
        let m = &self.mesh;
        let dim = m.counts.len();
        if !(1..=2).contains(&dim) {
            return Err(CliError::config("mesh.counts", "only 1D and 2D meshes are supported"));
        }
        if m.lower.len() != dim {
            return Err(CliError::config("mesh.lower", format!("expected {dim} entries")));
        }
        if m.upper.len() != dim {
            return Err(CliError::config("mesh.upper", format!("expected {dim} entries")));
        }
        for d in 0..dim {
            if m.counts[d] == 0 {
                return Err(CliError::config(format!("mesh.counts[{d}]"), "must be positive"));
            }
            if !(m.lower[d].is_finite() && m.upper[d].is_finite() && m.lower[d] < m.upper[d]) {
                return Err(CliError::config(format!("mesh.upper[{d}]"), "must exceed mesh.lower"));
            }
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> CliResult<Mesh> {
        Mesh::uniform(&self.mesh.counts, &self.mesh.lower, &self.mesh.upper)
            .map_err(|e| CliError::config("mesh", e.to_string()))
    }
}

impl ThetaConfig {
    pub fn to_spec(&self, mesh: &MeshSpec) -> ThetaSpec {
        match *self {
            ThetaConfig::Isotropic { beta } => ThetaSpec::Isotropic { beta },
            ThetaConfig::RadialAnisotropic { beta, theta, radius } => ThetaSpec::RadialAnisotropic {
                beta,
                theta,
                radius: radius.unwrap_or_else(|| {
                    mesh.lower
                        .iter()
                        .zip(&mesh.upper)
                        .map(|(l, u)| (0.5 * (u - l)).powi(2))
                        .sum::<f64>()
                        .sqrt()
                }),
            },
        }
    }
}

impl FieldSpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            FieldSpec::Constant { value } => *value,
            FieldSpec::GaussianBump {
                background,
                amplitude,
                center,
                width,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
                background + amplitude * (-0.5 * r2 / (width * width)).exp()
            }
        }
    }

    pub fn nodal(&self, mesh: &Mesh) -> DVector<f64> {
        DVector::from_fn(mesh.num_nodes(), |i, _| self.eval(mesh.node(i)))
    }

    fn validate(&self, path: &str, dim: usize) -> CliResult<()> {
        match self {
            FieldSpec::Constant { value } => finite(&format!("{path}.value"), &[*value]),
            FieldSpec::GaussianBump {
                background,
                amplitude,
                center,
                width,
            } => {
                finite(&format!("{path}.background"), &[*background])?;
                finite(&format!("{path}.amplitude"), &[*amplitude])?;
                if center.len() != dim {
                    return Err(CliError::config(format!("{path}.center"), format!("expected {dim} coordinates")));
                }
                finite(&format!("{path}.center"), center)?;
                positive(&format!("{path}.width"), *width)
            }
        }
    }
}

fn positive(path: &str, value: f64) -> CliResult<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(path, format!("must be positive and finite, got {value}")))
    }
}

fn finite(path: &str, values: &[f64]) -> CliResult<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CliError::config(path, "must be finite"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_json() -> serde_json::Value {
        serde_json::json!({
            "schema_version": 1,
            "mesh": {"counts": [4, 4], "lower": [0.0, 0.0], "upper": [1.0, 1.0]},
            "prior": {
                "alpha": 0.5,
                "theta": {"kind": "isotropic", "beta": 0.05},
                "mean": {"kind": "constant", "value": 0.0}
            },
            "model": {"kind": "linear", "centers": [[0.5, 0.5]], "width": 0.1, "noise_sigma": 0.01},
            "truth": {"kind": "constant", "value": 1.0},
            "seeds": {"data": 1, "sample": 2, "lanczos": 3},
            "output_dir": "out",
            "sample_count": 2
        })
    }

    fn parse(v: &serde_json::Value) -> CliResult<PipelineConfig> {
        PipelineConfig::from_json(&v.to_string())
    }

    fn error_path(v: &serde_json::Value) -> String {
        match parse(v) {
            Err(CliError::Config { path, .. }) => path,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_with_defaults() {
        let c = parse(&linear_json()).unwrap();
        assert_eq!(c.solver, SolverSpec::default());
        assert_eq!(c.lowrank, LowRankSpec::default());
        assert_eq!(PipelineConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn negative_noise_reports_field_path() {
        let mut v = linear_json();
        v["model"]["noise_sigma"] = serde_json::json!(-0.1);
        assert_eq!(error_path(&v), "model.noise_sigma");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = linear_json();
        v["mesh"]["spacing"] = serde_json::json!(0.1);
        assert_eq!(error_path(&v), "mesh.spacing");
        let mut v = linear_json();
        v["extra"] = serde_json::json!(true);
        assert!(parse(&v).is_err());
    }

    #[test]
    fn type_errors_report_field_path() {
        let mut v = linear_json();
        v["seeds"]["data"] = serde_json::json!("one");
        assert_eq!(error_path(&v), "seeds.data");
    }

    #[test]
    fn seeds_are_required() {
        let mut v = linear_json();
        v["seeds"].as_object_mut().unwrap().remove("lanczos");
        assert_eq!(error_path(&v), "seeds");
    }

    #[test]
    fn schema_version_is_checked() {
        let mut v = linear_json();
        v["schema_version"] = serde_json::json!(2);
        assert_eq!(error_path(&v), "schema_version");
    }

    #[test]
    fn default_radius_is_circumradius() {
        let mesh = MeshSpec {
            counts: vec![2, 2],
            lower: vec![-1.0, -1.0],
            upper: vec![1.0, 1.0],
        };
        let theta = ThetaConfig::RadialAnisotropic {
            beta: 0.1,
            theta: 0.5,
            radius: None,
        };
        match theta.to_spec(&mesh) {
            ThetaSpec::RadialAnisotropic { radius, .. } => assert!((radius - 2f64.sqrt()).abs() < 1e-15),
            _ => unreachable!(),
        }
    }

    #[test]
    fn bump_field_evaluates() {
        let f = FieldSpec::GaussianBump {
            background: 1.0,
            amplitude: 0.5,
            center: vec![0.2],
            width: 0.1,
        };
        assert_eq!(f.eval(&[0.2]), 1.5);
        assert!((f.eval(&[0.3]) - (1.0 + 0.5 * (-0.5f64).exp())).abs() < 1e-15);
    }
}
