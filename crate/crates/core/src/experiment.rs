//! Run configuration, problem construction and run artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::{read_libsvm, synth_curves_toy, synth_logistic, ConditionProfile, CurvesToyOptions, DataError, Dataset, LibsvmOptions};
use crate::engine::{compute_reference_optimum, relerr, Engine, EngineConfig, EngineError, RunOutput, StopReason};
use crate::linalg::DenseMatrix;
use crate::models::{Activation, ConvSpec, LayerSpec, LogisticRegression, Loss, ModelError, Network, Objective};
use crate::seed::{derive, Stream};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("run: {0}")]
    Engine(#[from] EngineError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    /// Problems detected before the first iteration.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            ExperimentError::Config(_)
                | ExperimentError::Data(_)
                | ExperimentError::Model(_)
                | ExperimentError::Engine(EngineError::Config(_))
        )
    }

    pub fn code(&self) -> &'static str {
        match self {
            ExperimentError::Config(_) => "config",
            ExperimentError::Data(_) => "data",
            ExperimentError::Model(_) => "model",
            ExperimentError::Engine(e) => e.code(),
            ExperimentError::Io(_) => "io",
        }
    }
}

fn default_mu() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    SynthLogistic {
        n: usize,
        samples: usize,
        #[serde(default)]
        profile: ConditionProfile,
        #[serde(default)]
        data_seed: u64,
        #[serde(default = "default_mu")]
        mu: f64,
    },
    Libsvm {
        path: PathBuf,
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default)]
        normalize: bool,
        #[serde(default)]
        tolerate_unsorted: bool,
    },
    /// Dense autoencoder on curve images; `hidden` lists the inner widths.
    Autoencoder {
        #[serde(default)]
        data: CurvesToyOptions,
        #[serde(default)]
        data_seed: u64,
        hidden: Vec<usize>,
        activation: Activation,
        loss: Loss,
        #[serde(default)]
        mu: f64,
    },
    /// Two same-padding convolutions, one hidden channel group.
    ConvAutoencoder {
        #[serde(default)]
        data: CurvesToyOptions,
        #[serde(default)]
        data_seed: u64,
        channels: usize,
        radius: usize,
        activation: Activation,
        #[serde(default)]
        mu: f64,
    },
}

impl ProblemSpec {
    pub fn is_logistic(&self) -> bool {
        matches!(self, ProblemSpec::SynthLogistic { .. } | ProblemSpec::Libsvm { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub problem: ProblemSpec,
    pub optimizer: EngineConfig,
    /// Compute `Ψ*` for the relative-error column; defaults to on for
    /// logistic regression.
    #[serde(default)]
    pub reference: Option<bool>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        // relative data paths are resolved against the config location
        if let ProblemSpec::Libsvm { path: p, .. } = &mut cfg.problem {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ExperimentError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.optimizer.validate()?;
        let method = self.optimizer.method;
        if method.is_kron() && self.problem.is_logistic() {
            return Err(ExperimentError::Config(format!("method {} needs a network problem", method.as_str())));
        }
        if self.reference == Some(true) && !self.problem.is_logistic() {
            return Err(ExperimentError::Config("reference optimum needs a logistic problem".into()));
        }
        Ok(())
    }

    /// Every default spelled out; replaying it reproduces the run.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.optimizer = self.optimizer.resolved();
        c.reference = Some(self.wants_reference());
        c
    }

    pub fn wants_reference(&self) -> bool {
        self.reference.unwrap_or(self.problem.is_logistic())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// A model ready to optimise.
pub struct Problem {
    pub name: String,
    pub model: Box<dyn Objective>,
    pub theta0: Vec<f64>,
}

fn curves_inputs(data: &Dataset) -> DenseMatrix {
    data.features.to_dense(data.n_features)
}

pub fn build_problem(cfg: &RunConfig) -> Result<Problem, ExperimentError> {
    let init_seed = derive(cfg.optimizer.seed, 0, Stream::Init, 0);
    match &cfg.problem {
        ProblemSpec::SynthLogistic { n, samples, profile, data_seed, mu } => {
            let (data, _) = synth_logistic(*n, *samples, *profile, *data_seed)?;
            logistic(data, *mu)
        }
        ProblemSpec::Libsvm { path, mu, normalize, tolerate_unsorted } => {
            let mut data = read_libsvm(path, LibsvmOptions { tolerate_unsorted: *tolerate_unsorted })?;
            if *normalize {
                data.normalize_max_abs();
            }
            logistic(data, *mu)
        }
        ProblemSpec::Autoencoder { data, data_seed, hidden, activation, loss, mu } => {
            let d = synth_curves_toy(*data, *data_seed)?;
            let x = curves_inputs(&d);
            let npix = x.cols();
            let mut widths = vec![npix];
            widths.extend(hidden.iter().copied());
            widths.push(npix);
            if widths.contains(&0) {
                return Err(ExperimentError::Config("layer widths must be positive".into()));
            }
            let specs = widths.windows(2).map(|w| LayerSpec::Dense { inputs: w[0], outputs: w[1] }).collect();
            let net = Network::new(specs, *activation, *loss, x.clone(), x, *mu)?;
            let theta0 = net.init_params(init_seed);
            Ok(Problem { name: d.name.clone(), model: Box::new(net), theta0 })
        }
        ProblemSpec::ConvAutoencoder { data, data_seed, channels, radius, activation, mu } => {
            let d = synth_curves_toy(*data, *data_seed)?;
            let x = curves_inputs(&d);
            let side = data.side;
            if *channels == 0 {
                return Err(ExperimentError::Config("channels must be positive".into()));
            }
            let conv = |i, o| {
                LayerSpec::Conv(ConvSpec { in_channels: i, out_channels: o, radius: *radius, height: side, width: side })
            };
            let net = Network::new(vec![conv(1, *channels), conv(*channels, 1)], *activation, Loss::Square, x.clone(), x, *mu)?;
            let theta0 = net.init_params(init_seed);
            Ok(Problem { name: d.name.clone(), model: Box::new(net), theta0 })
        }
    }
}

fn logistic(data: Dataset, mu: f64) -> Result<Problem, ExperimentError> {
    let n = data.n_features;
    let name = data.name.clone();
    let model = LogisticRegression::new(data, mu)?;
    Ok(Problem { name, model: Box::new(model), theta0: vec![0.0; n] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: String,
    pub method: String,
    pub seed: u64,
    pub iterations: usize,
    pub epochs: f64,
    pub stop: StopReason,
    pub final_loss: f64,
    pub final_gnorm: f64,
    pub final_relerr: Option<f64>,
    pub psi_star: Option<f64>,
}

pub struct Experiment {
    pub resolved: RunConfig,
    pub output: RunOutput,
    pub summary: Summary,
}

/// Builds the problem, computes `Ψ*` when requested, and runs.
pub fn run_experiment(cfg: &RunConfig) -> Result<Experiment, ExperimentError> {
    cfg.validate()?;
    let resolved = cfg.resolved();
    let problem = build_problem(&resolved)?;
    let mut engine = Engine::new(&resolved.optimizer, problem.model.as_ref())?;
    let psi_star = if resolved.wants_reference() {
        let (_, p) = compute_reference_optimum(problem.model.as_ref(), &problem.theta0)?;
        engine = engine.with_reference(p);
        Some(p)
    } else {
        None
    };
    let output = engine.run(problem.theta0.clone())?;
    let summary = Summary {
        problem: problem.name.clone(),
        method: resolved.optimizer.method.as_str().to_string(),
        seed: resolved.optimizer.seed,
        iterations: output.record.len(),
        epochs: output.epochs,
        stop: output.stop,
        final_loss: output.final_loss,
        final_gnorm: output.final_gnorm,
        final_relerr: psi_star.map(|p| relerr(output.final_loss, p)),
        psi_star,
    };
    Ok(Experiment { resolved, output, summary })
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RESOLVED_FILE: &str = "resolved-config.json";

/// Writes `metrics.csv`, `summary.json` and `resolved-config.json`.
pub fn write_artifacts(dir: &Path, exp: &Experiment) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir)?;
    exp.output.record.write_csv(fs::File::create(dir.join(METRICS_FILE))?)?;
    let summary = serde_json::to_string_pretty(&exp.summary).expect("summary serializes");
    fs::write(dir.join(SUMMARY_FILE), summary + "\n")?;
    fs::write(dir.join(RESOLVED_FILE), exp.resolved.to_json_pretty() + "\n")?;
    Ok(())
}
