//! L1-regularized pseudo-likelihood training.
//!
//! The smooth part is the mean over voices of the per-voice negative
//! conditional log-likelihoods; the L1 term is handled by the optimizer.

mod dataset;
mod objective;
mod optimize;

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dataset::{
    build_datasets, interior_columns, precompute_stats, SufficientStats, TrainingSample, VoiceDataset, VoiceStats,
};
pub use objective::{objective_and_gradient, Objective, PseudoLikelihood};
pub use optimize::{owlqn, proximal_gradient, OptimOptions, OptimOutcome};

use crate::corpus::{Corpus, Mode};
use crate::error::{Error, Result};
use crate::model::{Model, ModelMetadata, Rhythm, Topology};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    #[serde(alias = "owlqn", alias = "owl-qn")]
    OrthantWise,
    #[serde(alias = "prox", alias = "ista")]
    ProximalGradient,
}

impl Optimizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Optimizer::OrthantWise => "orthant_wise",
            Optimizer::ProximalGradient => "proximal_gradient",
        }
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthant_wise" | "owlqn" | "owl-qn" => Ok(Optimizer::OrthantWise),
            "proximal_gradient" | "prox" | "ista" => Ok(Optimizer::ProximalGradient),
            _ => Err(Error::Config(format!("unknown optimizer {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    pub lambda: f64,
    pub max_iterations: usize,
    /// Relative change of the regularized objective treated as converged.
    pub tolerance: f64,
    pub optimizer: Optimizer,
    /// Leave local fields out of the L1 penalty.
    pub exempt_local_fields: bool,
    /// Divide λ by the total number of training samples.
    pub normalize_lambda: bool,
    pub memory: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            lambda: 3e-5,
            max_iterations: 500,
            tolerance: 1e-6,
            optimizer: Optimizer::OrthantWise,
            exempt_local_fields: false,
            normalize_lambda: false,
            memory: 10,
        }
    }
}

impl TrainingConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self { lambda, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be a finite nonnegative number, got {}", self.lambda)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.memory == 0 {
            return Err(Error::Config("memory must be at least 1".into()));
        }
        Ok(())
    }
}

/// Training configuration file (TOML or JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfigFile {
    #[serde(rename = "K")]
    pub scope: usize,
    #[serde(rename = "L")]
    pub cross_scope: usize,
    pub lambda: f64,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub exempt_local_fields: bool,
    #[serde(default)]
    pub normalize_lambda: bool,
    /// Enables position-dependent local fields with this cycle length.
    #[serde(default)]
    pub bins_per_cycle: Option<usize>,
}

fn default_iterations() -> usize {
    500
}

fn default_tolerance() -> f64 {
    1e-6
}

impl TrainConfigFile {
    /// Parses JSON when the text starts with `{`, TOML otherwise.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.training().validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn training(&self) -> TrainingConfig {
        TrainingConfig {
            lambda: self.lambda,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            optimizer: self.optimizer,
            exempt_local_fields: self.exempt_local_fields,
            normalize_lambda: self.normalize_lambda,
            memory: 10,
        }
    }

    pub fn topology(&self, corpus: &Corpus) -> Result<Topology> {
        Topology::new(
            self.scope,
            self.cross_scope,
            corpus.alphabets().to_vec(),
            self.bins_per_cycle.map(|bins_per_cycle| Rhythm { bins_per_cycle }),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub iterations: usize,
    pub converged: bool,
    /// Regularized objective at θ = 0 and at the solution.
    pub initial_objective: f64,
    pub final_objective: f64,
    pub smooth_objective: f64,
    /// Effective L1 weight after optional normalization.
    pub effective_lambda: f64,
    pub history: Vec<f64>,
}

fn penalty_weights(topology: &Topology, lambda: f64, exempt_local: bool) -> Vec<f64> {
    (0..topology.dim())
        .map(|k| if exempt_local && topology.is_local(k) { 0.0 } else { lambda })
        .collect()
}

/// Minimize from an explicit starting point over precomputed statistics.
pub fn fit_stats(
    topology: &Topology,
    stats: &SufficientStats,
    config: &TrainingConfig,
    init: Vec<f64>,
) -> Result<(Vec<f64>, TrainingReport)> {
    config.validate()?;
    if init.len() != topology.dim() {
        return Err(Error::Validation(format!("start has {} entries, layout needs {}", init.len(), topology.dim())));
    }
    let total: usize = stats.voices.iter().map(VoiceStats::samples).sum();
    let lambda = if config.normalize_lambda { config.lambda / total as f64 } else { config.lambda };
    let weights = penalty_weights(topology, lambda, config.exempt_local_fields);
    let obj = PseudoLikelihood::new(stats);
    let initial_objective = {
        let zero = vec![0.0; topology.dim()];
        obj.value(&zero)
    };
    let opts = OptimOptions { max_iterations: config.max_iterations, tolerance: config.tolerance, memory: config.memory };
    let out = match config.optimizer {
        Optimizer::OrthantWise => owlqn(&obj, init, &weights, opts)?,
        Optimizer::ProximalGradient => proximal_gradient(&obj, init, &weights, opts)?,
    };
    let report = TrainingReport {
        iterations: out.iterations,
        converged: out.converged,
        initial_objective,
        final_objective: out.value,
        smooth_objective: out.smooth_value,
        effective_lambda: lambda,
        history: out.history,
    };
    Ok((out.x, report))
}

/// Train from θ = 0 and report optimizer progress.
pub fn fit_with_report(corpus: &Corpus, topology: &Topology, config: &TrainingConfig) -> Result<(Model, TrainingReport)> {
    fit_from(corpus, topology, config, vec![0.0; topology.dim()])
}

pub fn fit_from(
    corpus: &Corpus,
    topology: &Topology,
    config: &TrainingConfig,
    init: Vec<f64>,
) -> Result<(Model, TrainingReport)> {
    config.validate()?;
    let datasets = build_datasets(corpus, topology)?;
    let stats = precompute_stats(topology, &datasets)?;
    let (theta, report) = fit_stats(topology, &stats, config, init)?;
    let modes: Vec<Mode> = corpus.pieces().iter().map(|p| p.mode).collect();
    let mode = modes.first().copied().filter(|m| modes.iter().all(|x| x == m));
    let mut metadata = ModelMetadata {
        lambda: Some(config.lambda),
        corpus_fingerprint: Some(corpus.fingerprint()),
        mode,
        ..Default::default()
    };
    let extra = &mut metadata.extra;
    extra.insert("optimizer".into(), config.optimizer.as_str().into());
    extra.insert("iterations".into(), report.iterations.into());
    extra.insert("converged".into(), report.converged.into());
    extra.insert("objective".into(), report.final_objective.into());
    if config.exempt_local_fields {
        extra.insert("exempt_local_fields".into(), true.into());
    }
    if config.normalize_lambda {
        extra.insert("normalize_lambda".into(), true.into());
    }
    let model = Model::from_dense(topology.clone(), theta, metadata)?;
    Ok((model, report))
}

pub fn fit(corpus: &Corpus, topology: &Topology, config: &TrainingConfig) -> Result<Model> {
    fit_with_report(corpus, topology, config).map(|(m, _)| m)
}
