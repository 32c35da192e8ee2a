//! The maximum-entropy pairwise model: feature family, parameter layout,
//! energy and conditionals.
//!
//! Parameters are held in a dense vector over the layout defined by
//! [`Topology`]; a zero entry is an absent feature. Model files store only
//! the non-zero entries.

mod energy;
mod feature;
mod io;
mod oracle;
mod topology;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use energy::{
    conditional_distribution, conditional_encoded, conditional_scores, count_features, count_position_fields,
    dense_counts, energy, energy_encoded, score_delta, softmax,
};
pub use feature::{canonicalize, FeatureIndex, ParamKey};
pub use io::{load_model, model_to_json, parse_model, save_model, MODEL_FORMAT_VERSION};
pub use oracle::{exact_distribution, exact_partition_oracle, state_index, ORACLE_GUARD};
pub use topology::{Block, Coupling, EncodedSeq, Rhythm, Topology};

pub(crate) use energy::add_counts;

use crate::corpus::Mode;
use crate::error::{Error, Result};
use crate::symbol::Symbol;

/// Provenance recorded alongside the parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub topology: Topology,
    /// Dense parameters in the topology's layout.
    pub theta: Vec<f64>,
    pub metadata: ModelMetadata,
}

impl Model {
    /// The model with θ ≡ 0 (uniform distribution).
    pub fn zeros(topology: Topology) -> Self {
        let theta = vec![0.0; topology.dim()];
        Self { topology, theta, metadata: ModelMetadata::default() }
    }

    pub fn from_dense(topology: Topology, theta: Vec<f64>, metadata: ModelMetadata) -> Result<Self> {
        if theta.len() != topology.dim() {
            return Err(Error::Validation(format!(
                "parameter vector has {} entries, layout needs {}",
                theta.len(),
                topology.dim()
            )));
        }
        if let Some(k) = theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("parameter {:?} is not finite", topology.key_at(k))));
        }
        Ok(Self { topology, theta, metadata })
    }

    /// θ for a feature in any orientation; zero when absent from the family.
    pub fn get(&self, f: &FeatureIndex) -> f64 {
        canonicalize(&self.topology, f.a, f.b, f.i, f.j, f.k)
            .ok()
            .and_then(|c| self.topology.feature_offset(&c))
            .map_or(0.0, |k| self.theta[k])
    }

    pub fn set(&mut self, f: &FeatureIndex, value: f64) -> Result<()> {
        let c = canonicalize(&self.topology, f.a, f.b, f.i, f.j, f.k)?;
        let k = self.topology.feature_offset(&c).ok_or_else(|| {
            Error::Validation(format!("{c:?} has no plain parameter (rhythm local fields are positional)"))
        })?;
        if !value.is_finite() {
            return Err(Error::Validation("parameter must be finite".into()));
        }
        self.theta[k] = value;
        Ok(())
    }

    pub fn get_position(&self, voice: usize, symbol: Symbol, position: usize) -> f64 {
        self.topology.position_offset(voice, symbol, position).map_or(0.0, |k| self.theta[k])
    }

    pub fn set_position(&mut self, voice: usize, symbol: Symbol, position: usize, value: f64) -> Result<()> {
        let k = self
            .topology
            .position_offset(voice, symbol, position)
            .ok_or_else(|| Error::Validation(format!("no position field ({voice}, {symbol}, {position})")))?;
        if !value.is_finite() {
            return Err(Error::Validation("parameter must be finite".into()));
        }
        self.theta[k] = value;
        Ok(())
    }

    /// Non-zero parameters with their keys, in layout order.
    pub fn nonzero(&self) -> impl Iterator<Item = (ParamKey, f64)> + '_ {
        self.theta
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, &v)| (self.topology.key_at(k), v))
    }

    pub fn count_nonzero(&self) -> usize {
        self.theta.iter().filter(|v| **v != 0.0).count()
    }

    pub fn l1_norm(&self) -> f64 {
        self.theta.iter().map(|v| v.abs()).sum()
    }
}
