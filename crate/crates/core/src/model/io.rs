use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::feature::ParamKey;
use super::topology::{Rhythm, Topology};
use super::{canonicalize, Model, ModelMetadata};
use crate::error::{Error, Result};
use crate::symbol::Symbol;

pub const MODEL_FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u64,
    topology: TopologyFile,
    params: Vec<(Symbol, Symbol, usize, usize, i32, f64)>,
    position_fields: Option<Vec<(usize, Symbol, usize, f64)>>,
    #[serde(default)]
    metadata: ModelMetadata,
}

#[derive(Serialize, Deserialize)]
struct TopologyFile {
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "L")]
    l: usize,
    alphabets: Vec<Vec<Symbol>>,
    rhythm: Option<RhythmFile>,
}

#[derive(Serialize, Deserialize)]
struct RhythmFile {
    bins_per_cycle: usize,
}

fn to_file(model: &Model) -> ModelFile {
    let t = &model.topology;
    let mut params = Vec::new();
    let mut positions = Vec::new();
    for (key, v) in model.nonzero() {
        match key {
            ParamKey::Feature(f) => params.push((f.a, f.b, f.i, f.j, f.k, v)),
            ParamKey::Position { voice, symbol, position } => positions.push((voice, symbol, position, v)),
        }
    }
    ModelFile {
        version: MODEL_FORMAT_VERSION,
        topology: TopologyFile {
            n: t.voices(),
            k: t.scope(),
            l: t.cross_scope(),
            alphabets: t.alphabets().to_vec(),
            rhythm: t.rhythm().map(|r| RhythmFile { bins_per_cycle: r.bins_per_cycle }),
        },
        params,
        position_fields: t.rhythm().map(|_| positions),
        metadata: model.metadata.clone(),
    }
}

pub fn model_to_json(model: &Model) -> String {
    serde_json::to_string(&to_file(model)).expect("model serializes")
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    parse_model(&std::fs::read_to_string(path)?)
}

pub fn parse_model(text: &str) -> Result<Model> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(MODEL_FORMAT_VERSION) => {}
        Some(v) => return Err(Error::Version(v)),
        None => return Err(Error::Parse("model file has no integer \"version\"".into())),
    }
    let file: ModelFile = serde_json::from_value(value)?;
    let tf = file.topology;
    if tf.alphabets.len() != tf.n {
        return Err(Error::Validation(format!("n = {} but {} alphabets", tf.n, tf.alphabets.len())));
    }
    for (i, a) in tf.alphabets.iter().enumerate() {
        if a.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!("alphabet of voice {i} is not sorted and unique")));
        }
    }
    let rhythm = tf.rhythm.map(|r| Rhythm { bins_per_cycle: r.bins_per_cycle });
    let topology = Topology::new(tf.k, tf.l, tf.alphabets, rhythm)?;
    let mut model = Model::zeros(topology);
    model.metadata = file.metadata;

    let mut seen = BTreeSet::new();
    for (a, b, i, j, k, v) in file.params {
        let f = canonicalize(&model.topology, a, b, i, j, k)
            .map_err(|e| Error::Validation(format!("parameter ({a}, {b}, {i}, {j}, {k}): {e}")))?;
        if (f.a, f.b, f.i, f.j, f.k) != (a, b, i, j, k) {
            return Err(Error::Validation(format!("parameter ({a}, {b}, {i}, {j}, {k}) is not canonical")));
        }
        let off = model.topology.feature_offset(&f).ok_or_else(|| {
            Error::Validation(format!("parameter ({a}, {b}, {i}, {j}, {k}) is not in the layout"))
        })?;
        if !v.is_finite() || !seen.insert(off) {
            return Err(Error::Validation(format!("parameter ({a}, {b}, {i}, {j}, {k}) invalid or repeated")));
        }
        model.theta[off] = v;
    }
    match (model.topology.rhythm(), file.position_fields) {
        (Some(_), Some(fields)) => {
            for (voice, symbol, position, v) in fields {
                let off = model.topology.position_offset(voice, symbol, position).ok_or_else(|| {
                    Error::Validation(format!("position field ({voice}, {symbol}, {position}) outside topology"))
                })?;
                if !v.is_finite() || !seen.insert(off) {
                    return Err(Error::Validation(format!(
                        "position field ({voice}, {symbol}, {position}) invalid or repeated"
                    )));
                }
                model.theta[off] = v;
            }
        }
        (None, Some(f)) if !f.is_empty() => {
            return Err(Error::Validation("position_fields given without a rhythm topology".into()));
        }
        _ => {}
    }
    Ok(model)
}
