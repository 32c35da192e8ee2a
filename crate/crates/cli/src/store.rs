//! Content-addressed model directory. A model's id is the first 16 hex
//! digits of the SHA-256 of its file bytes; any `*.json` file in the
//! directory that parses as a model is served.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use polymax::model::{model_to_json, parse_model, Model};
use polymax::{Result, Symbol};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn content_id(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
struct Entry {
    path: PathBuf,
    model: Arc<Model>,
}

/// What `GET /models` reports per model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub id: String,
    pub file: String,
    pub voices: usize,
    #[serde(rename = "K")]
    pub scope: usize,
    #[serde(rename = "L")]
    pub cross_scope: usize,
    pub alphabets: Vec<Vec<Symbol>>,
    pub bins_per_cycle: Option<usize>,
    pub lambda: Option<f64>,
    pub mode: Option<polymax::corpus::Mode>,
    pub nonzero: usize,
}

#[derive(Debug)]
pub struct ModelStore {
    dir: PathBuf,
    entries: RwLock<BTreeMap<String, Entry>>,
}

impl ModelStore {
    /// Opens (creating if needed) and scans a model directory.
    pub fn open(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let store = Self { dir: dir.to_path_buf(), entries: RwLock::new(BTreeMap::new()) };
        store.rescan()?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Picks up files added since the last scan. Files that do not parse as
    /// models are ignored.
    pub fn rescan(&self) -> Result<()> {
        let mut found = Vec::new();
        for entry in std::fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") && path.is_file() {
                let bytes = std::fs::read(&path)?;
                found.push((content_id(&bytes), path, bytes));
            }
        }
        let mut entries = self.entries.write().expect("model store lock");
        entries.retain(|_, e| e.path.exists());
        for (id, path, bytes) in found {
            if entries.contains_key(&id) {
                continue;
            }
            let Ok(text) = std::str::from_utf8(&bytes) else { continue };
            if let Ok(model) = parse_model(text) {
                entries.insert(id, Entry { path, model: Arc::new(model) });
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<Arc<Model>> {
        if let Some(e) = self.entries.read().expect("model store lock").get(id) {
            return Some(e.model.clone());
        }
        self.rescan().ok()?;
        self.entries.read().expect("model store lock").get(id).map(|e| e.model.clone())
    }

    pub fn list(&self) -> Result<Vec<ModelSummary>> {
        self.rescan()?;
        let entries = self.entries.read().expect("model store lock");
        Ok(entries
            .iter()
            .map(|(id, e)| {
                let t = &e.model.topology;
                ModelSummary {
                    id: id.clone(),
                    file: e.path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
                    voices: t.voices(),
                    scope: t.scope(),
                    cross_scope: t.cross_scope(),
                    alphabets: t.alphabets().to_vec(),
                    bins_per_cycle: t.rhythm().map(|r| r.bins_per_cycle),
                    lambda: e.model.metadata.lambda,
                    mode: e.model.metadata.mode,
                    nonzero: e.model.count_nonzero(),
                }
            })
            .collect())
    }

    /// Writes `<id>.json` (unless already present) and returns the id and path.
    pub fn insert(&self, model: &Model) -> Result<(String, PathBuf)> {
        let json = model_to_json(model);
        let id = content_id(json.as_bytes());
        let path = self.dir.join(format!("{id}.json"));
        if !path.exists() {
            let tmp = self.dir.join(format!(".{id}.json.tmp"));
            std::fs::write(&tmp, &json)?;
            std::fs::rename(&tmp, &path)?;
        }
        self.entries
            .write()
            .expect("model store lock")
            .insert(id.clone(), Entry { path: path.clone(), model: Arc::new(model.clone()) });
        Ok((id, path))
    }
}
