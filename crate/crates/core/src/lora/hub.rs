//! On-disk plugin hub: a directory of `<id>.fsql` files plus `index.json`.
//!
//! Writes go through `&mut self` and replace files by rename, so a single
//! writer never leaves a half-written plugin or index behind. Readers only
//! need `&self`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::format::{decode_plugin, encode_plugin};
use super::{LoraError, LoraPlugin};

const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub plugin_id: String,
    pub base_model_id: String,
    pub domain: String,
    pub rank: usize,
    pub layers: Vec<String>,
    /// CRC32 of the plugin file body, as stored in its trailer.
    pub checksum: u32,
}

#[derive(Debug)]
pub struct PluginHub {
    root: PathBuf,
    index: BTreeMap<String, IndexEntry>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LoraError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| LoraError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| LoraError::io(path, e))
}

fn check_id(id: &str) -> Result<(), LoraError> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(LoraError::ShapeViolation(format!(
            "plugin id `{id}` must be ASCII letters, digits, `_`, `-` or `.`"
        )))
    }
}

impl PluginHub {
    /// Opens the hub at `root`, creating an empty one if absent.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, LoraError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| LoraError::io(&root, e))?;
        let index_path = root.join(INDEX_FILE);
        let index = if index_path.exists() {
            let text = fs::read_to_string(&index_path).map_err(|e| LoraError::io(&index_path, e))?;
            serde_json::from_str(&text).map_err(|e| LoraError::Format(format!("index: {e}")))?
        } else {
            BTreeMap::new()
        };
        Ok(Self { root, index })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn plugin_path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}.fsql"))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Writes the plugin file and records it in the index, replacing any
    /// plugin with the same id.
    pub fn save(&mut self, plugin: &LoraPlugin) -> Result<IndexEntry, LoraError> {
        check_id(&plugin.plugin_id)?;
        let bytes = encode_plugin(plugin)?;
        let checksum = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
        write_atomic(&self.plugin_path(&plugin.plugin_id), &bytes)?;
        let entry = IndexEntry {
            plugin_id: plugin.plugin_id.clone(),
            base_model_id: plugin.base_model_id.clone(),
            domain: plugin.domain.clone(),
            rank: plugin.rank,
            layers: plugin.layers.keys().cloned().collect(),
            checksum,
        };
        self.index.insert(plugin.plugin_id.clone(), entry.clone());
        let text = serde_json::to_string_pretty(&self.index).map_err(|e| LoraError::Format(e.to_string()))?;
        write_atomic(&self.root.join(INDEX_FILE), text.as_bytes())?;
        Ok(entry)
    }

    pub fn load(&self, id: &str) -> Result<LoraPlugin, LoraError> {
        let entry = self
            .index
            .get(id)
            .ok_or_else(|| LoraError::UnknownPlugin(id.to_string()))?;
        let path = self.plugin_path(id);
        let bytes = fs::read(&path).map_err(|e| LoraError::io(&path, e))?;
        let plugin = decode_plugin(&bytes)?;
        let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
        if stored != entry.checksum {
            return Err(LoraError::ChecksumMismatch {
                stored: entry.checksum,
                computed: stored,
            });
        }
        if plugin.plugin_id != id {
            return Err(LoraError::Format(format!("file for `{id}` holds `{}`", plugin.plugin_id)));
        }
        Ok(plugin)
    }

    /// Index entries ordered by id, optionally filtered.
    pub fn list(&self, domain: Option<&str>, base_model_id: Option<&str>) -> Vec<&IndexEntry> {
        self.index
            .values()
            .filter(|e| domain.is_none_or(|d| e.domain == d))
            .filter(|e| base_model_id.is_none_or(|b| e.base_model_id == b))
            .collect()
    }
}
