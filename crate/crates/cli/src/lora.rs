use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Subcommand;
use finsql_core::lora::{decode_plugin, delta_forward, encode_plugin, merge, LoraPlugin, MergeSpec, PluginHub};
use serde::Serialize;

use crate::output::{print_json, read_json, write_atomic};

#[derive(Subcommand)]
pub enum LoraCommand {
    /// Merge hub plugins by weighted factor sums.
    Merge {
        /// JSON `{entries: [{plugin_id, weight}], output_id?}`.
        #[arg(long)]
        spec: PathBuf,
        /// Destination plugin file.
        #[arg(long)]
        out: PathBuf,
        /// Replace all weights with 1/n.
        #[arg(long)]
        average: bool,
        /// Also store the result in the hub.
        #[arg(long)]
        save: bool,
    },
    /// List hub plugins, optionally filtered.
    List {
        #[arg(long)]
        domain: Option<String>,
        #[arg(long)]
        base_model: Option<String>,
    },
    /// Check a plugin file's checksum and factor shapes.
    Verify {
        file: PathBuf,
    },
    /// Print the adapter delta for one input vector.
    Forward {
        /// Plugin file.
        #[arg(long)]
        plugin: PathBuf,
        #[arg(long)]
        layer: String,
        /// JSON array of input values.
        #[arg(long)]
        x_file: PathBuf,
    },
    /// Import a plugin (JSON description or binary file) into the hub.
    Add {
        plugin: PathBuf,
    },
}

#[derive(Serialize)]
struct PluginSummary<'a> {
    plugin_id: &'a str,
    base_model_id: &'a str,
    domain: &'a str,
    rank: usize,
    layers: Vec<LayerSummary<'a>>,
    checksum: u32,
}

#[derive(Serialize)]
struct LayerSummary<'a> {
    name: &'a str,
    a: [usize; 2],
    b: [usize; 2],
}

fn summary<'a>(plugin: &'a LoraPlugin, bytes: &[u8]) -> PluginSummary<'a> {
    let trailer: [u8; 4] = bytes[bytes.len() - 4..].try_into().expect("trailer length");
    PluginSummary {
        plugin_id: &plugin.plugin_id,
        base_model_id: &plugin.base_model_id,
        domain: &plugin.domain,
        rank: plugin.rank,
        layers: plugin
            .layers
            .iter()
            .map(|(name, f)| LayerSummary {
                name,
                a: f.a.shape(),
                b: f.b.shape(),
            })
            .collect(),
        checksum: u32::from_le_bytes(trailer),
    }
}

fn read_plugin_file(path: &Path) -> anyhow::Result<(LoraPlugin, Vec<u8>)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let plugin = decode_plugin(&bytes).with_context(|| format!("decoding {}", path.display()))?;
    Ok((plugin, bytes))
}

pub fn run(hub_root: &Path, command: LoraCommand) -> anyhow::Result<()> {
    match command {
        LoraCommand::Merge { spec, out, average, save } => {
            let mut spec: MergeSpec = read_json(&spec)?;
            if average {
                spec = spec.averaged();
            }
            let mut hub = PluginHub::open(hub_root)?;
            let merged = merge(&spec, &hub)?;
            let bytes = encode_plugin(&merged)?;
            write_atomic(&out, &bytes)?;
            if save {
                hub.save(&merged)?;
            }
            print_json(&summary(&merged, &bytes))
        }
        LoraCommand::List { domain, base_model } => {
            let hub = PluginHub::open(hub_root)?;
            print_json(&hub.list(domain.as_deref(), base_model.as_deref()))
        }
        LoraCommand::Verify { file } => {
            let (plugin, bytes) = read_plugin_file(&file)?;
            plugin.validate()?;
            print_json(&summary(&plugin, &bytes))
        }
        LoraCommand::Forward { plugin, layer, x_file } => {
            let (plugin, _) = read_plugin_file(&plugin)?;
            let x: Vec<f32> = read_json(&x_file)?;
            print_json(&delta_forward(&plugin, &layer, &x)?)
        }
        LoraCommand::Add { plugin } => {
            let parsed = if plugin.extension().is_some_and(|e| e == "json") {
                let p: LoraPlugin = read_json(&plugin)?;
                p.validate()?;
                p
            } else {
                read_plugin_file(&plugin)?.0
            };
            let mut hub = PluginHub::open(hub_root)?;
            if hub.contains(&parsed.plugin_id) {
                bail!("hub already holds plugin {:?}", parsed.plugin_id);
            }
            print_json(&hub.save(&parsed)?)
        }
    }
}
