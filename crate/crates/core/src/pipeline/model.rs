use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};
use crate::format::write_text;
use crate::net::{load_mlp, save_mlp, Mlp};

use super::SpeakerStats;

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_FORMAT: &str = "cyclevc-manifest";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "cyclegan")]
    CycleGan,
    #[serde(rename = "gan-parallel")]
    GanParallel,
    #[serde(rename = "mse-parallel")]
    MseParallel,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::CycleGan, Method::GanParallel, Method::MseParallel];

    pub fn name(self) -> &'static str {
        match self {
            Method::CycleGan => "cyclegan",
            Method::GanParallel => "gan-parallel",
            Method::MseParallel => "mse-parallel",
        }
    }

    pub fn default_epochs(self) -> usize {
        match self {
            Method::CycleGan | Method::GanParallel => 400,
            Method::MseParallel => 60,
        }
    }

    pub fn is_parallel(self) -> bool {
        self != Method::CycleGan
    }

    pub fn roles(self) -> &'static [Role] {
        match self {
            Method::CycleGan => &[Role::G, Role::F, Role::DX, Role::DY],
            Method::GanParallel => &[Role::G, Role::D],
            Method::MseParallel => &[Role::G],
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?} (cyclegan|gan-parallel|mse-parallel)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    G,
    F,
    #[serde(rename = "D_X")]
    DX,
    #[serde(rename = "D_Y")]
    DY,
    D,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::G => "G",
            Role::F => "F",
            Role::DX => "D_X",
            Role::DY => "D_Y",
            Role::D => "D",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub role: Role,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsFiles {
    pub source_norm: String,
    pub source_logf0: String,
    pub target_norm: String,
    pub target_logf0: String,
}

impl Default for StatsFiles {
    fn default() -> Self {
        Self {
            source_norm: "source_norm.txt".into(),
            source_logf0: "source_logf0.txt".into(),
            target_norm: "target_norm.txt".into(),
            target_logf0: "target_logf0.txt".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub method: Method,
    pub feature_dim: usize,
    pub networks: Vec<NetworkEntry>,
    pub stats: StatsFiles,
    pub loss_history: String,
    /// Trainer configuration as used for this run.
    pub config: serde_json::Value,
}

/// A model directory loaded back into memory.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub manifest: Manifest,
    pub networks: BTreeMap<Role, Mlp>,
    pub source: SpeakerStats,
    pub target: SpeakerStats,
}

impl TrainedModel {
    pub fn method(&self) -> Method {
        self.manifest.method
    }

    pub fn network(&self, role: Role) -> Result<&Mlp> {
        self.networks
            .get(&role)
            .ok_or_else(|| Error::InvalidArgument(format!("model has no {} network", role.name())))
    }
}

/// Writes each network as `<role>.json`, copies both speakers' statistics
/// and writes the manifest. The loss history file is written by the caller.
pub fn save_model(
    dir: &Path,
    method: Method,
    config: serde_json::Value,
    networks: &[(Role, &Mlp)],
    source: &SpeakerStats,
    target: &SpeakerStats,
) -> Result<Manifest> {
    for role in method.roles() {
        if !networks.iter().any(|(r, _)| r == role) {
            return Err(Error::InvalidArgument(format!(
                "{method} model needs a {} network",
                role.name()
            )));
        }
    }
    let feature_dim = networks[0].1.input_dim();
    fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    let mut entries = Vec::with_capacity(networks.len());
    for &(role, net) in networks {
        let file = format!("{}.json", role.name());
        save_mlp(dir.join(&file), net)?;
        entries.push(NetworkEntry { role, file });
    }
    let stats = StatsFiles::default();
    source.write(&dir.join(&stats.source_norm), &dir.join(&stats.source_logf0))?;
    target.write(&dir.join(&stats.target_norm), &dir.join(&stats.target_logf0))?;
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        method,
        feature_dim,
        networks: entries,
        stats,
        loss_history: "loss.csv".into(),
        config,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_text(dir.join(MANIFEST_FILE), &text)?;
    Ok(manifest)
}

pub fn load_model(dir: &Path) -> Result<TrainedModel> {
    let path = dir.join(MANIFEST_FILE);
    let text = crate::format::read_text(&path)?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(&path))?;
    if manifest.format != MANIFEST_FORMAT || manifest.version != MANIFEST_VERSION {
        return Err(Error::Format(format!(
            "unsupported manifest {:?} version {}",
            manifest.format, manifest.version
        ))
        .in_file(&path));
    }
    let mut networks = BTreeMap::new();
    for entry in &manifest.networks {
        let net = load_mlp(dir.join(&entry.file))?;
        if net.input_dim() != manifest.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: manifest.feature_dim,
                actual: net.input_dim(),
                context: "network input width",
            })
            .in_file(dir.join(&entry.file));
        }
        networks.insert(entry.role, net);
    }
    for role in manifest.method.roles() {
        if !networks.contains_key(role) {
            return Err(Error::Format(format!("manifest lists no {} network", role.name())).in_file(&path));
        }
    }
    let s = &manifest.stats;
    let source = SpeakerStats::read(&dir.join(&s.source_norm), &dir.join(&s.source_logf0))?;
    let target = SpeakerStats::read(&dir.join(&s.target_norm), &dir.join(&s.target_logf0))?;
    for stats in [&source, &target] {
        if stats.norm.dim() != manifest.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: manifest.feature_dim,
                actual: stats.norm.dim(),
                context: "model normalization stats",
            });
        }
    }
    Ok(TrainedModel {
        manifest,
        networks,
        source,
        target,
    })
}
