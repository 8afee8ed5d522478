use std::path::Path;

use serde::{Deserialize, Serialize};
use unobstruct::agents::{AgentOptions, NoiseSpec};
use unobstruct::gen::GenConfig;
use unobstruct::graph::DEFAULT_PATH_CAP;
use unobstruct::rewards::RewardConfig;
use unobstruct::trace::DEFAULT_RESOLVE_RADIUS;
use unobstruct::vqa::Cues;
use unobstruct::{Error, GeometryConfig, Result};

/// Defaults for every command, read from a TOML file. Flags override it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    /// Radius in pixels for resolving natural-language mentions.
    pub radius: f64,
    pub path_cap: usize,
    pub geometry: GeometryConfig,
    pub gen: GenConfig,
    pub cues: Cues,
    pub reward: RewardConfig,
    pub noise: NoiseSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            jobs: 0,
            radius: DEFAULT_RESOLVE_RADIUS,
            path_cap: DEFAULT_PATH_CAP,
            geometry: GeometryConfig::default(),
            gen: GenConfig::default(),
            cues: Cues::default(),
            reward: RewardConfig::default(),
            noise: NoiseSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| Error::Validation(format!("config {}: {}", path.display(), e.message())))
    }

    pub fn agent_options(&self) -> AgentOptions {
        AgentOptions {
            geometry: self.geometry,
            cues: self.cues,
            path_cap: self.path_cap,
        }
    }

    /// Generator config sharing the global geometry and path cap.
    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            geometry: self.geometry,
            path_cap: self.path_cap,
            ..self.gen.clone()
        }
    }
}
