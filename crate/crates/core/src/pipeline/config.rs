use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::Aggregation;
use crate::deformance::DeformanceKind;
use crate::genbridge::{GenerationConfig, DEFAULT_DIM};
use crate::metrics::ScoreOptions;

/// Input files. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub mrc: Option<PathBuf>,
    pub mrc_layout: Option<PathBuf>,
    /// Keep MRC rows without imageability or concreteness.
    pub mrc_include_all: bool,
    pub brysbaert: Option<PathBuf>,
    /// A ready canonical lexicon, used instead of the raw sources.
    pub lexicon: Option<PathBuf>,
    pub poems: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    pub news: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareConfig {
    pub captions: usize,
    pub news: usize,
    /// Also emit one prompt per rated lexicon word.
    pub words: bool,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            captions: 5000,
            news: 5000,
            words: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeformConfig {
    pub kinds: Vec<DeformanceKind>,
}

impl Default for DeformConfig {
    fn default() -> Self {
        Self {
            kinds: DeformanceKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    /// `mock`, `stdio:<command>` or `tcp:<host:port>`.
    pub spec: String,
    pub dim: usize,
    pub retries: u32,
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            spec: "mock".into(),
            dim: DEFAULT_DIM,
            retries: 3,
            backoff_ms: 250,
            max_in_flight: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub q: f64,
    pub svg: bool,
    pub aggregation: Aggregation,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            q: 0.10,
            svg: true,
            aggregation: Aggregation::MeanOfPairs,
        }
    }
}

/// One declarative run. Serialized into the header of every text output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub inputs: Inputs,
    pub prepare: PrepareConfig,
    pub deform: DeformConfig,
    pub generation: GenerationConfig,
    pub backend: BackendConfig,
    pub score: ScoreOptions,
    pub report: ReportConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("run"),
            inputs: Inputs::default(),
            prepare: PrepareConfig::default(),
            deform: DeformConfig::default(),
            generation: GenerationConfig::default(),
            backend: BackendConfig::default(),
            score: ScoreOptions::default(),
            report: ReportConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, String> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        config.base_dir = base_dir.to_path_buf();
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.resolve(&self.out_dir).join(name)
    }

    /// Single-line JSON form written into output headers.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), String> {
        self.generation.validate()?;
        if self.backend.dim == 0 {
            return Err("backend.dim must be positive".into());
        }
        if self.score.k_nn == 0 {
            return Err("score.k_nn must be at least 1".into());
        }
        if !(self.report.q > 0.0 && self.report.q <= 0.5) {
            return Err(format!("report.q = {} outside (0, 0.5]", self.report.q));
        }
        self.backend
            .spec
            .parse::<crate::genbridge::BackendSpec>()
            .map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_partial_files() {
        let config = RunConfig::from_toml_str(
            "seed = 7\n[generation]\nn_images = 4\n[deform]\nkinds = [\"backward\", \"just-nouns\"]\n",
            Path::new("/cfg"),
        )
        .unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.generation.n_images, 4);
        assert_eq!(config.generation.cond_scale, 3);
        assert_eq!(
            config.deform.kinds,
            [DeformanceKind::Backward, DeformanceKind::JustNouns]
        );
        assert_eq!(
            config.out("scores.tsv"),
            PathBuf::from("/cfg/run/scores.tsv")
        );
        assert!(config.validate().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("sede = 1\n", Path::new(".")).is_err());
        let bad =
            RunConfig::from_toml_str("[backend]\nspec = \"grpc:x\"\n", Path::new(".")).unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn json_header_is_stable() {
        let a = RunConfig::default();
        let b = RunConfig {
            base_dir: PathBuf::from("/elsewhere"),
            ..RunConfig::default()
        };
        assert_eq!(a.to_json(), b.to_json());
        assert!(!a.to_json().contains('\n'));
    }
}
