use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tunalab::edits::ModelSet;
use tunalab::generator::GeneratorBundle;
use tunalab::latent::{FeatureModel, FEATURE_MODEL_MAGIC};

use crate::CliError;

pub const MODEL_DIR_ENV: &str = "TUNALAB_MODEL_DIR";
/// Bundle name looked up in the model directory when --model is absent.
pub const DEFAULT_BUNDLE_NAME: &str = "generator.tuna";
pub const DEFAULT_MAX_BODY_BYTES: usize = 4 << 20;
pub const DEFAULT_PORT: u16 = 8080;

fn model_dir() -> Option<PathBuf> {
    std::env::var_os(MODEL_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// Relative paths missing from the working directory are looked up in the
/// model directory.
pub fn resolve(path: &Path) -> PathBuf {
    if path.is_absolute() || path.exists() {
        return path.to_path_buf();
    }
    match model_dir() {
        Some(dir) if dir.join(path).exists() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

pub fn bundle_path(flag: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    match flag {
        Some(p) => Ok(resolve(p)),
        None => model_dir()
            .map(|d| d.join(DEFAULT_BUNDLE_NAME))
            .ok_or_else(|| CliError::Usage(format!("missing required flag --model (or set {MODEL_DIR_ENV})"))),
    }
}

pub fn load_bundle(path: &Path) -> Result<GeneratorBundle, CliError> {
    GeneratorBundle::load(path).map_err(|e| CliError::Runtime(format!("cannot load bundle {}: {e}", path.display())))
}

pub fn load_feature_model(path: &Path) -> Result<FeatureModel, CliError> {
    let p = resolve(path);
    FeatureModel::load(&p).map_err(|e| CliError::Runtime(format!("cannot load feature model {}: {e}", p.display())))
}

/// Feature-model files in the model directory, by magic, in name order.
fn scan_model_dir() -> Vec<PathBuf> {
    let Some(dir) = model_dir() else { return Vec::new() };
    let Ok(entries) = fs::read_dir(dir) else {
        return Vec::new();
    };
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| fs::read(p).map(|b| b.starts_with(FEATURE_MODEL_MAGIC)).unwrap_or(false))
        .collect();
    out.sort();
    out
}

/// Loads the given feature models, or every one in the model directory
/// when none are given.
pub fn load_model_set(paths: &[PathBuf]) -> Result<ModelSet, CliError> {
    let paths = if paths.is_empty() {
        scan_model_dir()
    } else {
        paths.to_vec()
    };
    if paths.is_empty() {
        return Err(CliError::Usage("missing required flag --fm".into()));
    }
    Ok(ModelSet::new(
        paths.iter().map(|p| load_feature_model(p)).collect::<Result<_, _>>()?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub model: Option<PathBuf>,
    pub feature_models: Vec<PathBuf>,
    pub max_body_bytes: usize,
    /// Seeds requests that carry none; each such request logs the seed it drew.
    pub server_seed: u64,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            model: None,
            feature_models: Vec::new(),
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
            server_seed: 0,
            static_dir: None,
        }
    }
}

impl ServiceConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.port == 0 {
            return Err(CliError::Usage("port must lie in [1, 65535]".into()));
        }
        if self.max_body_bytes == 0 {
            return Err(CliError::Usage("max body bytes must be positive".into()));
        }
        if let Some(d) = &self.static_dir {
            if !d.is_dir() {
                return Err(CliError::Usage(format!(
                    "static directory {} does not exist",
                    d.display()
                )));
            }
        }
        Ok(())
    }
}
