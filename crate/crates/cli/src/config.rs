//! Scenario configuration: one JSON document with a schema version.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use strata_core::explore::ExplorationConfig;
use strata_core::sim::{generate_maze, generate_plant, SimError, WorldFile, WorldModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    Version { path: PathBuf, found: u32 },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorldSource {
    /// World file; relative paths resolve against the config's directory.
    File { path: PathBuf },
    Maze {
        #[serde(default = "maze_dims")]
        dims_m: [f64; 3],
        #[serde(default = "maze_resolution")]
        resolution: f64,
        #[serde(default)]
        seed: u64,
    },
    Plant {
        #[serde(default = "plant_dims")]
        dims_m: [f64; 3],
        #[serde(default = "plant_resolution")]
        resolution: f64,
        #[serde(default)]
        seed: u64,
    },
}

pub fn maze_dims() -> [f64; 3] {
    [20.0, 10.0, 3.0]
}

pub fn maze_resolution() -> f64 {
    0.1
}

pub fn plant_dims() -> [f64; 3] {
    [30.0, 30.0, 24.0]
}

pub fn plant_resolution() -> f64 {
    0.2
}

impl WorldSource {
    /// Builds the world; `seed_offset` shifts generator seeds and is ignored
    /// for files.
    pub fn build(&self, seed_offset: u64) -> Result<WorldModel, SimError> {
        match self {
            WorldSource::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| SimError::InvalidWorld(format!("{}: {e}", path.display())))?;
                let wf: WorldFile = serde_json::from_str(&text)
                    .map_err(|e| SimError::InvalidWorld(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?;
                wf.to_world()
            }
            WorldSource::Maze { dims_m, resolution, seed } => {
                generate_maze(*dims_m, *resolution, seed.wrapping_add(seed_offset))
            }
            WorldSource::Plant { dims_m, resolution, seed } => {
                generate_plant(*dims_m, *resolution, seed.wrapping_add(seed_offset))
            }
        }
    }

    /// One-line provenance for reports. Generated worlds are stand-ins for
    /// the reference maze and plant environments.
    pub fn describe(&self) -> String {
        let dims = |d: &[f64; 3]| format!("{}x{}x{} m", d[0], d[1], d[2]);
        match self {
            WorldSource::File { path } => format!("file {}", path.display()),
            WorldSource::Maze { dims_m, resolution, .. } => {
                format!("generated maze stand-in, {} at {resolution} m", dims(dims_m))
            }
            WorldSource::Plant { dims_m, resolution, .. } => {
                format!("generated plant stand-in, {} at {resolution} m", dims(dims_m))
            }
        }
    }

    pub fn is_generated(&self) -> bool {
        !matches!(self, WorldSource::File { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub world: WorldSource,
    #[serde(default)]
    pub exploration: ExplorationConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Version { path: path.to_path_buf(), found: cfg.schema_version });
        }
        cfg.exploration
            .validate()
            .map_err(|e| ConfigError::Invalid { path: path.to_path_buf(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let WorldSource::File { path: p } = &mut cfg.world {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(d) = &mut cfg.output_dir {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, path)
    }

    /// Output directory: the override, then the config's, then `out`.
    pub fn output_dir(&self, over: Option<&Path>) -> PathBuf {
        over.map(Path::to_path_buf).or_else(|| self.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ScenarioConfig, ConfigError> {
        ScenarioConfig::parse(s, Path::new("/cfg/scenario.json"))
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse(r#"{"schema_version": 1, "world": {"kind": "maze", "seed": 3}}"#).unwrap();
        assert_eq!(c.exploration, ExplorationConfig::default());
        assert_eq!(c.world, WorldSource::Maze { dims_m: maze_dims(), resolution: 0.1, seed: 3 });
        assert_eq!(c.world.describe(), "generated maze stand-in, 20x10x3 m at 0.1 m");
        assert_eq!(c.output_dir(None), PathBuf::from("out"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse(r#"{"schema_version": 1, "world": {"kind": "maze"}, "extra": 1}"#).unwrap_err();
        assert!(matches!(e, ConfigError::Parse { .. }));
        let e = parse(r#"{"schema_version": 1, "world": {"kind": "maze", "size": 2}}"#).unwrap_err();
        assert!(matches!(e, ConfigError::Parse { .. }));
        let e = parse(r#"{"schema_version": 1, "world": {"kind": "maze"}, "exploration": {"omission": {"nref": 4}}}"#)
            .unwrap_err();
        assert!(matches!(e, ConfigError::Parse { .. }));
    }

    #[test]
    fn parse_errors_carry_line_and_column() {
        let e = parse("{\n  \"schema_version\": 1,\n  \"world\": oops\n}").unwrap_err();
        match e {
            ConfigError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
        assert!(e_string("{\n\n x").starts_with("/cfg/scenario.json:3:"));
    }

    fn e_string(s: &str) -> String {
        parse(s).unwrap_err().to_string()
    }

    #[test]
    fn version_and_values_are_checked() {
        let e = parse(r#"{"schema_version": 2, "world": {"kind": "maze"}}"#).unwrap_err();
        assert!(matches!(e, ConfigError::Version { found: 2, .. }));
        let e = parse(r#"{"schema_version": 1, "world": {"kind": "maze"}, "exploration": {"dt": -1.0}}"#).unwrap_err();
        assert!(matches!(e, ConfigError::Invalid { .. }));
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let c = parse(r#"{"schema_version": 1, "world": {"kind": "file", "path": "w.json"}, "output_dir": "res"}"#)
            .unwrap();
        assert_eq!(c.world, WorldSource::File { path: PathBuf::from("/cfg/w.json") });
        assert_eq!(c.output_dir(None), PathBuf::from("/cfg/res"));
        assert_eq!(c.output_dir(Some(Path::new("/x"))), PathBuf::from("/x"));
    }
}
