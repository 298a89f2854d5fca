use std::fs;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use crisisflow_core::analysis::DEFAULT_STATE_SPACE_CAP;
use crisisflow_core::plan::{parse_plan, Plan, PlanError};
use thiserror::Error;

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub bind: IpAddr,
    pub port: u16,
    /// Extra plan documents (`*.json`) loaded next to the built-in plan.
    pub plan_dir: Option<PathBuf>,
    /// Where logs of completed cases are written as CSV.
    pub log_dir: Option<PathBuf>,
    pub state_space_cap: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            plan_dir: None,
            log_dir: None,
            state_space_cap: DEFAULT_STATE_SPACE_CAP,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("port must be in 1..=65535, got {0}")]
    Port(u16),
    #[error("state-space cap must be positive")]
    Cap,
    #[error("cannot read plan directory {path}: {source}")]
    PlanDir {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("plan file {path}: {source}")]
    PlanFile { path: PathBuf, source: PlanError },
    #[error("plan {id}: {message}")]
    Plan { id: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.port == 0 {
            return Err(ConfigError::Port(self.port));
        }
        if self.state_space_cap == 0 {
            return Err(ConfigError::Cap);
        }
        Ok(())
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }

    /// Parses every `*.json` file of the plan directory in name order.
    pub fn load_plans(&self) -> Result<Vec<Plan>, ConfigError> {
        match &self.plan_dir {
            Some(dir) => load_plan_dir(dir),
            None => Ok(Vec::new()),
        }
    }
}

pub fn load_plan_dir(dir: &Path) -> Result<Vec<Plan>, ConfigError> {
    let entries = fs::read_dir(dir).map_err(|source| ConfigError::PlanDir {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let text = fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            parse_plan(&text).map_err(|source| ConfigError::PlanFile { path, source })
        })
        .collect()
}
