//! Scenario runner for the cislunar clock-network simulator.
//!
//! A scenario is a TOML document (grammar in `docs/scenario-format.md`).
//! Each subcommand turns one scenario into a directory of CSV and JSON
//! artifacts; identical scenario and seed give identical bytes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod output;
pub mod scenario;
pub mod summary;

use std::path::Path;

use serde_json::json;
use thiserror::Error;

pub use scenario::{parse_scenario, render_scenario, Scenario, ScenarioError};
pub use summary::{parse_summary, Summary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Sim(#[from] cislunar_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 1 for anything wrong with the inputs, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Scenario(_) | CliError::Usage(_) => 1,
            CliError::Sim(_) | CliError::Io { .. } | CliError::Output(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Scenario(ScenarioError::Syntax { .. }) => "syntax",
            CliError::Scenario(ScenarioError::Semantic { .. }) => "config",
            CliError::Usage(_) => "usage",
            CliError::Sim(_) => "simulation",
            CliError::Io { .. } => "io",
            CliError::Output(_) => "output",
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        let mut body = json!({
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Scenario(e) = self {
            if let Some(line) = e.line() {
                body["line"] = json!(line);
            }
            if let Some(key) = e.key() {
                body["key"] = json!(key);
            }
        }
        json!({ "error": body }).to_string()
    }
}
