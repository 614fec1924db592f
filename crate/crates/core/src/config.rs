//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guidance::GuidanceMode;
use crate::pipeline::{DEFAULT_CFG_OMEGA, DEFAULT_OMEGA_I, DEFAULT_STEPS};
use crate::schedule::ScheduleParams;
use crate::startpoint::{StartpointKind, StartpointSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Invert,
    Sample,
    Transfer,
    Ablate,
    Sweep,
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Invert => "invert",
            Command::Sample => "sample",
            Command::Transfer => "transfer",
            Command::Ablate => "ablate",
            Command::Sweep => "sweep",
            Command::Selftest => "selftest",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
            Error::Config {
                message: format!("unknown command {s:?}"),
                line: 0,
                column: 0,
            }
        })
    }
}

/// Guidance for the standalone `invert` and `sample` commands. Conditions are
/// named by model label; an absent label means the null condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GuidanceSpec {
    pub mode: GuidanceMode,
    pub omega: f64,
    pub omega_i: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub positive_label: Option<String>,
    pub negative_label: Option<String>,
}

impl Default for GuidanceSpec {
    fn default() -> Self {
        Self {
            mode: GuidanceMode::None,
            omega: DEFAULT_CFG_OMEGA,
            omega_i: DEFAULT_OMEGA_I,
            omega_plus: 1.0,
            omega_minus: 0.0,
            positive_label: None,
            negative_label: None,
        }
    }
}

fn default_startpoint() -> StartpointSpec {
    StartpointSpec::default()
}

fn default_sigmas() -> Vec<f64> {
    vec![0.1, 0.2, 0.3, 0.5]
}

fn default_alphas() -> Vec<f64> {
    vec![0.3, 0.5, 0.7, 0.9, 1.0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("ssp-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub model_file: Option<PathBuf>,
    #[serde(default)]
    pub schedule: ScheduleParams,
    #[serde(default)]
    pub content: Option<PathBuf>,
    #[serde(default)]
    pub style: Option<PathBuf>,
    /// Clean latent for `invert`, startpoint for `sample`.
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// Model label whose embedding is the positive condition; defaults to the first label.
    #[serde(default)]
    pub positive_label: Option<String>,
    #[serde(default)]
    pub guidance: GuidanceSpec,
    #[serde(default = "omega_i")]
    pub omega_i: f64,
    #[serde(default = "cfg_omega")]
    pub cfg_omega: f64,
    #[serde(default = "default_startpoint")]
    pub startpoint: StartpointSpec,
    #[serde(default = "steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "all_kinds")]
    pub kinds: Vec<StartpointKind>,
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
}

fn omega_i() -> f64 {
    DEFAULT_OMEGA_I
}

fn cfg_omega() -> f64 {
    DEFAULT_CFG_OMEGA
}

fn steps() -> usize {
    DEFAULT_STEPS
}

fn all_kinds() -> Vec<StartpointKind> {
    StartpointKind::ALL.to_vec()
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    serde_json::from_str(text).map_err(|e| Error::Config {
        message: e.to_string(),
        line: e.line(),
        column: e.column(),
    })
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingInput(path.display().to_string()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_config(&text)
}

impl RunConfig {
    /// A config with every default filled in.
    pub fn for_command(command: Command) -> Self {
        parse_config(&format!("{{\"command\":\"{}\"}}", command.name())).expect("defaults parse")
    }

    fn required(&self, field: &'static str, value: &Option<PathBuf>) -> Result<PathBuf> {
        value.clone().ok_or_else(|| Error::Config {
            message: format!("`{}` needs `{field}`", self.command.name()),
            line: 0,
            column: 0,
        })
    }

    pub fn model_path(&self) -> Result<PathBuf> {
        self.required("model_file", &self.model_file)
    }

    pub fn content_path(&self) -> Result<PathBuf> {
        self.required("content", &self.content)
    }

    pub fn style_path(&self) -> Result<PathBuf> {
        self.required("style", &self.style)
    }

    pub fn input_path(&self) -> Result<PathBuf> {
        self.required("input", &self.input)
    }

    /// Checks that every file the command reads is present.
    pub fn check_inputs(&self) -> Result<()> {
        let needed: Vec<PathBuf> = match self.command {
            Command::Selftest => vec![],
            Command::Invert => vec![self.model_path()?, self.input_path()?],
            Command::Sample => {
                let mut v = vec![self.model_path()?];
                v.extend(self.input.clone());
                v
            }
            Command::Transfer | Command::Ablate | Command::Sweep => {
                vec![self.model_path()?, self.content_path()?, self.style_path()?]
            }
        };
        for p in needed {
            if !p.is_file() {
                return Err(Error::MissingInput(p.display().to_string()));
            }
        }
        if self.command == Command::Ablate && self.kinds.is_empty() {
            return Err(Error::Config {
                message: "`kinds` is empty".into(),
                line: 0,
                column: 0,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_required() {
        assert!(matches!(parse_config("{}"), Err(Error::Config { .. })));
    }

    #[test]
    fn defaults_filled() {
        let c = parse_config(r#"{"command":"transfer"}"#).unwrap();
        assert_eq!(c.omega_i, 1.5);
        assert_eq!(c.cfg_omega, 5.0);
        assert_eq!(c.steps, 50);
        assert_eq!(c.startpoint.alpha, 0.7);
        assert_eq!(c.kinds.len(), 6);
        assert_eq!(c, RunConfig::for_command(Command::Transfer));
    }

    #[test]
    fn unknown_key_and_position() {
        let e = parse_config("{\"command\":\"transfer\",\n \"omega\": 2}").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }), "{e}");
        let e = parse_config("{\"command\": \n\n  tranfer}").unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }), "{e}");
    }

    #[test]
    fn command_names_parse() {
        assert_eq!("ablate".parse::<Command>().unwrap(), Command::Ablate);
        assert!("fly".parse::<Command>().is_err());
    }
}
