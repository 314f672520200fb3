//! Layered configuration: defaults, then a TOML file, then command-line
//! flags, then `PLOTGEN_*` environment variables. Later layers win.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::gateway::BackendKind;
use crate::orchestrator::{ConfigError, DerenderMode, PipelineConfig};
use crate::report::AgentKind;

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_CREDENTIAL_ENV: &str = "PLOTGEN_API_KEY";
pub const CONFIG_ENV: &str = "PLOTGEN_CONFIG";

#[derive(Debug, Error)]
pub enum CliConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid value for {key}: {message}")]
    Env { key: String, message: String },
    #[error("backend mode {0:?} needs a cassette_dir")]
    MissingCassetteDir(String),
    #[error("unknown backend mode {0:?}")]
    BackendMode(String),
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsLayer {
    pub planner: Option<String>,
    pub coder: Option<String>,
    pub feedback: Option<String>,
    pub judge: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendLayer {
    /// `live`, `replay` or `record`.
    pub mode: Option<String>,
    pub base_url: Option<String>,
    pub credential_env: Option<String>,
    pub cassette_dir: Option<PathBuf>,
}

/// One configuration source; unset keys defer to earlier layers.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub max_debug_iterations: Option<u32>,
    pub max_feedback_iterations: Option<u32>,
    pub agent_order: Option<Vec<AgentKind>>,
    pub derender_mode: Option<DerenderMode>,
    pub time_limit_secs: Option<f64>,
    pub numeric_threshold: Option<f64>,
    pub max_output_tokens: Option<u32>,
    pub runner: Option<Vec<String>>,
    #[serde(default)]
    pub models: ModelsLayer,
    #[serde(default)]
    pub backend: BackendLayer,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($field:ident),+) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )+
    };
}

impl ConfigLayer {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, CliConfigError> {
        toml::from_str(text).map_err(|source| CliConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// Keys set in `other` replace keys set here.
    pub fn merge(&mut self, other: &ConfigLayer) {
        overlay!(
            self,
            other,
            max_debug_iterations,
            max_feedback_iterations,
            agent_order,
            derender_mode,
            time_limit_secs,
            numeric_threshold,
            max_output_tokens,
            runner
        );
        overlay!(self.models, other.models, planner, coder, feedback, judge);
        overlay!(
            self.backend,
            other.backend,
            mode,
            base_url,
            credential_env,
            cassette_dir
        );
    }

    /// The layer described by `PLOTGEN_*` variables in `env`.
    pub fn from_env(env: &HashMap<String, String>) -> Result<Self, CliConfigError> {
        fn parse<T: std::str::FromStr>(
            env: &HashMap<String, String>,
            key: &str,
        ) -> Result<Option<T>, CliConfigError>
        where
            T::Err: std::fmt::Display,
        {
            env.get(key)
                .map(|v| {
                    v.trim().parse::<T>().map_err(|e| CliConfigError::Env {
                        key: key.to_string(),
                        message: e.to_string(),
                    })
                })
                .transpose()
        }
        let string = |key: &str| env.get(key).cloned();
        let agent_order = env
            .get("PLOTGEN_AGENT_ORDER")
            .map(|v| {
                v.split(',')
                    .map(|s| s.parse::<AgentKind>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|message| CliConfigError::Env {
                        key: "PLOTGEN_AGENT_ORDER".into(),
                        message,
                    })
            })
            .transpose()?;
        Ok(ConfigLayer {
            max_debug_iterations: parse(env, "PLOTGEN_MAX_DEBUG_ITERATIONS")?,
            max_feedback_iterations: parse(env, "PLOTGEN_MAX_FEEDBACK_ITERATIONS")?,
            agent_order,
            derender_mode: parse(env, "PLOTGEN_DERENDER_MODE")?,
            time_limit_secs: parse(env, "PLOTGEN_TIME_LIMIT_SECS")?,
            numeric_threshold: parse(env, "PLOTGEN_NUMERIC_THRESHOLD")?,
            max_output_tokens: parse(env, "PLOTGEN_MAX_OUTPUT_TOKENS")?,
            runner: string("PLOTGEN_RUNNER").map(|r| split_command(&r)),
            models: ModelsLayer {
                planner: string("PLOTGEN_PLANNER_MODEL"),
                coder: string("PLOTGEN_CODER_MODEL"),
                feedback: string("PLOTGEN_FEEDBACK_MODEL"),
                judge: string("PLOTGEN_JUDGE_MODEL"),
            },
            backend: BackendLayer {
                mode: string("PLOTGEN_BACKEND"),
                base_url: string("PLOTGEN_BASE_URL"),
                credential_env: None,
                cassette_dir: string("PLOTGEN_CASSETTE_DIR").map(PathBuf::from),
            },
        })
    }
}

/// Splits a runner command line on whitespace.
pub fn split_command(command: &str) -> Vec<String> {
    command.split_whitespace().map(String::from).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub pipeline: PipelineConfig,
    pub backend: BackendKind,
}

impl CliConfig {
    /// Applies `layers` in order over the defaults and validates the result.
    pub fn resolve(layers: &[ConfigLayer]) -> Result<Self, CliConfigError> {
        let mut merged = ConfigLayer::default();
        for layer in layers {
            merged.merge(layer);
        }
        let mut pipeline = PipelineConfig::default();
        if let Some(v) = merged.max_debug_iterations {
            pipeline.max_debug_iterations = v;
        }
        if let Some(v) = merged.max_feedback_iterations {
            pipeline.max_feedback_iterations = v;
        }
        if let Some(v) = merged.agent_order {
            pipeline.agent_order = v;
        }
        if let Some(v) = merged.derender_mode {
            pipeline.derender_mode = v;
        }
        if let Some(secs) = merged.time_limit_secs {
            pipeline.time_limit =
                Duration::try_from_secs_f64(secs).map_err(|e| CliConfigError::Env {
                    key: "time_limit_secs".into(),
                    message: e.to_string(),
                })?;
        }
        if let Some(v) = merged.numeric_threshold {
            pipeline.numeric_threshold = v;
        }
        if let Some(v) = merged.max_output_tokens {
            pipeline.max_output_tokens = v;
        }
        if let Some(v) = merged.runner {
            pipeline.runner = v;
        }
        let models = &mut pipeline.models;
        overlay_string(&mut models.planner, merged.models.planner);
        overlay_string(&mut models.coder, merged.models.coder);
        overlay_string(&mut models.feedback, merged.models.feedback);
        overlay_string(&mut models.judge, merged.models.judge);
        pipeline.validate()?;

        let b = merged.backend;
        let base_url = b.base_url.unwrap_or_else(|| DEFAULT_BASE_URL.to_string());
        let credential_env = b
            .credential_env
            .unwrap_or_else(|| DEFAULT_CREDENTIAL_ENV.to_string());
        let mode = b.mode.unwrap_or_else(|| "live".to_string());
        let cassette_dir = || {
            b.cassette_dir
                .clone()
                .ok_or_else(|| CliConfigError::MissingCassetteDir(mode.clone()))
        };
        let backend = match mode.as_str() {
            "live" => BackendKind::Live {
                base_url,
                credential_env,
            },
            "replay" => BackendKind::Replay {
                cassette_dir: cassette_dir()?,
            },
            "record" => BackendKind::Record {
                base_url,
                credential_env,
                cassette_dir: cassette_dir()?,
            },
            _ => return Err(CliConfigError::BackendMode(mode)),
        };
        Ok(CliConfig { pipeline, backend })
    }
}

fn overlay_string(dst: &mut String, src: Option<String>) {
    if let Some(v) = src {
        *dst = v;
    }
}
