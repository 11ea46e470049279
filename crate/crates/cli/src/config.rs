//! Agent configuration from flags, an optional TOML file and defaults, in
//! that order of precedence.

use std::path::PathBuf;

use attentive_core::agent::{AgentConfig, BackendSpec, PromptVariant};
use clap::{Args, ValueEnum};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    #[value(alias = "full_rules")]
    Full,
    #[value(alias = "relaxed_rules")]
    Relaxed,
    #[value(alias = "no_rules")]
    None,
}

impl From<VariantArg> for PromptVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Full => PromptVariant::FullRules,
            VariantArg::Relaxed => PromptVariant::RelaxedRules,
            VariantArg::None => PromptVariant::NoRules,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Remote,
    Scripted,
    Oracle,
}

#[derive(Debug, Clone, Args)]
pub struct AgentFlags {
    /// TOML file with agent configuration fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Reply script for the scripted backend.
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub base_url: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_rounds: Option<u32>,
}

impl AgentFlags {
    pub fn resolve(&self) -> Result<AgentConfig, Failure> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::Config(format!("cannot read config file {}: {e}", path.display())))?;
                toml::from_str(&text).map_err(|e| Failure::Config(format!("config file {}: {e}", path.display())))?
            }
            None => AgentConfig::default(),
        };
        if let Some(v) = self.variant {
            config.variant = v.into();
        }
        if let Some(m) = &self.model {
            config.model_name = m.clone();
        }
        if let Some(u) = &self.base_url {
            config.base_url = u.clone();
        }
        if let Some(k) = &self.api_key_env {
            config.api_key_env = k.clone();
        }
        if let Some(s) = self.seed {
            config.random_seed = s;
        }
        if let Some(t) = self.temperature {
            config.temperature = t;
        }
        if let Some(r) = self.max_rounds {
            config.max_tool_rounds = r;
        }
        match (self.backend, &self.script) {
            (Some(BackendArg::Oracle), _) => config.backend = BackendSpec::Oracle,
            (Some(BackendArg::Remote), _) => config.backend = BackendSpec::Remote,
            (Some(BackendArg::Scripted), Some(script)) | (None, Some(script)) => {
                config.backend = BackendSpec::Scripted { script: script.clone() }
            }
            (Some(BackendArg::Scripted), None) => {
                if !matches!(config.backend, BackendSpec::Scripted { .. }) {
                    return Err(Failure::Config("--backend scripted needs --script".into()));
                }
            }
            (None, None) => {}
        }
        config.validate().map_err(|e| Failure::Config(e.to_string()))?;
        if config.backend == BackendSpec::Remote
            && std::env::var(&config.api_key_env).map_or(true, |k| k.is_empty())
        {
            return Err(Failure::Config(format!(
                "the remote backend needs an API key in the environment variable {}",
                config.api_key_env
            )));
        }
        Ok(config)
    }
}
