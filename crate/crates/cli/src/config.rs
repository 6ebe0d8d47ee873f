//! Run settings: defaults, then the TOML config file, then flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;

use oas_enrich::llm;
use oas_enrich::model::SourceFormat;
use oas_enrich::prompt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendArg {
    Live,
    Replay,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Yaml,
    Json,
}

impl From<FormatArg> for SourceFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Yaml => SourceFormat::Yaml,
            FormatArg::Json => SourceFormat::Json,
        }
    }
}

/// Flags shared by `enhance` and `record`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Where completions come from.
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Model name sent to the endpoint.
    #[arg(long)]
    pub model: Option<String>,
    /// Sampling temperature, in [0, 2].
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Completion length limit per request.
    #[arg(long)]
    pub max_output_tokens: Option<u32>,
    /// Replay cache file (JSONL).
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Directory with prompt templates and few-shot pool.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Maximum number of requests in flight.
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Number of few-shot examples per prompt.
    #[arg(long)]
    pub k_shots: Option<usize>,
    /// Output format; defaults to the input's.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Base URL of an OpenAI-compatible endpoint.
    #[arg(long)]
    pub base_url: Option<String>,
    /// Response script for the scripted backend (JSON object).
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Request timeout for the live backend, in seconds.
    #[arg(long)]
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    backend: Option<BackendArg>,
    model: Option<String>,
    temperature: Option<f64>,
    max_output_tokens: Option<u32>,
    cache: Option<PathBuf>,
    templates: Option<PathBuf>,
    concurrency: Option<usize>,
    k_shots: Option<usize>,
    format: Option<FormatArg>,
    base_url: Option<String>,
    script: Option<PathBuf>,
    timeout_secs: Option<u64>,
    conflicts_exit_code: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub backend: BackendArg,
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub concurrency: usize,
    pub k_shots: usize,
    pub templates: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub format: Option<FormatArg>,
    pub base_url: Option<String>,
    pub script: Option<PathBuf>,
    pub timeout_secs: u64,
    pub conflicts_exit_code: u8,
}

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";
pub const DEFAULT_CONFLICTS_EXIT_CODE: u8 = 2;

impl RunConfig {
    /// Merge flags over the config file (if any) over defaults.
    pub fn resolve(
        config_file: Option<&Path>,
        args: &RunArgs,
        conflicts_exit_code: Option<u8>,
    ) -> Result<RunConfig> {
        let file = match config_file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let mut file: FileConfig =
                    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                // Paths in a config file are relative to the file.
                let base = path.parent().unwrap_or(Path::new(""));
                for p in [&mut file.cache, &mut file.templates, &mut file.script]
                    .into_iter()
                    .flatten()
                {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
                file
            }
            None => FileConfig::default(),
        };
        let cfg = RunConfig {
            backend: args.backend.or(file.backend).unwrap_or(BackendArg::Replay),
            model_name: args
                .model
                .clone()
                .or(file.model)
                .unwrap_or_else(|| DEFAULT_MODEL.to_string()),
            temperature: args
                .temperature
                .or(file.temperature)
                .unwrap_or(llm::DEFAULT_TEMPERATURE),
            max_output_tokens: args
                .max_output_tokens
                .or(file.max_output_tokens)
                .unwrap_or(llm::DEFAULT_MAX_OUTPUT_TOKENS),
            concurrency: args
                .concurrency
                .or(file.concurrency)
                .unwrap_or(llm::DEFAULT_CONCURRENCY),
            k_shots: args
                .k_shots
                .or(file.k_shots)
                .unwrap_or(prompt::DEFAULT_K_SHOTS),
            templates: args.templates.clone().or(file.templates),
            cache: args.cache.clone().or(file.cache),
            format: args.format.or(file.format),
            base_url: args.base_url.clone().or(file.base_url),
            script: args.script.clone().or(file.script),
            timeout_secs: args.timeout_secs.or(file.timeout_secs).unwrap_or(60),
            conflicts_exit_code: conflicts_exit_code
                .or(file.conflicts_exit_code)
                .unwrap_or(DEFAULT_CONFLICTS_EXIT_CODE),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if self.concurrency == 0 {
            bail!("concurrency must be at least 1");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            bail!("temperature {} outside [0, 2]", self.temperature);
        }
        Ok(())
    }
}
