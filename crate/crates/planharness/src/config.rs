//! Run configuration: sectioned TOML file, `--set section.key=value`
//! overrides, and the content digest that keys resumability.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::CorpusFormat;
use crate::error::{Error, Result};
use crate::gateway::CacheMode;
use crate::metrics::CodeBleuWeights;
use crate::sandbox::{ResourceLimits, RunnerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Direct,
    Cot,
    SelfPlanTwoPhase,
    SelfPlanOnePhase,
    GroundtruthPlan,
    MultiTurn,
}

pub const VARIANT_NAMES: [&str; 6] = [
    "direct",
    "cot",
    "self_plan_two_phase",
    "self_plan_one_phase",
    "groundtruth_plan",
    "multi_turn",
];

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Direct => "direct",
            Variant::Cot => "cot",
            Variant::SelfPlanTwoPhase => "self_plan_two_phase",
            Variant::SelfPlanOnePhase => "self_plan_one_phase",
            Variant::GroundtruthPlan => "groundtruth_plan",
            Variant::MultiTurn => "multi_turn",
        }
    }

    /// Variants that produce (and record) a plan.
    pub fn uses_planning(&self) -> bool {
        !matches!(self, Variant::Direct)
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Variant::Direct),
            "cot" => Ok(Variant::Cot),
            "self_plan_two_phase" => Ok(Variant::SelfPlanTwoPhase),
            "self_plan_one_phase" => Ok(Variant::SelfPlanOnePhase),
            "groundtruth_plan" => Ok(Variant::GroundtruthPlan),
            "multi_turn" => Ok(Variant::MultiTurn),
            other => Err(Error::InvalidConfig {
                field: "variant.name".to_string(),
                message: format!(
                    "unknown variant `{other}`; valid variants: {}",
                    VARIANT_NAMES.join(", ")
                ),
            }),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub samples_per_task: u32,
    pub model_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub mode: CacheMode,
    pub cache_path: PathBuf,
    /// Remote completion endpoint; required only outside replay mode when
    /// no mock is injected.
    pub base_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub path: PathBuf,
    pub format: CorpusFormat,
    pub name: String,
    pub extended_tests_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub ks: Vec<u64>,
    pub codebleu_weights: CodeBleuWeights,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            ks: vec![1],
            codebleu_weights: CodeBleuWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub variant: Variant,
    pub pack_path: PathBuf,
    pub k_shot: usize,
    pub backend: BackendConfig,
    pub sampling: SamplingConfig,
    pub corpus: CorpusConfig,
    pub limits: ResourceLimits,
    pub runner: RunnerConfig,
    pub metrics: MetricsConfig,
    pub run_dir: PathBuf,
    pub workers: usize,
    pub max_failure_ratio: f64,
}

impl RunConfig {
    /// Digest keying resumability: any change to the variant, the pack
    /// content, the sampling parameters, or the corpus identity invalidates
    /// prior records.
    pub fn digest(&self, pack_content_hash: &str) -> String {
        let mut hasher = Sha256::new();
        let mut put = |bytes: &[u8]| {
            hasher.update((bytes.len() as u64).to_be_bytes());
            hasher.update(bytes);
        };
        put(self.variant.name().as_bytes());
        put(pack_content_hash.as_bytes());
        put(&(self.k_shot as u64).to_be_bytes());
        put(&self.sampling.temperature.to_bits().to_be_bytes());
        put(&self.sampling.top_p.to_bits().to_be_bytes());
        put(&self.sampling.max_tokens.to_be_bytes());
        put(&self.sampling.samples_per_task.to_be_bytes());
        put(self.sampling.model_name.as_bytes());
        put(self.corpus.name.as_bytes());
        hex::encode(hasher.finalize())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_shot == 0 {
            return Err(Error::InvalidConfig {
                field: "variant.k_shot".to_string(),
                message: "must be >= 1".to_string(),
            });
        }
        if self.sampling.samples_per_task == 0 {
            return Err(Error::InvalidConfig {
                field: "sampling.samples_per_task".to_string(),
                message: "must be >= 1".to_string(),
            });
        }
        if !(0.0..).contains(&self.sampling.temperature) {
            return Err(Error::InvalidConfig {
                field: "sampling.temperature".to_string(),
                message: "must be >= 0".to_string(),
            });
        }
        if !(self.sampling.top_p > 0.0 && self.sampling.top_p <= 1.0) {
            return Err(Error::InvalidConfig {
                field: "sampling.top_p".to_string(),
                message: "must be in (0, 1]".to_string(),
            });
        }
        if !(0.0..=1.0).contains(&self.max_failure_ratio) {
            return Err(Error::InvalidConfig {
                field: "limits.max_failure_ratio".to_string(),
                message: "must be in [0, 1]".to_string(),
            });
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig {
                field: "limits.workers".to_string(),
                message: "must be >= 1".to_string(),
            });
        }
        Ok(())
    }
}

// Raw file schema: sectioned, with everything optional so sampling
// defaults can depend on samples_per_task.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariantSection {
    name: Option<String>,
    pack: Option<PathBuf>,
    k_shot: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBackendSection {
    mode: Option<String>,
    cache: Option<PathBuf>,
    base_url: Option<String>,
    model: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSamplingSection {
    temperature: Option<f64>,
    top_p: Option<f64>,
    max_tokens: Option<u32>,
    samples_per_task: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCorpusSection {
    path: Option<PathBuf>,
    format: Option<String>,
    name: Option<String>,
    extended_tests: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLimitsSection {
    wall_clock_s: Option<f64>,
    memory_mb: Option<u64>,
    max_output_bytes: Option<usize>,
    runner_command: Option<String>,
    runner_args: Option<Vec<String>>,
    env_allowlist: Option<Vec<String>>,
    workers: Option<usize>,
    max_failure_ratio: Option<f64>,
    run_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetricsSection {
    ks: Option<Vec<u64>>,
    alpha: Option<f64>,
    beta: Option<f64>,
    delta: Option<f64>,
    zeta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    variant: RawVariantSection,
    #[serde(default)]
    backend: RawBackendSection,
    #[serde(default)]
    sampling: RawSamplingSection,
    #[serde(default)]
    corpus: RawCorpusSection,
    #[serde(default)]
    limits: RawLimitsSection,
    #[serde(default)]
    metrics: RawMetricsSection,
}

fn require<T>(value: Option<T>, field: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidConfig {
        field: field.to_string(),
        message: "missing required key".to_string(),
    })
}

/// Apply one `section.key=value` override to a parsed TOML document.
/// Values parse as TOML scalars when possible, else as strings.
pub fn apply_override(doc: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw_value) = spec.split_once('=').ok_or_else(|| Error::InvalidConfig {
        field: "--set".to_string(),
        message: format!("expected section.key=value, got `{spec}`"),
    })?;
    let (section, key) = path.split_once('.').ok_or_else(|| Error::InvalidConfig {
        field: "--set".to_string(),
        message: format!("expected section.key=value, got `{spec}`"),
    })?;
    // bare scalars aren't valid TOML documents; wrap in a throwaway key
    let value: toml::Value = format!("v = {raw_value}")
        .parse::<toml::Value>()
        .ok()
        .and_then(|mut doc| doc.as_table_mut().and_then(|t| t.remove("v")))
        .unwrap_or_else(|| toml::Value::String(raw_value.to_string()));
    let table = doc.as_table_mut().ok_or_else(|| Error::InvalidConfig {
        field: path.to_string(),
        message: "config root is not a table".to_string(),
    })?;
    let section_value = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(Default::default()));
    let section_table = section_value
        .as_table_mut()
        .ok_or_else(|| Error::InvalidConfig {
            field: section.to_string(),
            message: "not a table".to_string(),
        })?;
    section_table.insert(key.to_string(), value);
    Ok(())
}

pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut doc: toml::Value = text.parse().map_err(|e| Error::InvalidConfig {
        field: "config".to_string(),
        message: format!("{e}"),
    })?;
    for spec in overrides {
        apply_override(&mut doc, spec)?;
    }
    let raw: RawConfig = doc.try_into().map_err(|e| Error::InvalidConfig {
        field: "config".to_string(),
        message: format!("{e}"),
    })?;

    let variant: Variant = require(raw.variant.name, "variant.name")?.parse()?;
    let pack_path = require(raw.variant.pack, "variant.pack")?;
    let samples_per_task = raw.sampling.samples_per_task.unwrap_or(1);
    // greedy single-sample by default; multi-sample estimation needs
    // diversity, so unset temperature follows the sample count
    let (default_temp, default_top_p) = if samples_per_task > 1 {
        (0.8, 0.95)
    } else {
        (0.0, 1.0)
    };
    let mode = match raw.backend.mode.as_deref().unwrap_or("replay") {
        "record" => CacheMode::Record,
        "replay" => CacheMode::Replay,
        "passthrough" => CacheMode::Passthrough,
        other => {
            return Err(Error::InvalidConfig {
                field: "backend.mode".to_string(),
                message: format!("unknown mode `{other}`; valid: record, replay, passthrough"),
            })
        }
    };
    let format = match require(raw.corpus.format, "corpus.format")?.as_str() {
        "humaneval_jsonl" => CorpusFormat::HumanevalJsonl,
        "mbpp_jsonl" => CorpusFormat::MbppJsonl,
        other => {
            return Err(Error::InvalidConfig {
                field: "corpus.format".to_string(),
                message: format!("unknown format `{other}`; valid: humaneval_jsonl, mbpp_jsonl"),
            })
        }
    };
    let weights = CodeBleuWeights::new(
        raw.metrics.alpha.unwrap_or(0.25),
        raw.metrics.beta.unwrap_or(0.25),
        raw.metrics.delta.unwrap_or(0.25),
        raw.metrics.zeta.unwrap_or(0.25),
    )?;

    let config = RunConfig {
        variant,
        pack_path,
        k_shot: raw.variant.k_shot.unwrap_or(8),
        backend: BackendConfig {
            mode,
            cache_path: raw
                .backend
                .cache
                .unwrap_or_else(|| PathBuf::from("cache.jsonl")),
            base_url: raw.backend.base_url,
        },
        sampling: SamplingConfig {
            temperature: raw.sampling.temperature.unwrap_or(default_temp),
            top_p: raw.sampling.top_p.unwrap_or(default_top_p),
            max_tokens: raw.sampling.max_tokens.unwrap_or(512),
            samples_per_task,
            model_name: raw.backend.model.unwrap_or_else(|| "mock".to_string()),
        },
        corpus: CorpusConfig {
            path: require(raw.corpus.path, "corpus.path")?,
            format,
            name: require(raw.corpus.name, "corpus.name")?,
            extended_tests_path: raw.corpus.extended_tests,
        },
        limits: ResourceLimits {
            wall_clock_s: raw.limits.wall_clock_s.unwrap_or(10.0),
            memory_mb: raw.limits.memory_mb.unwrap_or(512),
            max_output_bytes: raw.limits.max_output_bytes.unwrap_or(64 * 1024),
        },
        runner: RunnerConfig {
            command: raw
                .limits
                .runner_command
                .unwrap_or_else(|| "python3".to_string()),
            args: raw.limits.runner_args.unwrap_or_default(),
            env_allowlist: raw
                .limits
                .env_allowlist
                .unwrap_or_else(|| vec!["PATH".to_string()]),
        },
        metrics: MetricsConfig {
            ks: raw.metrics.ks.unwrap_or_else(|| vec![1]),
            codebleu_weights: weights,
        },
        run_dir: raw.limits.run_dir.unwrap_or_else(|| PathBuf::from("run")),
        workers: raw.limits.workers.unwrap_or(4),
        max_failure_ratio: raw.limits.max_failure_ratio.unwrap_or(0.2),
    };
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut config = parse_config(&text, overrides)?;
    // relative paths in the file resolve against the file's directory
    if let Some(dir) = path.parent() {
        for p in [
            &mut config.pack_path,
            &mut config.backend.cache_path,
            &mut config.corpus.path,
            &mut config.run_dir,
        ] {
            if p.is_relative() {
                *p = dir.join(&p);
            }
        }
        if let Some(ext) = &mut config.corpus.extended_tests_path {
            if ext.is_relative() {
                *ext = dir.join(&ext);
            }
        }
    }
    Ok(config)
}

/// Subset of the config echoed into `run.meta` for inspection.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_digest: String,
    pub variant: Variant,
    pub k_shot: usize,
    pub pack_name: String,
    pub corpus_name: String,
    pub samples_per_task: u32,
    pub backend_mode: CacheMode,
    pub versions: BTreeMap<String, String>,
}
