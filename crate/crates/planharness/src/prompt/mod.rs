//! Prompt assembly for every generation variant, plan parsing, and
//! exemplar-pack linting.
//!
//! Packs are human-editable TOML documents shipped under `assets/packs/`.
//! Rendering is pure: the same pack and task always produce byte-identical
//! text, pinned by golden-file tests.

mod lint;
mod plan;
mod render;

pub use lint::{lint_pack, Finding, LintConfig, Severity};
pub use plan::parse_plan;
pub use render::{
    render_cot_prompt, render_direct_prompt, render_groundtruth_planning_prompt,
    render_implementation_prompt, render_multi_turn_prompt, render_one_phase_prompt,
    render_planning_prompt, CODE_START_CUE, GROUNDTRUTH_CUE,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_STEP_MARKER: &str = "Let's think step by step.";
pub const MAX_PACK_EXEMPLARS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PackStyle {
    StandardPlan,
    Cot,
    ExtremelyConcise,
    OnePhase,
    GroundtruthPlan,
}

impl PackStyle {
    pub fn as_str(&self) -> &'static str {
        match self {
            PackStyle::StandardPlan => "standard_plan",
            PackStyle::Cot => "cot",
            PackStyle::ExtremelyConcise => "extremely_concise",
            PackStyle::OnePhase => "one_phase",
            PackStyle::GroundtruthPlan => "groundtruth_plan",
        }
    }
}

/// An ordered list of solution steps parsed from (or destined for) a
/// model completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<String>,
    /// The completion text the plan was parsed from, preserved verbatim.
    pub raw: String,
}

impl Plan {
    /// Build a plan directly from step texts; `raw` becomes the canonical
    /// numbered rendering.
    pub fn from_steps(steps: Vec<String>) -> Result<Self> {
        if steps.is_empty() || steps.iter().any(|s| s.trim().is_empty()) {
            return Err(Error::UnparseablePlan);
        }
        let raw = Self::numbered(&steps);
        Ok(Plan { steps, raw })
    }

    /// Canonical `1. …\n2. …` rendering of a step list.
    pub fn numbered(steps: &[String]) -> String {
        steps
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}. {}", i + 1, s))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn numbered_lines(&self) -> String {
        Self::numbered(&self.steps)
    }
}

/// One few-shot demonstration. `signature` is present for datasets whose
/// tasks carry function headers (HumanEval layout); absent for bare
/// description layouts (MBPP).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub intent: String,
    #[serde(default)]
    pub signature: Option<String>,
    pub plan: Plan,
    #[serde(default)]
    pub code: Option<String>,
    #[serde(default)]
    pub source_task_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarPack {
    pub name: String,
    pub style: PackStyle,
    pub exemplars: Vec<Exemplar>,
    pub step_marker: String,
}

impl ExemplarPack {
    pub fn validate(&self) -> Result<()> {
        if self.exemplars.is_empty() {
            return Err(Error::EmptyPack);
        }
        if self.exemplars.len() > MAX_PACK_EXEMPLARS {
            return Err(Error::InvalidPack {
                path: self.name.clone(),
                message: format!(
                    "{} exemplars exceeds the limit of {MAX_PACK_EXEMPLARS}",
                    self.exemplars.len()
                ),
            });
        }
        for (i, ex) in self.exemplars.iter().enumerate() {
            if ex.plan.steps.is_empty() {
                return Err(Error::InvalidPack {
                    path: self.name.clone(),
                    message: format!("exemplar {i} has an empty plan"),
                });
            }
            if matches!(self.style, PackStyle::OnePhase | PackStyle::GroundtruthPlan)
                && ex.code.is_none()
            {
                return Err(Error::ExemplarMissingCode { index: i });
            }
        }
        Ok(())
    }

    /// Truncate to the first `k` exemplars (n-shot ablations).
    pub fn take_shots(&self, k: usize) -> Result<ExemplarPack> {
        if k == 0 || k > self.exemplars.len() {
            return Err(Error::InvalidConfig {
                field: "k_shot".to_string(),
                message: format!(
                    "k_shot {k} out of range for pack `{}` with {} exemplars",
                    self.name,
                    self.exemplars.len()
                ),
            });
        }
        let mut pack = self.clone();
        pack.exemplars.truncate(k);
        Ok(pack)
    }

    /// Stable digest over the pack's rendered content, used in config digests.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(self).expect("pack serializes"));
        hex::encode(hasher.finalize())
    }
}

/// On-disk pack document; `steps` is flattened into a `Plan` on load.
#[derive(Debug, Deserialize)]
struct PackFile {
    name: String,
    style: PackStyle,
    #[serde(default)]
    step_marker: Option<String>,
    #[serde(default)]
    exemplars: Vec<PackFileExemplar>,
}

#[derive(Debug, Deserialize)]
struct PackFileExemplar {
    intent: String,
    #[serde(default)]
    signature: Option<String>,
    steps: Vec<String>,
    #[serde(default)]
    code: Option<String>,
    #[serde(default)]
    source_task_id: Option<String>,
}

pub fn load_pack(path: &Path) -> Result<ExemplarPack> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_pack(&text, &path.display().to_string())
}

pub fn parse_pack(text: &str, origin: &str) -> Result<ExemplarPack> {
    let file: PackFile = toml::from_str(text).map_err(|e| Error::InvalidPack {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    let exemplars = file
        .exemplars
        .into_iter()
        .map(|e| {
            Ok(Exemplar {
                plan: Plan::from_steps(e.steps)?,
                // multi-line TOML strings carry a trailing newline
                intent: e.intent.trim().to_string(),
                signature: e.signature,
                code: e.code,
                source_task_id: e.source_task_id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pack = ExemplarPack {
        name: file.name,
        style: file.style,
        exemplars,
        step_marker: file
            .step_marker
            .unwrap_or_else(|| DEFAULT_STEP_MARKER.to_string()),
    };
    pack.validate()?;
    Ok(pack)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Planning,
    Implementation,
    Single,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub stop_sequences: Vec<String>,
    pub phase: Phase,
}
