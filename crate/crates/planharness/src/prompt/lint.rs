//! Exemplar-pack lint against the prompt-crafting guidelines.
//!
//! Findings never fail a build; they flag steps that are overly long (G1),
//! steps that do not open with an imperative verb from the lexicon (G2),
//! exemplars whose step counts fall outside the typical range (G3). Directive
//! lines such as "Please import inside the function." are recognized as
//! code-feature directives (G4) and exempt from G2.

use serde::{Deserialize, Serialize};

use crate::prompt::{ExemplarPack, PackStyle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule: String,
    pub severity: Severity,
    pub exemplar: Option<usize>,
    pub step: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct LintConfig {
    pub max_step_words: usize,
    pub verb_lexicon: Vec<String>,
    pub min_steps: usize,
    pub max_steps: usize,
}

const DEFAULT_VERBS: &[&str] = &[
    "add", "append", "assign", "build", "calculate", "check", "compare", "convert", "count",
    "create", "decrement", "deduct", "extract", "find", "generate", "if", "increment",
    "initialize", "iterate", "loop", "remove", "replace", "return", "set", "sort", "split",
    "store", "sum", "use", "write",
];

impl Default for LintConfig {
    fn default() -> Self {
        LintConfig {
            max_step_words: 25,
            verb_lexicon: DEFAULT_VERBS.iter().map(|s| s.to_string()).collect(),
            min_steps: 2,
            max_steps: 6,
        }
    }
}

fn is_directive(step: &str) -> bool {
    step.trim_start().to_lowercase().starts_with("please ")
}

pub fn lint_pack(pack: &ExemplarPack, config: &LintConfig) -> Vec<Finding> {
    let mut findings = Vec::new();
    if pack.exemplars.is_empty() {
        findings.push(Finding {
            rule: "empty".to_string(),
            severity: Severity::Warning,
            exemplar: None,
            step: None,
            message: "empty pack".to_string(),
        });
        return findings;
    }
    // extremely concise plans are phrase-level; G2 does not apply
    let check_verbs = pack.style != PackStyle::ExtremelyConcise;
    for (ei, ex) in pack.exemplars.iter().enumerate() {
        for (si, step) in ex.plan.steps.iter().enumerate() {
            let words = step.split_whitespace().count();
            if words > config.max_step_words {
                findings.push(Finding {
                    rule: "G1".to_string(),
                    severity: Severity::Warning,
                    exemplar: Some(ei),
                    step: Some(si),
                    message: format!(
                        "step has {words} words (limit {}); only essential steps belong in a plan",
                        config.max_step_words
                    ),
                });
            }
            if is_directive(step) {
                findings.push(Finding {
                    rule: "G4".to_string(),
                    severity: Severity::Info,
                    exemplar: Some(ei),
                    step: Some(si),
                    message: "code-feature directive line".to_string(),
                });
                continue;
            }
            if check_verbs {
                let first = step
                    .split_whitespace()
                    .next()
                    .unwrap_or("")
                    .trim_matches(|c: char| !c.is_alphanumeric())
                    .to_lowercase();
                if !config.verb_lexicon.iter().any(|v| v == &first) {
                    findings.push(Finding {
                        rule: "G2".to_string(),
                        severity: Severity::Warning,
                        exemplar: Some(ei),
                        step: Some(si),
                        message: format!("step opens with `{first}`, not a lexicon verb"),
                    });
                }
            }
        }
        let n = ex.plan.steps.len();
        if n < config.min_steps || n > config.max_steps {
            findings.push(Finding {
                rule: "G3".to_string(),
                severity: Severity::Info,
                exemplar: Some(ei),
                step: None,
                message: format!(
                    "exemplar has {n} steps, outside the typical [{}, {}] range",
                    config.min_steps, config.max_steps
                ),
            });
        }
    }
    findings
}
