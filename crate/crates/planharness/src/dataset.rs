//! Benchmark corpus loading and normalization.
//!
//! Reads line-delimited JSON in the HumanEval or MBPP schema and normalizes
//! each record into a [`Task`]. HumanEval's `prompt` field is split into a
//! function signature and the docstring intent; the raw prompt is kept
//! verbatim because direct prompting uses it as-is. MBPP carries only a
//! natural-language description as model input; its assertions become
//! hidden tests and never appear in prompts.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceDataset {
    Humaneval,
    MbppSanitized,
    Mbpp,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    HumanevalJsonl,
    MbppJsonl,
}

/// One benchmark problem, normalized across dataset schemas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    /// Natural-language description. For HumanEval this is the dedented
    /// docstring body (description plus the public example calls).
    pub intent: String,
    /// Function header text up to (not including) the docstring.
    pub signature: Option<String>,
    pub entry_point: Option<String>,
    /// Raw `prompt` field for HumanEval, used verbatim by direct prompting.
    pub raw_prompt: Option<String>,
    pub public_tests: Vec<String>,
    pub hidden_tests: Vec<String>,
    pub extended_tests: Option<Vec<String>>,
    pub reference_solution: String,
    pub source_dataset: SourceDataset,
    /// Unknown input fields, preserved for round-tripping.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, serde_json::Value>,
}

impl Task {
    /// The text a model sees for this task: raw prompt for signature-style
    /// datasets, bare description otherwise.
    pub fn model_input(&self) -> &str {
        match &self.raw_prompt {
            Some(p) => p,
            None => &self.intent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub tasks: Vec<Task>,
    pub excluded_ids: BTreeSet<String>,
}

impl Corpus {
    /// Tasks minus exemplar sources, in file order.
    pub fn evaluated_tasks(&self) -> impl Iterator<Item = &Task> {
        self.tasks
            .iter()
            .filter(move |t| !self.excluded_ids.contains(&t.task_id))
    }

    pub fn task(&self, task_id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }
}

/// Split a HumanEval `prompt` into (signature, dedented docstring body).
///
/// The signature is everything before the line holding the opening docstring
/// delimiter (imports included); the body is the docstring content with the
/// common leading indent removed and surrounding blank lines dropped.
pub fn split_humaneval_prompt(prompt: &str) -> Option<(String, String)> {
    let open = ["'''", "\"\"\""]
        .iter()
        .filter_map(|d| prompt.find(d).map(|i| (i, *d)))
        .min_by_key(|(i, _)| *i)?;
    let (open_idx, delim) = open;
    let body_start = open_idx + delim.len();
    let close_rel = prompt[body_start..].find(delim)?;
    let body_raw = &prompt[body_start..body_start + close_rel];

    let sig_end = prompt[..open_idx].rfind('\n').map(|i| i + 1).unwrap_or(0);
    let signature = prompt[..sig_end].trim_end().to_string();

    let lines: Vec<&str> = body_raw.lines().collect();
    let first = lines.iter().position(|l| !l.trim().is_empty())?;
    let last = lines.iter().rposition(|l| !l.trim().is_empty())?;
    let content = &lines[first..=last];
    let indent = content
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let body = content
        .iter()
        .map(|l| if l.trim().is_empty() { "" } else { &l[indent..] })
        .collect::<Vec<_>>()
        .join("\n");
    Some((signature, body))
}

fn take_string(
    map: &mut serde_json::Map<String, serde_json::Value>,
    key: &str,
    task_id: &str,
) -> Result<String> {
    match map.remove(key) {
        Some(serde_json::Value::String(s)) => Ok(s),
        Some(serde_json::Value::Number(n)) => Ok(n.to_string()),
        _ => Err(Error::MissingField {
            field: key.to_string(),
            task_id: task_id.to_string(),
        }),
    }
}

fn parse_record(
    mut map: serde_json::Map<String, serde_json::Value>,
    format: CorpusFormat,
) -> Result<Task> {
    match format {
        CorpusFormat::HumanevalJsonl => {
            let task_id = take_string(&mut map, "task_id", "<unknown>")?;
            let prompt = take_string(&mut map, "prompt", &task_id)?;
            let entry_point = take_string(&mut map, "entry_point", &task_id)?;
            let reference = take_string(&mut map, "canonical_solution", &task_id)?;
            let test = take_string(&mut map, "test", &task_id)?;
            let (signature, intent) =
                split_humaneval_prompt(&prompt).ok_or_else(|| Error::MissingField {
                    field: "prompt (docstring)".to_string(),
                    task_id: task_id.clone(),
                })?;
            if intent.trim().is_empty() {
                return Err(Error::MissingField {
                    field: "prompt (intent)".to_string(),
                    task_id,
                });
            }
            Ok(Task {
                task_id,
                intent,
                signature: Some(signature),
                entry_point: Some(entry_point),
                raw_prompt: Some(prompt),
                public_tests: Vec::new(),
                hidden_tests: vec![test],
                extended_tests: None,
                reference_solution: reference,
                source_dataset: SourceDataset::Humaneval,
                extras: map.into_iter().collect(),
            })
        }
        CorpusFormat::MbppJsonl => {
            let task_id = take_string(&mut map, "task_id", "<unknown>")?;
            let text = take_string(&mut map, "text", &task_id)?;
            let code = take_string(&mut map, "code", &task_id)?;
            let tests = match map.remove("test_list") {
                Some(serde_json::Value::Array(items)) => items
                    .into_iter()
                    .map(|v| match v {
                        serde_json::Value::String(s) => Ok(s),
                        _ => Err(Error::MissingField {
                            field: "test_list".to_string(),
                            task_id: task_id.clone(),
                        }),
                    })
                    .collect::<Result<Vec<_>>>()?,
                _ => {
                    return Err(Error::MissingField {
                        field: "test_list".to_string(),
                        task_id,
                    })
                }
            };
            if text.trim().is_empty() {
                return Err(Error::MissingField {
                    field: "text".to_string(),
                    task_id,
                });
            }
            Ok(Task {
                task_id,
                intent: text,
                signature: None,
                entry_point: None,
                raw_prompt: None,
                public_tests: Vec::new(),
                hidden_tests: tests,
                extended_tests: None,
                reference_solution: code,
                source_dataset: SourceDataset::Mbpp,
                extras: map.into_iter().collect(),
            })
        }
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut tasks: Vec<Task> = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let map: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&line)
            .map_err(|e| Error::MalformedRecord {
                path: path.display().to_string(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        let task = parse_record(map, format)?;
        if !seen.insert(task.task_id.clone()) {
            return Err(Error::DuplicateTaskId(task.task_id));
        }
        tasks.push(task);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".to_string());
    Ok(Corpus {
        name,
        tasks,
        excluded_ids: BTreeSet::new(),
    })
}

#[derive(Debug, Deserialize)]
struct ExtensionRecord {
    task_id: serde_json::Value,
    tests: Vec<String>,
}

/// Attach extended (“-ET”) test suites. Extensions naming unknown task ids
/// are collected as warnings, not errors.
pub fn attach_extended_tests(mut corpus: Corpus, path: &Path) -> Result<(Corpus, Vec<String>)> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut warnings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ExtensionRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: path.display().to_string(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        let id = match &record.task_id {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            other => other.to_string(),
        };
        match corpus.tasks.iter_mut().find(|t| t.task_id == id) {
            Some(task) => {
                task.extended_tests
                    .get_or_insert_with(Vec::new)
                    .extend(record.tests);
            }
            None => warnings.push(format!("extension references unknown task_id `{id}`")),
        }
    }
    Ok((corpus, warnings))
}

/// Exclude every task that served as an exemplar source in `pack`.
pub fn exclude_exemplar_tasks(mut corpus: Corpus, pack: &crate::prompt::ExemplarPack) -> Corpus {
    for exemplar in &pack.exemplars {
        if let Some(id) = &exemplar.source_task_id {
            if corpus.tasks.iter().any(|t| &t.task_id == id) {
                corpus.excluded_ids.insert(id.clone());
            }
        }
    }
    corpus
}
