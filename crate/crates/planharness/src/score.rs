//! Scoring a run directory: execute candidates, compute Pass@k and
//! CodeBLEU, and write `scores.jsonl` plus a suite-level `summary.json`.
//!
//! Score files carry no wall-clock data, so scoring the same records twice
//! produces byte-identical output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::config::Variant;
use crate::dataset::{Corpus, Task};
use crate::error::{Error, Result};
use crate::metrics::{codebleu, pass_at_k_single, CodeBleuWeights};
use crate::pipeline::{read_records, GenerationRecord};
use crate::sandbox::{
    full_source, run_candidate, ResourceLimits, RunnerConfig, SuiteKind, VerdictStatus,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task_id: String,
    pub n: u64,
    pub c: u64,
    pub statuses: Vec<VerdictStatus>,
    /// Keyed as "pass@k".
    pub pass_at_k: BTreeMap<String, f64>,
    /// Mean over candidates vs the reference solution.
    pub codebleu: f64,
    pub fallback_direct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub corpus_name: String,
    pub variant: Variant,
    pub suite: SuiteKind,
    pub n_tasks: usize,
    /// Suite means, keyed as "pass@k"; a k is omitted when some task has
    /// fewer than k candidates.
    pub pass_at_k: BTreeMap<String, f64>,
    pub codebleu: f64,
}

#[derive(Debug, Clone)]
pub struct ScoreParams {
    pub ks: Vec<u64>,
    pub weights: CodeBleuWeights,
    pub limits: ResourceLimits,
    pub runner: RunnerConfig,
    pub suite: SuiteKind,
    pub workers: usize,
}

fn score_record(
    record: &GenerationRecord,
    task: &Task,
    params: &ScoreParams,
) -> Result<TaskScore> {
    let n = record.candidates.len() as u64;
    if n == 0 {
        return Err(Error::Other(format!(
            "record for task {} has no candidates",
            record.task_id
        )));
    }
    let mut statuses = Vec::with_capacity(record.candidates.len());
    let mut c = 0u64;
    for candidate in &record.candidates {
        let verdict = run_candidate(task, candidate, params.suite, &params.limits, &params.runner);
        if verdict.status == VerdictStatus::SandboxError {
            return Err(Error::Sandbox(
                verdict
                    .first_failure
                    .unwrap_or_else(|| "sandbox failure".to_string()),
            ));
        }
        if verdict.passed() {
            c += 1;
        }
        statuses.push(verdict.status);
    }
    let mut pass_at_k = BTreeMap::new();
    for &k in &params.ks {
        if k <= n {
            pass_at_k.insert(format!("pass@{k}"), pass_at_k_single(n, c, k)?);
        }
    }
    let keywords = crate::metrics::python_keywords();
    let reference = full_source(task, &task.reference_solution);
    let mut score_sum = 0.0;
    for candidate in &record.candidates {
        let source = full_source(task, candidate);
        score_sum += codebleu(&source, &reference, &params.weights, &keywords)?.codebleu;
    }
    Ok(TaskScore {
        task_id: record.task_id.clone(),
        n,
        c,
        statuses,
        pass_at_k,
        codebleu: score_sum / record.candidates.len() as f64,
        fallback_direct: record.fallback_direct,
    })
}

/// Score every record in a run directory against the corpus, in record
/// order, with bounded parallelism.
pub fn score_run(
    run_dir: &Path,
    corpus: &Corpus,
    variant: Variant,
    params: &ScoreParams,
) -> Result<(Vec<TaskScore>, SuiteSummary)> {
    let records = read_records(&run_dir.join("records.jsonl"))?;
    if records.is_empty() {
        return Err(Error::EmptyTaskSet);
    }
    let by_id: BTreeMap<&str, &Task> = corpus
        .tasks
        .iter()
        .map(|t| (t.task_id.as_str(), t))
        .collect();
    for record in &records {
        if !by_id.contains_key(record.task_id.as_str()) {
            return Err(Error::CorpusMismatch(format!(
                "record for task {} not present in corpus {}",
                record.task_id, corpus.name
            )));
        }
    }

    let slots: Vec<Mutex<Option<Result<TaskScore>>>> =
        records.iter().map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    let workers = params.workers.min(records.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = cursor.fetch_add(1, Ordering::SeqCst);
                let Some(record) = records.get(index) else {
                    break;
                };
                let task = by_id[record.task_id.as_str()];
                *slots[index].lock().unwrap() = Some(score_record(record, task, params));
            });
        }
    });
    let scores = slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("slot filled"))
        .collect::<Result<Vec<_>>>()?;

    let mut pass_at_k = BTreeMap::new();
    for &k in &params.ks {
        let key = format!("pass@{k}");
        if scores.iter().all(|s| s.pass_at_k.contains_key(&key)) {
            let mean =
                scores.iter().map(|s| s.pass_at_k[&key]).sum::<f64>() / scores.len() as f64;
            pass_at_k.insert(key, mean);
        }
    }
    let summary = SuiteSummary {
        corpus_name: corpus.name.clone(),
        variant,
        suite: params.suite,
        n_tasks: scores.len(),
        pass_at_k,
        codebleu: scores.iter().map(|s| s.codebleu).sum::<f64>() / scores.len() as f64,
    };
    Ok((scores, summary))
}

/// Score and persist `scores.jsonl` + `summary.json` into the run directory.
pub fn score_and_write(
    run_dir: &Path,
    corpus: &Corpus,
    variant: Variant,
    params: &ScoreParams,
) -> Result<(PathBuf, SuiteSummary)> {
    let (scores, summary) = score_run(run_dir, corpus, variant, params)?;
    let scores_path = run_dir.join("scores.jsonl");
    let mut file = std::fs::File::create(&scores_path)
        .map_err(|e| Error::io(scores_path.display().to_string(), e))?;
    for score in &scores {
        writeln!(file, "{}", serde_json::to_string(score).expect("score serializes"))
            .map_err(|e| Error::io(scores_path.display().to_string(), e))?;
    }
    let summary_path = run_dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    std::fs::write(&summary_path, text)
        .map_err(|e| Error::io(summary_path.display().to_string(), e))?;
    Ok((scores_path, summary))
}

pub fn read_summary(run_dir: &Path) -> Result<SuiteSummary> {
    let path = run_dir.join("summary.json");
    let text =
        std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedRecord {
        path: path.display().to_string(),
        line: 1,
        message: e.to_string(),
    })
}
