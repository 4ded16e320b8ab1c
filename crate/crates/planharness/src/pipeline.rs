//! Per-task generation protocols and the resumable batch runner.
//!
//! The two-phase factorization samples one plan per task (greedy), then
//! draws all candidates conditioned on that same plan. Records are written
//! through a single in-order writer so a run directory is byte-stable under
//! re-execution; wall-clock timings live in a sidecar file.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, RunMeta, Variant};
use crate::dataset::{Corpus, Task};
use crate::error::{Error, Result};
use crate::gateway::{CompletionRequest, Gateway};
use crate::prompt::{
    parse_plan, render_cot_prompt, render_direct_prompt, render_groundtruth_planning_prompt,
    render_implementation_prompt, render_multi_turn_prompt, render_one_phase_prompt,
    render_planning_prompt, ExemplarPack, Plan, RenderedPrompt, CODE_START_CUE,
};
use crate::sandbox::ExecutionVerdict;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub task_id: String,
    pub variant: Variant,
    pub config_digest: String,
    pub planning_prompt: Option<String>,
    pub plan: Option<Plan>,
    pub implementation_prompt: String,
    pub candidates: Vec<String>,
    pub request_hashes: Vec<String>,
    pub fallback_direct: bool,
    /// Untruncated per-turn completions (multi-turn only), kept for
    /// diagnosing runaway turns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turns: Option<Vec<String>>,
    /// Populated by scoring, not generation.
    #[serde(default)]
    pub verdicts: Vec<ExecutionVerdict>,
}

pub struct Pipeline {
    pub gateway: Arc<Gateway>,
    /// Pack already truncated to the configured shot count.
    pub pack: ExemplarPack,
    pub config: RunConfig,
    pub config_digest: String,
}

impl Pipeline {
    pub fn new(gateway: Arc<Gateway>, pack: &ExemplarPack, config: RunConfig) -> Result<Self> {
        let config_digest = config.digest(&pack.content_hash());
        let pack = pack.take_shots(config.k_shot)?;
        Ok(Pipeline {
            gateway,
            pack,
            config,
            config_digest,
        })
    }

    fn plan_request(&self, prompt: &RenderedPrompt) -> CompletionRequest {
        CompletionRequest {
            prompt: prompt.text.clone(),
            max_tokens: self.config.sampling.max_tokens,
            temperature: 0.0,
            top_p: 1.0,
            n_samples: 1,
            stop: prompt.stop_sequences.clone(),
            model_name: self.config.sampling.model_name.clone(),
            seed_hint: None,
        }
    }

    fn code_request(&self, prompt: &RenderedPrompt, n_samples: u32) -> CompletionRequest {
        CompletionRequest {
            prompt: prompt.text.clone(),
            max_tokens: self.config.sampling.max_tokens,
            temperature: self.config.sampling.temperature,
            top_p: self.config.sampling.top_p,
            n_samples,
            stop: prompt.stop_sequences.clone(),
            model_name: self.config.sampling.model_name.clone(),
            seed_hint: None,
        }
    }

    fn direct_record(&self, task: &Task, fallback: bool) -> Result<GenerationRecord> {
        let prompt = render_direct_prompt(task);
        let request = self.code_request(&prompt, self.config.sampling.samples_per_task);
        let response = self.gateway.complete(&request)?;
        Ok(GenerationRecord {
            task_id: task.task_id.clone(),
            variant: self.config.variant,
            config_digest: self.config_digest.clone(),
            planning_prompt: None,
            plan: None,
            implementation_prompt: prompt.text,
            candidates: response.completions,
            request_hashes: vec![response.request_hash],
            fallback_direct: fallback,
            turns: None,
            verdicts: Vec::new(),
        })
    }

    /// Plan phase shared by the two-phase, ground-truth, and multi-turn
    /// protocols. Returns the prompt text and plan, or `None` when the plan
    /// completion was unparseable.
    fn plan_phase(&self, task: &Task) -> Result<(String, Option<Plan>, String)> {
        let prompt = match self.config.variant {
            Variant::GroundtruthPlan => render_groundtruth_planning_prompt(&self.pack, task)?,
            _ => render_planning_prompt(&self.pack, task)?,
        };
        let request = self.plan_request(&prompt);
        let response = self.gateway.complete(&request)?;
        let completion = &response.completions[0];
        let plan = parse_plan(completion).ok();
        Ok((prompt.text, plan, response.request_hash))
    }

    pub fn run_task(&self, task: &Task) -> Result<GenerationRecord> {
        match self.config.variant {
            Variant::Direct => self.direct_record(task, false),
            Variant::Cot => self.single_phase(task, render_cot_prompt(&self.pack, task)?),
            Variant::SelfPlanOnePhase => {
                self.single_phase(task, render_one_phase_prompt(&self.pack, task)?)
            }
            Variant::SelfPlanTwoPhase | Variant::GroundtruthPlan => self.two_phase(task),
            Variant::MultiTurn => self.run_task_multi_turn(task),
        }
    }

    /// CoT and one-phase: one completion carries plan and code; the plan
    /// section is split off post hoc and stored.
    fn single_phase(&self, task: &Task, prompt: RenderedPrompt) -> Result<GenerationRecord> {
        let request = self.code_request(&prompt, self.config.sampling.samples_per_task);
        let response = self.gateway.complete(&request)?;
        let mut plan = None;
        let candidates: Vec<String> = response
            .completions
            .iter()
            .map(|completion| {
                let (p, code) = split_plan_and_code(completion);
                if plan.is_none() {
                    plan = p;
                }
                code
            })
            .collect();
        Ok(GenerationRecord {
            task_id: task.task_id.clone(),
            variant: self.config.variant,
            config_digest: self.config_digest.clone(),
            planning_prompt: Some(prompt.text.clone()),
            plan,
            implementation_prompt: prompt.text,
            candidates,
            request_hashes: vec![response.request_hash],
            fallback_direct: false,
            turns: None,
            verdicts: Vec::new(),
        })
    }

    fn two_phase(&self, task: &Task) -> Result<GenerationRecord> {
        let (planning_prompt, plan, plan_hash) = self.plan_phase(task)?;
        let Some(plan) = plan else {
            let mut record = self.direct_record(task, true)?;
            record.planning_prompt = Some(planning_prompt);
            return Ok(record);
        };
        let prompt = render_implementation_prompt(task, &plan, &self.pack.step_marker);
        let request = self.code_request(&prompt, self.config.sampling.samples_per_task);
        let response = self.gateway.complete(&request)?;
        Ok(GenerationRecord {
            task_id: task.task_id.clone(),
            variant: self.config.variant,
            config_digest: self.config_digest.clone(),
            planning_prompt: Some(planning_prompt),
            plan: Some(plan),
            implementation_prompt: prompt.text,
            candidates: response.completions,
            request_hashes: vec![plan_hash, response.request_hash],
            fallback_direct: false,
            turns: None,
            verdicts: Vec::new(),
        })
    }

    /// Incremental construction: one implementation request per plan step,
    /// each conditioned on the steps so far and the accumulated code.
    pub fn run_task_multi_turn(&self, task: &Task) -> Result<GenerationRecord> {
        let (planning_prompt, plan, plan_hash) = self.plan_phase(task)?;
        let Some(plan) = plan else {
            let mut record = self.direct_record(task, true)?;
            record.planning_prompt = Some(planning_prompt);
            return Ok(record);
        };
        let mut accumulated = String::new();
        let mut turns = Vec::with_capacity(plan.steps.len());
        let mut request_hashes = vec![plan_hash];
        let mut final_prompt = String::new();
        for turn in 0..plan.steps.len() {
            let prompt =
                render_multi_turn_prompt(task, &plan, turn, &accumulated, &self.pack.step_marker);
            let request = self.code_request(&prompt, 1);
            let response = self.gateway.complete(&request)?;
            let completion = response.completions.into_iter().next().unwrap_or_default();
            request_hashes.push(response.request_hash);
            final_prompt = prompt.text;
            let truncated = truncate_at_stops(&completion, &prompt.stop_sequences);
            turns.push(completion);
            if truncated.trim().is_empty() {
                continue;
            }
            if !accumulated.is_empty() && !accumulated.ends_with('\n') {
                accumulated.push('\n');
            }
            accumulated.push_str(truncated.trim_end_matches('\n'));
            accumulated.push('\n');
        }
        Ok(GenerationRecord {
            task_id: task.task_id.clone(),
            variant: self.config.variant,
            config_digest: self.config_digest.clone(),
            planning_prompt: Some(planning_prompt),
            plan: Some(plan),
            implementation_prompt: final_prompt,
            candidates: vec![accumulated],
            request_hashes,
            fallback_direct: false,
            turns: Some(turns),
            verdicts: Vec::new(),
        })
    }
}

/// Cut a completion at the first occurrence of any stop sequence.
pub fn truncate_at_stops(text: &str, stops: &[String]) -> String {
    let cut = stops
        .iter()
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    text[..cut].to_string()
}

/// Split a single-phase completion into its plan prefix and code remainder.
/// Consumes leading numbered step lines (1., 2., …), then an optional
/// docstring close and code-start cue, and returns the rest verbatim.
pub fn split_plan_and_code(completion: &str) -> (Option<Plan>, String) {
    let mut steps: Vec<String> = Vec::new();
    let mut rest_offset = 0;
    let mut expected = 1usize;
    let mut consumed_any = false;
    for line in completion.split_inclusive('\n') {
        let trimmed = line.trim();
        if trimmed.is_empty() && !consumed_any {
            rest_offset += line.len();
            continue;
        }
        let step = trimmed
            .split_once(". ")
            .and_then(|(num, text)| num.parse::<usize>().ok().map(|n| (n, text)))
            .filter(|(n, text)| *n == expected && !text.trim().is_empty());
        match step {
            Some((_, text)) => {
                steps.push(text.trim().to_string());
                expected += 1;
                consumed_any = true;
                rest_offset += line.len();
            }
            None => break,
        }
    }
    let mut rest = &completion[rest_offset..];
    if !steps.is_empty() {
        // skip separator furniture between plan and code
        while !rest.is_empty() {
            let line_end = rest.find('\n').map(|i| i + 1).unwrap_or(rest.len());
            let line = rest[..line_end].trim();
            if line.is_empty() || line == "'''" || line == "\"\"\"" || line == CODE_START_CUE {
                rest = &rest[line_end..];
            } else {
                break;
            }
        }
    }
    let plan = if steps.is_empty() {
        None
    } else {
        Plan::from_steps(steps).ok()
    };
    (plan, rest.to_string())
}

#[derive(Debug, Serialize, Deserialize)]
struct FailureLine {
    task_id: String,
    error: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct TimingLine {
    task_id: String,
    wall_s: f64,
}

fn existing_record_ids(path: &Path, digest: &str, variant: Variant) -> Result<BTreeSet<String>> {
    let mut done = BTreeSet::new();
    if !path.exists() {
        return Ok(done);
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GenerationRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
        if record.config_digest == digest && record.variant == variant {
            done.insert(record.task_id);
        }
    }
    Ok(done)
}

pub fn read_records(path: &Path) -> Result<Vec<GenerationRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut records = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(records)
}

/// Run every non-excluded task, with bounded worker parallelism and an
/// in-order writer. Resumable: tasks already recorded under the same config
/// digest are skipped.
pub fn run_suite(corpus: &Corpus, pipeline: &Pipeline) -> Result<PathBuf> {
    let run_dir = pipeline.config.run_dir.clone();
    std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(run_dir.display().to_string(), e))?;
    let meta_path = run_dir.join("run.meta");
    let records_path = run_dir.join("records.jsonl");
    let timings_path = run_dir.join("timings.jsonl");
    let failures_path = run_dir.join("failures.jsonl");

    if meta_path.exists() {
        let text = std::fs::read_to_string(&meta_path)
            .map_err(|e| Error::io(meta_path.display().to_string(), e))?;
        let meta: RunMeta = serde_json::from_str(&text).map_err(|e| Error::MalformedRecord {
            path: meta_path.display().to_string(),
            line: 1,
            message: e.to_string(),
        })?;
        if meta.config_digest != pipeline.config_digest {
            return Err(Error::Other(format!(
                "run directory {} holds records for a different config (digest {} vs {})",
                run_dir.display(),
                meta.config_digest,
                pipeline.config_digest
            )));
        }
    } else {
        let meta = RunMeta {
            config_digest: pipeline.config_digest.clone(),
            variant: pipeline.config.variant,
            k_shot: pipeline.config.k_shot,
            pack_name: pipeline.pack.name.clone(),
            corpus_name: pipeline.config.corpus.name.clone(),
            samples_per_task: pipeline.config.sampling.samples_per_task,
            backend_mode: pipeline.config.backend.mode,
            versions: BTreeMap::from([(
                "planharness".to_string(),
                env!("CARGO_PKG_VERSION").to_string(),
            )]),
        };
        let mut text = serde_json::to_string_pretty(&meta).expect("meta serializes");
        text.push('\n');
        std::fs::write(&meta_path, text)
            .map_err(|e| Error::io(meta_path.display().to_string(), e))?;
    }

    let done = existing_record_ids(&records_path, &pipeline.config_digest, pipeline.config.variant)?;
    let evaluated: Vec<&Task> = corpus.evaluated_tasks().collect();
    if evaluated.is_empty() {
        return Err(Error::EmptyTaskSet);
    }
    let pending: Vec<&Task> = evaluated
        .iter()
        .copied()
        .filter(|t| !done.contains(&t.task_id))
        .collect();

    let open_append = |path: &Path| -> Result<std::fs::File> {
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path.display().to_string(), e))
    };
    let mut records_file = open_append(&records_path)?;
    let mut timings_file = open_append(&timings_path)?;
    let mut failures_file = open_append(&failures_path)?;

    type TaskOutcome = std::result::Result<GenerationRecord, String>;
    let cursor = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, f64, TaskOutcome)>();
    let workers = pipeline.config.workers.min(pending.len()).max(1);
    let mut failed = 0usize;

    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..workers {
            let tx = tx.clone();
            let cursor = &cursor;
            let pending = &pending;
            scope.spawn(move || loop {
                let index = cursor.fetch_add(1, Ordering::SeqCst);
                let Some(task) = pending.get(index) else {
                    break;
                };
                let started = Instant::now();
                let outcome = pipeline.run_task(task).map_err(|e| e.to_string());
                let wall_s = started.elapsed().as_secs_f64();
                if tx.send((index, wall_s, outcome)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // in-order writer: buffer out-of-order completions, flush the ready
        // prefix so records.jsonl is byte-stable across runs
        let mut buffered: BTreeMap<usize, TaskOutcome> = BTreeMap::new();
        let mut next = 0usize;
        for (index, wall_s, outcome) in rx {
            let timing = TimingLine {
                task_id: pending[index].task_id.clone(),
                wall_s,
            };
            writeln!(
                timings_file,
                "{}",
                serde_json::to_string(&timing).expect("timing serializes")
            )
            .map_err(|e| Error::io(timings_path.display().to_string(), e))?;
            buffered.insert(index, outcome);
            while let Some(outcome) = buffered.remove(&next) {
                match outcome {
                    Ok(record) => {
                        writeln!(
                            records_file,
                            "{}",
                            serde_json::to_string(&record).expect("record serializes")
                        )
                        .map_err(|e| Error::io(records_path.display().to_string(), e))?;
                    }
                    Err(error) => {
                        failed += 1;
                        let failure = FailureLine {
                            task_id: pending[next].task_id.clone(),
                            error,
                        };
                        writeln!(
                            failures_file,
                            "{}",
                            serde_json::to_string(&failure).expect("failure serializes")
                        )
                        .map_err(|e| Error::io(failures_path.display().to_string(), e))?;
                    }
                }
                next += 1;
            }
        }
        Ok(())
    })?;

    let total = evaluated.len();
    if total > 0 && failed as f64 / total as f64 > pipeline.config.max_failure_ratio {
        return Err(Error::TooManyFailures {
            failed,
            total,
            limit: pipeline.config.max_failure_ratio,
        });
    }
    Ok(run_dir)
}
