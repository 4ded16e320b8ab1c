//! Prompt renderers for each generation variant.
//!
//! Two block layouts exist, chosen by whether the exemplar or task carries a
//! function signature: the signature layout places intent, step marker, and
//! steps inside a `'''` docstring under the header; the bare layout emits
//! them at column zero. Blocks are separated by one blank line and the test
//! task is always last.

use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::prompt::{Exemplar, ExemplarPack, PackStyle, Phase, Plan, RenderedPrompt};

pub const CODE_START_CUE: &str = "# Write your code here.";
pub const GROUNDTRUTH_CUE: &str = "Write steps according to the code.";

const DOCSTRING: &str = "'''";

fn indent4(text: &str) -> String {
    text.lines()
        .map(|l| {
            if l.trim().is_empty() {
                String::new()
            } else {
                format!("    {l}")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn planning_stop_sequences(has_signature: bool) -> Vec<String> {
    if has_signature {
        vec![DOCSTRING.to_string(), "\"\"\"".to_string()]
    } else {
        vec!["\n\n".to_string()]
    }
}

fn implementation_stop_sequences() -> Vec<String> {
    vec![
        "\ndef ".to_string(),
        "\nclass ".to_string(),
        "\nif __name__".to_string(),
    ]
}

/// Exemplar block for plan-only styles (standard, CoT, extremely concise).
fn planning_exemplar_block(ex: &Exemplar, marker: &str) -> String {
    let numbered = ex.plan.numbered_lines();
    match &ex.signature {
        Some(sig) => format!(
            "{sig}\n    {DOCSTRING}\n{}\n    {marker}\n{}\n    {DOCSTRING}",
            indent4(&ex.intent),
            indent4(&numbered),
        ),
        None => format!("{}\n{marker}\n{numbered}", ex.intent),
    }
}

/// Task block ending with the step marker so the model continues with `1.`.
fn planning_task_block(task: &Task, marker: &str) -> String {
    match &task.signature {
        Some(sig) => format!(
            "{sig}\n    {DOCSTRING}\n{}\n    {marker}\n",
            indent4(&task.intent)
        ),
        None => format!("{}\n{marker}\n", task.intent),
    }
}

fn join_blocks(blocks: Vec<String>, task_block: String) -> String {
    let mut text = blocks.join("\n\n");
    if !text.is_empty() {
        text.push_str("\n\n");
    }
    text.push_str(&task_block);
    text
}

/// Few-shot planning prompt (standard or extremely concise plans).
pub fn render_planning_prompt(pack: &ExemplarPack, task: &Task) -> Result<RenderedPrompt> {
    if !matches!(
        pack.style,
        PackStyle::StandardPlan | PackStyle::ExtremelyConcise
    ) {
        return Err(Error::PackStyleMismatch {
            style: pack.style.as_str().to_string(),
            operation: "render_planning_prompt".to_string(),
        });
    }
    pack.validate()?;
    render_plan_style(pack, task, Phase::Planning)
}

/// CoT baseline prompt: same layout as planning, but the completion is
/// expected to run past the steps into code, so implementation stops apply.
pub fn render_cot_prompt(pack: &ExemplarPack, task: &Task) -> Result<RenderedPrompt> {
    if pack.style != PackStyle::Cot {
        return Err(Error::PackStyleMismatch {
            style: pack.style.as_str().to_string(),
            operation: "render_cot_prompt".to_string(),
        });
    }
    pack.validate()?;
    let mut rendered = render_plan_style(pack, task, Phase::Single)?;
    rendered.stop_sequences = implementation_stop_sequences();
    Ok(rendered)
}

fn render_plan_style(pack: &ExemplarPack, task: &Task, phase: Phase) -> Result<RenderedPrompt> {
    let blocks = pack
        .exemplars
        .iter()
        .map(|ex| planning_exemplar_block(ex, &pack.step_marker))
        .collect();
    let text = join_blocks(blocks, planning_task_block(task, &pack.step_marker));
    Ok(RenderedPrompt {
        text,
        stop_sequences: planning_stop_sequences(task.signature.is_some()),
        phase,
    })
}

/// Implementation-phase prompt: the task input with the plan's numbered
/// steps appended inside the intent block, then a code-start cue.
pub fn render_implementation_prompt(task: &Task, plan: &Plan, step_marker: &str) -> RenderedPrompt {
    let numbered = plan.numbered_lines();
    let text = match &task.signature {
        Some(sig) => format!(
            "{sig}\n    {DOCSTRING}\n{}\n    {step_marker}\n{}\n    {DOCSTRING}\n    {CODE_START_CUE}\n",
            indent4(&task.intent),
            indent4(&numbered),
        ),
        None => format!(
            "{}\n{step_marker}\n{numbered}\n{CODE_START_CUE}\n",
            task.intent
        ),
    };
    RenderedPrompt {
        text,
        stop_sequences: implementation_stop_sequences(),
        phase: Phase::Implementation,
    }
}

/// One-phase prompt: exemplars carry plan and code; the model emits plan
/// followed by code in a single completion.
pub fn render_one_phase_prompt(pack: &ExemplarPack, task: &Task) -> Result<RenderedPrompt> {
    if pack.style != PackStyle::OnePhase {
        return Err(Error::PackStyleMismatch {
            style: pack.style.as_str().to_string(),
            operation: "render_one_phase_prompt".to_string(),
        });
    }
    pack.validate()?;
    let blocks = pack
        .exemplars
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let code = ex
                .code
                .as_deref()
                .ok_or(Error::ExemplarMissingCode { index: i })?;
            let numbered = ex.plan.numbered_lines();
            Ok(match &ex.signature {
                Some(sig) => format!(
                    "{sig}\n    {DOCSTRING}\n{}\n    {}\n{}\n    {DOCSTRING}\n    {CODE_START_CUE}\n{}",
                    indent4(&ex.intent),
                    pack.step_marker,
                    indent4(&numbered),
                    code.trim_end(),
                ),
                None => format!(
                    "{}\n{}\n{numbered}\n{CODE_START_CUE}\n{}",
                    ex.intent,
                    pack.step_marker,
                    code.trim_end(),
                ),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let text = join_blocks(blocks, planning_task_block(task, &pack.step_marker));
    Ok(RenderedPrompt {
        text,
        stop_sequences: implementation_stop_sequences(),
        phase: Phase::Single,
    })
}

/// Direct baseline: the task input verbatim, no exemplars.
pub fn render_direct_prompt(task: &Task) -> RenderedPrompt {
    RenderedPrompt {
        text: task.model_input().to_string(),
        stop_sequences: implementation_stop_sequences(),
        phase: Phase::Single,
    }
}

/// Ground-truth planning: exemplars show intent + code followed by the cue
/// and steps; the task block shows intent + reference solution + cue.
pub fn render_groundtruth_planning_prompt(
    pack: &ExemplarPack,
    task: &Task,
) -> Result<RenderedPrompt> {
    if pack.style != PackStyle::GroundtruthPlan {
        return Err(Error::PackStyleMismatch {
            style: pack.style.as_str().to_string(),
            operation: "render_groundtruth_planning_prompt".to_string(),
        });
    }
    pack.validate()?;
    if task.reference_solution.trim().is_empty() {
        return Err(Error::MissingReference {
            task_id: task.task_id.clone(),
        });
    }
    let blocks = pack
        .exemplars
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let code = ex
                .code
                .as_deref()
                .ok_or(Error::ExemplarMissingCode { index: i })?;
            let numbered = ex.plan.numbered_lines();
            Ok(match &ex.signature {
                Some(sig) => format!(
                    "{sig}\n    {DOCSTRING}\n{}\n    {DOCSTRING}\n{}\n{GROUNDTRUTH_CUE}\n{}",
                    indent4(&ex.intent),
                    code.trim_end(),
                    indent4(&numbered),
                ),
                None => format!(
                    "{}\n{}\n{GROUNDTRUTH_CUE}\n{numbered}",
                    ex.intent,
                    code.trim_end(),
                ),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let task_block = match &task.signature {
        Some(sig) => format!(
            "{sig}\n    {DOCSTRING}\n{}\n    {DOCSTRING}\n{}\n{GROUNDTRUTH_CUE}\n",
            indent4(&task.intent),
            task.reference_solution.trim_end(),
        ),
        None => format!(
            "{}\n{}\n{GROUNDTRUTH_CUE}\n",
            task.intent,
            task.reference_solution.trim_end(),
        ),
    };
    Ok(RenderedPrompt {
        text: join_blocks(blocks, task_block),
        stop_sequences: vec!["\n\n".to_string()],
        phase: Phase::Planning,
    })
}

/// Turn `i` of a multi-turn run: the task input with steps `1..=i` and the
/// code accumulated from earlier turns.
pub fn render_multi_turn_prompt(
    task: &Task,
    plan: &Plan,
    turn: usize,
    accumulated_code: &str,
    step_marker: &str,
) -> RenderedPrompt {
    let steps: Vec<String> = plan.steps[..=turn.min(plan.steps.len() - 1)].to_vec();
    let numbered = Plan::numbered(&steps);
    let mut text = match &task.signature {
        Some(sig) => format!(
            "{sig}\n    {DOCSTRING}\n{}\n    {step_marker}\n{}\n    {DOCSTRING}\n    {CODE_START_CUE}\n",
            indent4(&task.intent),
            indent4(&numbered),
        ),
        None => format!(
            "{}\n{step_marker}\n{numbered}\n{CODE_START_CUE}\n",
            task.intent
        ),
    };
    if !accumulated_code.is_empty() {
        text.push_str(accumulated_code.trim_end());
        text.push('\n');
    }
    RenderedPrompt {
        text,
        stop_sequences: implementation_stop_sequences(),
        phase: Phase::Implementation,
    }
}
