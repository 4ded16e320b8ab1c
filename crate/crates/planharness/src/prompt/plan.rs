//! Plan extraction from raw model completions.

use crate::error::{Error, Result};
use crate::prompt::Plan;

/// Parse the maximal leading run of `<int>. <text>` lines numbered 1, 2, 3…
/// Leading blank lines are skipped; the first numbering break or non-step
/// line ends the plan; everything after is discarded from `steps` but kept
/// in `raw`.
pub fn parse_plan(completion: &str) -> Result<Plan> {
    let mut steps = Vec::new();
    let mut expected = 1u64;
    for line in completion.lines() {
        if line.trim().is_empty() {
            if steps.is_empty() {
                continue;
            }
            break;
        }
        match split_step_line(line) {
            Some((num, text)) if num == expected => {
                steps.push(text.to_string());
                expected += 1;
            }
            _ => break,
        }
    }
    if steps.is_empty() {
        return Err(Error::UnparseablePlan);
    }
    Ok(Plan {
        steps,
        raw: completion.to_string(),
    })
}

/// Split `  3. Do the thing.` into `(3, "Do the thing.")`.
fn split_step_line(line: &str) -> Option<(u64, &str)> {
    let trimmed = line.trim_start();
    let dot = trimmed.find('.')?;
    let num: u64 = trimmed[..dot].parse().ok()?;
    let rest = &trimmed[dot + 1..];
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    let text = rest.trim();
    if text.is_empty() {
        return None;
    }
    Some((num, text))
}
