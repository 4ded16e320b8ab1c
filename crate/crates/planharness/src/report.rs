//! Markdown comparison tables across scored runs.
//!
//! One row per run, Pass@k and CodeBLEU columns, plus a relative-improvement
//! column against a designated baseline run (the first), computed as
//! (method − baseline) / baseline on Pass@1.

use crate::error::{Error, Result};
use crate::score::SuiteSummary;

fn percent(value: f64) -> String {
    format!("{:.1}", value * 100.0)
}

/// Render a comparison table. The first summary is the baseline; with a
/// single run the improvement column is omitted.
pub fn render_table(summaries: &[SuiteSummary]) -> Result<String> {
    if summaries.is_empty() {
        return Err(Error::EmptyTaskSet);
    }
    let baseline = &summaries[0];
    for s in &summaries[1..] {
        if s.corpus_name != baseline.corpus_name {
            return Err(Error::CorpusMismatch(format!(
                "{} vs {}",
                baseline.corpus_name, s.corpus_name
            )));
        }
        if s.suite != baseline.suite {
            return Err(Error::CorpusMismatch(format!(
                "suite mismatch: {:?} vs {:?}",
                baseline.suite, s.suite
            )));
        }
    }
    // columns: the union of pass@k keys present in every summary, sorted by k
    let mut ks: Vec<u64> = baseline
        .pass_at_k
        .keys()
        .filter(|key| summaries.iter().all(|s| s.pass_at_k.contains_key(*key)))
        .filter_map(|key| key.strip_prefix("pass@")?.parse().ok())
        .collect();
    ks.sort_unstable();
    if ks.is_empty() {
        return Err(Error::Other(
            "no pass@k column shared by all runs".to_string(),
        ));
    }
    let with_improvement = summaries.len() > 1;
    let baseline_key = format!("pass@{}", ks[0]);
    let baseline_value = baseline.pass_at_k[&baseline_key];

    let mut header = String::from("| Method |");
    let mut rule = String::from("| --- |");
    for k in &ks {
        header.push_str(&format!(" Pass@{k} |"));
        rule.push_str(" --- |");
    }
    header.push_str(" CodeBLEU |");
    rule.push_str(" --- |");
    if with_improvement {
        header.push_str(&format!(" Rel. Pass@{} vs {} |", ks[0], baseline.variant));
        rule.push_str(" --- |");
    }

    let mut out = format!(
        "Corpus: {} ({:?} suite, {} tasks)\n\n{header}\n{rule}\n",
        baseline.corpus_name, baseline.suite, baseline.n_tasks
    );
    for (i, s) in summaries.iter().enumerate() {
        let mut row = format!("| {} |", s.variant);
        for k in &ks {
            row.push_str(&format!(" {} |", percent(s.pass_at_k[&format!("pass@{k}")])));
        }
        row.push_str(&format!(" {} |", percent(s.codebleu)));
        if with_improvement {
            if i == 0 {
                row.push_str(" — |");
            } else if baseline_value == 0.0 {
                row.push_str(" n/a |");
            } else {
                let delta = (s.pass_at_k[&baseline_key] - baseline_value) / baseline_value;
                row.push_str(&format!(" {:+.1}% |", delta * 100.0));
            }
        }
        out.push_str(&row);
        out.push('\n');
    }
    Ok(out)
}
