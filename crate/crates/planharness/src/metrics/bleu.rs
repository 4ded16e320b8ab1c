//! BLEU and keyword-weighted BLEU over code tokens.
//!
//! Geometric mean of modified n-gram precisions up to `max_n`, with brevity
//! penalty. Smoothing is pinned to add-one on orders n >= 2 so short
//! completions score reproducibly.

use std::collections::HashMap;
use std::collections::HashSet;

use crate::error::{Error, Result};

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts: HashMap<&[String], u64> = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

fn brevity_penalty(candidate_len: usize, reference_len: usize) -> f64 {
    if candidate_len >= reference_len {
        1.0
    } else {
        (1.0 - reference_len as f64 / candidate_len as f64).exp()
    }
}

/// Modified n-gram precision (clipped counts), optionally token-weighted.
/// Weighting applies only when `weights` is given; it is used for the
/// unigram order of the keyword-weighted variant.
fn modified_precision(
    candidate: &[String],
    reference: &[String],
    n: usize,
    weights: Option<(&HashSet<String>, f64)>,
) -> (f64, f64) {
    let cand = ngram_counts(candidate, n);
    let reference = ngram_counts(reference, n);
    let weight_of = |gram: &[String]| -> f64 {
        match weights {
            Some((keywords, w)) if n == 1 && keywords.contains(&gram[0]) => w,
            _ => 1.0,
        }
    };
    let mut matched = 0.0;
    let mut total = 0.0;
    for (gram, count) in &cand {
        let clip = reference.get(gram).copied().unwrap_or(0).min(*count);
        let w = weight_of(gram);
        matched += clip as f64 * w;
        total += *count as f64 * w;
    }
    (matched, total)
}

fn bleu_inner(
    candidate: &[String],
    reference: &[String],
    max_n: usize,
    weights: Option<(&HashSet<String>, f64)>,
) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    if candidate.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (matched, total) = modified_precision(candidate, reference, n, weights);
        let precision = if n >= 2 {
            (matched + 1.0) / (total + 1.0)
        } else if total > 0.0 {
            matched / total
        } else {
            0.0
        };
        if precision == 0.0 {
            return Ok(0.0);
        }
        log_sum += precision.ln() / max_n as f64;
    }
    Ok(brevity_penalty(candidate.len(), reference.len()) * log_sum.exp())
}

/// Plain BLEU over token lists.
pub fn bleu(candidate: &[String], reference: &[String], max_n: usize) -> Result<f64> {
    bleu_inner(candidate, reference, max_n, None)
}

/// Keyword-weighted BLEU: unigram matches on keyword tokens count
/// `keyword_weight` times; higher orders are unweighted.
pub fn weighted_bleu(
    candidate: &[String],
    reference: &[String],
    max_n: usize,
    keyword_set: &HashSet<String>,
    keyword_weight: f64,
) -> Result<f64> {
    bleu_inner(candidate, reference, max_n, Some((keyword_set, keyword_weight)))
}
