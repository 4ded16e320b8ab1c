//! CodeBLEU: weighted sum of BLEU, keyword-weighted BLEU, syntax-tree
//! match, and dataflow match.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::astmatch::ast_match;
use crate::metrics::bleu::{bleu, weighted_bleu};
use crate::metrics::dataflow::{dataflow_match, extract_dataflow, DataflowGraph};
use crate::metrics::pyast::parse_syntax_tree;
use crate::metrics::tokenize::tokenize;

pub const DEFAULT_KEYWORD_WEIGHT: f64 = 5.0;
pub const DEFAULT_MAX_NGRAM: usize = 4;

/// Component weights, normalized to sum to 1 on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeBleuWeights {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub zeta: f64,
}

impl CodeBleuWeights {
    pub fn new(alpha: f64, beta: f64, delta: f64, zeta: f64) -> Result<Self> {
        if alpha < 0.0 || beta < 0.0 || delta < 0.0 || zeta < 0.0 {
            return Err(Error::InvalidConfig {
                field: "codebleu weights".into(),
                message: "weights must be non-negative".into(),
            });
        }
        let sum = alpha + beta + delta + zeta;
        if sum <= 0.0 {
            return Err(Error::InvalidConfig {
                field: "codebleu weights".into(),
                message: "at least one weight must be positive".into(),
            });
        }
        Ok(CodeBleuWeights {
            alpha: alpha / sum,
            beta: beta / sum,
            delta: delta / sum,
            zeta: zeta / sum,
        })
    }
}

impl Default for CodeBleuWeights {
    fn default() -> Self {
        CodeBleuWeights {
            alpha: 0.25,
            beta: 0.25,
            delta: 0.25,
            zeta: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeBleuReport {
    pub bleu: f64,
    pub weighted_bleu: f64,
    pub ast_match: f64,
    pub dataflow_match: f64,
    pub codebleu: f64,
    pub weights: CodeBleuWeights,
    /// Pinned smoothing convention, recorded for auditability.
    pub smoothing: String,
    pub flags: Vec<String>,
}

/// Shipped keyword list for the benchmark corpora's code language.
pub fn python_keywords() -> HashSet<String> {
    include_str!("../../assets/keywords/python.txt")
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect()
}

pub fn codebleu(
    candidate: &str,
    reference: &str,
    weights: &CodeBleuWeights,
    keywords: &HashSet<String>,
) -> Result<CodeBleuReport> {
    let cand_tokens = tokenize(candidate);
    let ref_tokens = tokenize(reference);
    if ref_tokens.is_empty() {
        return Err(Error::EmptyReference);
    }
    let mut flags = Vec::new();

    let bleu_score = bleu(&cand_tokens, &ref_tokens, DEFAULT_MAX_NGRAM)?;
    let weighted = weighted_bleu(
        &cand_tokens,
        &ref_tokens,
        DEFAULT_MAX_NGRAM,
        keywords,
        DEFAULT_KEYWORD_WEIGHT,
    )?;

    let reference_tree = parse_syntax_tree(reference)?;
    let (ast_score, cand_graph) = match parse_syntax_tree(candidate) {
        Ok(candidate_tree) => {
            let graph = extract_dataflow(candidate)?;
            (ast_match(&candidate_tree, &reference_tree), graph)
        }
        Err(_) => {
            flags.push("candidate_unparseable".to_string());
            (0.0, DataflowGraph::default())
        }
    };
    let reference_graph = extract_dataflow(reference)?;
    let (df_score, empty_reference) = dataflow_match(&cand_graph, &reference_graph);
    if empty_reference {
        flags.push("empty_reference_dataflow".to_string());
    }

    let combined = weights.alpha * bleu_score
        + weights.beta * weighted
        + weights.delta * ast_score
        + weights.zeta * df_score;
    Ok(CodeBleuReport {
        bleu: bleu_score,
        weighted_bleu: weighted,
        ast_match: ast_score,
        dataflow_match: df_score,
        codebleu: combined,
        weights: *weights,
        smoothing: "add-one on n>=2".to_string(),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PROGRAM: &str = "def f(xs):\n    total = 0\n    for x in xs:\n        total += x\n    return total\n";

    #[test]
    fn identity_scores_one() {
        let report = codebleu(
            PROGRAM,
            PROGRAM,
            &CodeBleuWeights::default(),
            &python_keywords(),
        )
        .unwrap();
        assert!((report.codebleu - 1.0).abs() < 1e-12);
        assert_eq!(report.bleu, 1.0);
        assert_eq!(report.ast_match, 1.0);
        assert_eq!(report.dataflow_match, 1.0);
    }

    #[test]
    fn degenerate_weights_reduce_to_bleu() {
        let weights = CodeBleuWeights::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let cand = "def f(xs):\n    return sum(xs)\n";
        let report = codebleu(cand, PROGRAM, &weights, &python_keywords()).unwrap();
        assert!((report.codebleu - report.bleu).abs() < 1e-12);
    }

    #[test]
    fn weights_normalize_on_construction() {
        let w = CodeBleuWeights::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((w.alpha - 0.25).abs() < 1e-12);
        assert!(CodeBleuWeights::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(CodeBleuWeights::new(-1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn unparseable_candidate_flagged_with_zero_ast() {
        let report = codebleu(
            "def broken(:\n",
            PROGRAM,
            &CodeBleuWeights::default(),
            &python_keywords(),
        )
        .unwrap();
        assert_eq!(report.ast_match, 0.0);
        assert!(report.flags.contains(&"candidate_unparseable".to_string()));
    }

    #[test]
    fn components_bounded() {
        let pairs = [
            ("x = 1\n", PROGRAM),
            (PROGRAM, "y = 2\n"),
            ("def g(a):\n    return a\n", PROGRAM),
        ];
        for (c, r) in pairs {
            let report =
                codebleu(c, r, &CodeBleuWeights::default(), &python_keywords()).unwrap();
            for v in [
                report.bleu,
                report.weighted_bleu,
                report.ast_match,
                report.dataflow_match,
                report.codebleu,
            ] {
                assert!((0.0..=1.0).contains(&v), "{v} out of range for {c:?}/{r:?}");
            }
        }
    }

    #[test]
    fn toy_pair_equals_hand_combined_components() {
        let cand = "def f(a):\n    b = a + 1\n    return b\n";
        let reference = "def f(x):\n    y = x + 1\n    z = y * 2\n    return z\n";
        let keywords = python_keywords();
        let weights = CodeBleuWeights::default();
        let report = codebleu(cand, reference, &weights, &keywords).unwrap();

        let b = bleu(&tokenize(cand), &tokenize(reference), 4).unwrap();
        let wb = weighted_bleu(&tokenize(cand), &tokenize(reference), 4, &keywords, 5.0).unwrap();
        let a = ast_match(
            &parse_syntax_tree(cand).unwrap(),
            &parse_syntax_tree(reference).unwrap(),
        );
        let (d, _) = dataflow_match(
            &extract_dataflow(cand).unwrap(),
            &extract_dataflow(reference).unwrap(),
        );
        let expected = 0.25 * b + 0.25 * wb + 0.25 * a + 0.25 * d;
        assert!((report.codebleu - expected).abs() < 1e-12);
    }

    #[test]
    fn keyword_list_loaded() {
        let kw = python_keywords();
        assert!(kw.contains("return"));
        assert!(kw.contains("lambda"));
        assert!(!kw.contains(""));
    }
}
