//! Scoring: unbiased Pass@k over execution verdicts and CodeBLEU over
//! candidate/reference source pairs.

mod astmatch;
mod bleu;
mod codebleu;
mod dataflow;
mod passk;
mod pyast;
mod tokenize;

pub use astmatch::ast_match;
pub use bleu::{bleu, weighted_bleu};
pub use codebleu::{
    codebleu, python_keywords, CodeBleuReport, CodeBleuWeights, DEFAULT_KEYWORD_WEIGHT,
    DEFAULT_MAX_NGRAM,
};
pub use dataflow::{dataflow_match, extract_dataflow, DataflowGraph};
pub use passk::{pass_at_k_single, pass_at_k_suite, TaskCounts};
pub use pyast::{parse_syntax_tree, SyntaxTree, TreeNode};
pub use tokenize::{detokenize, tokenize};
