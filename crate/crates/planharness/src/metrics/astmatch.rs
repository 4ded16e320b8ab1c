//! Subtree matching between kind-labelled syntax trees.

use std::collections::HashMap;

use crate::metrics::pyast::{SyntaxTree, TreeNode};

/// Multiset of all rooted subtrees of depth >= 1 (internal nodes), keyed by
/// canonical fingerprint.
fn subtree_multiset(tree: &SyntaxTree) -> HashMap<String, u64> {
    let mut counts = HashMap::new();
    collect(&tree.root, &mut counts);
    counts
}

fn collect(node: &TreeNode, counts: &mut HashMap<String, u64>) {
    if !node.children.is_empty() {
        *counts.entry(node.fingerprint()).or_insert(0) += 1;
    }
    for child in &node.children {
        collect(child, counts);
    }
}

/// Fraction of the reference's subtrees (with multiplicity) present in the
/// candidate's subtree multiset. Returns 1.0 when the reference contributes
/// no subtrees (single-node tree).
pub fn ast_match(candidate: &SyntaxTree, reference: &SyntaxTree) -> f64 {
    let cand = subtree_multiset(candidate);
    let refs = subtree_multiset(reference);
    let total: u64 = refs.values().sum();
    if total == 0 {
        return 1.0;
    }
    let matched: u64 = refs
        .iter()
        .map(|(key, count)| cand.get(key).copied().unwrap_or(0).min(*count))
        .sum();
    matched as f64 / total as f64
}
