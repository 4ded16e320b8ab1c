//! Unbiased Pass@k estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-task sample counts: `n` generated, `c` passing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskCounts {
    pub n: u64,
    pub c: u64,
}

/// Unbiased single-problem estimator `1 - C(n-c, k) / C(n, k)`, computed
/// with the stable product form `1 - prod_{i=n-c+1}^{n} (1 - k/i)` rather
/// than raw factorials.
pub fn pass_at_k_single(n: u64, c: u64, k: u64) -> Result<f64> {
    if c > n {
        return Err(Error::CExceedsN { n, c });
    }
    if k < 1 || k > n {
        return Err(Error::KExceedsN { n, k });
    }
    if n - c < k {
        return Ok(1.0);
    }
    let mut product = 1.0f64;
    for i in (n - c + 1)..=n {
        product *= 1.0 - k as f64 / i as f64;
    }
    Ok(1.0 - product)
}

/// Mean of `pass_at_k_single` over problems.
pub fn pass_at_k_suite(tasks: &[TaskCounts], k: u64) -> Result<f64> {
    if tasks.is_empty() {
        return Err(Error::EmptyTaskSet);
    }
    let mut sum = 0.0;
    for t in tasks {
        sum += pass_at_k_single(t.n, t.c, k)?;
    }
    Ok(sum / tasks.len() as f64)
}
