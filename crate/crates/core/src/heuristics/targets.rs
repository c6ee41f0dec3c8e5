//! Training targets derived from search results.

use crate::planner::PlanResult;
use crate::tree::OrKey;

/// Normalizes non-negative weights to a distribution; `None` if they sum to zero.
pub fn normalize_products(products: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = products.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return None;
    }
    Some(products.iter().map(|p| p / total).collect())
}

/// Prior target for `key`: candidates weighted by the value products of their AND nodes
/// (not by visit counts).
pub fn prior_targets_from_tree(result: &PlanResult, key: OrKey) -> Option<Vec<f64>> {
    normalize_products(&result.and_value_products(key)?)
}

/// One regression target per solution-tree OR node: the return `G` computed during
/// extraction.
pub fn value_targets_from_result(result: &PlanResult) -> Vec<(OrKey, f64)> {
    result.returns()
}
