//! Quality metrics for maintained counterfactuals: validity over the active
//! set, proximity, neighborhood label agreement, and target-class kernel
//! log-density — all measured against the current model and recent buffer.

use crate::core::{CfeState, ClassId, FeatureVector, LabeledBuffer};
use crate::models::OnlineClassifier;

/// Metric parameters.
#[derive(Debug, Clone)]
pub struct MetricsConfig {
    /// Neighborhood size of the label-agreement score.
    pub k: usize,
    /// Gaussian bandwidth of the kernel density score.
    pub kde_bandwidth: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            k: 15,
            kde_bandwidth: 0.1,
        }
    }
}

/// Aggregated metrics of one method at one checkpoint. Absent values mean
/// the metric was undefined (no active states, empty buffer, or no
/// target-class buffer points), never zero.
#[derive(Debug, Clone)]
pub struct CheckpointReport {
    pub checkpoint: usize,
    pub method: String,
    pub validity: Option<f64>,
    pub mean_l2: Option<f64>,
    pub mean_knn: Option<f64>,
    pub mean_kde: Option<f64>,
    /// States whose density score was undefined and excluded from the mean.
    pub kde_excluded: usize,
    pub active: usize,
    pub retired: usize,
    /// Cumulative method time attributed by the caller; not part of the
    /// metric computation.
    pub elapsed_s: f64,
}

/// Fraction of active states whose counterfactual currently receives its
/// target prediction. `None` when no state is active.
pub fn validity_metric(states: &[CfeState], model: &dyn OnlineClassifier) -> Option<f64> {
    let active: Vec<&CfeState> = states.iter().filter(|s| s.active).collect();
    if active.is_empty() {
        return None;
    }
    let valid = active
        .iter()
        .filter(|s| model.predict(&s.x_cf) == s.target)
        .count();
    Some(valid as f64 / active.len() as f64)
}

/// Euclidean distance between a query and its counterfactual.
pub fn proximity(x: &FeatureVector, x_cf: &FeatureVector) -> f64 {
    x.distance(x_cf)
}

/// Fraction of the `k` nearest buffer points (no prediction filter) whose
/// true label equals the target class. Uses the whole buffer when it holds
/// fewer than `k` points; `None` on an empty buffer.
pub fn knn_score(
    x_cf: &FeatureVector,
    target: ClassId,
    buf: &LabeledBuffer,
    k: usize,
) -> Option<f64> {
    if buf.is_empty() {
        return None;
    }
    if buf.len() < k {
        log::warn!("knn score over {} < k = {k} buffer points", buf.len());
    }
    let neighbors = buf.knn(x_cf, k);
    let hits = neighbors.iter().filter(|inst| inst.y == target).count();
    Some(hits as f64 / neighbors.len() as f64)
}

/// Natural-log kernel density of `x_cf` under the buffer points truly
/// labeled as the target class:
/// `ln( sum_z exp(-|x-z|^2 / (2h^2)) / (n h^d) )`.
/// `None` when the buffer holds no target-class point.
pub fn kde_score(
    x_cf: &FeatureVector,
    target: ClassId,
    buf: &LabeledBuffer,
    bandwidth: f64,
) -> Option<f64> {
    assert!(bandwidth > 0.0);
    let exponents: Vec<f64> = buf
        .iter()
        .filter(|inst| inst.y == target)
        .map(|inst| {
            let d = x_cf.distance(&inst.x);
            -d * d / (2.0 * bandwidth * bandwidth)
        })
        .collect();
    if exponents.is_empty() {
        return None;
    }
    // log-sum-exp keeps far-away points from underflowing to -inf
    let peak = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = exponents.iter().map(|e| (e - peak).exp()).sum();
    let d = x_cf.dim() as f64;
    Some(peak + sum.ln() - (exponents.len() as f64).ln() - d * bandwidth.ln())
}

/// Evaluates all metrics over the active states of one method.
pub fn checkpoint_evaluate(
    states: &[CfeState],
    model: &dyn OnlineClassifier,
    buf: &LabeledBuffer,
    cfg: &MetricsConfig,
    checkpoint: usize,
    method: &str,
) -> CheckpointReport {
    let active: Vec<&CfeState> = states.iter().filter(|s| s.active).collect();
    let retired = states.len() - active.len();

    if active.is_empty() {
        return CheckpointReport {
            checkpoint,
            method: method.to_string(),
            validity: None,
            mean_l2: None,
            mean_knn: None,
            mean_kde: None,
            kde_excluded: 0,
            active: 0,
            retired,
            elapsed_s: 0.0,
        };
    }

    let valid = active
        .iter()
        .filter(|s| model.predict(&s.x_cf) == s.target)
        .count();
    let mean_l2 = active
        .iter()
        .map(|s| proximity(&s.x0, &s.x_cf))
        .sum::<f64>()
        / active.len() as f64;

    let knn_values: Vec<f64> = active
        .iter()
        .filter_map(|s| knn_score(&s.x_cf, s.target, buf, cfg.k))
        .collect();
    let mean_knn = if knn_values.is_empty() {
        None
    } else {
        Some(knn_values.iter().sum::<f64>() / knn_values.len() as f64)
    };

    let kde_values: Vec<f64> = active
        .iter()
        .filter_map(|s| kde_score(&s.x_cf, s.target, buf, cfg.kde_bandwidth))
        .collect();
    let kde_excluded = active.len() - kde_values.len();
    if kde_excluded > 0 {
        log::warn!(
            "{kde_excluded} states lacked target-class density support at checkpoint {checkpoint}"
        );
    }
    let mean_kde = if kde_values.is_empty() {
        None
    } else {
        Some(kde_values.iter().sum::<f64>() / kde_values.len() as f64)
    };

    CheckpointReport {
        checkpoint,
        method: method.to_string(),
        validity: Some(valid as f64 / active.len() as f64),
        mean_l2: Some(mean_l2),
        mean_knn,
        mean_kde,
        kde_excluded,
        active: active.len(),
        retired,
        elapsed_s: 0.0,
    }
}
