//! Continuous repair of counterfactual states against an evolving
//! classifier: retirement, low-margin triggering, a sampled validity
//! direction, a kernel mean-shift plausibility direction, and the shared
//! step rule that blends either correction with a proximity pull.

use crate::core::{CfeState, ClassId, FeatureVector, LabeledBuffer, RngStream};
use crate::error::{Error, Result};
use crate::models::{argmax_class, OnlineClassifier};
use crate::vecmath::{add_scaled, dot, norm, sub};

/// Which correction vector drives low-margin repairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Low margin: sampled validity direction. Additionally applies the
    /// plausibility direction every `plausibility_period` sweeps.
    ValidityPlausibility,
    /// Low margin: plausibility direction. No scheduled steps.
    PlausibilityOnly,
}

/// Parameters of the maintenance loop.
#[derive(Debug, Clone)]
pub struct MaintenanceConfig {
    /// Repair when the target probability falls below this.
    pub tau_low: f64,
    /// Weight of the correction vector in the step rule.
    pub lambda_u: f64,
    /// Weight of the pull back toward the original query.
    pub lambda_r: f64,
    /// Step length.
    pub alpha: f64,
    pub variant: Variant,
    /// Scheduled plausibility cadence (in maintenance sweeps) of the
    /// validity-plausibility variant.
    pub plausibility_period: u64,
    /// Gaussian scale of validity-direction perturbations.
    pub sigma: f64,
    /// Perturbation count per validity-direction estimate (rounded up to an
    /// even number; perturbations are drawn in symmetric pairs).
    pub samples: usize,
    /// Ridge regularizer of the surrogate fit.
    pub ridge: f64,
    /// Neighbors retrieved for the plausibility subset.
    pub neighbor_count: usize,
    /// Epanechnikov bandwidth of the mean-shift weights.
    pub bandwidth: f64,
    /// Apply maintenance every this many stream samples.
    pub cadence: u64,
}

impl Default for MaintenanceConfig {
    fn default() -> Self {
        Self {
            tau_low: 0.6,
            lambda_u: 2.0,
            lambda_r: 1.0,
            alpha: 0.05,
            variant: Variant::ValidityPlausibility,
            plausibility_period: 60,
            sigma: 0.05,
            samples: 200,
            ridge: 1e-3,
            neighbor_count: 25,
            bandwidth: 0.3,
            cadence: 10,
        }
    }
}

impl MaintenanceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if self.tau_low.is_nan() || self.tau_low <= 0.0 || self.tau_low >= 1.0 {
            return bad("tau_low must be in (0, 1)");
        }
        if self.lambda_u < 0.0 || self.lambda_r < 0.0 {
            return bad("lambda weights must be nonnegative");
        }
        if self.lambda_u == 0.0 && self.lambda_r == 0.0 {
            return bad("lambda_u and lambda_r must not both be zero");
        }
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return bad("alpha must be positive");
        }
        for value in [self.sigma, self.bandwidth, self.ridge] {
            if value.is_nan() || value <= 0.0 {
                return bad("sigma, bandwidth and ridge must be positive");
            }
        }
        if self.samples == 0
            || self.neighbor_count == 0
            || self.plausibility_period == 0
            || self.cadence == 0
        {
            return bad("samples, neighbor_count, plausibility_period and cadence must be >= 1");
        }
        Ok(())
    }

    pub fn variant_name(&self) -> &'static str {
        match self.variant {
            Variant::ValidityPlausibility => "ours-vp",
            Variant::PlausibilityOnly => "ours-p",
        }
    }
}

/// What [`maintain_step`] did to a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateAction {
    Retired,
    Unchanged,
    ValidityStep,
    PlausibilityStep,
    /// A step was due but no usable direction existed (empty plausibility
    /// subset, or the weighted directions cancelled exactly).
    SkippedDegenerate,
}

/// Outcome and diagnostics of one maintenance step.
#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    pub action: UpdateAction,
    /// Target probability before / after the step (absent for inactive
    /// states, which are never queried).
    pub prob_before: Option<f64>,
    pub prob_after: Option<f64>,
    /// Norm of the selected correction vector, when one was computed.
    pub correction_norm: Option<f64>,
    /// Distance back to the original query before the step.
    pub proximity_norm: f64,
}

/// True when the model already predicts the target class for the original
/// query, so the explanation no longer needs to be maintained.
pub fn check_retire(state: &CfeState, model: &dyn OnlineClassifier) -> bool {
    model.predict(&state.x0) == state.target
}

/// Low-margin trigger: the counterfactual is invalid or its target-class
/// probability fell below `tau_low`.
pub fn needs_update(state: &CfeState, model: &dyn OnlineClassifier, tau_low: f64) -> bool {
    let probs = model.prob(&state.x_cf);
    argmax_class(&probs) != state.target || probs[state.target] < tau_low
}

/// Epanechnikov kernel `max(0, 1 - |r|^2 / h^2)`; compactly supported,
/// exactly zero at and beyond the bandwidth.
pub fn epanechnikov(r: &[f64], bandwidth: f64) -> f64 {
    assert!(bandwidth > 0.0, "bandwidth must be positive");
    let sq = dot(r, r);
    (1.0 - sq / (bandwidth * bandwidth)).max(0.0)
}

/// Solves the symmetric positive-definite system `a x = b` in place by
/// Cholesky decomposition.
#[allow(clippy::needless_range_loop)]
fn solve_spd(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    // decompose: a = L L^T, stored in the lower triangle
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            if i == j {
                a[i][j] = s.max(1e-300).sqrt();
            } else {
                a[i][j] = s / a[j][j];
            }
        }
    }
    // forward substitution L y = b
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i][k] * b[k];
        }
        b[i] = s / a[i][i];
    }
    // back substitution L^T x = y
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k][i] * b[k];
        }
        b[i] = s / a[i][i];
    }
    b
}

/// Weighted ridge regression of `targets` on `rows` (no intercept):
/// solves `(R^T W R + ridge I) v = R^T W t`.
#[allow(clippy::needless_range_loop)]
pub fn weighted_ridge(rows: &[Vec<f64>], weights: &[f64], targets: &[f64], ridge: f64) -> Vec<f64> {
    assert!(!rows.is_empty());
    assert_eq!(rows.len(), weights.len());
    assert_eq!(rows.len(), targets.len());
    let d = rows[0].len();
    let mut ata = vec![vec![0.0; d]; d];
    let mut atb = vec![0.0; d];
    for ((row, &w), &t) in rows.iter().zip(weights).zip(targets) {
        for i in 0..d {
            let wi = w * row[i];
            atb[i] += wi * t;
            for j in 0..=i {
                ata[i][j] += wi * row[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            ata[j][i] = ata[i][j];
        }
        ata[i][i] += ridge;
    }
    solve_spd(ata, atb)
}

/// Estimates the direction of locally increasing target-class probability by
/// fitting a weighted linear surrogate to probabilities queried at Gaussian
/// perturbations of `x_cf`.
///
/// Perturbations are drawn in antithetic pairs, so a constant probability
/// surface yields the exact zero vector. On piecewise-constant models the
/// whole perturbation cloud can land inside one flat region; when every
/// queried probability is identical the scale doubles (up to three times)
/// until the sample sees variation, keeping the estimate informative on
/// tree classifiers.
pub fn validity_direction(
    x_cf: &FeatureVector,
    target: ClassId,
    model: &dyn OnlineClassifier,
    sigma: f64,
    samples: usize,
    ridge: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if samples == 0 {
        return Err(Error::InvalidParameter(
            "validity direction needs at least one sample".into(),
        ));
    }
    assert!(sigma > 0.0 && ridge > 0.0);
    let dim = x_cf.dim();
    if samples < dim {
        log::warn!("validity direction underdetermined: {samples} samples for {dim} dims");
    }
    let pairs = samples.div_ceil(2);
    let mut result = vec![0.0; dim];
    let mut scale = sigma;
    for _attempt in 0..4 {
        let mut rows = Vec::with_capacity(2 * pairs);
        let mut weights = Vec::with_capacity(2 * pairs);
        let mut targets = Vec::with_capacity(2 * pairs);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..pairs {
            let eps: Vec<f64> = (0..dim).map(|_| scale * rng.normal()).collect();
            let w = (-dot(&eps, &eps) / (2.0 * scale * scale)).exp();
            for signed in [eps.clone(), eps.iter().map(|v| -v).collect()] {
                let z = FeatureVector::new(add_scaled(x_cf.values(), 1.0, &signed));
                let q = model.prob(&z)[target];
                lo = lo.min(q);
                hi = hi.max(q);
                targets.push(q);
                rows.push(signed);
                weights.push(w);
            }
        }
        result = weighted_ridge(&rows, &weights, &targets, ridge);
        if hi - lo > 1e-12 {
            break;
        }
        scale *= 2.0;
    }
    Ok(result)
}

/// Kernel mean-shift from `x_cf` toward nearby buffer points whose label
/// and current prediction both equal the target class. Returns `None` when
/// no such point exists. If every neighbor falls outside the kernel support
/// the unweighted mean offset is used instead.
pub fn plausibility_direction(
    x_cf: &FeatureVector,
    target: ClassId,
    buf: &LabeledBuffer,
    model: &dyn OnlineClassifier,
    neighbor_count: usize,
    bandwidth: f64,
) -> Option<Vec<f64>> {
    let subset = buf.knn_filtered(x_cf, neighbor_count, |inst| {
        inst.y == target && model.predict(&inst.x) == target
    });
    if subset.is_empty() {
        return None;
    }
    let dim = x_cf.dim();
    let mut weighted = vec![0.0; dim];
    let mut plain = vec![0.0; dim];
    let mut total_w = 0.0;
    for inst in &subset {
        let offset = sub(inst.x.values(), x_cf.values());
        let w = epanechnikov(&offset, bandwidth);
        for i in 0..dim {
            weighted[i] += w * offset[i];
            plain[i] += offset[i];
        }
        total_w += w;
    }
    if total_w > 0.0 {
        Some(weighted.iter().map(|v| v / total_w).collect())
    } else {
        // every neighbor outside the compact support: head for the centroid
        let n = subset.len() as f64;
        Some(plain.iter().map(|v| v / n).collect())
    }
}

/// Result of applying the step rule.
#[derive(Debug, Clone, PartialEq)]
pub enum StepResult {
    Moved(FeatureVector),
    /// The weighted sum of directions vanished; nothing to apply.
    Degenerate,
}

/// Moves `x_cf` a distance `alpha` along the normalized blend of the
/// correction `u` and the pull back toward `x0`, then clips to the unit box
/// (clipping may shorten the realized step). A zero vector on either side
/// drops out of the blend; exact cancellation yields [`StepResult::Degenerate`].
pub fn apply_update(
    x_cf: &FeatureVector,
    u: &[f64],
    x0: &FeatureVector,
    lambda_u: f64,
    lambda_r: f64,
    alpha: f64,
) -> StepResult {
    let r = sub(x0.values(), x_cf.values());
    let u_norm = norm(u);
    let r_norm = norm(&r);
    let dim = x_cf.dim();
    let mut combo = vec![0.0; dim];
    if u_norm > 0.0 {
        for i in 0..dim {
            combo[i] += lambda_u * u[i] / u_norm;
        }
    }
    if r_norm > 0.0 {
        for i in 0..dim {
            combo[i] += lambda_r * r[i] / r_norm;
        }
    }
    let combo_norm = norm(&combo);
    if combo_norm <= 1e-9 * (lambda_u + lambda_r) {
        return StepResult::Degenerate;
    }
    let moved = add_scaled(x_cf.values(), alpha / combo_norm, &combo);
    StepResult::Moved(FeatureVector::new(moved).clamp_unit())
}

/// One pass of the maintenance policy over a single state:
/// inactive states pass through; states whose query already receives the
/// target prediction retire; low-margin states take a correction step
/// (validity or plausibility depending on the variant); otherwise the
/// validity-plausibility variant takes its scheduled plausibility step when
/// `sweep % plausibility_period == 0`.
pub fn maintain_step(
    state: &mut CfeState,
    model: &dyn OnlineClassifier,
    buf: &LabeledBuffer,
    sweep: u64,
    cfg: &MaintenanceConfig,
    rng: &mut RngStream,
) -> UpdateOutcome {
    let proximity_norm = state.x0.distance(&state.x_cf);
    if !state.active {
        return UpdateOutcome {
            action: UpdateAction::Unchanged,
            prob_before: None,
            prob_after: None,
            correction_norm: None,
            proximity_norm,
        };
    }
    if check_retire(state, model) {
        state.active = false;
        return UpdateOutcome {
            action: UpdateAction::Retired,
            prob_before: None,
            prob_after: None,
            correction_norm: None,
            proximity_norm,
        };
    }

    let probs = model.prob(&state.x_cf);
    let prob_before = probs[state.target];
    let low = argmax_class(&probs) != state.target || prob_before < cfg.tau_low;

    let (correction, action) = if low {
        match cfg.variant {
            Variant::ValidityPlausibility => {
                let v = validity_direction(
                    &state.x_cf,
                    state.target,
                    model,
                    cfg.sigma,
                    cfg.samples,
                    cfg.ridge,
                    rng,
                )
                .expect("validated config");
                (Some(v), UpdateAction::ValidityStep)
            }
            Variant::PlausibilityOnly => (
                plausibility_direction(
                    &state.x_cf,
                    state.target,
                    buf,
                    model,
                    cfg.neighbor_count,
                    cfg.bandwidth,
                ),
                UpdateAction::PlausibilityStep,
            ),
        }
    } else if cfg.variant == Variant::ValidityPlausibility
        && sweep.is_multiple_of(cfg.plausibility_period)
    {
        (
            plausibility_direction(
                &state.x_cf,
                state.target,
                buf,
                model,
                cfg.neighbor_count,
                cfg.bandwidth,
            ),
            UpdateAction::PlausibilityStep,
        )
    } else {
        return UpdateOutcome {
            action: UpdateAction::Unchanged,
            prob_before: Some(prob_before),
            prob_after: Some(prob_before),
            correction_norm: None,
            proximity_norm,
        };
    };

    let Some(u) = correction else {
        return UpdateOutcome {
            action: UpdateAction::SkippedDegenerate,
            prob_before: Some(prob_before),
            prob_after: Some(prob_before),
            correction_norm: None,
            proximity_norm,
        };
    };
    let correction_norm = norm(&u);
    match apply_update(
        &state.x_cf,
        &u,
        &state.x0,
        cfg.lambda_u,
        cfg.lambda_r,
        cfg.alpha,
    ) {
        StepResult::Moved(moved) => {
            state.x_cf = moved;
            let prob_after = model.prob(&state.x_cf)[state.target];
            UpdateOutcome {
                action,
                prob_before: Some(prob_before),
                prob_after: Some(prob_after),
                correction_norm: Some(correction_norm),
                proximity_norm,
            }
        }
        StepResult::Degenerate => UpdateOutcome {
            action: UpdateAction::SkippedDegenerate,
            prob_before: Some(prob_before),
            prob_after: Some(prob_before),
            correction_norm: Some(correction_norm),
            proximity_norm,
        },
    }
}

/// Applies [`maintain_step`] to every state in index order. States are
/// independent; each gets a random stream derived from `(master_seed,
/// state id, sweep)`, so results do not depend on processing order.
pub fn maintain_population(
    states: &mut [CfeState],
    model: &dyn OnlineClassifier,
    buf: &LabeledBuffer,
    sweep: u64,
    cfg: &MaintenanceConfig,
    master_seed: u64,
) -> Vec<UpdateOutcome> {
    let outcomes: Vec<UpdateOutcome> = states
        .iter_mut()
        .map(|state| {
            let mut rng = RngStream::derived(master_seed, &[state.id, sweep]);
            maintain_step(state, model, buf, sweep, cfg, &mut rng)
        })
        .collect();
    if log::log_enabled!(log::Level::Trace) {
        log::trace!(
            "{} sweep {sweep}: {:?}",
            cfg.variant_name(),
            action_tally(&outcomes)
        );
    }
    outcomes
}

/// Counts outcomes per action, in a fixed action order.
pub fn action_tally(outcomes: &[UpdateOutcome]) -> Vec<(UpdateAction, usize)> {
    use UpdateAction::*;
    [
        Retired,
        Unchanged,
        ValidityStep,
        PlausibilityStep,
        SkippedDegenerate,
    ]
    .into_iter()
    .map(|action| {
        (
            action,
            outcomes.iter().filter(|o| o.action == action).count(),
        )
    })
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::LabeledInstance;
    use crate::error::Result as CResult;

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector::from_slice(values)
    }

    /// Test double mapping points to target-class probabilities.
    struct FnModel<F: Fn(&FeatureVector) -> f64> {
        dim: usize,
        prob1: F,
    }

    impl<F: Fn(&FeatureVector) -> f64> OnlineClassifier for FnModel<F> {
        fn dim(&self) -> usize {
            self.dim
        }
        fn num_classes(&self) -> usize {
            2
        }
        fn learn_one(&mut self, _inst: &LabeledInstance) -> CResult<()> {
            Ok(())
        }
        fn prob(&self, x: &FeatureVector) -> Vec<f64> {
            let p = (self.prob1)(x);
            vec![1.0 - p, p]
        }
    }

    fn state_at(x0: &[f64], x_cf: &[f64]) -> CfeState {
        CfeState::new(0, fv(x0), fv(x_cf), 1)
    }

    #[test]
    fn epanechnikov_values() {
        assert_eq!(epanechnikov(&[0.0, 0.0], 0.5), 1.0);
        assert_eq!(epanechnikov(&[0.5, 0.0], 0.5), 0.0);
        assert_eq!(epanechnikov(&[0.9, 0.0], 0.5), 0.0);
        assert!((epanechnikov(&[0.5, 0.0], 1.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn retire_when_query_reaches_target() {
        let reached = FnModel {
            dim: 2,
            prob1: |_x: &FeatureVector| 0.9,
        };
        let not_reached = FnModel {
            dim: 2,
            prob1: |_x: &FeatureVector| 0.1,
        };
        let state = state_at(&[0.2, 0.2], &[0.8, 0.8]);
        assert!(check_retire(&state, &reached));
        assert!(!check_retire(&state, &not_reached));
    }

    #[test]
    fn low_margin_trigger_matches_threshold() {
        let state = state_at(&[0.2, 0.2], &[0.8, 0.8]);
        let confident = FnModel {
            dim: 2,
            prob1: |_x: &FeatureVector| 0.95,
        };
        assert!(!needs_update(&state, &confident, 0.6));
        let weak = FnModel {
            dim: 2,
            prob1: |_x: &FeatureVector| 0.55,
        };
        assert!(needs_update(&state, &weak, 0.6));
        let invalid = FnModel {
            dim: 2,
            prob1: |_x: &FeatureVector| 0.45,
        };
        assert!(needs_update(&state, &invalid, 0.6));
    }

    #[test]
    fn ridge_solver_on_fixed_one_dimensional_system() {
        // rows +1/-1, unit weights, responses 1/0, no regularizer:
        // (1 + 1) v = 1  =>  v = 0.5
        let v = weighted_ridge(&[vec![1.0], vec![-1.0]], &[1.0, 1.0], &[1.0, 0.0], 0.0);
        assert_eq!(v.len(), 1);
        assert!((v[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn validity_direction_zero_for_constant_model() {
        let model = FnModel {
            dim: 3,
            prob1: |_x: &FeatureVector| 0.7,
        };
        let mut rng = RngStream::new(1);
        let m = 200;
        let v =
            validity_direction(&fv(&[0.4, 0.5, 0.6]), 1, &model, 0.05, m, 1e-3, &mut rng).unwrap();
        assert!(norm(&v) <= 1e-6 * (m as f64).sqrt(), "norm {}", norm(&v));
    }

    #[test]
    fn validity_direction_recovers_linear_probe() {
        // probabilities produced by a known linear map around the center
        let g = [0.8, -0.3];
        let model = FnModel {
            dim: 2,
            prob1: move |x: &FeatureVector| {
                0.5 + g[0] * (x.values()[0] - 0.5) + g[1] * (x.values()[1] - 0.5)
            },
        };
        let mut rng = RngStream::new(2);
        let v = validity_direction(&fv(&[0.5, 0.5]), 1, &model, 0.05, 500, 1e-6, &mut rng).unwrap();
        let cos = dot(&v, &g) / (norm(&v) * norm(&g));
        assert!(cos >= 0.99, "cosine {cos}");
    }

    #[test]
    fn validity_direction_aligns_with_logistic_gradient() {
        // the analytic probability gradient of a logistic model is
        // sigma'(z) * w, i.e. parallel to w
        let mut rng = RngStream::new(3);
        let mut total_cos = 0.0;
        let cases = 100;
        for _ in 0..cases {
            let dim = 2;
            let w = [rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0)];
            let b = rng.uniform(-2.0, 2.0);
            let model = FnModel {
                dim,
                prob1: move |x: &FeatureVector| 1.0 / (1.0 + (-(dot(&w, x.values()) + b)).exp()),
            };
            let x = fv(&[rng.next_f64(), rng.next_f64()]);
            let v = validity_direction(&x, 1, &model, 0.05, 400, 1e-3, &mut rng).unwrap();
            total_cos += dot(&v, &w) / (norm(&v) * norm(&w));
        }
        let mean_cos = total_cos / cases as f64;
        assert!(mean_cos >= 0.95, "mean cosine {mean_cos}");
    }

    #[test]
    fn plausibility_single_point_within_support() {
        let model = FnModel {
            dim: 2,
            prob1: |_x: &FeatureVector| 0.9,
        };
        let mut buf = LabeledBuffer::new(10, 2);
        buf.push(LabeledInstance::new(fv(&[0.55, 0.5]), 1)).unwrap();
        let p = plausibility_direction(&fv(&[0.5, 0.5]), 1, &buf, &model, 25, 0.3).unwrap();
        assert!((p[0] - 0.05).abs() < 1e-12);
        assert!(p[1].abs() < 1e-12);
    }

    #[test]
    fn plausibility_symmetric_pair_cancels() {
        let model = FnModel {
            dim: 2,
            prob1: |_x: &FeatureVector| 0.9,
        };
        let mut buf = LabeledBuffer::new(10, 2);
        buf.push(LabeledInstance::new(fv(&[0.45, 0.5]), 1)).unwrap();
        buf.push(LabeledInstance::new(fv(&[0.55, 0.5]), 1)).unwrap();
        let p = plausibility_direction(&fv(&[0.5, 0.5]), 1, &buf, &model, 25, 0.3).unwrap();
        assert!(norm(&p) < 1e-12);
    }

    #[test]
    fn plausibility_kernel_weighting_hand_case() {
        let model = FnModel {
            dim: 2,
            prob1: |_x: &FeatureVector| 0.9,
        };
        let mut buf = LabeledBuffer::new(10, 2);
        buf.push(LabeledInstance::new(fv(&[0.55, 0.5]), 1)).unwrap();
        // single neighbor at offset (0.05, 0) with h = 0.1:
        // kernel = 1 - 0.0025/0.01 = 0.75; mean shift = the offset itself
        let p = plausibility_direction(&fv(&[0.5, 0.5]), 1, &buf, &model, 25, 0.1).unwrap();
        assert!((p[0] - 0.05).abs() < 1e-12);
        assert_eq!(epanechnikov(&[0.05, 0.0], 0.1), 1.0 - 0.0025 / 0.01);
    }

    #[test]
    fn plausibility_empty_subset_is_none() {
        let model = FnModel {
            dim: 2,
            prob1: |_x: &FeatureVector| 0.1, // nothing predicted class 1
        };
        let mut buf = LabeledBuffer::new(10, 2);
        buf.push(LabeledInstance::new(fv(&[0.55, 0.5]), 1)).unwrap();
        assert!(plausibility_direction(&fv(&[0.5, 0.5]), 1, &buf, &model, 25, 0.3).is_none());
    }

    #[test]
    fn plausibility_falls_back_to_centroid_outside_support() {
        let model = FnModel {
            dim: 2,
            prob1: |_x: &FeatureVector| 0.9,
        };
        let mut buf = LabeledBuffer::new(10, 2);
        buf.push(LabeledInstance::new(fv(&[0.95, 0.5]), 1)).unwrap();
        // neighbor at distance 0.45 > h = 0.3: kernel weight zero
        let p = plausibility_direction(&fv(&[0.5, 0.5]), 1, &buf, &model, 25, 0.3).unwrap();
        assert!((p[0] - 0.45).abs() < 1e-12);
    }

    #[test]
    fn update_rule_hand_example() {
        // u = (1, 0), r = (0, 1), lambdas (2, 1), alpha 0.05:
        // step = 0.05 * (2, 1)/sqrt(5)
        let x_cf = fv(&[0.5, 0.4]);
        let x0 = fv(&[x_cf.values()[0], x_cf.values()[1] + 0.3]); // r along +x2
        let res = apply_update(&x_cf, &[1.0, 0.0], &x0, 2.0, 1.0, 0.05);
        let StepResult::Moved(moved) = res else {
            panic!("expected movement")
        };
        let step = sub(moved.values(), x_cf.values());
        let expect = [0.05 * 2.0 / 5.0f64.sqrt(), 0.05 * 1.0 / 5.0f64.sqrt()];
        assert!((step[0] - expect[0]).abs() < 1e-12, "{step:?}");
        assert!((step[1] - expect[1]).abs() < 1e-12);
        assert!((expect[0] - 0.044721).abs() < 1e-6);
        assert!((expect[1] - 0.022361).abs() < 1e-6);
    }

    #[test]
    fn update_rule_pure_correction_when_at_origin() {
        // x_cf == x0: proximity pull vanishes, step = alpha * normalized u
        let x = fv(&[0.5, 0.5]);
        let res = apply_update(&x, &[0.0, 2.0], &x, 2.0, 1.0, 0.05);
        let StepResult::Moved(moved) = res else {
            panic!("expected movement")
        };
        let step = sub(moved.values(), x.values());
        assert!(step[0].abs() < 1e-15);
        assert!((step[1] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn update_rule_antiparallel_cancellation_degenerates() {
        let x_cf = fv(&[0.6, 0.5]);
        let x0 = fv(&[0.4, 0.5]); // r = (-0.2, 0)
        let res = apply_update(&x_cf, &[1.0, 0.0], &x0, 1.0, 1.0, 0.05);
        assert_eq!(res, StepResult::Degenerate);
    }

    #[test]
    fn update_rule_zero_correction_uses_proximity_pull() {
        let x_cf = fv(&[0.6, 0.5]);
        let x0 = fv(&[0.4, 0.5]);
        let res = apply_update(&x_cf, &[0.0, 0.0], &x0, 2.0, 1.0, 0.05);
        let StepResult::Moved(moved) = res else {
            panic!("expected movement")
        };
        let step = sub(moved.values(), x_cf.values());
        assert!((step[0] + 0.05).abs() < 1e-12);
        assert!(step[1].abs() < 1e-15);
    }

    #[test]
    fn update_rule_both_zero_is_degenerate() {
        let x = fv(&[0.5, 0.5]);
        assert_eq!(
            apply_update(&x, &[0.0, 0.0], &x, 2.0, 1.0, 0.05),
            StepResult::Degenerate
        );
    }

    #[test]
    fn zero_correction_weight_collapses_to_proximity_pull() {
        // lambda_u = 0 turns every update into a pure pull toward x0
        let x_cf = fv(&[0.7, 0.5]);
        let x0 = fv(&[0.3, 0.5]);
        let res = apply_update(&x_cf, &[0.0, 1.0], &x0, 0.0, 1.0, 0.05);
        let StepResult::Moved(moved) = res else {
            panic!("expected movement")
        };
        let step = sub(moved.values(), x_cf.values());
        assert!((step[0] + 0.05).abs() < 1e-12);
        assert!(step[1].abs() < 1e-15);
    }

    #[test]
    fn step_length_is_alpha_before_clipping() {
        let mut rng = RngStream::new(9);
        for _ in 0..200 {
            let x_cf = fv(&[rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)]);
            let x0 = fv(&[rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)]);
            let u = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
            match apply_update(&x_cf, &u, &x0, 2.0, 1.0, 0.05) {
                StepResult::Moved(moved) => {
                    // interior points: clipping cannot shorten a 0.05 step
                    let len = x_cf.distance(&moved);
                    assert!((len - 0.05).abs() <= 1e-12, "step length {len}");
                }
                StepResult::Degenerate => {}
            }
        }
    }

    #[test]
    fn update_rule_scale_invariant_in_u() {
        // axis-aligned corrections normalize exactly, so scaling must give
        // bit-identical output
        let x_cf = fv(&[0.5, 0.4]);
        let x0 = fv(&[0.3, 0.7]);
        for u in [[1.0, 0.0], [0.0, -2.0], [-0.5, 0.0]] {
            let scaled: Vec<f64> = u.iter().map(|v| 7.3 * v).collect();
            let a = apply_update(&x_cf, &u, &x0, 2.0, 1.0, 0.05);
            let b = apply_update(&x_cf, &scaled, &x0, 2.0, 1.0, 0.05);
            match (a, b) {
                (StepResult::Moved(ma), StepResult::Moved(mb)) => {
                    for (va, vb) in ma.values().iter().zip(mb.values()) {
                        assert_eq!(va.to_bits(), vb.to_bits());
                    }
                }
                _ => panic!("expected movement"),
            }
        }
        // generic directions agree to floating-point rounding
        let mut rng = RngStream::new(10);
        for _ in 0..100 {
            let u = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
            let scaled: Vec<f64> = u.iter().map(|v| 7.3 * v).collect();
            let a = apply_update(&x_cf, &u, &x0, 2.0, 1.0, 0.05);
            let b = apply_update(&x_cf, &scaled, &x0, 2.0, 1.0, 0.05);
            match (a, b) {
                (StepResult::Moved(ma), StepResult::Moved(mb)) => {
                    for (va, vb) in ma.values().iter().zip(mb.values()) {
                        assert!((va - vb).abs() <= 1e-14);
                    }
                }
                _ => panic!("expected movement"),
            }
        }
    }

    #[test]
    fn mean_shift_is_convex_combination_of_offsets() {
        // p must equal sum w~_j (z_j - x') with w~ a distribution; verify by
        // recomputing the weights independently
        let model = FnModel {
            dim: 2,
            prob1: |_x: &FeatureVector| 0.9,
        };
        let mut rng = RngStream::new(11);
        for _ in 0..50 {
            let mut buf = LabeledBuffer::new(50, 2);
            let n = 3 + rng.index(20);
            let mut pts = Vec::new();
            for _ in 0..n {
                let x = [rng.next_f64(), rng.next_f64()];
                buf.push(LabeledInstance::new(fv(&x), 1)).unwrap();
                pts.push(x);
            }
            let q = fv(&[rng.next_f64(), rng.next_f64()]);
            let Some(p) = plausibility_direction(&q, 1, &buf, &model, 10, 0.4) else {
                continue;
            };
            // oracle: recompute convex weights over the k nearest points
            let neighbors = buf.knn(&q, 10);
            let mut weights: Vec<f64> = neighbors
                .iter()
                .map(|inst| epanechnikov(&sub(inst.x.values(), q.values()), 0.4))
                .collect();
            let total: f64 = weights.iter().sum();
            if total > 0.0 {
                for w in &mut weights {
                    *w /= total;
                }
            } else {
                let uniform = 1.0 / weights.len() as f64;
                weights.iter_mut().for_each(|w| *w = uniform);
            }
            assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let mut expect = [0.0, 0.0];
            for (inst, w) in neighbors.iter().zip(&weights) {
                let off = sub(inst.x.values(), q.values());
                expect[0] += w * off[0];
                expect[1] += w * off[1];
            }
            assert!((p[0] - expect[0]).abs() < 1e-12);
            assert!((p[1] - expect[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_repair_on_frozen_logistic_scenarios() {
        // an invalid counterfactual near a logistic boundary strictly gains
        // target probability per validity step until it clears the trigger
        let mut scenario_rng = RngStream::new(12);
        for scenario in 0..50 {
            let w = [
                scenario_rng.uniform(2.0, 6.0) * if scenario % 2 == 0 { 1.0 } else { -1.0 },
                scenario_rng.uniform(-4.0, 4.0),
            ];
            let b = -(w[0] * 0.5 + w[1] * 0.5); // boundary through the center
            let model = FnModel {
                dim: 2,
                prob1: move |x: &FeatureVector| 1.0 / (1.0 + (-(dot(&w, x.values()) + b)).exp()),
            };
            // start slightly on the wrong side of the boundary
            let wn = norm(&w);
            let start = [0.5 - 0.05 * w[0] / wn, 0.5 - 0.05 * w[1] / wn];
            let x0 = fv(&[0.5 - 0.2 * w[0] / wn, 0.5 - 0.2 * w[1] / wn]);
            let mut state = CfeState::new(scenario as u64, x0, fv(&start), 1);
            let cfg = MaintenanceConfig::default();
            let mut rng = RngStream::new(1000 + scenario as u64);
            let mut prev = model.prob(&state.x_cf)[1];
            let mut repaired = false;
            for _ in 0..200 {
                if model.prob(&state.x_cf)[1] >= cfg.tau_low {
                    repaired = true;
                    break;
                }
                let v = validity_direction(
                    &state.x_cf,
                    1,
                    &model,
                    cfg.sigma,
                    cfg.samples,
                    cfg.ridge,
                    &mut rng,
                )
                .unwrap();
                match apply_update(
                    &state.x_cf,
                    &v,
                    &state.x0,
                    cfg.lambda_u,
                    cfg.lambda_r,
                    cfg.alpha,
                ) {
                    StepResult::Moved(m) => state.x_cf = m,
                    StepResult::Degenerate => break,
                }
                let cur = model.prob(&state.x_cf)[1];
                assert!(cur > prev, "scenario {scenario}: {cur} <= {prev}");
                prev = cur;
            }
            assert!(repaired, "scenario {scenario} failed to clear tau_low");
        }
    }

    /// Builds a buffer dense in class-1 points to the right of 0.5.
    fn half_plane_buffer(rng: &mut RngStream, n: usize) -> LabeledBuffer {
        let mut buf = LabeledBuffer::new(n, 2);
        for _ in 0..n {
            let x = [rng.next_f64(), rng.next_f64()];
            let y = usize::from(x[0] > 0.5);
            buf.push(LabeledInstance::new(fv(&x), y)).unwrap();
        }
        buf
    }

    fn boundary_model() -> FnModel<impl Fn(&FeatureVector) -> f64> {
        FnModel {
            dim: 2,
            prob1: |x: &FeatureVector| 1.0 / (1.0 + (-(12.0 * (x.values()[0] - 0.5))).exp()),
        }
    }

    #[test]
    fn step_retires_and_freezes_state() {
        let model = FnModel {
            dim: 2,
            prob1: |_x: &FeatureVector| 0.9, // query predicted as target
        };
        let mut rng = RngStream::new(13);
        let buf = half_plane_buffer(&mut rng, 50);
        let mut state = state_at(&[0.2, 0.2], &[0.8, 0.8]);
        let cfg = MaintenanceConfig::default();
        let out = maintain_step(&mut state, &model, &buf, 1, &cfg, &mut rng);
        assert_eq!(out.action, UpdateAction::Retired);
        assert!(!state.active);
        let frozen = state.x_cf.clone();
        let out2 = maintain_step(&mut state, &model, &buf, 2, &cfg, &mut rng);
        assert_eq!(out2.action, UpdateAction::Unchanged);
        assert_eq!(state.x_cf, frozen);
    }

    #[test]
    fn step_unchanged_when_confident_and_unscheduled() {
        let model = boundary_model();
        let mut rng = RngStream::new(14);
        let buf = half_plane_buffer(&mut rng, 100);
        let mut state = state_at(&[0.3, 0.5], &[0.9, 0.5]); // prob ~ 0.99
        let cfg = MaintenanceConfig::default();
        let before = state.x_cf.clone();
        let out = maintain_step(&mut state, &model, &buf, 7, &cfg, &mut rng);
        assert_eq!(out.action, UpdateAction::Unchanged);
        assert_eq!(state.x_cf, before);
    }

    #[test]
    fn step_scheduled_plausibility_on_period() {
        let model = boundary_model();
        let mut rng = RngStream::new(15);
        let buf = half_plane_buffer(&mut rng, 100);
        let mut state = state_at(&[0.3, 0.5], &[0.9, 0.5]);
        let cfg = MaintenanceConfig::default(); // VP variant, period 60
        let before = state.x_cf.clone();
        let out = maintain_step(&mut state, &model, &buf, 60, &cfg, &mut rng);
        assert_eq!(out.action, UpdateAction::PlausibilityStep);
        assert!((state.x_cf.distance(&before) - cfg.alpha).abs() < 1e-12);
    }

    #[test]
    fn step_low_margin_validity_in_vp_variant() {
        let model = boundary_model();
        let mut rng = RngStream::new(16);
        let buf = half_plane_buffer(&mut rng, 100);
        let mut state = state_at(&[0.3, 0.5], &[0.45, 0.5]); // invalid side
        let cfg = MaintenanceConfig::default();
        let out = maintain_step(&mut state, &model, &buf, 7, &cfg, &mut rng);
        assert_eq!(out.action, UpdateAction::ValidityStep);
        assert!(out.prob_after.unwrap() > out.prob_before.unwrap());
    }

    #[test]
    fn step_low_margin_plausibility_in_p_variant() {
        let model = boundary_model();
        let mut rng = RngStream::new(17);
        let buf = half_plane_buffer(&mut rng, 100);
        let mut state = state_at(&[0.3, 0.5], &[0.45, 0.5]);
        let cfg = MaintenanceConfig {
            variant: Variant::PlausibilityOnly,
            ..MaintenanceConfig::default()
        };
        let out = maintain_step(&mut state, &model, &buf, 7, &cfg, &mut rng);
        assert_eq!(out.action, UpdateAction::PlausibilityStep);
        // moved toward the dense target half-plane
        assert!(state.x_cf.values()[0] > 0.45);
    }

    #[test]
    fn step_degenerate_without_plausibility_subset() {
        // model predicts class 0 everywhere: no retirement, low margin,
        // plausibility subset empty
        let model = FnModel {
            dim: 2,
            prob1: |_x: &FeatureVector| 0.2,
        };
        let mut rng = RngStream::new(18);
        let buf = half_plane_buffer(&mut rng, 50);
        let mut state = state_at(&[0.3, 0.5], &[0.6, 0.5]);
        let cfg = MaintenanceConfig {
            variant: Variant::PlausibilityOnly,
            ..MaintenanceConfig::default()
        };
        let before = state.x_cf.clone();
        let out = maintain_step(&mut state, &model, &buf, 3, &cfg, &mut rng);
        assert_eq!(out.action, UpdateAction::SkippedDegenerate);
        assert_eq!(state.x_cf, before);
    }

    #[test]
    fn population_is_permutation_equivariant() {
        let model = boundary_model();
        let mut rng = RngStream::new(19);
        let buf = half_plane_buffer(&mut rng, 200);
        let make_states = || -> Vec<CfeState> {
            (0..8)
                .map(|i| {
                    CfeState::new(
                        i,
                        fv(&[0.3, 0.1 * i as f64]),
                        fv(&[0.45 + 0.01 * i as f64, 0.5]),
                        1,
                    )
                })
                .collect()
        };
        let cfg = MaintenanceConfig::default();
        let mut forward = make_states();
        maintain_population(&mut forward, &model, &buf, 3, &cfg, 777);
        let mut reversed = make_states();
        reversed.reverse();
        maintain_population(&mut reversed, &model, &buf, 3, &cfg, 777);
        reversed.reverse();
        for (a, b) in forward.iter().zip(&reversed) {
            assert_eq!(a.x_cf, b.x_cf);
            assert_eq!(a.active, b.active);
        }
    }

    #[test]
    fn population_of_one_matches_single_step() {
        let model = boundary_model();
        let mut rng = RngStream::new(20);
        let buf = half_plane_buffer(&mut rng, 100);
        let cfg = MaintenanceConfig::default();
        let mut single = state_at(&[0.3, 0.5], &[0.45, 0.5]);
        single.id = 4;
        let mut pop = vec![single.clone()];
        let mut rng_step = RngStream::derived(555, &[4, 9]);
        maintain_step(&mut single, &model, &buf, 9, &cfg, &mut rng_step);
        maintain_population(&mut pop, &model, &buf, 9, &cfg, 555);
        assert_eq!(single.x_cf, pop[0].x_cf);
    }

    #[test]
    fn tally_counts_every_action_once() {
        let outcomes = vec![
            UpdateOutcome {
                action: UpdateAction::Retired,
                prob_before: None,
                prob_after: None,
                correction_norm: None,
                proximity_norm: 0.0,
            },
            UpdateOutcome {
                action: UpdateAction::Unchanged,
                prob_before: Some(0.9),
                prob_after: Some(0.9),
                correction_norm: None,
                proximity_norm: 0.1,
            },
            UpdateOutcome {
                action: UpdateAction::Unchanged,
                prob_before: Some(0.8),
                prob_after: Some(0.8),
                correction_norm: None,
                proximity_norm: 0.2,
            },
        ];
        let tally = action_tally(&outcomes);
        assert_eq!(tally[0], (UpdateAction::Retired, 1));
        assert_eq!(tally[1], (UpdateAction::Unchanged, 2));
        assert_eq!(tally[2], (UpdateAction::ValidityStep, 0));
        assert_eq!(tally.iter().map(|(_, n)| n).sum::<usize>(), outcomes.len());
    }

    #[test]
    fn retirement_is_absorbing_under_later_sweeps() {
        let model = FnModel {
            dim: 2,
            prob1: |_x: &FeatureVector| 0.9,
        };
        let mut rng = RngStream::new(21);
        let buf = half_plane_buffer(&mut rng, 50);
        let cfg = MaintenanceConfig::default();
        let mut states = vec![state_at(&[0.2, 0.2], &[0.7, 0.7])];
        states[0].id = 0;
        maintain_population(&mut states, &model, &buf, 1, &cfg, 1);
        assert!(!states[0].active);
        let frozen = states[0].x_cf.clone();
        for sweep in 2..60 {
            maintain_population(&mut states, &model, &buf, sweep, &cfg, 1);
            assert_eq!(states[0].x_cf, frozen);
        }
    }
}
