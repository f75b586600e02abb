//! Counterfactual generators: nearest-neighbor lookup, growing-spheres
//! search, and a stability-refined variant that blends toward target-class
//! prototypes until a Monte-Carlo stability score clears a threshold.

use crate::core::{ClassId, FeatureVector, LabeledBuffer, RngStream};
use crate::error::{Error, Result};
use crate::models::OnlineClassifier;
use crate::vecmath::add_scaled;

/// Growing-spheres search parameters.
#[derive(Debug, Clone)]
pub struct GrowingSpheresConfig {
    /// Candidate points sampled per annulus.
    pub samples_per_layer: usize,
    pub initial_radius: f64,
    pub radius_step: f64,
    pub max_radius: f64,
}

impl GrowingSpheresConfig {
    /// Defaults with the maximum radius covering the unit box of dimension
    /// `dim` twice over.
    pub fn for_dim(dim: usize) -> Self {
        Self {
            samples_per_layer: 60,
            initial_radius: 0.05,
            radius_step: 0.05,
            max_radius: 2.0 * (dim as f64).sqrt(),
        }
    }
}

/// Parameters of the stability score and the prototype-blending refinement.
#[derive(Debug, Clone)]
pub struct StabilityConfig {
    /// Gaussian spread of the stability neighborhood.
    pub spread: f64,
    /// Monte-Carlo sample count per stability evaluation.
    pub samples: usize,
    /// Refinement stops once stability reaches this value.
    pub threshold: f64,
    /// Blend fraction toward the chosen prototype per iteration.
    pub blend_step: f64,
    /// Number of candidate prototypes retrieved per iteration.
    pub prototype_count: usize,
    pub max_iterations: usize,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            spread: 0.1,
            samples: 100,
            threshold: 0.65,
            blend_step: 0.3,
            prototype_count: 10,
            max_iterations: 50,
        }
    }
}

/// Nearest buffer point predicted as the target class.
pub fn nn_generate(
    x0: &FeatureVector,
    target: ClassId,
    buf: &LabeledBuffer,
    model: &dyn OnlineClassifier,
) -> Result<FeatureVector> {
    buf.nearest_filtered(x0, |inst| model.predict(&inst.x) == target)
        .map(|inst| inst.x.clone())
        .ok_or_else(|| Error::Generation("no buffer point predicted as target class".into()))
}

/// Uniform draw from the annulus `radius <= |z - center| <= radius + step`,
/// clipped to the unit box afterwards.
fn sample_annulus(center: &[f64], radius: f64, step: f64, rng: &mut RngStream) -> FeatureVector {
    let dim = center.len();
    let mut dir: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
    let mut len = crate::vecmath::norm(&dir);
    while len == 0.0 {
        dir = (0..dim).map(|_| rng.normal()).collect();
        len = crate::vecmath::norm(&dir);
    }
    // radius density proportional to volume: rho^d uniform between the shells
    let lo = radius.powi(dim as i32);
    let hi = (radius + step).powi(dim as i32);
    let rho = (lo + rng.next_f64() * (hi - lo)).powf(1.0 / dim as f64);
    let point: Vec<f64> = dir.iter().map(|d| d / len * rho).collect();
    FeatureVector::new(add_scaled(center, 1.0, &point)).clamp_unit()
}

/// Searches outward in annuli of width `radius_step` until a point predicted
/// as the target class appears; returns the closest hit of the first annulus
/// containing one.
pub fn gs_generate(
    x0: &FeatureVector,
    target: ClassId,
    model: &dyn OnlineClassifier,
    cfg: &GrowingSpheresConfig,
    rng: &mut RngStream,
) -> Result<FeatureVector> {
    if model.predict(x0) == target {
        // nothing to search for
        return Ok(x0.clone().clamp_unit());
    }
    let mut radius = cfg.initial_radius;
    while radius < cfg.max_radius {
        let mut best: Option<(f64, FeatureVector)> = None;
        for _ in 0..cfg.samples_per_layer {
            let cand = sample_annulus(x0.values(), radius, cfg.radius_step, rng);
            if model.predict(&cand) == target {
                let d = x0.distance(&cand);
                if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                    best = Some((d, cand));
                }
            }
        }
        if let Some((_, point)) = best {
            return Ok(point);
        }
        radius += cfg.radius_step;
    }
    Err(Error::Generation(format!(
        "no target-class point within radius {}",
        cfg.max_radius
    )))
}

/// Monte-Carlo stability of `x` for the target class: mean minus population
/// standard deviation of the target probability over a Gaussian neighborhood
/// `N(x, spread^2 I)`.
pub fn stability(
    x: &FeatureVector,
    target: ClassId,
    model: &dyn OnlineClassifier,
    spread: f64,
    samples: usize,
    rng: &mut RngStream,
) -> f64 {
    assert!(spread > 0.0, "stability spread must be positive");
    assert!(samples >= 2, "stability needs at least two samples");
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let z: Vec<f64> = x
            .values()
            .iter()
            .map(|v| v + spread * rng.normal())
            .collect();
        let q = model.prob(&FeatureVector::new(z))[target];
        sum += q;
        sum_sq += q * q;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    mean - var.sqrt()
}

/// Result of the stability refinement.
#[derive(Debug, Clone)]
pub struct RobxResult {
    pub point: FeatureVector,
    /// Stability of the returned point as last evaluated.
    pub stability: f64,
    /// Set when no labeled-and-predicted target prototypes were available
    /// and the base point was returned unchanged.
    pub no_prototypes: bool,
}

/// Refines a valid base counterfactual toward high-stability target-class
/// prototypes from the buffer. Stops as soon as the stability threshold is
/// met; otherwise returns the best-stability iterate seen, preferring
/// iterates the model still predicts as the target (the base qualifies, so
/// a valid input always yields a valid output).
pub fn robx_generate(
    target: ClassId,
    base: &FeatureVector,
    buf: &LabeledBuffer,
    model: &dyn OnlineClassifier,
    cfg: &StabilityConfig,
    rng: &mut RngStream,
) -> RobxResult {
    let mut current = base.clone();
    let mut best = base.clone();
    let mut best_stab = f64::NEG_INFINITY;
    let mut best_is_valid = false;

    for iteration in 0..=cfg.max_iterations {
        let s_cur = stability(&current, target, model, cfg.spread, cfg.samples, rng);
        let valid = model.predict(&current) == target;
        if (valid, s_cur) > (best_is_valid, best_stab) {
            best_stab = s_cur;
            best = current.clone();
            best_is_valid = valid;
        }
        if s_cur >= cfg.threshold {
            return RobxResult {
                point: current,
                stability: s_cur,
                no_prototypes: false,
            };
        }
        if iteration == cfg.max_iterations {
            break;
        }
        let prototypes = buf.knn_filtered(&current, cfg.prototype_count, |inst| {
            inst.y == target && model.predict(&inst.x) == target
        });
        if prototypes.is_empty() {
            log::warn!("stability refinement found no prototypes; returning base");
            return RobxResult {
                point: base.clone(),
                stability: best_stab,
                no_prototypes: true,
            };
        }
        let mut chosen = prototypes[0];
        let mut chosen_stab = f64::NEG_INFINITY;
        for proto in &prototypes {
            let s = stability(&proto.x, target, model, cfg.spread, cfg.samples, rng);
            if s > chosen_stab {
                chosen_stab = s;
                chosen = proto;
            }
        }
        let blended = add_scaled(
            &current
                .values()
                .iter()
                .map(|v| v * (1.0 - cfg.blend_step))
                .collect::<Vec<_>>(),
            cfg.blend_step,
            chosen.x.values(),
        );
        current = FeatureVector::new(blended).clamp_unit();
    }

    RobxResult {
        point: best,
        stability: best_stab,
        no_prototypes: false,
    }
}
