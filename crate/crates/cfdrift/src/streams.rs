//! Synthetic drifting binary-classification streams with gradual,
//! linearly interpolated concept transitions.

use std::f64::consts::PI;

use crate::core::{ClassId, FeatureVector, LabeledInstance, RngStream};

/// Linear transition schedule: the concept parameter moves from its start to
/// its end value as `t` crosses `[t_start, t_start + width]`.
#[derive(Debug, Clone, Copy)]
pub struct DriftSchedule {
    pub t_start: u64,
    pub width: u64,
}

impl DriftSchedule {
    pub fn new(t_start: u64, width: u64) -> Self {
        assert!(width >= 1, "transition window must be >= 1");
        Self { t_start, width }
    }

    /// Transition progress at sample index `t`, clamped to `[0, 1]`.
    pub fn progress(&self, t: u64) -> f64 {
        if t <= self.t_start {
            return 0.0;
        }
        (((t - self.t_start) as f64) / (self.width as f64)).min(1.0)
    }
}

/// Concept family and its start/end parameters.
#[derive(Debug, Clone, Copy)]
pub enum Concept {
    /// Label 1 iff the point lies counter-clockwise of the line through
    /// (0.5, 0.5) at angle `angle0 + angle_delta * progress`.
    Hyperplane { angle0: f64, angle_delta: f64 },
    /// Label 1 iff `x2 > 0.5 + amplitude * sin(2*pi*x1 + phase)`, with the
    /// phase drifting from `phase0` by `phase_delta`.
    Sine {
        phase0: f64,
        phase_delta: f64,
        amplitude: f64,
    },
    /// Label 1 iff `x1 + x2 <= threshold`, the threshold interpolating from
    /// `threshold_start` to `threshold_end`. Remaining features are noise.
    Sea {
        threshold_start: f64,
        threshold_end: f64,
    },
}

/// A fully specified stream: concept, dimension, drift schedule, label noise.
#[derive(Debug, Clone)]
pub struct StreamSpec {
    pub concept: Concept,
    pub dim: usize,
    pub drift: DriftSchedule,
    /// Probability of flipping the concept label. Default 0.
    pub noise_rate: f64,
}

impl StreamSpec {
    /// Rotating hyperplane, d = 2, quarter-turn over the window.
    pub fn hyperplane(drift: DriftSchedule) -> Self {
        Self {
            concept: Concept::Hyperplane {
                angle0: 0.0,
                angle_delta: PI / 2.0,
            },
            dim: 2,
            drift,
            noise_rate: 0.0,
        }
    }

    /// Drifting-phase sine boundary, d = 2.
    pub fn sine(drift: DriftSchedule) -> Self {
        Self {
            concept: Concept::Sine {
                phase0: 0.0,
                phase_delta: PI / 2.0,
                amplitude: 0.4,
            },
            dim: 2,
            drift,
            noise_rate: 0.0,
        }
    }

    /// SEA-style sum threshold, d = 3 with an irrelevant third feature.
    pub fn sea(drift: DriftSchedule) -> Self {
        Self {
            concept: Concept::Sea {
                threshold_start: 0.8,
                threshold_end: 0.7,
            },
            dim: 3,
            drift,
            noise_rate: 0.0,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.concept {
            Concept::Hyperplane { .. } => "hyperplane",
            Concept::Sine { .. } => "sine",
            Concept::Sea { .. } => "sea",
        }
    }

    /// The scalar concept parameter (angle, phase or threshold) at `t`.
    pub fn concept_parameter(&self, t: u64) -> f64 {
        let p = self.drift.progress(t);
        match self.concept {
            Concept::Hyperplane {
                angle0,
                angle_delta,
            } => angle0 + angle_delta * p,
            Concept::Sine {
                phase0,
                phase_delta,
                ..
            } => phase0 + phase_delta * p,
            Concept::Sea {
                threshold_start,
                threshold_end,
            } => threshold_start + (threshold_end - threshold_start) * p,
        }
    }

    /// Noise-free concept label of `x` at sample index `t`.
    pub fn label_at(&self, x: &[f64], t: u64) -> ClassId {
        match self.concept {
            Concept::Hyperplane { .. } => {
                let theta = self.concept_parameter(t);
                let s = theta.sin() * (x[0] - 0.5) - theta.cos() * (x[1] - 0.5);
                usize::from(s < 0.0)
            }
            Concept::Sine { amplitude, .. } => {
                let phase = self.concept_parameter(t);
                let boundary = 0.5 + amplitude * (2.0 * PI * x[0] + phase).sin();
                usize::from(x[1] > boundary)
            }
            Concept::Sea { .. } => {
                let threshold = self.concept_parameter(t);
                usize::from(x[0] + x[1] <= threshold)
            }
        }
    }

    /// Draws the instance at sample index `t`: features uniform in `[0,1]^d`,
    /// concept label at the current drift progress, flipped with probability
    /// `noise_rate`. One noise draw is consumed even at rate 0 so that
    /// enabling noise does not shift the feature sequence.
    pub fn next_instance(&self, t: u64, rng: &mut RngStream) -> LabeledInstance {
        let values: Vec<f64> = (0..self.dim).map(|_| rng.next_f64()).collect();
        let mut y = self.label_at(&values, t);
        let flip = rng.next_f64() < self.noise_rate;
        if flip {
            y = 1 - y;
        }
        LabeledInstance::new(FeatureVector::new(values), y)
    }
}
