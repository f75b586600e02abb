//! Experiment configuration: programmatic defaults and the flat
//! `section.key = value` config-file format.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::generators::{GrowingSpheresConfig, StabilityConfig};
use crate::maintenance::MaintenanceConfig;
use crate::metrics::MetricsConfig;
use crate::models::{HoeffdingTree, OnlineClassifier, OnlineLogisticRegression};
use crate::streams::{Concept, DriftSchedule, StreamSpec};

/// Classifier family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Lr,
    HoeffdingTree,
    AdaptiveHoeffdingTree,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lr" => Ok(Self::Lr),
            "ht" => Ok(Self::HoeffdingTree),
            "aht" => Ok(Self::AdaptiveHoeffdingTree),
            other => Err(Error::Config(format!("unknown model kind '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Lr => "lr",
            Self::HoeffdingTree => "ht",
            Self::AdaptiveHoeffdingTree => "aht",
        }
    }
}

/// Classifier hyperparameters.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub learning_rate: f64,
    /// L2 weight decay of the logistic model; keeps the boundary plastic
    /// under drift.
    pub l2_decay: f64,
    pub grace_period: u64,
    pub split_confidence: f64,
    pub tie_threshold: f64,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            learning_rate: 0.05,
            l2_decay: 0.03,
            grace_period: 50,
            split_confidence: 1e-3,
            tie_threshold: 0.1,
        }
    }

    pub fn build(&self, dim: usize) -> Box<dyn OnlineClassifier> {
        match self.kind {
            ModelKind::Lr => Box::new(
                OnlineLogisticRegression::new(dim)
                    .with_learning_rate(self.learning_rate)
                    .with_weight_decay(self.l2_decay),
            ),
            ModelKind::HoeffdingTree => Box::new(
                HoeffdingTree::new(dim)
                    .with_grace_period(self.grace_period)
                    .with_split_confidence(self.split_confidence)
                    .with_tie_threshold(self.tie_threshold),
            ),
            ModelKind::AdaptiveHoeffdingTree => Box::new(
                HoeffdingTree::adaptive(dim)
                    .with_grace_period(self.grace_period)
                    .with_split_confidence(self.split_confidence)
                    .with_tie_threshold(self.tie_threshold),
            ),
        }
    }
}

/// Which generator produces the initial counterfactuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    Nn,
    Gs,
    Robx,
}

impl GeneratorKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nn" => Ok(Self::Nn),
            "gs" => Ok(Self::Gs),
            "robx" => Ok(Self::Robx),
            other => Err(Error::Config(format!("unknown generator '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Nn => "nn",
            Self::Gs => "gs",
            Self::Robx => "robx",
        }
    }
}

/// A method tracked or regenerated by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Frozen,
    OursP,
    OursVp,
    Nn,
    Gs,
    Robx,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Frozen,
        Method::OursP,
        Method::OursVp,
        Method::Nn,
        Method::Gs,
        Method::Robx,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "frozen" => Ok(Self::Frozen),
            "ours-p" => Ok(Self::OursP),
            "ours-vp" => Ok(Self::OursVp),
            "nn" => Ok(Self::Nn),
            "gs" => Ok(Self::Gs),
            "robx" | "robx-regen" => Ok(Self::Robx),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Frozen => "frozen",
            Self::OursP => "ours-p",
            Self::OursVp => "ours-vp",
            Self::Nn => "nn",
            Self::Gs => "gs",
            Self::Robx => "robx",
        }
    }

    /// Maintained methods track a state population through the stream;
    /// the rest regenerate from scratch at the final checkpoint.
    pub fn is_maintained(&self) -> bool {
        matches!(self, Self::Frozen | Self::OursP | Self::OursVp)
    }
}

/// Complete description of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub stream: StreamSpec,
    pub model: ModelConfig,
    pub initial_batch: usize,
    pub stream_len: usize,
    pub checkpoint_interval: usize,
    pub population: usize,
    pub buffer_capacity: usize,
    pub generator: GeneratorKind,
    pub methods: Vec<Method>,
    pub repeats: usize,
    pub master_seed: u64,
    pub maintenance: MaintenanceConfig,
    pub metrics: MetricsConfig,
    pub gs: GrowingSpheresConfig,
    pub stability: StabilityConfig,
}

fn stream_by_kind(kind: &str, drift: DriftSchedule) -> Result<StreamSpec> {
    match kind {
        "hyperplane" => Ok(StreamSpec::hyperplane(drift)),
        "sine" => Ok(StreamSpec::sine(drift)),
        "sea" => Ok(StreamSpec::sea(drift)),
        other => Err(Error::Config(format!("unknown stream kind '{other}'"))),
    }
}

impl ExperimentConfig {
    /// Defaults for a stream/model pair: 1000-sample initial batch, 2000
    /// streamed samples with the transition spanning the whole stream,
    /// checkpoints every 200 samples, maintenance every 10, population 50,
    /// five repeats, initial counterfactuals from the stability-refined
    /// generator.
    pub fn new(stream_kind: &str, model_kind: &str) -> Result<Self> {
        let initial_batch = 1000usize;
        let stream_len = 2000usize;
        let stream = stream_by_kind(
            stream_kind,
            DriftSchedule::new(initial_batch as u64, stream_len as u64),
        )?;
        let dim = stream.dim;
        Ok(Self {
            stream,
            model: ModelConfig::new(ModelKind::parse(model_kind)?),
            initial_batch,
            stream_len,
            checkpoint_interval: 200,
            population: 50,
            buffer_capacity: 1000,
            generator: GeneratorKind::Robx,
            methods: Method::ALL.to_vec(),
            repeats: 5,
            master_seed: 42,
            maintenance: MaintenanceConfig::default(),
            metrics: MetricsConfig::default(),
            gs: GrowingSpheresConfig::for_dim(dim),
            stability: StabilityConfig::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.stream_len == 0 || self.checkpoint_interval == 0 {
            return bad("stream length and checkpoint interval must be >= 1".into());
        }
        if !self.stream_len.is_multiple_of(self.checkpoint_interval) {
            return bad(format!(
                "stream length {} not divisible by checkpoint interval {}",
                self.stream_len, self.checkpoint_interval
            ));
        }
        if self.repeats == 0 {
            return bad("repeats must be >= 1".into());
        }
        // population 0 is a defined degenerate: no states are tracked and
        // all maintenance and regeneration work collapses to nothing
        if self.initial_batch == 0 {
            return bad("initial batch must be >= 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method must be selected".into());
        }
        if self.metrics.k == 0 || self.metrics.kde_bandwidth <= 0.0 {
            return bad("metrics.k must be >= 1 and metrics.bandwidth positive".into());
        }
        if !(self.stream.noise_rate >= 0.0 && self.stream.noise_rate < 1.0) {
            return bad("stream.noise_rate must lie in [0, 1)".into());
        }
        self.maintenance.validate()?;
        Ok(())
    }

    /// Canonical key/value dump; parsing it back reproduces this config.
    pub fn snapshot(&self) -> String {
        let mut s = String::new();
        let (drift_start, drift_width) = (self.stream.drift.t_start, self.stream.drift.width);
        let methods = self
            .methods
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(s, "stream.kind = {}", self.stream.kind_name());
        let _ = writeln!(s, "stream.dimension = {}", self.stream.dim);
        let _ = writeln!(s, "stream.noise_rate = {}", self.stream.noise_rate);
        let _ = writeln!(s, "stream.drift_start = {drift_start}");
        let _ = writeln!(s, "stream.drift_width = {drift_width}");
        let _ = writeln!(s, "model.kind = {}", self.model.kind.name());
        let _ = writeln!(s, "model.learning_rate = {}", self.model.learning_rate);
        let _ = writeln!(s, "model.l2_decay = {}", self.model.l2_decay);
        let _ = writeln!(s, "model.grace_period = {}", self.model.grace_period);
        let _ = writeln!(
            s,
            "model.split_confidence = {}",
            self.model.split_confidence
        );
        let _ = writeln!(s, "model.tie_threshold = {}", self.model.tie_threshold);
        let _ = writeln!(s, "experiment.initial_batch = {}", self.initial_batch);
        let _ = writeln!(s, "experiment.stream_length = {}", self.stream_len);
        let _ = writeln!(
            s,
            "experiment.checkpoint_interval = {}",
            self.checkpoint_interval
        );
        let _ = writeln!(s, "experiment.population = {}", self.population);
        let _ = writeln!(s, "experiment.buffer_capacity = {}", self.buffer_capacity);
        let _ = writeln!(s, "experiment.generator = {}", self.generator.name());
        let _ = writeln!(s, "experiment.methods = {methods}");
        let _ = writeln!(s, "experiment.repeats = {}", self.repeats);
        let _ = writeln!(s, "experiment.seed = {}", self.master_seed);
        let m = &self.maintenance;
        let _ = writeln!(s, "maintenance.tau_low = {}", m.tau_low);
        let _ = writeln!(s, "maintenance.lambda_u = {}", m.lambda_u);
        let _ = writeln!(s, "maintenance.lambda_r = {}", m.lambda_r);
        let _ = writeln!(s, "maintenance.alpha = {}", m.alpha);
        let _ = writeln!(
            s,
            "maintenance.plausibility_period = {}",
            m.plausibility_period
        );
        let _ = writeln!(s, "maintenance.sigma = {}", m.sigma);
        let _ = writeln!(s, "maintenance.samples = {}", m.samples);
        let _ = writeln!(s, "maintenance.ridge = {}", m.ridge);
        let _ = writeln!(s, "maintenance.neighbor_count = {}", m.neighbor_count);
        let _ = writeln!(s, "maintenance.bandwidth = {}", m.bandwidth);
        let _ = writeln!(s, "maintenance.cadence = {}", m.cadence);
        let _ = writeln!(s, "metrics.k = {}", self.metrics.k);
        let _ = writeln!(s, "metrics.bandwidth = {}", self.metrics.kde_bandwidth);
        let _ = writeln!(s, "gs.samples_per_layer = {}", self.gs.samples_per_layer);
        let _ = writeln!(s, "gs.initial_radius = {}", self.gs.initial_radius);
        let _ = writeln!(s, "gs.radius_step = {}", self.gs.radius_step);
        let _ = writeln!(s, "gs.max_radius = {}", self.gs.max_radius);
        let st = &self.stability;
        let _ = writeln!(s, "stability.spread = {}", st.spread);
        let _ = writeln!(s, "stability.samples = {}", st.samples);
        let _ = writeln!(s, "stability.threshold = {}", st.threshold);
        let _ = writeln!(s, "stability.blend_step = {}", st.blend_step);
        let _ = writeln!(s, "stability.prototypes = {}", st.prototype_count);
        let _ = writeln!(s, "stability.max_iterations = {}", st.max_iterations);
        s
    }

    /// Parses the flat `section.key = value` format. Lines starting with `#`
    /// and blank lines are ignored; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                )));
            };
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }

        let find = |key: &str| -> Option<&str> {
            pairs
                .iter()
                .rev()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
        };

        let stream_kind = find("stream.kind").unwrap_or("hyperplane").to_string();
        let model_kind = find("model.kind").unwrap_or("lr").to_string();
        let mut cfg = Self::new(&stream_kind, &model_kind)?;

        let mut drift_start: Option<u64> = None;
        let mut drift_width: Option<u64> = None;
        let mut gs_max_radius: Option<f64> = None;

        for (key, value) in &pairs {
            let v = value.as_str();
            let num_err =
                |k: &str, v: &str| Error::Config(format!("key '{k}': cannot parse '{v}'"));
            macro_rules! parse_into {
                ($target:expr) => {{
                    $target = v.parse().map_err(|_| num_err(key, v))?;
                }};
            }
            match key.as_str() {
                "stream.kind" | "model.kind" => {}
                "stream.dimension" => {
                    let dim: usize = v.parse().map_err(|_| num_err(key, v))?;
                    let min_dim = 2;
                    if dim < min_dim {
                        return Err(Error::Config(format!(
                            "stream.dimension must be >= {min_dim}"
                        )));
                    }
                    cfg.stream.dim = dim;
                }
                "stream.noise_rate" => parse_into!(cfg.stream.noise_rate),
                "stream.drift_start" => drift_start = Some(v.parse().map_err(|_| num_err(key, v))?),
                "stream.drift_width" => drift_width = Some(v.parse().map_err(|_| num_err(key, v))?),
                "model.learning_rate" => parse_into!(cfg.model.learning_rate),
                "model.l2_decay" => parse_into!(cfg.model.l2_decay),
                "model.grace_period" => parse_into!(cfg.model.grace_period),
                "model.split_confidence" => parse_into!(cfg.model.split_confidence),
                "model.tie_threshold" => parse_into!(cfg.model.tie_threshold),
                "experiment.initial_batch" => parse_into!(cfg.initial_batch),
                "experiment.stream_length" => parse_into!(cfg.stream_len),
                "experiment.checkpoint_interval" => parse_into!(cfg.checkpoint_interval),
                "experiment.population" => parse_into!(cfg.population),
                "experiment.buffer_capacity" => parse_into!(cfg.buffer_capacity),
                "experiment.generator" => cfg.generator = GeneratorKind::parse(v)?,
                "experiment.methods" => {
                    cfg.methods = v
                        .split(',')
                        .map(|m| Method::parse(m.trim()))
                        .collect::<Result<Vec<_>>>()?;
                }
                "experiment.repeats" => parse_into!(cfg.repeats),
                "experiment.seed" => parse_into!(cfg.master_seed),
                "maintenance.tau_low" => parse_into!(cfg.maintenance.tau_low),
                "maintenance.lambda_u" => parse_into!(cfg.maintenance.lambda_u),
                "maintenance.lambda_r" => parse_into!(cfg.maintenance.lambda_r),
                "maintenance.alpha" => parse_into!(cfg.maintenance.alpha),
                "maintenance.plausibility_period" => {
                    parse_into!(cfg.maintenance.plausibility_period)
                }
                "maintenance.sigma" => parse_into!(cfg.maintenance.sigma),
                "maintenance.samples" => parse_into!(cfg.maintenance.samples),
                "maintenance.ridge" => parse_into!(cfg.maintenance.ridge),
                "maintenance.neighbor_count" => parse_into!(cfg.maintenance.neighbor_count),
                "maintenance.bandwidth" => parse_into!(cfg.maintenance.bandwidth),
                "maintenance.cadence" => parse_into!(cfg.maintenance.cadence),
                "metrics.k" => parse_into!(cfg.metrics.k),
                "metrics.bandwidth" => parse_into!(cfg.metrics.kde_bandwidth),
                "gs.samples_per_layer" => parse_into!(cfg.gs.samples_per_layer),
                "gs.initial_radius" => parse_into!(cfg.gs.initial_radius),
                "gs.radius_step" => parse_into!(cfg.gs.radius_step),
                "gs.max_radius" => gs_max_radius = Some(v.parse().map_err(|_| num_err(key, v))?),
                "stability.spread" => parse_into!(cfg.stability.spread),
                "stability.samples" => parse_into!(cfg.stability.samples),
                "stability.threshold" => parse_into!(cfg.stability.threshold),
                "stability.blend_step" => parse_into!(cfg.stability.blend_step),
                "stability.prototypes" => parse_into!(cfg.stability.prototype_count),
                "stability.max_iterations" => parse_into!(cfg.stability.max_iterations),
                other => return Err(Error::Config(format!("unknown key '{other}'"))),
            }
        }

        // drift defaults to spanning the stream phase
        let start = drift_start.unwrap_or(cfg.initial_batch as u64);
        let width = drift_width.unwrap_or(cfg.stream_len as u64);
        cfg.stream.drift = DriftSchedule::new(start, width);
        // dimension-dependent default unless overridden
        cfg.gs.max_radius = gs_max_radius.unwrap_or(2.0 * (cfg.stream.dim as f64).sqrt());

        cfg.validate()?;
        Ok(cfg)
    }

    /// The angle sweep of the default rotating hyperplane, exposed for
    /// callers composing custom concepts.
    pub fn default_hyperplane_concept() -> Concept {
        Concept::Hyperplane {
            angle0: 0.0,
            angle_delta: PI / 2.0,
        }
    }
}
