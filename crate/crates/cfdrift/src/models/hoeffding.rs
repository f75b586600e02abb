//! Incremental decision tree with Hoeffding-bound split decisions, binned
//! numeric attributes, and an optional subtree-replacement drift response.

use std::collections::VecDeque;

use crate::core::{ClassId, FeatureVector, LabeledInstance};
use crate::error::{Error, Result};
use crate::models::{argmax_class, OnlineClassifier};

const DEFAULT_BINS: usize = 10;
const DEFAULT_GRACE_PERIOD: u64 = 50;
const DEFAULT_SPLIT_CONFIDENCE: f64 = 1e-3;
const DEFAULT_TIE_THRESHOLD: f64 = 0.1;
/// Minimum best-candidate gain (bits) for a tie-rule split. Without a floor
/// the tie rule fires on pure sampling noise once enough instances
/// accumulate, splitting leaves that carry no structure.
const TIE_GAIN_FLOOR: f64 = 0.05;
/// Sliding window length of the per-node error monitors.
const MONITOR_WINDOW: usize = 300;
/// Minimum window fill before a monitor may fire.
const MONITOR_MIN: usize = 100;
/// Absolute error increase over the creation-time error that triggers
/// subtree replacement.
const DRIFT_THRESHOLD: f64 = 0.15;

/// Confidence radius for an n-sample mean of a statistic with range `range`:
/// `sqrt(range^2 * ln(1/confidence) / (2n))`.
///
/// `confidence` must lie in `(0, 1]`; 1 gives a zero radius.
pub fn hoeffding_bound(range: f64, confidence: f64, n: u64) -> Result<f64> {
    if range.is_nan() || range <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "hoeffding range must be positive, got {range}"
        )));
    }
    if !(confidence > 0.0 && confidence <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "hoeffding confidence must be in (0, 1], got {confidence}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("hoeffding n must be >= 1".into()));
    }
    Ok((range * range * (1.0 / confidence).ln() / (2.0 * n as f64)).sqrt())
}

fn entropy_bits(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum()
}

#[derive(Debug, Clone)]
struct Params {
    dim: usize,
    num_classes: usize,
    bins: usize,
    grace_period: u64,
    split_confidence: f64,
    tie_threshold: f64,
    adaptive: bool,
}

#[derive(Debug, Clone)]
struct Leaf {
    /// Prediction counts; replacement leaves start pre-seeded from the
    /// triggering monitor's window.
    class_counts: Vec<u64>,
    /// Split statistics: `[feature][bin][class]`, counting only instances
    /// routed here since creation.
    bin_counts: Vec<Vec<Vec<u64>>>,
    seen: u64,
}

impl Leaf {
    fn empty(p: &Params) -> Self {
        Self::seeded(vec![0; p.num_classes], p)
    }

    fn seeded(class_counts: Vec<u64>, p: &Params) -> Self {
        Self {
            class_counts,
            bin_counts: vec![vec![vec![0; p.num_classes]; p.bins]; p.dim],
            seen: 0,
        }
    }

    fn bin_of(value: f64, bins: usize) -> usize {
        ((value.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1)
    }

    fn update(&mut self, x: &[f64], y: ClassId, p: &Params) {
        self.class_counts[y] += 1;
        self.seen += 1;
        for (f, &v) in x.iter().enumerate() {
            self.bin_counts[f][Self::bin_of(v, p.bins)][y] += 1;
        }
    }

    fn prob(&self, num_classes: usize) -> Vec<f64> {
        let total: u64 = self.class_counts.iter().sum();
        let denom = total as f64 + num_classes as f64;
        self.class_counts
            .iter()
            .map(|&c| (c as f64 + 1.0) / denom)
            .collect()
    }

    /// Majority-class training error, used as the creation-time reference of
    /// the monitor guarding the split that replaces this leaf.
    fn majority_error(&self) -> f64 {
        let total: u64 = self.class_counts.iter().sum();
        if total == 0 {
            return 0.5;
        }
        let max = *self.class_counts.iter().max().unwrap();
        1.0 - max as f64 / total as f64
    }

    /// Best split threshold and information gain for one feature.
    fn best_for_feature(&self, f: usize, totals: &[u64], h_parent: f64, p: &Params) -> (f64, f64) {
        let n: u64 = totals.iter().sum();
        let nf = n as f64;
        let mut left = vec![0u64; p.num_classes];
        let mut best_gain = 0.0;
        let mut best_thr = 0.0;
        for b in 1..p.bins {
            for (c, acc) in left.iter_mut().enumerate() {
                *acc += self.bin_counts[f][b - 1][c];
            }
            let right: Vec<u64> = totals.iter().zip(&left).map(|(t, l)| t - l).collect();
            let nl: u64 = left.iter().sum();
            let nr = n - nl;
            let gain = h_parent
                - (nl as f64 / nf) * entropy_bits(&left)
                - (nr as f64 / nf) * entropy_bits(&right);
            if gain > best_gain {
                best_gain = gain;
                best_thr = b as f64 / p.bins as f64;
            }
        }
        (best_gain, best_thr)
    }

    /// Evaluates the Hoeffding split criterion over all features, returning
    /// the chosen `(feature, threshold)` when a split is warranted.
    fn try_split(&self, p: &Params) -> Option<(usize, f64)> {
        let totals: Vec<u64> = (0..p.num_classes)
            .map(|c| (0..p.bins).map(|b| self.bin_counts[0][b][c]).sum())
            .collect();
        let n: u64 = totals.iter().sum();
        if n == 0 {
            return None;
        }
        let h_parent = entropy_bits(&totals);

        let mut per_feature: Vec<(f64, f64, usize)> = (0..p.dim)
            .map(|f| {
                let (gain, thr) = self.best_for_feature(f, &totals, h_parent, p);
                (gain, thr, f)
            })
            .collect();
        per_feature.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.2.cmp(&b.2)));
        let (g1, thr1, f1) = per_feature[0];
        let g2 = if per_feature.len() > 1 {
            per_feature[1].0
        } else {
            0.0
        };
        if g1 <= 1e-12 {
            return None;
        }
        let range = (p.num_classes as f64).log2();
        let eps = hoeffding_bound(range, p.split_confidence, n).expect("validated params");
        if g1 - g2 > eps || (eps < p.tie_threshold && g1 >= TIE_GAIN_FLOOR) {
            Some((f1, thr1))
        } else {
            None
        }
    }
}

/// Sliding-window prequential error of a subtree, compared against the error
/// observed when the subtree's root split was created.
#[derive(Debug, Clone)]
struct Monitor {
    window: VecDeque<(ClassId, bool)>,
    error_count: usize,
    creation_error: f64,
}

impl Monitor {
    fn new(creation_error: f64) -> Self {
        Self {
            window: VecDeque::with_capacity(MONITOR_WINDOW + 1),
            error_count: 0,
            creation_error,
        }
    }

    fn record(&mut self, y: ClassId, correct: bool) {
        self.window.push_back((y, correct));
        if !correct {
            self.error_count += 1;
        }
        if self.window.len() > MONITOR_WINDOW {
            let (_, old_correct) = self.window.pop_front().unwrap();
            if !old_correct {
                self.error_count -= 1;
            }
        }
    }

    fn should_replace(&self) -> bool {
        if self.window.len() < MONITOR_MIN {
            return false;
        }
        let rate = self.error_count as f64 / self.window.len() as f64;
        rate > self.creation_error + DRIFT_THRESHOLD
    }

    fn label_counts(&self, num_classes: usize) -> Vec<u64> {
        let mut counts = vec![0u64; num_classes];
        for (y, _) in &self.window {
            counts[*y] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone)]
struct Split {
    feature: usize,
    threshold: f64,
    left: Box<Node>,
    right: Box<Node>,
    monitor: Option<Monitor>,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(Leaf),
    Split(Split),
}

impl Node {
    fn route(&self, x: &[f64]) -> &Leaf {
        match self {
            Node::Leaf(leaf) => leaf,
            Node::Split(s) => {
                if x[s.feature] < s.threshold {
                    s.left.route(x)
                } else {
                    s.right.route(x)
                }
            }
        }
    }
}

fn learn_rec(node: &mut Node, x: &[f64], y: ClassId, correct: bool, p: &Params) {
    match node {
        Node::Split(split) => {
            if let Some(monitor) = split.monitor.as_mut() {
                monitor.record(y, correct);
                if monitor.should_replace() {
                    let seeds = monitor.label_counts(p.num_classes);
                    *node = Node::Leaf(Leaf::seeded(seeds, p));
                    learn_rec(node, x, y, correct, p);
                    return;
                }
            }
            let child = if x[split.feature] < split.threshold {
                &mut split.left
            } else {
                &mut split.right
            };
            learn_rec(child, x, y, correct, p);
        }
        Node::Leaf(leaf) => {
            leaf.update(x, y, p);
            if leaf.seen % p.grace_period == 0 {
                if let Some((feature, threshold)) = leaf.try_split(p) {
                    let creation_error = leaf.majority_error();
                    let monitor = p.adaptive.then(|| Monitor::new(creation_error));
                    *node = Node::Split(Split {
                        feature,
                        threshold,
                        left: Box::new(Node::Leaf(Leaf::empty(p))),
                        right: Box::new(Node::Leaf(Leaf::empty(p))),
                        monitor,
                    });
                }
            }
        }
    }
}

/// Hoeffding tree over `[0, 1]`-normalized numeric features. Binary splits
/// at fixed bin edges, Laplace-smoothed leaf probabilities. The adaptive
/// variant replaces a subtree with a fresh leaf when its windowed error
/// exceeds the creation-time error by [`DRIFT_THRESHOLD`].
#[derive(Debug, Clone)]
pub struct HoeffdingTree {
    root: Node,
    params: Params,
}

impl HoeffdingTree {
    /// Non-adaptive tree with default hyperparameters.
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1);
        let params = Params {
            dim,
            num_classes: 2,
            bins: DEFAULT_BINS,
            grace_period: DEFAULT_GRACE_PERIOD,
            split_confidence: DEFAULT_SPLIT_CONFIDENCE,
            tie_threshold: DEFAULT_TIE_THRESHOLD,
            adaptive: false,
        };
        Self {
            root: Node::Leaf(Leaf::empty(&params)),
            params,
        }
    }

    /// Tree with per-node drift monitors enabled.
    pub fn adaptive(dim: usize) -> Self {
        let mut tree = Self::new(dim);
        tree.params.adaptive = true;
        tree
    }

    pub fn with_grace_period(mut self, grace_period: u64) -> Self {
        assert!(grace_period >= 1);
        self.params.grace_period = grace_period;
        self
    }

    pub fn with_split_confidence(mut self, confidence: f64) -> Self {
        assert!(confidence > 0.0 && confidence < 1.0);
        self.params.split_confidence = confidence;
        self
    }

    pub fn with_tie_threshold(mut self, tie_threshold: f64) -> Self {
        assert!(tie_threshold >= 0.0);
        self.params.tie_threshold = tie_threshold;
        self
    }

    pub fn is_adaptive(&self) -> bool {
        self.params.adaptive
    }

    pub fn split_count(&self) -> usize {
        fn count(node: &Node) -> usize {
            match node {
                Node::Leaf(_) => 0,
                Node::Split(s) => 1 + count(&s.left) + count(&s.right),
            }
        }
        count(&self.root)
    }

    pub fn leaf_count(&self) -> usize {
        self.split_count() + 1
    }

    /// Axis-aligned box `[lo, hi)` per feature of the leaf containing `x`.
    /// The leaf's probability estimate is constant over this region.
    pub fn leaf_region(&self, x: &FeatureVector) -> Vec<(f64, f64)> {
        let mut bounds: Vec<(f64, f64)> = vec![(0.0, 1.0); self.params.dim];
        let mut node = &self.root;
        let xv = x.values();
        while let Node::Split(s) = node {
            if xv[s.feature] < s.threshold {
                bounds[s.feature].1 = bounds[s.feature].1.min(s.threshold);
                node = &s.left;
            } else {
                bounds[s.feature].0 = bounds[s.feature].0.max(s.threshold);
                node = &s.right;
            }
        }
        bounds
    }
}

impl OnlineClassifier for HoeffdingTree {
    fn dim(&self) -> usize {
        self.params.dim
    }

    fn num_classes(&self) -> usize {
        self.params.num_classes
    }

    fn learn_one(&mut self, inst: &LabeledInstance) -> Result<()> {
        if inst.x.dim() != self.params.dim {
            return Err(Error::DimensionMismatch {
                expected: self.params.dim,
                got: inst.x.dim(),
            });
        }
        if inst.y >= self.params.num_classes {
            return Err(Error::InvalidParameter(format!(
                "class id {} out of range",
                inst.y
            )));
        }
        let x = inst.x.values();
        // one leaf lookup serves every monitor on the path: the subtree
        // prediction at each node along the route equals the leaf prediction
        let predicted = argmax_class(&self.root.route(x).prob(self.params.num_classes));
        let correct = predicted == inst.y;
        learn_rec(&mut self.root, x, inst.y, correct, &self.params);
        Ok(())
    }

    fn prob(&self, x: &FeatureVector) -> Vec<f64> {
        assert_eq!(x.dim(), self.params.dim, "dimension mismatch in prob");
        self.root.route(x.values()).prob(self.params.num_classes)
    }
}
