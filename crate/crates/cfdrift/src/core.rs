//! Shared domain types: feature vectors, labeled instances, counterfactual
//! states, the sliding reference buffer, and seeded randomness.

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Class identifier. All built-in streams are binary with classes `{0, 1}`.
pub type ClassId = usize;

/// A point in feature space. Stream-emitted points live in `[0, 1]^d`;
/// perturbed query points used by sampling-based estimators may leave the box.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    /// Wraps a vector of finite components.
    ///
    /// Panics if `values` is empty or contains a non-finite component.
    pub fn new(values: Vec<f64>) -> Self {
        assert!(
            !values.is_empty(),
            "feature vector must have dimension >= 1"
        );
        assert!(
            values.iter().all(|v| v.is_finite()),
            "feature vector components must be finite"
        );
        Self { values }
    }

    pub fn from_slice(values: &[f64]) -> Self {
        Self::new(values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Euclidean distance to another point of the same dimension.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in distance");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Clamps every component into `[0, 1]`.
    pub fn clamp_unit(mut self) -> Self {
        for v in &mut self.values {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

/// An observed point together with its true class label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub x: FeatureVector,
    pub y: ClassId,
}

impl LabeledInstance {
    pub fn new(x: FeatureVector, y: ClassId) -> Self {
        Self { x, y }
    }
}

/// One maintained counterfactual explanation: the original query, the current
/// (possibly repaired) counterfactual, the desired target class, and whether
/// the explanation is still being maintained.
///
/// `id` is assigned at generation time and stays with the state; per-state
/// randomness is derived from it, so processing order never affects results.
#[derive(Debug, Clone)]
pub struct CfeState {
    pub id: u64,
    pub x0: FeatureVector,
    pub x_cf: FeatureVector,
    pub target: ClassId,
    pub active: bool,
}

impl CfeState {
    pub fn new(id: u64, x0: FeatureVector, x_cf: FeatureVector, target: ClassId) -> Self {
        Self {
            id,
            x0,
            x_cf,
            target,
            active: true,
        }
    }
}

/// Sliding FIFO window of recent labeled observations.
#[derive(Debug, Clone)]
pub struct LabeledBuffer {
    capacity: usize,
    dim: usize,
    entries: VecDeque<LabeledInstance>,
}

impl LabeledBuffer {
    /// Creates an empty buffer holding at most `capacity` instances of
    /// dimension `dim`.
    pub fn new(capacity: usize, dim: usize) -> Self {
        assert!(capacity >= 1, "buffer capacity must be >= 1");
        assert!(dim >= 1, "buffer dimension must be >= 1");
        Self {
            capacity,
            dim,
            entries: VecDeque::with_capacity(capacity + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Iterates entries oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &LabeledInstance> {
        self.entries.iter()
    }

    /// Appends an instance, evicting the oldest entry once full.
    pub fn push(&mut self, inst: LabeledInstance) -> Result<()> {
        if inst.x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: inst.x.dim(),
            });
        }
        self.entries.push_back(inst);
        if self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
        Ok(())
    }

    /// Returns up to `k` entries nearest to `q` by Euclidean distance,
    /// ascending; ties broken oldest-first.
    pub fn knn(&self, q: &FeatureVector, k: usize) -> Vec<&LabeledInstance> {
        self.knn_filtered(q, k, |_| true)
    }

    /// Like [`knn`](Self::knn) but keeps only entries accepted by `pred`.
    /// Entries are visited in ascending-distance order and the predicate is
    /// evaluated lazily, so expensive predicates (e.g. model queries) run
    /// only until `k` entries are accepted. Rather than sorting the whole
    /// buffer, candidates are resolved in partially selected batches; the
    /// result is identical to filtering a fully sorted buffer. An empty
    /// result means no entry qualified.
    pub fn knn_filtered<F>(&self, q: &FeatureVector, k: usize, mut pred: F) -> Vec<&LabeledInstance>
    where
        F: FnMut(&LabeledInstance) -> bool,
    {
        assert!(k >= 1, "k must be >= 1");
        let mut order: Vec<(f64, usize)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, inst)| (q.distance(&inst.x), i))
            .collect();
        let cmp =
            |a: &(f64, usize), b: &(f64, usize)| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1));
        let mut batch = (4 * k).max(32);
        let mut out = Vec::with_capacity(k);
        let mut start = 0;
        while start < order.len() && out.len() < k {
            let take = batch.min(order.len() - start);
            if start + take < order.len() {
                order[start..].select_nth_unstable_by(take - 1, cmp);
            }
            order[start..start + take].sort_by(cmp);
            for &(_, idx) in &order[start..start + take] {
                let inst = &self.entries[idx];
                if pred(inst) {
                    out.push(inst);
                    if out.len() == k {
                        break;
                    }
                }
            }
            start += take;
            batch *= 2;
        }
        out
    }

    /// Nearest entry accepted by `pred`: a single pass that probes only
    /// entries closer than the best match so far. Equivalent to
    /// `knn_filtered(q, 1, pred)` including the oldest-first tie rule.
    pub fn nearest_filtered<F>(&self, q: &FeatureVector, mut pred: F) -> Option<&LabeledInstance>
    where
        F: FnMut(&LabeledInstance) -> bool,
    {
        let mut best: Option<(f64, &LabeledInstance)> = None;
        for inst in &self.entries {
            let d = q.distance(&inst.x);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) && pred(inst) {
                best = Some((d, inst));
            }
        }
        best.map(|(_, inst)| inst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a sequence of tags.
/// The mapping is a fixed splitmix64 chain, independent of platform.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &t in tags {
        state = splitmix64(state ^ splitmix64(t));
    }
    state
}

/// Seeded random stream. Identical seed and call sequence give identical
/// outputs; independent streams are obtained via [`derive_seed`].
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Shorthand for `RngStream::new(derive_seed(master, tags))`.
    pub fn derived(master: u64, tags: &[u64]) -> Self {
        Self::new(derive_seed(master, tags))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0);
        self.rng.random_range(0..n)
    }

    /// Draws `k` distinct indices from `0..n` (all of them if `k >= n`),
    /// in selection order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..n).collect();
        let take = k.min(n);
        for i in 0..take {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(take);
        pool
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector::from_slice(values)
    }

    fn inst(values: &[f64], y: ClassId) -> LabeledInstance {
        LabeledInstance::new(fv(values), y)
    }

    #[test]
    fn push_evicts_oldest_when_full() {
        let mut buf = LabeledBuffer::new(2, 1);
        buf.push(inst(&[0.1], 0)).unwrap();
        buf.push(inst(&[0.2], 0)).unwrap();
        buf.push(inst(&[0.3], 1)).unwrap();
        let xs: Vec<f64> = buf.iter().map(|i| i.x.values()[0]).collect();
        assert_eq!(xs, vec![0.2, 0.3]);
    }

    #[test]
    fn push_under_capacity_appends() {
        let mut buf = LabeledBuffer::new(3, 1);
        buf.push(inst(&[0.1], 0)).unwrap();
        buf.push(inst(&[0.2], 1)).unwrap();
        let xs: Vec<f64> = buf.iter().map(|i| i.x.values()[0]).collect();
        assert_eq!(xs, vec![0.1, 0.2]);
    }

    #[test]
    fn push_rejects_wrong_dimension() {
        let mut buf = LabeledBuffer::new(2, 2);
        let err = buf.push(inst(&[0.1], 0)).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                got: 1
            }
        ));
    }

    #[test]
    fn knn_returns_nearest_point() {
        let mut buf = LabeledBuffer::new(10, 2);
        buf.push(inst(&[0.0, 0.0], 0)).unwrap();
        buf.push(inst(&[1.0, 1.0], 1)).unwrap();
        let got = buf.knn(&fv(&[0.1, 0.1]), 1);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].x.values(), &[0.0, 0.0]);
    }

    #[test]
    fn knn_filter_forces_class() {
        let mut buf = LabeledBuffer::new(10, 2);
        buf.push(inst(&[0.0, 0.0], 0)).unwrap();
        buf.push(inst(&[1.0, 1.0], 1)).unwrap();
        let got = buf.knn_filtered(&fv(&[0.1, 0.1]), 1, |i| i.y == 1);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].x.values(), &[1.0, 1.0]);
    }

    #[test]
    fn knn_tie_prefers_older_entry() {
        let mut buf = LabeledBuffer::new(10, 2);
        buf.push(inst(&[0.0, 0.5], 0)).unwrap();
        buf.push(inst(&[1.0, 0.5], 1)).unwrap();
        // query equidistant from both
        let got = buf.knn(&fv(&[0.5, 0.5]), 1);
        assert_eq!(got[0].y, 0);
    }

    #[test]
    fn knn_empty_after_filter_returns_empty() {
        let mut buf = LabeledBuffer::new(10, 1);
        buf.push(inst(&[0.4], 0)).unwrap();
        assert!(buf.knn_filtered(&fv(&[0.5]), 3, |i| i.y == 1).is_empty());
    }

    #[test]
    fn same_seed_same_draws() {
        let mut a = RngStream::new(0xC0FFEE);
        let mut b = RngStream::new(0xC0FFEE);
        for _ in 0..10_000 {
            assert_eq!(a.next_f64().to_bits(), b.next_f64().to_bits());
        }
    }

    #[test]
    fn derived_seeds_differ_per_tag() {
        let s1 = derive_seed(7, &[1, 2]);
        let s2 = derive_seed(7, &[1, 3]);
        let s3 = derive_seed(7, &[2, 1]);
        assert_ne!(s1, s2);
        assert_ne!(s1, s3);
        assert_eq!(s1, derive_seed(7, &[1, 2]));
    }

    #[test]
    fn sample_indices_distinct_and_deterministic() {
        let mut rng = RngStream::new(11);
        let picked = rng.sample_indices(100, 20);
        assert_eq!(picked.len(), 20);
        let mut sorted = picked.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 20);
        let mut rng2 = RngStream::new(11);
        assert_eq!(picked, rng2.sample_indices(100, 20));
    }

    proptest! {
        #[test]
        fn buffer_never_exceeds_capacity(
            capacity in 1usize..20,
            values in proptest::collection::vec(0.0f64..1.0, 0..100),
        ) {
            let mut buf = LabeledBuffer::new(capacity, 1);
            for v in values {
                buf.push(inst(&[v], 0)).unwrap();
                prop_assert!(buf.len() <= capacity);
            }
        }

        #[test]
        fn knn_matches_exhaustive_sort_oracle(
            points in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0usize..2), 1..100),
            q in (0.0f64..1.0, 0.0f64..1.0),
            k in 1usize..10,
        ) {
            let mut buf = LabeledBuffer::new(points.len(), 2);
            for (a, b, y) in &points {
                buf.push(inst(&[*a, *b], *y)).unwrap();
            }
            let query = fv(&[q.0, q.1]);
            let got = buf.knn(&query, k);

            // oracle: full stable sort by distance over the raw point list
            let mut oracle: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .map(|(i, (a, b, _))| (query.distance(&fv(&[*a, *b])), i))
                .collect();
            oracle.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
            let want: Vec<usize> = oracle.iter().take(k).map(|(_, i)| *i).collect();

            prop_assert_eq!(got.len(), k.min(points.len()));
            for (g, wi) in got.iter().zip(&want) {
                prop_assert_eq!(g.x.values()[0], points[*wi].0);
                prop_assert_eq!(g.x.values()[1], points[*wi].1);
            }
            // non-decreasing distances
            for w in got.windows(2) {
                prop_assert!(query.distance(&w[0].x) <= query.distance(&w[1].x));
            }
        }
    }
}
