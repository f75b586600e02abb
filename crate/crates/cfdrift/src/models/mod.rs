//! Online classifiers trained one instance at a time.

mod hoeffding;
mod logistic;

pub use hoeffding::{hoeffding_bound, HoeffdingTree};
pub use logistic::OnlineLogisticRegression;

use crate::core::{ClassId, FeatureVector, LabeledInstance};
use crate::error::Result;

/// Incremental classifier exposing class probabilities.
///
/// `prob` must return a distribution (nonnegative, summing to 1) over the
/// class set `0..num_classes()`.
pub trait OnlineClassifier {
    fn dim(&self) -> usize;

    fn num_classes(&self) -> usize;

    /// Consumes one labeled instance.
    fn learn_one(&mut self, inst: &LabeledInstance) -> Result<()>;

    /// Class-probability distribution at `x`.
    fn prob(&self, x: &FeatureVector) -> Vec<f64>;

    /// Most probable class; ties resolved toward the smaller class id.
    fn predict(&self, x: &FeatureVector) -> ClassId {
        argmax_class(&self.prob(x))
    }
}

/// Index of the largest probability, preferring the smaller index on ties.
pub fn argmax_class(probs: &[f64]) -> ClassId {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate().skip(1) {
        if *p > probs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_smaller_class_on_tie() {
        assert_eq!(argmax_class(&[0.5, 0.5]), 0);
        assert_eq!(argmax_class(&[0.3, 0.7]), 1);
        assert_eq!(argmax_class(&[0.4, 0.2, 0.4]), 0);
    }
}
