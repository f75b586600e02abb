//! Prequential (test-then-train) accuracy of the two online classifiers on
//! a drifting stream, windowed so the drift response is visible.
//!
//! ```bash
//! cargo run --example online_learning
//! ```

use cfdrift::core::RngStream;
use cfdrift::models::{HoeffdingTree, OnlineClassifier, OnlineLogisticRegression};
use cfdrift::streams::{DriftSchedule, StreamSpec};

fn run(spec: &StreamSpec, mut model: Box<dyn OnlineClassifier>, name: &str) {
    let mut rng = RngStream::new(11);
    let window = 200usize;
    let mut recent = Vec::with_capacity(window);
    println!("{name}:");
    for t in 0..3000u64 {
        let inst = spec.next_instance(t, &mut rng);
        recent.push(model.predict(&inst.x) == inst.y);
        model.learn_one(&inst).unwrap();
        if recent.len() == window {
            let acc = recent.iter().filter(|c| **c).count() as f64 / window as f64;
            let phase = if t < 1000 { "stationary" } else { "drifting" };
            println!(
                "  samples {:>4}-{:>4} ({phase:>10}): accuracy {acc:.3}",
                t + 1 - window as u64,
                t + 1
            );
            recent.clear();
        }
    }
    println!();
}

fn main() {
    let spec = StreamSpec::hyperplane(DriftSchedule::new(1000, 2000));
    run(
        &spec,
        Box::new(OnlineLogisticRegression::new(2).with_weight_decay(0.03)),
        "online logistic regression (weight decay 0.03)",
    );
    run(
        &spec,
        Box::new(HoeffdingTree::adaptive(2)),
        "adaptive hoeffding tree",
    );
    run(
        &spec,
        Box::new(HoeffdingTree::new(2)),
        "plain hoeffding tree (no drift response)",
    );
}
