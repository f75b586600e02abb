//! The three synthetic drifting streams: how the concept parameter moves
//! through the transition window and what that does to class balance.
//!
//! ```bash
//! cargo run --example stream_drift
//! ```

use cfdrift::core::RngStream;
use cfdrift::streams::{DriftSchedule, StreamSpec};

fn class_one_fraction(spec: &StreamSpec, t: u64, draws: usize) -> f64 {
    let mut rng = RngStream::new(0xBA5E ^ t);
    let mut ones = 0usize;
    for _ in 0..draws {
        let x: Vec<f64> = (0..spec.dim).map(|_| rng.next_f64()).collect();
        ones += spec.label_at(&x, t);
    }
    ones as f64 / draws as f64
}

fn main() {
    let drift = DriftSchedule::new(1000, 2000);
    let streams = [
        StreamSpec::hyperplane(drift),
        StreamSpec::sine(drift),
        StreamSpec::sea(drift),
    ];

    for spec in &streams {
        println!("stream: {} (d = {})", spec.kind_name(), spec.dim);
        println!(
            "  {:>6} {:>9} {:>10} {:>9}",
            "sample", "progress", "parameter", "P(y=1)"
        );
        for t in [0u64, 1000, 1500, 2000, 2500, 3000] {
            println!(
                "  {:>6} {:>9.2} {:>10.4} {:>9.3}",
                t,
                spec.drift.progress(t),
                spec.concept_parameter(t),
                class_one_fraction(spec, t, 20_000),
            );
        }
        println!();
    }

    // a fixed point experiences the drift as a label flip
    let spec = StreamSpec::hyperplane(drift);
    let probe = [0.8, 0.7];
    println!("label of the fixed point {probe:?} under the rotating boundary:");
    for t in [0u64, 1500, 2000, 2500, 3000] {
        println!("  sample {t:>4}: class {}", spec.label_at(&probe, t));
    }
}
