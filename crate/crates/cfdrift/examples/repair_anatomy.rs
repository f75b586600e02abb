//! One maintained counterfactual under a microscope: the retirement check,
//! the low-margin trigger, both correction directions, and the fixed-length
//! update step, traced sweep by sweep against a hand-built drifting model.
//!
//! ```bash
//! cargo run --example repair_anatomy
//! ```

use cfdrift::core::{CfeState, FeatureVector, LabeledBuffer, LabeledInstance, RngStream};
use cfdrift::maintenance::{
    check_retire, maintain_step, needs_update, plausibility_direction, validity_direction,
    MaintenanceConfig, Variant,
};
use cfdrift::models::{OnlineClassifier, OnlineLogisticRegression};

fn main() {
    // a logistic boundary sliding to the right: x1 = 0.45 now, 0.75 later
    let model_at = |boundary: f64| {
        OnlineLogisticRegression::from_parameters(vec![14.0, 0.0], -14.0 * boundary)
    };

    // buffer dense in class-1 observations to the right of the boundary
    let mut rng = RngStream::new(5);
    let mut buf = LabeledBuffer::new(500, 2);
    for _ in 0..500 {
        let x = vec![rng.next_f64(), rng.next_f64()];
        let y = usize::from(x[0] > 0.6);
        buf.push(LabeledInstance::new(FeatureVector::new(x), y))
            .unwrap();
    }

    let cfg = MaintenanceConfig::default();
    let mut state = CfeState::new(
        0,
        FeatureVector::new(vec![0.30, 0.50]),
        FeatureVector::new(vec![0.55, 0.50]), // valid for the initial boundary
        1,
    );

    println!("query x0 = {:?}, target class 1", state.x0.values());
    println!("initial counterfactual {:?}\n", state.x_cf.values());

    for sweep in 1..=14u64 {
        // boundary drifts 0.03 per sweep
        let boundary = 0.45 + 0.03 * sweep as f64;
        let model = model_at(boundary);

        let retired = check_retire(&state, &model);
        let low = needs_update(&state, &model, cfg.tau_low);
        let prob = model.prob(&state.x_cf)[1];

        // peek at both candidate directions before stepping
        let mut probe_rng = RngStream::new(1000 + sweep);
        let v = validity_direction(
            &state.x_cf,
            1,
            &model,
            cfg.sigma,
            cfg.samples,
            cfg.ridge,
            &mut probe_rng,
        )
        .unwrap();
        let p = plausibility_direction(
            &state.x_cf,
            1,
            &buf,
            &model,
            cfg.neighbor_count,
            cfg.bandwidth,
        );

        let mut rng_step = RngStream::new(2000 + sweep);
        let outcome = maintain_step(&mut state, &model, &buf, sweep, &cfg, &mut rng_step);

        println!(
            "sweep {sweep:>2}: boundary {boundary:.2}  p(target|x') {prob:.3}  retired {retired}  low {low}"
        );
        println!(
            "          validity dir ({:+.3}, {:+.3})  plausibility dir {}",
            v[0],
            v[1],
            p.map(|d| format!("({:+.3}, {:+.3})", d[0], d[1]))
                .unwrap_or_else(|| "-".into()),
        );
        println!(
            "          action {:?}  x' -> ({:.3}, {:.3})  p after {}",
            outcome.action,
            state.x_cf.values()[0],
            state.x_cf.values()[1],
            outcome
                .prob_after
                .map(|q| format!("{q:.3}"))
                .unwrap_or_else(|| "-".into()),
        );
        if !state.active {
            println!("\nthe drift carried the original query across the boundary;");
            println!("the state retired and its counterfactual is frozen for good.");
            break;
        }
    }

    // the update direction is variant-dependent; compare both on one state
    println!("\nvariants on the same low-margin state:");
    for variant in [Variant::ValidityPlausibility, Variant::PlausibilityOnly] {
        let cfg = MaintenanceConfig {
            variant,
            ..MaintenanceConfig::default()
        };
        let mut s = CfeState::new(
            1,
            FeatureVector::new(vec![0.30, 0.50]),
            FeatureVector::new(vec![0.58, 0.50]),
            1,
        );
        let model = model_at(0.62);
        let mut rng_step = RngStream::new(3000);
        let out = maintain_step(&mut s, &model, &buf, 1, &cfg, &mut rng_step);
        println!(
            "  {:?}: action {:?}, x' -> ({:.3}, {:.3})",
            variant,
            out.action,
            s.x_cf.values()[0],
            s.x_cf.values()[1]
        );
    }
}
