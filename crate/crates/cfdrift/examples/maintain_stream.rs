//! The core capability end to end: a population of counterfactuals is
//! either frozen or continuously maintained while the classifier follows a
//! drifting stream. Prints validity per checkpoint for each method — the
//! frozen column collapses, the maintained columns do not.
//!
//! ```bash
//! cargo run --example maintain_stream
//! ```

use cfdrift::harness::{run_experiment, ExperimentConfig, Method};

fn main() {
    let mut cfg = ExperimentConfig::new("hyperplane", "lr").expect("stock config");
    cfg.methods = vec![Method::Frozen, Method::OursP, Method::OursVp];
    cfg.repeats = 3;
    let artifacts = run_experiment(&cfg).expect("experiment");

    let series = cfdrift::harness::validity_series(&artifacts.checkpoint_rows);
    let checkpoints: Vec<usize> = {
        let mut c: Vec<usize> = series.iter().map(|p| p.checkpoint).collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    let value = |method: &str, checkpoint: usize| -> String {
        series
            .iter()
            .find(|p| p.method == method && p.checkpoint == checkpoint)
            .map(|p| format!("{:.3} ± {:.3}", p.mean_validity, p.std_validity))
            .unwrap_or_else(|| "-".into())
    };

    println!(
        "validity over the stream (mean ± std over {} repeats)\n",
        cfg.repeats
    );
    println!(
        "{:>10} {:>17} {:>17} {:>17}",
        "sample", "frozen", "ours-p", "ours-vp"
    );
    for c in checkpoints {
        println!(
            "{:>10} {:>17} {:>17} {:>17}",
            c * cfg.checkpoint_interval,
            value("frozen", c),
            value("ours-p", c),
            value("ours-vp", c),
        );
    }

    println!("\nfinal-checkpoint quality:");
    println!(
        "{:>8} {:>9} {:>7} {:>7} {:>7}",
        "method", "validity", "knn", "kde", "l2"
    );
    for method in ["frozen", "ours-p", "ours-vp"] {
        let rows: Vec<_> = artifacts
            .final_rows
            .iter()
            .filter(|r| r.method == method)
            .collect();
        let mean = |f: fn(&cfdrift::harness::FinalRow) -> Option<f64>| -> f64 {
            let v: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
            v.iter().sum::<f64>() / v.len().max(1) as f64
        };
        println!(
            "{:>8} {:>9.3} {:>7.3} {:>7.3} {:>7.3}",
            method,
            mean(|r| r.validity),
            mean(|r| r.knn),
            mean(|r| r.kde),
            mean(|r| r.l2),
        );
    }
}
