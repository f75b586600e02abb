//! Plot-ready series: per-method validity means and standard deviations
//! across repeats, written as TSV and optionally as a small SVG line chart
//! with shaded deviation bands.

use std::fmt::Write as _;

use crate::harness::artifacts::{fmt_sig, CheckpointRow};
use crate::harness::config::Method;

/// One plotted point: validity mean and standard deviation over repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub method: String,
    pub checkpoint: usize,
    pub sample: usize,
    pub mean_validity: f64,
    pub std_validity: f64,
}

fn method_rank(name: &str) -> usize {
    Method::ALL
        .iter()
        .position(|m| m.name() == name)
        .unwrap_or(Method::ALL.len())
}

/// Aggregates checkpoint rows into per-method series ordered by method then
/// checkpoint. Rows with an absent validity (no active states) are skipped.
/// A single repeat yields zero standard deviations.
pub fn validity_series(rows: &[CheckpointRow]) -> Vec<SeriesPoint> {
    let mut groups: Vec<(String, usize, usize, Vec<f64>)> = Vec::new();
    for row in rows {
        let Some(v) = row.validity else { continue };
        match groups
            .iter_mut()
            .find(|(m, c, _, _)| *m == row.method && *c == row.checkpoint)
        {
            Some((_, _, _, values)) => values.push(v),
            None => groups.push((row.method.clone(), row.checkpoint, row.sample, vec![v])),
        }
    }
    let mut series: Vec<SeriesPoint> = groups
        .into_iter()
        .map(|(method, checkpoint, sample, values)| {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            SeriesPoint {
                method,
                checkpoint,
                sample,
                mean_validity: mean,
                std_validity: var.sqrt(),
            }
        })
        .collect();
    series.sort_by(|a, b| {
        method_rank(&a.method)
            .cmp(&method_rank(&b.method))
            .then(a.method.cmp(&b.method))
            .then(a.checkpoint.cmp(&b.checkpoint))
    });
    series
}

pub fn series_tsv(series: &[SeriesPoint]) -> String {
    let mut out = String::from("method\tcheckpoint\tsample\tmean_validity\tstd_validity\n");
    for p in series {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            p.method,
            p.checkpoint,
            p.sample,
            fmt_sig(p.mean_validity, 6),
            fmt_sig(p.std_validity, 6),
        );
    }
    out
}

fn color_for(method: &str) -> &'static str {
    match method {
        "frozen" => "#7f7f7f",
        "ours-p" => "#1f77b4",
        "ours-vp" => "#2ca02c",
        "nn" => "#ff7f0e",
        "gs" => "#9467bd",
        "robx" => "#d62728",
        _ => "#000000",
    }
}

/// Renders the validity series as a self-contained SVG: one line per
/// method, shaded mean +/- std bands, validity on the y axis.
pub fn render_validity_svg(series: &[SeriesPoint], title: &str) -> String {
    const W: f64 = 720.0;
    const H: f64 = 440.0;
    const L: f64 = 60.0;
    const R: f64 = 580.0;
    const T: f64 = 40.0;
    const B: f64 = 400.0;

    let max_sample = series.iter().map(|p| p.sample).max().unwrap_or(1).max(1) as f64;
    let x_of = |sample: usize| L + (R - L) * sample as f64 / max_sample;
    let y_of = |v: f64| B - (B - T) * v.clamp(0.0, 1.0);

    let mut methods: Vec<String> = Vec::new();
    for p in series {
        if !methods.contains(&p.method) {
            methods.push(p.method.clone());
        }
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{title}</text>"#,
        (L + R) / 2.0
    );
    // axes
    let _ = writeln!(
        svg,
        r#"<line x1="{L}" y1="{B}" x2="{R}" y2="{B}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{L}" y1="{T}" x2="{L}" y2="{B}" stroke="black"/>"#
    );
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y:.1}" x2="{L}" y2="{y:.1}" stroke="black"/>"#,
            L - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{v:.2}</text>"#,
            L - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">stream sample</text>"#,
        (L + R) / 2.0,
        B + 32.0
    );

    for (mi, method) in methods.iter().enumerate() {
        let pts: Vec<&SeriesPoint> = series.iter().filter(|p| &p.method == method).collect();
        if pts.is_empty() {
            continue;
        }
        let color = color_for(method);
        // band: upper path forward, lower path backward
        let mut band = String::new();
        for p in &pts {
            let _ = write!(
                band,
                "{:.1},{:.1} ",
                x_of(p.sample),
                y_of(p.mean_validity + p.std_validity)
            );
        }
        for p in pts.iter().rev() {
            let _ = write!(
                band,
                "{:.1},{:.1} ",
                x_of(p.sample),
                y_of(p.mean_validity - p.std_validity)
            );
        }
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{color}" opacity="0.15"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.1},{:.1}", x_of(p.sample), y_of(p.mean_validity)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        // x-axis ticks come from the first method's samples
        if mi == 0 {
            for p in &pts {
                let x = x_of(p.sample);
                let _ = writeln!(
                    svg,
                    r#"<line x1="{x:.1}" y1="{B}" x2="{x:.1}" y2="{}" stroke="black"/>"#,
                    B + 5.0
                );
                let _ = writeln!(
                    svg,
                    r#"<text x="{x:.1}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
                    B + 18.0,
                    p.sample
                );
            }
        }
        // legend
        let ly = T + 18.0 * mi as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly:.1}" x2="{}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/>"#,
            R + 12.0,
            R + 36.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="12">{method}</text>"#,
            R + 42.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
