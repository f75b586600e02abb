//! Result rows and their on-disk formats. Every row carries full
//! provenance (stream, model, method, repeat, seed); floats are written at
//! six significant digits with `.` as the decimal separator; absent metric
//! values are written as empty fields, never as zeros.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;

/// One method evaluated at one checkpoint of one repeat.
#[derive(Debug, Clone)]
pub struct CheckpointRow {
    pub stream: String,
    pub model: String,
    pub method: String,
    pub repeat: usize,
    pub seed: u64,
    pub checkpoint: usize,
    /// Stream sample index of the checkpoint.
    pub sample: usize,
    pub validity: Option<f64>,
    pub knn: Option<f64>,
    pub kde: Option<f64>,
    pub l2: Option<f64>,
    pub active: usize,
    pub retired: usize,
    /// Cumulative method time up to this checkpoint. Excluded from
    /// determinism comparisons.
    pub elapsed_s: f64,
}

/// Final-checkpoint quality of one method in one repeat.
#[derive(Debug, Clone)]
pub struct FinalRow {
    pub stream: String,
    pub model: String,
    pub method: String,
    pub repeat: usize,
    pub seed: u64,
    pub validity: Option<f64>,
    pub knn: Option<f64>,
    pub kde: Option<f64>,
    pub l2: Option<f64>,
    pub active: usize,
    pub retired: usize,
}

/// Wall-clock cost of one method in one repeat.
#[derive(Debug, Clone)]
pub struct RuntimeRow {
    pub stream: String,
    pub model: String,
    pub method: String,
    pub repeat: usize,
    pub seed: u64,
    /// Human-readable timing schedule, e.g. "200 updates".
    pub schedule: String,
    pub seconds: f64,
}

/// Aggregated correction-weight sensitivity: final-checkpoint means over
/// streams, classifiers and repeats for both maintenance variants.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub lambda_u: f64,
    pub p_validity: f64,
    pub p_knn: f64,
    pub p_l2: f64,
    pub vp_validity: f64,
    pub vp_knn: f64,
    pub vp_l2: f64,
}

/// Everything one invocation produced. Only populated sections are written.
#[derive(Debug, Clone, Default)]
pub struct RunArtifacts {
    pub checkpoint_rows: Vec<CheckpointRow>,
    pub final_rows: Vec<FinalRow>,
    pub runtime_rows: Vec<RuntimeRow>,
    pub ablation_rows: Vec<AblationRow>,
    /// `(repeat, seed)` pairs actually used.
    pub seed_log: Vec<(usize, u64)>,
    /// Canonical dump of the effective configuration.
    pub config_snapshot: String,
}

/// Formats a float with `digits` significant digits, printf `%g` style:
/// fixed notation for moderate exponents, scientific otherwise, trailing
/// zeros trimmed.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (_, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp >= -4 && exp < digits as i32 {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        trim_zeros(&fixed).to_string()
    } else {
        let (mantissa, _) = sci.split_once('e').unwrap();
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| fmt_sig(x, 6)).unwrap_or_default()
}

pub fn checkpoint_csv(rows: &[CheckpointRow]) -> String {
    let mut out = String::from(
        "stream,model,method,repeat,seed,checkpoint,sample,validity,knn,kde,l2,active,retired,elapsed_s\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.stream,
            r.model,
            r.method,
            r.repeat,
            r.seed,
            r.checkpoint,
            r.sample,
            opt(r.validity),
            opt(r.knn),
            opt(r.kde),
            opt(r.l2),
            r.active,
            r.retired,
            fmt_sig(r.elapsed_s, 6),
        ));
    }
    out
}

pub fn final_csv(rows: &[FinalRow]) -> String {
    let mut out =
        String::from("stream,model,method,repeat,seed,validity,knn,kde,l2,active,retired\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.stream,
            r.model,
            r.method,
            r.repeat,
            r.seed,
            opt(r.validity),
            opt(r.knn),
            opt(r.kde),
            opt(r.l2),
            r.active,
            r.retired,
        ));
    }
    out
}

pub fn runtime_csv(rows: &[RuntimeRow]) -> String {
    let mut out = String::from("stream,model,method,repeat,seed,schedule,seconds\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.stream,
            r.model,
            r.method,
            r.repeat,
            r.seed,
            r.schedule,
            fmt_sig(r.seconds, 6),
        ));
    }
    out
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from(
        "lambda_u,oursp_validity,oursp_knn,oursp_l2,oursvp_validity,oursvp_knn,oursvp_l2\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_sig(r.lambda_u, 6),
            fmt_sig(r.p_validity, 6),
            fmt_sig(r.p_knn, 6),
            fmt_sig(r.p_l2, 6),
            fmt_sig(r.vp_validity, 6),
            fmt_sig(r.vp_knn, 6),
            fmt_sig(r.vp_l2, 6),
        ));
    }
    out
}

/// Parses a checkpoints CSV produced by [`checkpoint_csv`].
pub fn parse_checkpoint_csv(text: &str) -> Result<Vec<CheckpointRow>> {
    let mut rows = Vec::new();
    let parse_err =
        |line: &str| crate::error::Error::Config(format!("malformed checkpoint row: {line}"));
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 14 {
            return Err(parse_err(line));
        }
        let opt_f64 = |s: &str| -> Option<f64> {
            if s.is_empty() {
                None
            } else {
                s.parse().ok()
            }
        };
        rows.push(CheckpointRow {
            stream: f[0].to_string(),
            model: f[1].to_string(),
            method: f[2].to_string(),
            repeat: f[3].parse().map_err(|_| parse_err(line))?,
            seed: f[4].parse().map_err(|_| parse_err(line))?,
            checkpoint: f[5].parse().map_err(|_| parse_err(line))?,
            sample: f[6].parse().map_err(|_| parse_err(line))?,
            validity: opt_f64(f[7]),
            knn: opt_f64(f[8]),
            kde: opt_f64(f[9]),
            l2: opt_f64(f[10]),
            active: f[11].parse().map_err(|_| parse_err(line))?,
            retired: f[12].parse().map_err(|_| parse_err(line))?,
            elapsed_s: f[13].parse().map_err(|_| parse_err(line))?,
        });
    }
    Ok(rows)
}

impl RunArtifacts {
    pub fn merge(&mut self, other: RunArtifacts) {
        self.checkpoint_rows.extend(other.checkpoint_rows);
        self.final_rows.extend(other.final_rows);
        self.runtime_rows.extend(other.runtime_rows);
        self.ablation_rows.extend(other.ablation_rows);
        self.seed_log.extend(other.seed_log);
        if self.config_snapshot.is_empty() {
            self.config_snapshot = other.config_snapshot;
        }
    }

    /// Writes all populated sections under `dir`, returning the paths.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut emit = |name: &str, content: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, content)?;
            written.push(path);
            Ok(())
        };
        if !self.config_snapshot.is_empty() {
            emit("config.snapshot", self.config_snapshot.clone())?;
        }
        if !self.seed_log.is_empty() {
            let mut log = String::from("repeat,seed\n");
            for (rep, seed) in &self.seed_log {
                log.push_str(&format!("{rep},{seed}\n"));
            }
            emit("seeds.log", log)?;
        }
        if !self.checkpoint_rows.is_empty() {
            emit("checkpoints.csv", checkpoint_csv(&self.checkpoint_rows))?;
        }
        if !self.final_rows.is_empty() {
            emit("final.csv", final_csv(&self.final_rows))?;
        }
        if !self.runtime_rows.is_empty() {
            emit("runtime.csv", runtime_csv(&self.runtime_rows))?;
        }
        if !self.ablation_rows.is_empty() {
            emit("ablation.csv", ablation_csv(&self.ablation_rows))?;
        }
        Ok(written)
    }
}
