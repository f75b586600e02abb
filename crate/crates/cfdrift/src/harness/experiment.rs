//! The streaming protocol: train an initial model, generate a population of
//! counterfactuals, stream drifting samples with interleaved learning and
//! maintenance, evaluate at checkpoints, and regenerate baselines at the
//! end. Also drives the correction-weight sensitivity grid and the wall-
//! clock cost measurement.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::core::{
    derive_seed, CfeState, ClassId, FeatureVector, LabeledBuffer, LabeledInstance, RngStream,
};
use crate::error::{Error, Result};
use crate::generators::{gs_generate, nn_generate, robx_generate};
use crate::harness::artifacts::{AblationRow, CheckpointRow, FinalRow, RunArtifacts, RuntimeRow};
use crate::harness::config::{ExperimentConfig, GeneratorKind, Method};
use crate::maintenance::{maintain_population, MaintenanceConfig, Variant};
use crate::metrics::{checkpoint_evaluate, CheckpointReport};
use crate::models::OnlineClassifier;

const TAG_REPEAT: u64 = 1;
const TAG_STREAM: u64 = 2;
const TAG_QUERY: u64 = 3;
const TAG_GEN: u64 = 4;
const TAG_MAINT: u64 = 5;
const TAG_REGEN: u64 = 6;
const TAG_TASK: u64 = 7;

/// Queries are drawn from instances predicted as class 0; the desired
/// target class is 1.
const QUERY_CLASS: ClassId = 0;
const TARGET_CLASS: ClassId = 1;

/// Number of evenly spaced regeneration checkpoints timed for the
/// nearest-neighbor and growing-spheres baselines.
const RUNTIME_REGEN_CHECKPOINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RunMode {
    Quality,
    Runtime,
}

#[derive(Debug, Default)]
struct RepeatOutput {
    checkpoint_rows: Vec<CheckpointRow>,
    final_rows: Vec<FinalRow>,
    runtime_rows: Vec<RuntimeRow>,
}

/// Runs the full quality protocol over all configured repeats and methods.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let mut artifacts = RunArtifacts {
        config_snapshot: cfg.snapshot(),
        ..RunArtifacts::default()
    };
    let outputs: Result<Vec<(usize, u64, RepeatOutput)>> = (0..cfg.repeats)
        .into_par_iter()
        .map(|rep| {
            let seed = derive_seed(cfg.master_seed, &[TAG_REPEAT, rep as u64]);
            let out = run_repeat(cfg, rep, seed, RunMode::Quality)?;
            Ok((rep, seed, out))
        })
        .collect();
    let mut outputs = outputs?;
    outputs.sort_by_key(|(rep, _, _)| *rep);
    for (rep, seed, out) in outputs {
        artifacts.seed_log.push((rep, seed));
        artifacts.checkpoint_rows.extend(out.checkpoint_rows);
        artifacts.final_rows.extend(out.final_rows);
    }
    Ok(artifacts)
}

/// Re-runs a single repeat from a seed recorded in a previous run's seed
/// log, reproducing exactly the rows that repeat contributed.
pub fn replay_repeat(cfg: &ExperimentConfig, repeat: usize, seed: u64) -> Result<RunArtifacts> {
    cfg.validate()?;
    let out = run_repeat(cfg, repeat, seed, RunMode::Quality)?;
    Ok(RunArtifacts {
        checkpoint_rows: out.checkpoint_rows,
        final_rows: out.final_rows,
        seed_log: vec![(repeat, seed)],
        config_snapshot: cfg.snapshot(),
        ..RunArtifacts::default()
    })
}

/// Times the maintenance variants over every sweep, the nearest-neighbor
/// and growing-spheres baselines over evenly spaced regeneration
/// checkpoints, and the stability-refined regeneration once at the end.
/// Model training and stream generation are excluded from every bracket.
/// Repeats run strictly sequentially.
pub fn measure_runtime(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let mut artifacts = RunArtifacts {
        config_snapshot: cfg.snapshot(),
        ..RunArtifacts::default()
    };
    for rep in 0..cfg.repeats {
        let seed = derive_seed(cfg.master_seed, &[TAG_REPEAT, rep as u64]);
        artifacts.seed_log.push((rep, seed));
        let out = run_repeat(cfg, rep, seed, RunMode::Runtime)?;
        artifacts.runtime_rows.extend(out.runtime_rows);
    }
    Ok(artifacts)
}

/// Runs the sensitivity grid over the correction weight: for every value in
/// `lambdas`, both maintenance variants on three streams and two
/// classifiers, aggregated into one row of final-checkpoint means. The
/// proximity weight is pinned to 1 and the per-task seeds do not depend on
/// the grid value, so all grid points see identical streams.
pub fn run_ablation(cfg: &ExperimentConfig, lambdas: &[f64]) -> Result<RunArtifacts> {
    if lambdas.is_empty() {
        return Err(Error::Config("ablation needs at least one lambda".into()));
    }
    let streams = ["hyperplane", "sine", "sea"];
    let models = ["lr", "aht"];
    let mut tasks = Vec::new();
    for &lambda in lambdas {
        for (si, stream) in streams.iter().enumerate() {
            for (mi, model) in models.iter().enumerate() {
                tasks.push((lambda, si, *stream, mi, *model));
            }
        }
    }

    let results: Result<Vec<(f64, Vec<FinalRow>)>> = tasks
        .par_iter()
        .map(|&(lambda, si, stream, mi, model)| {
            let mut sub = ExperimentConfig::new(stream, model)?;
            sub.methods = vec![Method::OursP, Method::OursVp];
            sub.repeats = cfg.repeats;
            sub.population = cfg.population;
            sub.generator = cfg.generator;
            sub.maintenance = cfg.maintenance.clone();
            sub.maintenance.lambda_u = lambda;
            sub.maintenance.lambda_r = 1.0;
            sub.metrics = cfg.metrics.clone();
            sub.stability = cfg.stability.clone();
            sub.master_seed = derive_seed(cfg.master_seed, &[TAG_TASK, si as u64, mi as u64]);
            let artifacts = run_experiment(&sub)?;
            Ok((lambda, artifacts.final_rows))
        })
        .collect();

    let mut per_lambda: Vec<(f64, Vec<FinalRow>)> = Vec::new();
    for (lambda, rows) in results? {
        match per_lambda.iter_mut().find(|(l, _)| *l == lambda) {
            Some((_, acc)) => acc.extend(rows),
            None => per_lambda.push((lambda, rows)),
        }
    }
    per_lambda.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mean_of = |rows: &[FinalRow], method: &str, field: fn(&FinalRow) -> Option<f64>| -> f64 {
        let values: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == method)
            .filter_map(field)
            .collect();
        values.iter().sum::<f64>() / values.len().max(1) as f64
    };

    let mut artifacts = RunArtifacts {
        config_snapshot: cfg.snapshot(),
        ..RunArtifacts::default()
    };
    for (lambda, rows) in per_lambda {
        artifacts.ablation_rows.push(AblationRow {
            lambda_u: lambda,
            p_validity: mean_of(&rows, "ours-p", |r| r.validity),
            p_knn: mean_of(&rows, "ours-p", |r| r.knn),
            p_l2: mean_of(&rows, "ours-p", |r| r.l2),
            vp_validity: mean_of(&rows, "ours-vp", |r| r.validity),
            vp_knn: mean_of(&rows, "ours-vp", |r| r.knn),
            vp_l2: mean_of(&rows, "ours-vp", |r| r.l2),
        });
    }
    Ok(artifacts)
}

fn initial_cfe(
    cfg: &ExperimentConfig,
    x0: &FeatureVector,
    buf: &LabeledBuffer,
    model: &dyn OnlineClassifier,
    rng: &mut RngStream,
) -> Result<FeatureVector> {
    match cfg.generator {
        GeneratorKind::Nn => nn_generate(x0, TARGET_CLASS, buf, model),
        GeneratorKind::Gs => gs_generate(x0, TARGET_CLASS, model, &cfg.gs, rng),
        GeneratorKind::Robx => {
            let base = gs_generate(x0, TARGET_CLASS, model, &cfg.gs, rng)?;
            Ok(robx_generate(TARGET_CLASS, &base, buf, model, &cfg.stability, rng).point)
        }
    }
}

fn regenerate_one(
    method: Method,
    x0: &FeatureVector,
    buf: &LabeledBuffer,
    model: &dyn OnlineClassifier,
    cfg: &ExperimentConfig,
    rng: &mut RngStream,
) -> Result<FeatureVector> {
    match method {
        Method::Nn => nn_generate(x0, TARGET_CLASS, buf, model),
        Method::Gs => gs_generate(x0, TARGET_CLASS, model, &cfg.gs, rng),
        Method::Robx => {
            let base = gs_generate(x0, TARGET_CLASS, model, &cfg.gs, rng)?;
            Ok(robx_generate(TARGET_CLASS, &base, buf, model, &cfg.stability, rng).point)
        }
        _ => unreachable!("only regeneration methods"),
    }
}

/// Regenerates counterfactuals for every still-active state; retired states
/// pass through unchanged so population counts stay comparable. Failed
/// generations are dropped with a logged count.
fn regenerate_population(
    method: Method,
    shadow: &[CfeState],
    buf: &LabeledBuffer,
    model: &dyn OnlineClassifier,
    cfg: &ExperimentConfig,
    seed: u64,
    mark: u64,
) -> Vec<CfeState> {
    let method_tag = method as u64;
    let mut out = Vec::with_capacity(shadow.len());
    let mut failures = 0usize;
    for state in shadow {
        if !state.active {
            out.push(state.clone());
            continue;
        }
        let mut rng = RngStream::derived(seed, &[TAG_REGEN, method_tag, mark, state.id]);
        match regenerate_one(method, &state.x0, buf, model, cfg, &mut rng) {
            Ok(x_cf) => out.push(CfeState::new(
                state.id,
                state.x0.clone(),
                x_cf,
                state.target,
            )),
            Err(e) => {
                failures += 1;
                log::warn!(
                    "{} regeneration failed for state {}: {e}",
                    method.name(),
                    state.id
                );
            }
        }
    }
    if failures > 0 {
        log::warn!(
            "{}: {failures} regeneration failures excluded from metrics",
            method.name()
        );
    }
    out
}

fn retire_sweep(states: &mut [CfeState], model: &dyn OnlineClassifier) {
    for state in states.iter_mut() {
        if state.active && model.predict(&state.x0) == state.target {
            state.active = false;
        }
    }
}

struct TrackedMethod {
    method: Method,
    maintenance: MaintenanceConfig,
    states: Vec<CfeState>,
    elapsed: Duration,
}

fn report_to_checkpoint_row(
    cfg: &ExperimentConfig,
    rep: usize,
    seed: u64,
    sample: usize,
    report: &CheckpointReport,
) -> CheckpointRow {
    CheckpointRow {
        stream: cfg.stream.kind_name().to_string(),
        model: cfg.model.kind.name().to_string(),
        method: report.method.clone(),
        repeat: rep,
        seed,
        checkpoint: report.checkpoint,
        sample,
        validity: report.validity,
        knn: report.mean_knn,
        kde: report.mean_kde,
        l2: report.mean_l2,
        active: report.active,
        retired: report.retired,
        elapsed_s: report.elapsed_s,
    }
}

fn report_to_final_row(
    cfg: &ExperimentConfig,
    rep: usize,
    seed: u64,
    report: &CheckpointReport,
) -> FinalRow {
    FinalRow {
        stream: cfg.stream.kind_name().to_string(),
        model: cfg.model.kind.name().to_string(),
        method: report.method.clone(),
        repeat: rep,
        seed,
        validity: report.validity,
        knn: report.mean_knn,
        kde: report.mean_kde,
        l2: report.mean_l2,
        active: report.active,
        retired: report.retired,
    }
}

fn run_repeat(
    cfg: &ExperimentConfig,
    rep: usize,
    seed: u64,
    mode: RunMode,
) -> Result<RepeatOutput> {
    let spec = &cfg.stream;
    let dim = spec.dim;
    let mut model = cfg.model.build(dim);
    let mut buf = LabeledBuffer::new(cfg.buffer_capacity, dim);
    let mut stream_rng = RngStream::derived(seed, &[TAG_STREAM]);

    // phase 1: initial batch trains the starting model and fills the buffer
    let mut initial: Vec<LabeledInstance> = Vec::with_capacity(cfg.initial_batch);
    for t in 0..cfg.initial_batch as u64 {
        let inst = spec.next_instance(t, &mut stream_rng);
        model.learn_one(&inst)?;
        buf.push(inst.clone())?;
        initial.push(inst);
    }

    // phase 2: queries and their initial counterfactuals
    let candidates: Vec<&LabeledInstance> = initial
        .iter()
        .filter(|inst| model.predict(&inst.x) == QUERY_CLASS)
        .collect();
    if candidates.is_empty() {
        return Err(Error::Generation(format!(
            "repeat {rep}: no initial instances predicted as class {QUERY_CLASS}"
        )));
    }
    let mut query_rng = RngStream::derived(seed, &[TAG_QUERY]);
    let take = cfg.population.min(candidates.len());
    if take < cfg.population {
        log::warn!(
            "repeat {rep}: only {take} of {} requested queries available",
            cfg.population
        );
    }
    let picked = query_rng.sample_indices(candidates.len(), take);
    let mut base_states: Vec<CfeState> = Vec::with_capacity(take);
    let mut failures = 0usize;
    for (slot, &cand) in picked.iter().enumerate() {
        let x0 = candidates[cand].x.clone();
        let mut gen_rng = RngStream::derived(seed, &[TAG_GEN, slot as u64]);
        match initial_cfe(cfg, &x0, &buf, model.as_ref(), &mut gen_rng) {
            Ok(x_cf) => base_states.push(CfeState::new(slot as u64, x0, x_cf, TARGET_CLASS)),
            Err(e) => {
                failures += 1;
                log::warn!("repeat {rep}: initial generation failed for slot {slot}: {e}");
            }
        }
    }
    if 2 * failures > take {
        return Err(Error::Generation(format!(
            "repeat {rep}: {failures}/{take} initial generations failed; aborting"
        )));
    }

    // the frozen population doubles as retirement bookkeeping: retirement
    // depends only on the query and the shared model, so every method
    // retires the same states at the same sweeps
    let mut frozen = base_states.clone();
    let mut frozen_elapsed = Duration::ZERO;
    let maint_seed = derive_seed(seed, &[TAG_MAINT]);
    let mut tracked: Vec<TrackedMethod> = Vec::new();
    let track_ours = |method: Method, variant: Variant| -> TrackedMethod {
        let mut maintenance = cfg.maintenance.clone();
        maintenance.variant = variant;
        TrackedMethod {
            method,
            maintenance,
            states: base_states.clone(),
            elapsed: Duration::ZERO,
        }
    };
    let wants = |m: Method| cfg.methods.contains(&m);
    if wants(Method::OursP) || mode == RunMode::Runtime {
        tracked.push(track_ours(Method::OursP, Variant::PlausibilityOnly));
    }
    if wants(Method::OursVp) || mode == RunMode::Runtime {
        tracked.push(track_ours(Method::OursVp, Variant::ValidityPlausibility));
    }

    let cadence = cfg.maintenance.cadence as usize;
    let regen_marks: Vec<usize> = if mode == RunMode::Runtime {
        (1..=RUNTIME_REGEN_CHECKPOINTS)
            .map(|i| i * cfg.stream_len / RUNTIME_REGEN_CHECKPOINTS)
            .collect()
    } else {
        Vec::new()
    };
    let mut nn_elapsed = Duration::ZERO;
    let mut gs_elapsed = Duration::ZERO;

    let mut out = RepeatOutput::default();
    let mut sweep: u64 = 0;

    // phase 3: the stream
    for s in 1..=cfg.stream_len {
        let t = (cfg.initial_batch + s - 1) as u64;
        let inst = spec.next_instance(t, &mut stream_rng);
        model.learn_one(&inst)?;
        buf.push(inst)?;

        if s.is_multiple_of(cadence) {
            sweep += 1;
            let t0 = Instant::now();
            retire_sweep(&mut frozen, model.as_ref());
            frozen_elapsed += t0.elapsed();
            for tr in &mut tracked {
                let t0 = Instant::now();
                maintain_population(
                    &mut tr.states,
                    model.as_ref(),
                    &buf,
                    sweep,
                    &tr.maintenance,
                    maint_seed,
                );
                tr.elapsed += t0.elapsed();
            }
        }

        if mode == RunMode::Runtime && regen_marks.contains(&s) {
            let t0 = Instant::now();
            let _ = regenerate_population(
                Method::Nn,
                &frozen,
                &buf,
                model.as_ref(),
                cfg,
                seed,
                s as u64,
            );
            nn_elapsed += t0.elapsed();
            let t0 = Instant::now();
            let _ = regenerate_population(
                Method::Gs,
                &frozen,
                &buf,
                model.as_ref(),
                cfg,
                seed,
                s as u64,
            );
            gs_elapsed += t0.elapsed();
        }

        if mode == RunMode::Quality && s.is_multiple_of(cfg.checkpoint_interval) {
            let checkpoint = s / cfg.checkpoint_interval;
            if wants(Method::Frozen) {
                let mut report = checkpoint_evaluate(
                    &frozen,
                    model.as_ref(),
                    &buf,
                    &cfg.metrics,
                    checkpoint,
                    Method::Frozen.name(),
                );
                report.elapsed_s = frozen_elapsed.as_secs_f64();
                out.checkpoint_rows
                    .push(report_to_checkpoint_row(cfg, rep, seed, s, &report));
            }
            for tr in &tracked {
                if !wants(tr.method) {
                    continue;
                }
                let mut report = checkpoint_evaluate(
                    &tr.states,
                    model.as_ref(),
                    &buf,
                    &cfg.metrics,
                    checkpoint,
                    tr.method.name(),
                );
                report.elapsed_s = tr.elapsed.as_secs_f64();
                out.checkpoint_rows
                    .push(report_to_checkpoint_row(cfg, rep, seed, s, &report));
            }
        }
    }

    // phase 4: final rows and end-of-stream regeneration
    let last_checkpoint = cfg.stream_len / cfg.checkpoint_interval;
    match mode {
        RunMode::Quality => {
            if wants(Method::Frozen) {
                let mut report = checkpoint_evaluate(
                    &frozen,
                    model.as_ref(),
                    &buf,
                    &cfg.metrics,
                    last_checkpoint,
                    Method::Frozen.name(),
                );
                report.elapsed_s = frozen_elapsed.as_secs_f64();
                out.final_rows
                    .push(report_to_final_row(cfg, rep, seed, &report));
            }
            for tr in &tracked {
                if !wants(tr.method) {
                    continue;
                }
                let mut report = checkpoint_evaluate(
                    &tr.states,
                    model.as_ref(),
                    &buf,
                    &cfg.metrics,
                    last_checkpoint,
                    tr.method.name(),
                );
                report.elapsed_s = tr.elapsed.as_secs_f64();
                out.final_rows
                    .push(report_to_final_row(cfg, rep, seed, &report));
            }
            for method in [Method::Nn, Method::Gs, Method::Robx] {
                if !wants(method) {
                    continue;
                }
                let t0 = Instant::now();
                let states =
                    regenerate_population(method, &frozen, &buf, model.as_ref(), cfg, seed, 0);
                let elapsed = t0.elapsed();
                let mut report = checkpoint_evaluate(
                    &states,
                    model.as_ref(),
                    &buf,
                    &cfg.metrics,
                    last_checkpoint,
                    method.name(),
                );
                report.elapsed_s = elapsed.as_secs_f64();
                out.final_rows
                    .push(report_to_final_row(cfg, rep, seed, &report));
            }
        }
        RunMode::Runtime => {
            let sweeps = cfg.stream_len / cadence;
            let stream = cfg.stream.kind_name().to_string();
            let model_name = cfg.model.kind.name().to_string();
            for tr in &tracked {
                out.runtime_rows.push(RuntimeRow {
                    stream: stream.clone(),
                    model: model_name.clone(),
                    method: tr.method.name().to_string(),
                    repeat: rep,
                    seed,
                    schedule: format!("{sweeps} updates"),
                    seconds: tr.elapsed.as_secs_f64(),
                });
            }
            out.runtime_rows.push(RuntimeRow {
                stream: stream.clone(),
                model: model_name.clone(),
                method: Method::Nn.name().to_string(),
                repeat: rep,
                seed,
                schedule: format!("{RUNTIME_REGEN_CHECKPOINTS} checkpoints"),
                seconds: nn_elapsed.as_secs_f64(),
            });
            out.runtime_rows.push(RuntimeRow {
                stream: stream.clone(),
                model: model_name.clone(),
                method: Method::Gs.name().to_string(),
                repeat: rep,
                seed,
                schedule: format!("{RUNTIME_REGEN_CHECKPOINTS} checkpoints"),
                seconds: gs_elapsed.as_secs_f64(),
            });
            let t0 = Instant::now();
            let _ =
                regenerate_population(Method::Robx, &frozen, &buf, model.as_ref(), cfg, seed, 0);
            out.runtime_rows.push(RuntimeRow {
                stream,
                model: model_name,
                method: Method::Robx.name().to_string(),
                repeat: rep,
                seed,
                schedule: "final only".to_string(),
                seconds: t0.elapsed().as_secs_f64(),
            });
        }
    }

    Ok(out)
}
