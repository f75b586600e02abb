//! Command-line benchmark runner. All logic lives in the library; this
//! binary parses arguments, loads configs, and writes artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfdrift::harness::{self, artifacts, plot, ExperimentConfig, Method, RunArtifacts};

#[derive(Parser)]
#[command(
    name = "cfdrift",
    version,
    about = "Counterfactual maintenance benchmarks on drifting streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV/TSV/SVG artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the number of repeats from the config.
    #[arg(long)]
    repeats: Option<usize>,
    /// Also render SVG charts next to the plot data.
    #[arg(long)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Correction-weight sensitivity grid over three streams and two
    /// classifiers.
    Ablation {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated grid of correction weights.
        #[arg(long, default_value = "1,2,3,4,5,10", value_delimiter = ',')]
        lambdas: Vec<f64>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Wall-clock comparison of maintenance versus regeneration.
    Runtime {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Rebuild plot series (and optional SVG) from an existing
    /// checkpoints.csv.
    PlotData {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Full benchmark: quality tables, sensitivity grid, runtimes, and
    /// figure data, written under per-experiment subdirectories.
    All {
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn load_config(path: &Path, common: &CommonOpts) -> cfdrift::Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| cfdrift::Error::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(repeats) = common.repeats {
        cfg.repeats = repeats;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_plot_outputs(
    artifacts: &RunArtifacts,
    dir: &Path,
    title: &str,
    svg: bool,
) -> cfdrift::Result<()> {
    if artifacts.checkpoint_rows.is_empty() {
        return Ok(());
    }
    let series = plot::validity_series(&artifacts.checkpoint_rows);
    fs::create_dir_all(dir)?;
    fs::write(dir.join("series.tsv"), plot::series_tsv(&series))?;
    if svg {
        fs::write(
            dir.join("validity.svg"),
            plot::render_validity_svg(&series, title),
        )?;
    }
    Ok(())
}

fn cmd_run(config: &Path, common: &CommonOpts) -> cfdrift::Result<()> {
    let cfg = load_config(config, common)?;
    let artifacts = harness::run_experiment(&cfg)?;
    artifacts.write_to(&common.out)?;
    let title = format!("{} / {}", cfg.stream.kind_name(), cfg.model.kind.name());
    write_plot_outputs(&artifacts, &common.out, &title, common.svg)?;
    println!(
        "wrote {} checkpoint rows, {} final rows to {}",
        artifacts.checkpoint_rows.len(),
        artifacts.final_rows.len(),
        common.out.display()
    );
    Ok(())
}

fn cmd_ablation(config: &Path, lambdas: &[f64], common: &CommonOpts) -> cfdrift::Result<()> {
    let cfg = load_config(config, common)?;
    let artifacts = harness::run_ablation(&cfg, lambdas)?;
    artifacts.write_to(&common.out)?;
    println!(
        "wrote {} aggregated rows to {}",
        artifacts.ablation_rows.len(),
        common.out.join("ablation.csv").display()
    );
    Ok(())
}

fn cmd_runtime(config: &Path, common: &CommonOpts) -> cfdrift::Result<()> {
    let cfg = load_config(config, common)?;
    let artifacts = harness::measure_runtime(&cfg)?;
    artifacts.write_to(&common.out)?;
    println!(
        "wrote {} runtime rows to {}",
        artifacts.runtime_rows.len(),
        common.out.join("runtime.csv").display()
    );
    Ok(())
}

fn cmd_plot_data(common: &CommonOpts) -> cfdrift::Result<()> {
    let path = common.out.join("checkpoints.csv");
    let text = fs::read_to_string(&path)
        .map_err(|e| cfdrift::Error::Config(format!("{}: {e}", path.display())))?;
    let rows = artifacts::parse_checkpoint_csv(&text)?;
    let series = plot::validity_series(&rows);
    fs::write(common.out.join("series.tsv"), plot::series_tsv(&series))?;
    if common.svg {
        fs::write(
            common.out.join("validity.svg"),
            plot::render_validity_svg(&series, "validity over time"),
        )?;
    }
    println!("wrote {} series points", series.len());
    Ok(())
}

fn cmd_all(common: &CommonOpts) -> cfdrift::Result<()> {
    let seed = common.seed.unwrap_or(42);
    let repeats = common.repeats.unwrap_or(5);

    // final-checkpoint quality on every stream/classifier pair
    let mut combined_final = RunArtifacts::default();
    for stream in ["hyperplane", "sine", "sea"] {
        for model in ["lr", "aht"] {
            let mut cfg = ExperimentConfig::new(stream, model)?;
            cfg.master_seed = seed;
            cfg.repeats = repeats;
            let artifacts = harness::run_experiment(&cfg)?;
            let dir = common.out.join(format!("{stream}_{model}"));
            artifacts.write_to(&dir)?;
            let title = format!("{stream} / {model}");
            write_plot_outputs(&artifacts, &dir, &title, common.svg)?;
            combined_final.final_rows.extend(artifacts.final_rows);
            println!("quality: {stream}/{model} done");
        }
    }
    fs::create_dir_all(&common.out)?;
    fs::write(
        common.out.join("final_quality.csv"),
        artifacts::final_csv(&combined_final.final_rows),
    )?;

    // growing-spheres-initialized run for the second validity figure
    let mut fig_cfg = ExperimentConfig::new("sea", "aht")?;
    fig_cfg.master_seed = seed;
    fig_cfg.repeats = repeats;
    fig_cfg.generator = harness::GeneratorKind::Gs;
    fig_cfg.methods = vec![Method::Frozen, Method::OursP, Method::OursVp];
    let fig = harness::run_experiment(&fig_cfg)?;
    let dir = common.out.join("sea_aht_gs_init");
    fig.write_to(&dir)?;
    write_plot_outputs(&fig, &dir, "sea / aht (gs-initialized)", common.svg)?;
    println!("figure data: sea/aht gs-initialized done");

    // correction-weight sensitivity
    let mut base = ExperimentConfig::new("hyperplane", "lr")?;
    base.master_seed = seed;
    base.repeats = repeats;
    let ablation = harness::run_ablation(&base, &[1.0, 2.0, 3.0, 4.0, 5.0, 10.0])?;
    fs::write(
        common.out.join("ablation.csv"),
        artifacts::ablation_csv(&ablation.ablation_rows),
    )?;
    println!("ablation grid done");

    // wall-clock cost under the adaptive tree
    let mut runtime_rows = Vec::new();
    for stream in ["hyperplane", "sea"] {
        let mut cfg = ExperimentConfig::new(stream, "aht")?;
        cfg.master_seed = seed;
        cfg.repeats = repeats;
        let artifacts = harness::measure_runtime(&cfg)?;
        runtime_rows.extend(artifacts.runtime_rows);
        println!("runtime: {stream}/aht done");
    }
    fs::write(
        common.out.join("runtime.csv"),
        artifacts::runtime_csv(&runtime_rows),
    )?;

    println!("all artifacts under {}", common.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, common } => cmd_run(config, common),
        Command::Ablation {
            config,
            lambdas,
            common,
        } => cmd_ablation(config, lambdas, common),
        Command::Runtime { config, common } => cmd_runtime(config, common),
        Command::PlotData { common } => cmd_plot_data(common),
        Command::All { common } => cmd_all(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
