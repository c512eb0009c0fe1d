//! Thin command-line front end over the gridflex library.
//!
//! Exit codes: 0 success, 2 usage/config errors, 3 missing inputs,
//! 4 infeasible model.

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridflex::config::ScenarioConfig;
use gridflex::error::Error;
use gridflex::signals::{
    export_signal, export_trace, generate_load_trace, generate_signal, SignalKind,
};
use gridflex::pipeline;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

const ENV_SEED: &str = "GRIDFLEX_SEED";
const ENV_OUT_DIR: &str = "GRIDFLEX_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "gridflex",
    about = "GPU data-center frequency-regulation co-simulation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a regulation signal or load trace as CSV.
    Gen {
        #[command(subcommand)]
        what: GenCommand,
    },
    /// Run the hourly bid/track/score/settle pipeline.
    Simulate(ScenarioArgs),
    /// Solve the grid unit commitment with and without DC regulation.
    Grid(ScenarioArgs),
    /// Build the four-scenario carbon and TCO comparison from prior outputs.
    Report(ScenarioArgs),
}

#[derive(Subcommand)]
enum GenCommand {
    /// Generate a regulation signal (`t_s,r` CSV).
    Signal(GenSignalArgs),
    /// Generate a utilization trace (`t_s,util` CSV).
    Trace(GenTraceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Extreme,
    Noisy,
    HighTransition,
}

impl From<KindArg> for SignalKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Extreme => SignalKind::Extreme,
            KindArg::Noisy => SignalKind::Noisy,
            KindArg::HighTransition => SignalKind::HighTransition,
        }
    }
}

#[derive(Args)]
struct GenSignalArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, default_value_t = 1.0)]
    duration_h: f64,
    #[arg(long, default_value_t = 2.0)]
    step_s: f64,
    #[arg(long, default_value_t = 0.005)]
    ramp_limit: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenTraceArgs {
    #[arg(long)]
    mean: f64,
    #[arg(long)]
    variance: f64,
    #[arg(long)]
    min: f64,
    #[arg(long)]
    max: f64,
    #[arg(long, default_value_t = 1.0)]
    duration_h: f64,
    #[arg(long, default_value_t = 60.0)]
    step_s: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario config file (TOML, schema_version = 1).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the config's root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep a config key over comma-separated values, e.g.
    /// `--sweep grid.dc_regulation_mw=50,100,150`.
    #[arg(long)]
    sweep: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Gen { what } => run_gen(what),
        Command::Simulate(args) => run_scenario(args, Stage::Simulate),
        Command::Grid(args) => run_scenario(args, Stage::Grid),
        Command::Report(args) => run_scenario(args, Stage::Report),
    }
}

fn run_gen(what: GenCommand) -> Result<(), Error> {
    match what {
        GenCommand::Signal(a) => {
            let sig = generate_signal(
                a.kind.into(),
                Duration::from_secs_f64(a.duration_h * 3600.0),
                Duration::from_secs_f64(a.step_s),
                a.ramp_limit,
                a.seed,
            )?;
            export_signal(&sig, &a.out)?;
            println!("wrote {} samples to {}", sig.len(), a.out.display());
        }
        GenCommand::Trace(a) => {
            let trace = generate_load_trace(
                a.mean,
                a.variance,
                a.min,
                a.max,
                Duration::from_secs_f64(a.duration_h * 3600.0),
                Duration::from_secs_f64(a.step_s),
                a.seed,
            )?;
            export_trace(&trace, &a.out)?;
            println!("wrote {} samples to {}", trace.len(), a.out.display());
        }
    }
    Ok(())
}

enum Stage {
    Simulate,
    Grid,
    Report,
}

struct Overrides {
    pairs: Vec<(String, String)>,
    out_dir: Option<PathBuf>,
}

/// Flags beat environment variables beat the config file.
fn collect_overrides(args: &ScenarioArgs) -> Overrides {
    let mut pairs = Vec::new();
    let mut out_dir = None;
    if let Ok(v) = std::env::var(ENV_SEED) {
        pairs.push(("run.seed".to_string(), v));
    }
    if let Ok(v) = std::env::var(ENV_OUT_DIR) {
        out_dir = Some(PathBuf::from(v));
    }
    if let Some(seed) = args.seed {
        pairs.retain(|(k, _)| k != "run.seed");
        pairs.push(("run.seed".to_string(), seed.to_string()));
    }
    if let Some(dir) = &args.out_dir {
        out_dir = Some(dir.clone());
    }
    Overrides { pairs, out_dir }
}

fn parse_sweep(raw: &str) -> Result<(String, Vec<String>), Error> {
    let (key, values) = raw
        .split_once('=')
        .ok_or_else(|| Error::Parameter("--sweep expects key=v1,v2,...".into()))?;
    let values: Vec<String> = values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(Error::Parameter("--sweep has no values".into()));
    }
    Ok((key.trim().to_string(), values))
}

fn run_scenario(args: ScenarioArgs, stage: Stage) -> Result<(), Error> {
    let base_dir = args
        .config
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    let overrides = collect_overrides(&args);

    if let Some(raw) = &args.sweep {
        let (key, values) = parse_sweep(raw)?;
        // A grid sweep over the DC provision aggregates into one CSV.
        if matches!(stage, Stage::Grid)
            && (key == "grid.dc_regulation_mw" || key == "dc_regulation_mw")
        {
            let cfg =
                ScenarioConfig::from_path_with_overrides(&args.config, &overrides.pairs)?;
            let out_dir = overrides.out_dir.clone().unwrap_or(cfg.run.out_dir.clone());
            let parsed: Result<Vec<f64>, _> = values.iter().map(|v| v.parse::<f64>()).collect();
            let parsed = parsed
                .map_err(|e| Error::Parameter(format!("bad sweep value: {e}")))?;
            let rows = pipeline::run_grid_sweep(&cfg, &base_dir, &parsed)?;
            pipeline::write_grid_sweep(&rows, &out_dir)?;
            println!("wrote {} sweep points to {}", rows.len(), out_dir.display());
            return Ok(());
        }
        for value in values {
            let mut pairs = overrides.pairs.clone();
            pairs.push((key.clone(), value.clone()));
            let cfg = ScenarioConfig::from_path_with_overrides(&args.config, &pairs)?;
            let out_dir = overrides
                .out_dir
                .clone()
                .unwrap_or(cfg.run.out_dir.clone())
                .join(format!("{key}={value}"));
            execute(&stage, &cfg, &base_dir, &out_dir)?;
        }
        return Ok(());
    }

    let cfg = ScenarioConfig::from_path_with_overrides(&args.config, &overrides.pairs)?;
    let out_dir = overrides.out_dir.unwrap_or(cfg.run.out_dir.clone());
    execute(&stage, &cfg, &base_dir, &out_dir)
}

fn execute(
    stage: &Stage,
    cfg: &ScenarioConfig,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<(), Error> {
    match stage {
        Stage::Simulate => {
            let artifacts = pipeline::run_simulate(cfg, base_dir)?;
            pipeline::write_simulate(&artifacts, out_dir)?;
            let s = &artifacts.summary;
            println!(
                "simulated {} h: mean composite {:.3}, provision {:.0} W, BE throughput {:.2}, {} withdrawn",
                s.horizon_hours, s.mean_composite, s.mean_provision_w, s.be_throughput,
                s.withdrawn_hours
            );
        }
        Stage::Grid => {
            let artifacts = pipeline::run_grid(cfg, base_dir)?;
            pipeline::write_grid(&artifacts, out_dir)?;
            let r = &artifacts.result;
            println!(
                "mce {:.4} tCO2/MW over {} h (plant-hours {} -> {})",
                r.mce,
                artifacts.problem.demand.len(),
                r.without_dc.committed_plant_hours,
                r.with_dc.committed_plant_hours
            );
        }
        Stage::Report => {
            let artifacts = pipeline::run_report(cfg, out_dir)?;
            pipeline::write_report(&artifacts, out_dir, cfg.run.horizon_hours)?;
            for s in &artifacts.scenarios {
                println!(
                    "{:<10} c_op {:>12.1} t/yr  c_exo {:>12.1} t/yr  tco {:>14.0} $/yr",
                    s.carbon.scenario.label(),
                    s.carbon.c_op,
                    s.carbon.c_exogenous,
                    s.tco.total
                );
            }
        }
    }
    Ok(())
}
