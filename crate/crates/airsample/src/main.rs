//! The `airsample` command line: generate synthetic data, run single
//! calibrations, feature selection and duty-cycle sweeps, and convert
//! reports.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numerical failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use airsample::config::Config;
use airsample::csvio::{load_raw_csv, load_reference_csv, write_raw_csv, write_reference_csv};
use airsample::experiment::{calibrate, select_features, sweep, ErrorKind, PipelineError};
use airsample::report::{
    read_sweep_json, write_json, write_manifest, write_sweep_csv, write_sweep_json,
    CalibrationBundle, CalibrationReport, SelectionReport, SelectionStepReport,
};
use airsample_core::series::{Pollutant, RawSeries, ReferenceSeries};
use airsample_core::synth::generate;
use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "airsample",
    about = "Duty-cycled sampling simulation and calibration for low-cost air quality sensors",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Dotted-key overrides, e.g. --set evaluation.cv_k=5
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker thread cap for plan evaluation.
    #[arg(long)]
    jobs: Option<usize>,
    /// Print per-row detail.
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic raw stream and reference series from the
    /// config's [synth] section.
    Synth(RunArgs),
    /// Fit and evaluate one calibration per target on the first plan of
    /// the grid.
    Calibrate(RunArgs),
    /// Greedy forward feature selection on the first plan and target.
    SelectFeatures(RunArgs),
    /// Evaluate the whole plan grid and emit the trade-off report.
    Sweep(RunArgs),
    /// Re-emit the CSV tables from an existing sweep JSON report.
    Report {
        /// A sweep.json produced by `airsample sweep`.
        #[arg(long)]
        input: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

enum CliError {
    Data(String),
    Numerical(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e.kind {
            ErrorKind::Data => CliError::Data(e.to_string()),
            ErrorKind::Numerical => CliError::Numerical(e.to_string()),
        }
    }
}

macro_rules! data_error_from {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}
data_error_from!(
    airsample::config::ConfigError,
    airsample::csvio::CsvIoError,
    airsample::report::ReportError,
    airsample_core::synth::ScenarioError,
    std::io::Error
);

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(args) => cmd_synth(&args),
        Command::Calibrate(args) => cmd_calibrate(&args),
        Command::SelectFeatures(args) => cmd_select(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Report { input, out } => cmd_report(&input, &out),
    }
}

fn setup(args: &RunArgs) -> Result<Config, CliError> {
    if let Some(jobs) = args.jobs {
        // Errors only if a global pool exists already, which keeps the
        // earlier setting; that is fine for a single-run process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    std::fs::create_dir_all(&args.out)?;
    let config = Config::load(&args.config, &args.overrides)?;
    if args.verbose {
        println!("effective configuration:\n{}", config.echo());
    }
    Ok(config)
}

/// Load the raw stream and per-target references: from CSV files when
/// `data.raw` is set, else by generating the `[synth]` scenario.
fn load_inputs(
    config: &Config,
) -> Result<(RawSeries, BTreeMap<Pollutant, ReferenceSeries>), CliError> {
    if let Some(raw_path) = &config.data.raw {
        let raw = load_raw_csv(Path::new(raw_path), config.data.t_s_s)?;
        let mut references = BTreeMap::new();
        for (name, path) in &config.data.reference {
            let pollutant = Pollutant::parse(name).ok_or_else(|| {
                CliError::Data(format!("config key 'data.reference': unknown pollutant '{name}'"))
            })?;
            references.insert(pollutant, load_reference_csv(Path::new(path), pollutant)?);
        }
        return Ok((raw, references));
    }
    let spec = config.scenario()?;
    let (raw, reference, _) = generate(&spec)?;
    let mut references = BTreeMap::new();
    references.insert(spec.target, reference);
    Ok((raw, references))
}

fn cmd_synth(args: &RunArgs) -> Result<(), CliError> {
    let config = setup(args)?;
    let spec = config.scenario()?;
    let (raw, reference, truth) = generate(&spec)?;
    let raw_path = args.out.join("raw.csv");
    write_raw_csv(&raw, &raw_path)?;
    let ref_path = args
        .out
        .join(format!("reference_{}.csv", spec.target.tag()));
    write_reference_csv(&reference, &ref_path)?;
    let outputs = vec![raw_path.clone(), ref_path.clone()];
    write_manifest(&args.out, &config.echo(), &[spec.seed], &outputs)?;
    println!(
        "wrote {} raw records and {} reference hours (mixing condition {:.3})",
        raw.len(),
        reference.points().len(),
        truth.mixing_condition
    );
    println!("  {}", raw_path.display());
    println!("  {}", ref_path.display());
    Ok(())
}

fn cmd_calibrate(args: &RunArgs) -> Result<(), CliError> {
    let config = setup(args)?;
    let (raw, references) = load_inputs(&config)?;
    let outcomes = calibrate(&config, &raw, &references)?;
    let seed = *config.seeds().first().expect("seeds are never empty");
    let bundle = CalibrationBundle {
        config_echo: config.echo(),
        seed,
        models: outcomes.iter().map(CalibrationReport::from_outcome).collect(),
    };
    let path = args.out.join("calibration.json");
    write_json(&bundle, &path)?;
    write_manifest(&args.out, &bundle.config_echo, &[seed], &[path.clone()])?;
    for model in &bundle.models {
        println!(
            "{}: cv R2 {:.4} [{:.4}, {:.4}]  test R2 {:.4}  rmse {:.4}  ({} usable rows)",
            model.target,
            model.cv_mean_r2,
            model.cv_ci95.0,
            model.cv_ci95.1,
            model.test_r2,
            model.test_rmse,
            model.usable_rows
        );
        if args.verbose {
            for (name, beta) in std::iter::once("(intercept)")
                .chain(model.feature_names.iter().map(|s| s.as_str()))
                .zip(&model.beta)
            {
                println!("  {name}: {beta}");
            }
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_select(args: &RunArgs) -> Result<(), CliError> {
    let config = setup(args)?;
    let (raw, references) = load_inputs(&config)?;
    let (target, steps) = select_features(&config, &raw, &references)?;
    let report = SelectionReport {
        config_echo: config.echo(),
        target: target.as_str().to_string(),
        always_in: config.features.always_in.clone(),
        steps: steps
            .iter()
            .map(|s| SelectionStepReport {
                feature: s.feature.clone(),
                cv_mean_r2: s.cv.mean_r2,
                cv_ci95: s.cv.ci95,
            })
            .collect(),
    };
    let path = args.out.join("selection.json");
    write_json(&report, &path)?;
    let seed = *config.seeds().first().expect("seeds are never empty");
    write_manifest(&args.out, &report.config_echo, &[seed], &[path.clone()])?;
    println!("forward selection for {}:", report.target);
    for (i, step) in report.steps.iter().enumerate() {
        println!(
            "  {}. + {}  cv R2 {:.4} [{:.4}, {:.4}]",
            i + 1,
            step.feature,
            step.cv_mean_r2,
            step.cv_ci95.0,
            step.cv_ci95.1
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_sweep(args: &RunArgs) -> Result<(), CliError> {
    let config = setup(args)?;
    let (raw, references) = load_inputs(&config)?;
    let report = sweep(&config, &raw, &references)?;
    let json_path = args.out.join("sweep.json");
    write_sweep_json(&report, &json_path)?;
    let mut outputs = write_sweep_csv(&report, &args.out)?;
    outputs.push(json_path);
    write_manifest(&args.out, &report.config_echo, &report.seeds, &outputs)?;
    let failed = report.rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "swept {} plan rows ({} failed) over {} seeds",
        report.rows.len(),
        failed,
        report.seeds.len()
    );
    if args.verbose {
        for row in &report.rows {
            match (&row.error, row.cv_r2_mean) {
                (Some(e), _) => println!(
                    "  dc {:.4}  T_sen {:>5}s N_s {:>3} {}  FAILED: {e}",
                    row.dc, row.t_sen_s, row.n_s, row.mode
                ),
                (None, Some(cv)) => println!(
                    "  dc {:.4}  T_sen {:>5}s N_s {:>3} {}  cv R2 {:.4}",
                    row.dc, row.t_sen_s, row.n_s, row.mode, cv
                ),
                _ => {}
            }
        }
    }
    for path in outputs {
        println!("  {}", path.display());
    }
    Ok(())
}

fn cmd_report(input: &Path, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    let report = read_sweep_json(input)?;
    let outputs = write_sweep_csv(&report, out)?;
    write_manifest(out, &report.config_echo, &report.seeds, &outputs)?;
    for path in outputs {
        println!("  {}", path.display());
    }
    Ok(())
}
