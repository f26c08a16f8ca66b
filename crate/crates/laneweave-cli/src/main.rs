//! Command-line toolkit for lane-choice equilibria at weaving sections.
//!
//! Subcommands cover the full workflow: `solve` one configuration, `sweep` a
//! grid, `generate` synthetic observations, `ingest` vehicle logs,
//! `calibrate` coefficients, `validate` predictions, and compare coefficient
//! sets with `fr`. Every command reads/writes plain files (INI configs,
//! CSV datasets), prints its result to stdout as text or `--json`, and is
//! deterministic for a fixed `--seed`.
//!
//! Exit codes: 0 on success, 1 on a domain error (invariant violation,
//! empty grid, I/O failure), 2 on a file-parse or usage error.

mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use laneweave::dataset::format_significant;
use laneweave::{
    calibrate, filter_components, fluctuating_rate, generate_grid, ingest_vehicle_log,
    reference_calibration_grid, sample_simplex, solve_all, solve_equilibrium,
    synthesize_equilibrium_noise, synthesize_logit, CalibrationOptions, CostCoefficients, Dataset,
    FixedClass, GroupBy, Result, ScenarioGrid, WeavingConfiguration,
};

/// Seed used when neither `--seed` nor a config file provides one.
const DEFAULT_SEED: u64 = 42;

/// Salt decorrelating random grid placement from observation noise, which
/// both derive from the same user-facing seed.
const GRID_SEED_SALT: u64 = 0x6772_6964; // "grid"

#[derive(Parser)]
#[command(
    name = "laneweave",
    version,
    about = "Lane-choice equilibria at weaving sections: solve, sweep, generate, calibrate, validate"
)]
struct Cli {
    /// Emit machine-readable JSON on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for randomized commands (overrides any config-file seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the command's file output here instead of stdout (for
    /// `calibrate`: the coefficients file; for `validate`: the per-point
    /// CSV; reports still print to stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress warnings on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the equilibrium split for one configuration file.
    Solve(SolveArgs),
    /// Predict across a grid of flow configurations (CSV rows).
    Sweep(SweepArgs),
    /// Synthesize an observation dataset from a generator model.
    Generate(GenerateArgs),
    /// Aggregate a per-vehicle decision log into an observation dataset.
    Ingest(IngestArgs),
    /// Fit cost coefficients to an observation dataset.
    Calibrate(CalibrateArgs),
    /// Score a coefficient set against an observation dataset.
    Validate(ValidateArgs),
    /// Compare two coefficient sets parameter by parameter.
    Fr(FrArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Configuration file providing [flows] (and [coefficients], unless
    /// overridden).
    #[arg(long)]
    config: PathBuf,
    /// Take the coefficients from this file instead — e.g. one written by
    /// `calibrate --out`.
    #[arg(long)]
    coefficients: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(
    clap::ArgGroup::new("fixed_class")
        .args(["fix_enter", "fix_exit", "fix_lane2"])
        .multiple(false)
))]
struct SweepArgs {
    /// Configuration file providing [coefficients].
    #[arg(long)]
    config: PathBuf,
    /// Simplex step between grid levels.
    #[arg(long, default_value_t = 1.0 / 24.0)]
    step: f64,
    /// Hold the entering share at this value and sweep the rest.
    #[arg(long)]
    fix_enter: Option<f64>,
    /// Hold the exiting share at this value and sweep the rest.
    #[arg(long)]
    fix_exit: Option<f64>,
    /// Hold the inner-lane share at this value and sweep the rest.
    #[arg(long)]
    fix_lane2: Option<f64>,
    /// Keep only configurations with every share at least this large.
    #[arg(long)]
    min_share: Option<f64>,
    /// Keep only configurations with every share at most this large.
    #[arg(long)]
    max_share: Option<f64>,
}

#[derive(Args)]
#[command(group(
    clap::ArgGroup::new("fixed_class")
        .args(["fix_enter", "fix_exit", "fix_lane2"])
        .multiple(false)
))]
struct GenerateArgs {
    /// Use a frozen scenario preset instead of grid options.
    #[arg(
        long,
        value_enum,
        conflicts_with_all = ["random", "step", "fix_enter", "fix_exit", "fix_lane2"]
    )]
    preset: Option<Preset>,
    /// Draw this many configurations uniformly from the simplex.
    #[arg(long, conflicts_with_all = ["step", "fix_enter", "fix_exit", "fix_lane2"])]
    random: Option<usize>,
    /// Simplex step between grid levels.
    #[arg(long, default_value_t = 1.0 / 24.0)]
    step: f64,
    /// Hold the entering share at this value and sweep the rest.
    #[arg(long)]
    fix_enter: Option<f64>,
    /// Hold the exiting share at this value and sweep the rest.
    #[arg(long)]
    fix_exit: Option<f64>,
    /// Hold the inner-lane share at this value and sweep the rest.
    #[arg(long)]
    fix_lane2: Option<f64>,
    /// Observation oracle.
    #[arg(long, value_enum, default_value_t = Oracle::Noise)]
    oracle: Oracle,
    /// Gaussian noise on the observed staying share (noise oracle).
    #[arg(long, default_value_t = 0.02)]
    sigma: f64,
    /// Observations per configuration (noise oracle).
    #[arg(long, default_value_t = 1)]
    samples: usize,
    /// Choice sharpness (logit oracle).
    #[arg(long, default_value_t = 50.0)]
    sensitivity: f64,
    /// Vehicles sampled per configuration (logit oracle).
    #[arg(long, default_value_t = 500)]
    population: u64,
    /// Fixed-point iteration budget (logit oracle).
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    /// Generator coefficients file; defaults to the built-in reference set.
    #[arg(long)]
    coefficients: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// The frozen 415-configuration calibration grid.
    #[value(name = "calibration-415")]
    Calibration415,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Oracle {
    /// Equilibrium predictions plus Gaussian observation noise.
    Noise,
    /// Logistic-choice population with binomial sampling.
    Logit,
}

#[derive(Args)]
struct IngestArgs {
    /// Per-vehicle decision log.
    log: PathBuf,
    /// Timesteps to discard while traffic stabilizes.
    #[arg(long, default_value_t = 5000)]
    warmup: u64,
    /// Length of the measurement window after warmup.
    #[arg(long, default_value_t = 15000)]
    window: u64,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Observation dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Also fit the unit costs (the lane-1 travel-time unit cost stays
    /// pinned at 1 as the numeraire).
    #[arg(long)]
    free_unit_costs: bool,
    /// Lower edge of the coefficient search box.
    #[arg(long, default_value_t = 1.0)]
    lower: f64,
    /// Upper edge of the coefficient search box.
    #[arg(long, default_value_t = 20.0)]
    upper: f64,
    /// Independent restarts of the local search.
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    /// Iteration budget per local search.
    #[arg(long, default_value_t = 2000)]
    max_iterations: usize,
    /// Convergence tolerance of each local search.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
}

#[derive(Args)]
struct ValidateArgs {
    /// Observation dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Coefficients file ([coefficients] section).
    #[arg(long)]
    coefficients: PathBuf,
    /// Also break the error down per group.
    #[arg(long, value_enum)]
    group_by: Option<GroupKey>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupKey {
    /// Group by scenario label.
    Scenario,
    /// Group by entering share.
    NEnter,
    /// Group by exiting share.
    NExit,
    /// Group by inner-lane share.
    N2,
}

impl From<GroupKey> for GroupBy {
    fn from(key: GroupKey) -> Self {
        match key {
            GroupKey::Scenario => GroupBy::ScenarioId,
            GroupKey::NEnter => GroupBy::NEnter,
            GroupKey::NExit => GroupBy::NExit,
            GroupKey::N2 => GroupBy::N2,
        }
    }
}

#[derive(Args)]
struct FrArgs {
    /// Baseline coefficients file.
    #[arg(long)]
    baseline: PathBuf,
    /// Variant coefficients file to compare against the baseline.
    #[arg(long)]
    variant: PathBuf,
    /// Significance threshold, in percent.
    #[arg(long, default_value_t = laneweave::DEFAULT_FR_THRESHOLD)]
    threshold: f64,
}

/// Global flags shared by every subcommand.
struct Globals {
    json: bool,
    seed: Option<u64>,
    out: Option<PathBuf>,
    quiet: bool,
}

fn main() {
    let Cli { json, seed, out, quiet, command } = Cli::parse();
    let globals = Globals { json, seed, out, quiet };
    let outcome = match command {
        Command::Solve(args) => cmd_solve(&globals, &args),
        Command::Sweep(args) => cmd_sweep(&globals, &args),
        Command::Generate(args) => cmd_generate(&globals, &args),
        Command::Ingest(args) => cmd_ingest(&globals, &args),
        Command::Calibrate(args) => cmd_calibrate(&globals, &args),
        Command::Validate(args) => cmd_validate(&globals, &args),
        Command::Fr(args) => cmd_fr(&globals, &args),
    };
    if let Err(error) = outcome {
        eprintln!("error: {error}");
        std::process::exit(if error.is_parse() { 2 } else { 1 });
    }
}

/// Write `content` to `--out` or stdout. Content always ends in a newline.
fn emit(globals: &Globals, content: &str) -> Result<()> {
    match &globals.out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

/// Pretty-print a serializable value as a JSON document.
fn json_document<T: serde::Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("reports contain only finite plain data");
    format!("{value:#}\n")
}

/// Nine significant digits, the shared file-format precision.
fn fmt9(value: f64) -> String {
    format_significant(value, 9)
}

fn fixed_class(
    enter: Option<f64>,
    exit: Option<f64>,
    lane2: Option<f64>,
) -> Option<(FixedClass, f64)> {
    // Mutual exclusion is enforced by the clap argument group.
    enter
        .map(|value| (FixedClass::Enter, value))
        .or_else(|| exit.map(|value| (FixedClass::Exit, value)))
        .or_else(|| lane2.map(|value| (FixedClass::Lane2, value)))
}

fn cmd_solve(globals: &Globals, args: &SolveArgs) -> Result<()> {
    let file = config::read_config(&args.config)?;
    let coefficients = match &args.coefficients {
        Some(path) => config::read_coefficients(path)?,
        None => file.require_coefficients()?,
    };
    let configuration = WeavingConfiguration::new(file.require_flows()?, coefficients);
    let result = solve_equilibrium(&configuration);
    let cost_steadfast = configuration.cost_steadfast(&result.distribution);
    let cost_bypass = configuration.cost_bypass(&result.distribution);
    let content = if globals.json {
        json_document(&serde_json::json!({
            "x1_s": result.distribution.x1_s(),
            "x1_b": result.distribution.x1_b(),
            "case": result.case.to_string(),
            "cost_steadfast": cost_steadfast,
            "cost_bypass": cost_bypass,
            "cost_gap": result.cost_gap_at_solution,
        }))
    } else {
        format!(
            "case:           {}\n\
             x1_s:           {}\n\
             x1_b:           {}\n\
             cost_steadfast: {}\n\
             cost_bypass:    {}\n\
             cost_gap:       {}\n",
            result.case,
            fmt9(result.distribution.x1_s()),
            fmt9(result.distribution.x1_b()),
            fmt9(cost_steadfast),
            fmt9(cost_bypass),
            fmt9(result.cost_gap_at_solution),
        )
    };
    emit(globals, &content)
}

fn cmd_sweep(globals: &Globals, args: &SweepArgs) -> Result<()> {
    let coefficients = config::read_config(&args.config)?.require_coefficients()?;
    let grid = ScenarioGrid {
        grid_step: args.step,
        fixed: fixed_class(args.fix_enter, args.fix_exit, args.fix_lane2),
        ..Default::default()
    };
    let mut flows = generate_grid(&grid)?;
    if args.min_share.is_some() || args.max_share.is_some() {
        flows = filter_components(
            &flows,
            args.min_share.unwrap_or(0.0),
            args.max_share.unwrap_or(1.0),
        )?;
    }
    let results = solve_all(&coefficients, &flows);

    let content = if globals.json {
        let rows: Vec<serde_json::Value> = flows
            .iter()
            .zip(&results)
            .map(|(n, r)| {
                serde_json::json!({
                    "n_enter": n.n_enter(),
                    "n_exit": n.n_exit(),
                    "n2": n.n2(),
                    "x1_s": r.distribution.x1_s(),
                    "x1_b": r.distribution.x1_b(),
                    "case": r.case.to_string(),
                })
            })
            .collect();
        json_document(&rows)
    } else {
        let mut csv = String::from("n_enter,n_exit,n2,x1_s,x1_b,case\n");
        for (n, r) in flows.iter().zip(&results) {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt9(n.n_enter()),
                fmt9(n.n_exit()),
                fmt9(n.n2()),
                fmt9(r.distribution.x1_s()),
                fmt9(r.distribution.x1_b()),
                r.case,
            ));
        }
        csv
    };
    emit(globals, &content)
}

fn cmd_generate(globals: &Globals, args: &GenerateArgs) -> Result<()> {
    let (coefficients, config_seed) = match &args.coefficients {
        Some(path) => {
            let file = config::read_config(path)?;
            (file.require_coefficients()?, file.seed)
        }
        None => (CostCoefficients::reference(), None),
    };
    let seed = globals.seed.or(config_seed).unwrap_or(DEFAULT_SEED);

    let flows = if args.preset == Some(Preset::Calibration415) {
        reference_calibration_grid()
    } else if let Some(count) = args.random {
        sample_simplex(count, seed ^ GRID_SEED_SALT)
    } else {
        let grid = ScenarioGrid {
            grid_step: args.step,
            fixed: fixed_class(args.fix_enter, args.fix_exit, args.fix_lane2),
            ..Default::default()
        };
        generate_grid(&grid)?
    };

    let dataset = match args.oracle {
        Oracle::Noise => {
            synthesize_equilibrium_noise(&flows, &coefficients, args.sigma, args.samples, seed)?
        }
        Oracle::Logit => {
            let synthesis = synthesize_logit(
                &flows,
                &coefficients,
                args.sensitivity,
                args.population,
                args.iterations,
                seed,
            )?;
            if !synthesis.non_converged.is_empty() && !globals.quiet {
                eprintln!(
                    "warning: {} of {} configurations had not converged after {} iterations",
                    synthesis.non_converged.len(),
                    flows.len(),
                    args.iterations
                );
            }
            synthesis.dataset
        }
    };

    let content = if globals.json { json_document(&dataset) } else { dataset.to_csv() };
    emit(globals, &content)
}

fn cmd_ingest(globals: &Globals, args: &IngestArgs) -> Result<()> {
    let outcome = ingest_vehicle_log(&args.log, args.warmup, args.window)?;
    if !globals.quiet {
        for warning in &outcome.warnings {
            eprintln!("warning: {warning}");
        }
    }
    let content =
        if globals.json { json_document(&outcome.dataset) } else { outcome.dataset.to_csv() };
    emit(globals, &content)
}

fn cmd_calibrate(globals: &Globals, args: &CalibrateArgs) -> Result<()> {
    let data = Dataset::read_csv(&args.data)?;
    let options = CalibrationOptions {
        fixed_unit_costs: !args.free_unit_costs,
        lower_bound: args.lower,
        upper_bound: args.upper,
        restarts: args.restarts,
        max_iterations: args.max_iterations,
        tolerance: args.tolerance,
        seed: globals.seed.unwrap_or(DEFAULT_SEED),
    };
    let result = calibrate(&data, &options)?;
    if result.degenerate && !globals.quiet {
        eprintln!(
            "warning: fewer distinct flow configurations than fitted parameters; \
             the returned coefficients are one of many equally good fits"
        );
    }
    if let Some(path) = &globals.out {
        config::write_coefficients(path, &result.coefficients)?;
    }
    let content = if globals.json {
        json_document(&result)
    } else {
        let mut text = format!(
            "objective (weighted mean squared error): {:e}\n\
             iterations: {} across {} restarts\n\
             coefficients:\n",
            result.objective,
            result.iterations_used,
            result.per_restart_objectives.len(),
        );
        for (name, value) in result.coefficients.named_fields() {
            text.push_str(&format!("  {name:<5} = {value}\n"));
        }
        text
    };
    print!("{content}");
    Ok(())
}

fn cmd_validate(globals: &Globals, args: &ValidateArgs) -> Result<()> {
    let data = Dataset::read_csv(&args.data)?;
    let coefficients = config::read_coefficients(&args.coefficients)?;
    let report = laneweave::validate(&coefficients, &data, args.group_by.map(GroupBy::from))?;
    if let Some(path) = &globals.out {
        report.write_points_csv(path)?;
    }
    let content = if globals.json { json_document(&report) } else { report.to_text() };
    print!("{content}");
    Ok(())
}

fn cmd_fr(globals: &Globals, args: &FrArgs) -> Result<()> {
    let baseline = config::read_coefficients(&args.baseline)?;
    let variant = config::read_coefficients(&args.variant)?;
    let report = fluctuating_rate(&baseline, &variant, args.threshold);
    let content = if globals.json { json_document(&report) } else { report.to_text() };
    emit(globals, &content)
}
