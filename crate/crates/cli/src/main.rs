//! `skyplan`: a reproducible pipeline for UAV coverage planning.
//!
//! Subcommands map one-to-one onto pipeline stages: `gen` builds a
//! scenario, `mobility` simulates evacuation demand, `linkbudget`
//! computes achievable rates, `plan` schedules the fleet and splits the
//! spectrum, `eval` scores a plan, and `compare` puts two score files
//! side by side. Every stage is a pure function of its input files and
//! flags, so reruns are byte-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use skyplan_core::{
    allocate_spectrum, baseline_allocation, baseline_plan, build_model, build_throughput_matrix,
    check_feasibility, evaluate_plan, round_solution, simulate_evacuation, solve_relaxation,
    AllocationMatrix, EvaluateError, GeneratorConfig, Metrics, MetricsSummary, MobilityConfig,
    Plan, RadioConfig, RateTable, Scenario, ThroughputMatrix, VehicleCounts,
};

#[derive(Parser)]
#[command(
    name = "skyplan",
    version,
    about = "Plan and evaluate UAV cellular coverage over a disaster area"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario file.
    Gen(GenArgs),
    /// Simulate the evacuation and write per-step vehicle counts.
    Mobility(MobilityArgs),
    /// Compute the zone-to-area throughput matrix.
    Linkbudget(LinkbudgetArgs),
    /// Plan fleet actions and the spectrum split.
    Plan(PlanArgs),
    /// Check a plan and write its metrics files.
    Eval(EvalArgs),
    /// Compare two metrics summaries side by side.
    Compare(CompareArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Zone grid rows.
    #[arg(long, default_value_t = 10)]
    grid_rows: usize,
    /// Zone grid columns.
    #[arg(long, default_value_t = 10)]
    grid_cols: usize,
    /// Number of demand areas (road segments).
    #[arg(long, default_value_t = 500)]
    areas: usize,
    /// Fleet size.
    #[arg(long, default_value_t = 20)]
    uavs: usize,
    /// Number of recharge sites.
    #[arg(long, default_value_t = 7)]
    recharge_sites: usize,
    /// Battery capacity in steps.
    #[arg(long, default_value_t = 20)]
    battery: usize,
    /// Planning steps.
    #[arg(long, default_value_t = 150)]
    steps: usize,
    /// Seconds per planning step.
    #[arg(long, default_value_t = 600.0)]
    step_duration_s: f64,
    /// Maximum link length in meters.
    #[arg(long, default_value_t = 1000.0)]
    link_range_m: f64,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scenario JSON output path.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct MobilityArgs {
    /// Scenario JSON path.
    #[arg(long)]
    scenario: PathBuf,
    /// Vehicles to evacuate.
    #[arg(long, default_value_t = 10_000)]
    vehicles: u64,
    /// Simulation tick in seconds; must divide the step duration.
    #[arg(long, default_value_t = 1.0)]
    tick_s: f64,
    /// Vehicles allowed to exit a segment per tick.
    #[arg(long, default_value_t = 1)]
    outflow: u64,
    /// Departures are drawn uniformly from the first this-many ticks.
    #[arg(long, default_value_t = 0)]
    spread: u64,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Vehicle-count CSV output path.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct LinkbudgetArgs {
    /// Scenario JSON path.
    #[arg(long)]
    scenario: PathBuf,
    /// Transmit power in dBm.
    #[arg(long, default_value_t = 30.0)]
    tx_dbm: f64,
    /// Noise floor in dBm.
    #[arg(long, default_value_t = -121.45)]
    noise_dbm: f64,
    /// Carrier frequency in GHz.
    #[arg(long, default_value_t = 1.8)]
    freq_ghz: f64,
    /// UAV hover height in meters.
    #[arg(long, default_value_t = 50.0)]
    bs_height_m: f64,
    /// User-equipment height in meters.
    #[arg(long, default_value_t = 1.5)]
    ue_height_m: f64,
    /// Channel bandwidth in Hz.
    #[arg(long, default_value_t = 1.0e7)]
    bandwidth_hz: f64,
    /// Optional SNR-to-throughput table CSV; defaults to the built-in
    /// LTE ladder scaled by the bandwidth.
    #[arg(long)]
    rate_table: Option<PathBuf>,
    /// Throughput matrix CSV output path.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Strategy {
    /// LP relaxation rounded to a feasible plan, spectrum re-optimized.
    Relax,
    /// Least-recently-visited patrol with an even spectrum split.
    Baseline,
}

#[derive(Args)]
struct PlanArgs {
    /// Scenario JSON path.
    #[arg(long)]
    scenario: PathBuf,
    /// Vehicle-count CSV path.
    #[arg(long)]
    counts: PathBuf,
    /// Throughput matrix CSV path.
    #[arg(long)]
    tmatrix: PathBuf,
    /// Planning strategy.
    #[arg(long, value_enum)]
    strategy: Strategy,
    /// Rolling-average window in steps.
    #[arg(long, default_value_t = 5)]
    horizon: usize,
    /// Plan JSON output path; the spectrum allocation lands next to it
    /// with the extension `alloc.csv`.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Plan JSON path.
    plan: PathBuf,
    /// Spectrum allocation CSV path.
    allocation: PathBuf,
    /// Scenario JSON path.
    #[arg(long)]
    scenario: PathBuf,
    /// Vehicle-count CSV path.
    #[arg(long)]
    counts: PathBuf,
    /// Throughput matrix CSV path.
    #[arg(long)]
    tmatrix: PathBuf,
    /// Rolling-average window in steps.
    #[arg(long, default_value_t = 5)]
    horizon: usize,
    /// Metrics summary JSON output path; per-step and per-area CSVs land
    /// next to it with the extensions `steps.csv` and `areas.csv`.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Left metrics summary JSON.
    left: PathBuf,
    /// Right metrics summary JSON.
    right: PathBuf,
    /// Optional path for the comparison text.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen(args) => gen(args),
        Command::Mobility(args) => mobility(args),
        Command::Linkbudget(args) => linkbudget(args),
        Command::Plan(args) => plan(args),
        Command::Eval(args) => eval(args),
        Command::Compare(args) => compare(args),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file =
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn read_scenario(path: &Path) -> Result<Scenario> {
    Scenario::from_json_reader(open(path)?)
        .with_context(|| format!("bad scenario file {}", path.display()))
}

fn read_counts(path: &Path) -> Result<VehicleCounts> {
    VehicleCounts::from_csv_reader(open(path)?)
        .with_context(|| format!("bad vehicle-count file {}", path.display()))
}

fn read_tmatrix(path: &Path) -> Result<ThroughputMatrix> {
    ThroughputMatrix::from_csv_reader(open(path)?)
        .with_context(|| format!("bad throughput matrix {}", path.display()))
}

fn gen(args: GenArgs) -> Result<()> {
    let config = GeneratorConfig {
        grid_rows: args.grid_rows,
        grid_cols: args.grid_cols,
        num_areas: args.areas,
        num_uavs: args.uavs,
        num_recharge_sites: args.recharge_sites,
        battery_steps: args.battery,
        num_steps: args.steps,
        step_duration_s: args.step_duration_s,
        link_range_m: args.link_range_m,
        seed: args.seed,
    };
    let scenario = skyplan_core::generate_scenario(&config)?;
    scenario.to_json_writer(create(&args.output)?)?;
    eprintln!(
        "wrote scenario ({} zones, {} areas, {} UAVs, {} steps) to {}",
        scenario.zones.len(),
        scenario.areas.len(),
        scenario.uavs.len(),
        scenario.num_steps,
        args.output.display()
    );
    Ok(())
}

fn mobility(args: MobilityArgs) -> Result<()> {
    let scenario = read_scenario(&args.scenario)?;
    let config = MobilityConfig {
        total_vehicles: args.vehicles,
        tick_s: args.tick_s,
        outflow_per_tick: args.outflow,
        seed: args.seed,
        departure_spread_ticks: args.spread,
    };
    let counts = simulate_evacuation(&scenario, &config)?;
    counts.to_csv_writer(create(&args.output)?)?;
    eprintln!(
        "simulated {} vehicles; wrote {} x {} counts to {}",
        args.vehicles,
        counts.num_areas(),
        counts.num_steps(),
        args.output.display()
    );
    Ok(())
}

fn linkbudget(args: LinkbudgetArgs) -> Result<()> {
    let scenario = read_scenario(&args.scenario)?;
    let config = RadioConfig {
        tx_power_dbm: args.tx_dbm,
        noise_dbm: args.noise_dbm,
        freq_ghz: args.freq_ghz,
        h_bs_m: args.bs_height_m,
        h_ue_m: args.ue_height_m,
        bandwidth_hz: args.bandwidth_hz,
    };
    let table = match &args.rate_table {
        Some(path) => RateTable::from_csv_reader(open(path)?)
            .with_context(|| format!("bad rate table {}", path.display()))?,
        None => RateTable::lte_default(config.bandwidth_hz),
    };
    let tmatrix = build_throughput_matrix(&scenario, &config, &table)?;
    tmatrix.to_csv_writer(create(&args.output)?)?;
    eprintln!(
        "wrote {} x {} throughput matrix to {}",
        tmatrix.num_areas(),
        tmatrix.num_zones(),
        args.output.display()
    );
    Ok(())
}

/// Sibling path with a replaced extension, e.g. `plan.json` to
/// `plan.alloc.csv`.
fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn plan(args: PlanArgs) -> Result<()> {
    let scenario = read_scenario(&args.scenario)?;
    let counts = read_counts(&args.counts)?;
    let tmatrix = read_tmatrix(&args.tmatrix)?;

    let (plan, allocation, objective) = match args.strategy {
        Strategy::Relax => {
            let model = build_model(&scenario, &tmatrix, &counts, args.horizon)?;
            eprint!("{}", model.stats());
            let relaxed = solve_relaxation(&model)?;
            eprintln!("relaxation bound: {} bps", relaxed.objective_bps);
            let plan = round_solution(&relaxed, &scenario)?;
            let (allocation, objective) =
                allocate_spectrum(&plan, &scenario, &tmatrix, &counts, args.horizon)?;
            (plan, allocation, Some(objective))
        }
        Strategy::Baseline => {
            let plan = baseline_plan(&scenario)?;
            let allocation = baseline_allocation(&plan, &scenario, &tmatrix);
            let objective =
                match evaluate_plan(&plan, &allocation, &scenario, &tmatrix, &counts, args.horizon)
                {
                    Ok(metrics) => Some(metrics.objective_bps),
                    Err(EvaluateError::ObjectiveUndefined) => None,
                    Err(err) => return Err(err.into()),
                };
            (plan, allocation, objective)
        }
    };

    let alloc_path = sibling(&args.output, "alloc.csv");
    plan.to_json_writer(create(&args.output)?)?;
    allocation.to_csv_writer(create(&alloc_path)?)?;
    match objective {
        Some(bps) => eprintln!("objective: {bps} bps"),
        None => eprintln!("objective: undefined (no vehicles in any area)"),
    }
    eprintln!(
        "wrote plan to {} and allocation to {}",
        args.output.display(),
        alloc_path.display()
    );
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let scenario = read_scenario(&args.scenario)?;
    let counts = read_counts(&args.counts)?;
    let tmatrix = read_tmatrix(&args.tmatrix)?;
    let plan = Plan::from_json_reader(open(&args.plan)?)
        .with_context(|| format!("bad plan file {}", args.plan.display()))?;
    let allocation = AllocationMatrix::from_csv_reader(
        open(&args.allocation)?,
        scenario.areas.len(),
        plan.num_uavs(),
        plan.num_steps(),
        scenario.zones.len(),
    )
    .with_context(|| format!("bad allocation file {}", args.allocation.display()))?;

    let violations = check_feasibility(&plan, &scenario);
    if let Some(first) = violations.first() {
        bail!("infeasible plan ({} violations; first: {first})", violations.len());
    }

    let metrics = evaluate_plan(&plan, &allocation, &scenario, &tmatrix, &counts, args.horizon)?;
    write_metrics(&metrics, &counts, &args.output)?;
    eprintln!("{}", render(&metrics.summary()).trim_end());
    Ok(())
}

fn write_metrics(metrics: &Metrics, counts: &VehicleCounts, output: &Path) -> Result<()> {
    let steps_path = sibling(output, "steps.csv");
    let areas_path = sibling(output, "areas.csv");
    metrics.summary().to_json_writer(create(output)?)?;
    metrics.write_step_csv(create(&steps_path)?, counts)?;
    metrics.write_area_csv(create(&areas_path)?)?;
    eprintln!(
        "wrote metrics to {} (per-step {}, per-area {})",
        output.display(),
        steps_path.display(),
        areas_path.display()
    );
    Ok(())
}

/// One metrics summary as aligned `name: value` lines.
fn render(summary: &MetricsSummary) -> String {
    let mut out = String::new();
    for (name, value) in rows(summary) {
        out.push_str(&format!("{name:<24} {value}\n"));
    }
    out
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map_or_else(|| "n/a".into(), |v| format!("{v:.6}"))
}

fn rows(s: &MetricsSummary) -> Vec<(&'static str, String)> {
    vec![
        ("objective_bps", format!("{:.6}", s.objective_bps)),
        ("mean_total_bps", format!("{:.6}", s.mean_total_bps)),
        ("total_bits", format!("{:.6}", s.total_bits)),
        ("jain", fmt_opt(s.jain)),
        ("cover_steps", s.action_breakdown.cover_steps.to_string()),
        ("travel_steps", s.action_breakdown.travel_steps.to_string()),
        (
            "recharge_steps",
            s.action_breakdown.recharge_steps.to_string(),
        ),
        ("missions", s.missions.count.to_string()),
        (
            "mean_mission_steps",
            format!("{:.6}", s.missions.mean_duration_steps),
        ),
        (
            "max_mission_steps",
            s.missions.max_duration_steps.to_string(),
        ),
        (
            "mean_replenished_steps",
            fmt_opt(s.missions.mean_replenished_steps),
        ),
    ]
}

fn compare(args: CompareArgs) -> Result<()> {
    let left = MetricsSummary::from_json_reader(open(&args.left)?)
        .with_context(|| format!("bad metrics file {}", args.left.display()))?;
    let right = MetricsSummary::from_json_reader(open(&args.right)?)
        .with_context(|| format!("bad metrics file {}", args.right.display()))?;

    let left_name = args.left.display().to_string();
    let right_name = args.right.display().to_string();
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:>20} {:>20} {:>20}\n",
        "metric", left_name, right_name, "delta"
    ));
    let deltas = [
        ("objective_bps", Some(left.objective_bps - right.objective_bps)),
        ("mean_total_bps", Some(left.mean_total_bps - right.mean_total_bps)),
        ("total_bits", Some(left.total_bits - right.total_bits)),
        ("jain", left.jain.zip(right.jain).map(|(l, r)| l - r)),
    ];
    for ((name, lv), (_, rv)) in rows(&left).into_iter().zip(rows(&right)) {
        let delta = deltas
            .iter()
            .find(|(dn, _)| *dn == name)
            .map_or_else(String::new, |(_, d)| fmt_opt(*d));
        out.push_str(&format!("{name:<24} {lv:>20} {rv:>20} {delta:>20}\n"));
    }

    print!("{out}");
    if let Some(path) = &args.output {
        create(path)?
            .write_all(out.as_bytes())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}
