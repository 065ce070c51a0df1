use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpmean::bounds::{
    add_remove_minmax_leading, alg2_mse_bound_leading, alg3_mse_bound_leading, lemma1_mse_bound, lower_bound_leading,
    swap_minmax_leading,
};
use dpmean::geometry::{
    ball_polygon, covers_sensitivity, l1_sensitivity_under, BallPolygon, SensitivitySegment, Transform2x2,
};
use dpmean::harness::{generate_dataset, sweep, DatasetSpec, Preset, PRESET_TRIALS};
use dpmean::io::{
    figure_rows, parse_sweep_config, read_dataset, write_metadata, write_polygons_csv, write_reports_csv,
    ReportRow, RunMetadata, RATIO_COLUMN, REPORT_HEADER,
};
use dpmean::{derive_stream, mechanisms::run_mechanism, Error, Mechanism, PrivacyBudget};
use rand_core::{OsRng, TryRngCore};

const DEFAULT_SEED: u64 = 2024;

#[derive(Parser)]
#[command(name = "dpmean", version, about = "Differentially private mean estimation on bounded data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Release one private mean of a file of values.
    Estimate(EstimateArgs),
    /// Print the leading error terms for a privacy budget and data range.
    Bounds(BoundsArgs),
    /// Generate figure data by Monte Carlo simulation.
    Figures(FiguresArgs),
    /// Export sensitivity balls and a sensitivity table.
    Geometry(GeometryArgs),
}

#[derive(Args)]
struct Range {
    /// Public lower bound of the data domain.
    #[arg(long, allow_negative_numbers = true)]
    lower: f64,
    /// Public upper bound of the data domain.
    #[arg(long, allow_negative_numbers = true)]
    upper: f64,
}

#[derive(Args)]
struct EstimateArgs {
    /// File with one value per line.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    range: Range,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = MechanismArg::Transformed)]
    mechanism: MechanismArg,
    /// Noise seed; drawn from the OS when omitted.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    range: Range,
    #[arg(long)]
    epsilon: f64,
    /// Dataset size, for the per-dataset rows.
    #[arg(long, requires = "mean")]
    n: Option<usize>,
    /// Dataset mean, for the per-dataset rows.
    #[arg(long, requires = "n", allow_negative_numbers = true)]
    mean: Option<f64>,
}

#[derive(Args)]
struct FiguresArgs {
    /// One of fig2a, fig2b, fig2c.
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    preset: Option<String>,
    /// JSON sweep configuration, instead of a preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; output does not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// CSV path; a `.meta.json` sidecar is written next to it.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct GeometryArgs {
    /// Polygon CSV path.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Independent,
    Shifted,
    Transformed,
}

impl From<MechanismArg> for Mechanism {
    fn from(m: MechanismArg) -> Self {
        match m {
            MechanismArg::Independent => Mechanism::Independent,
            MechanismArg::Shifted => Mechanism::Shifted,
            MechanismArg::Transformed => Mechanism::Transformed,
        }
    }
}

enum Failure {
    Validation(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Internal(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Internal(format!("{}: {e}", path.display()))
}

fn budget(epsilon: f64) -> Result<PrivacyBudget, Failure> {
    Ok(PrivacyBudget::new(epsilon)?)
}

fn resolve_seed(seed: Option<u64>) -> Result<(u64, &'static str), Failure> {
    match seed {
        Some(s) => Ok((s, "flag")),
        None => OsRng
            .try_next_u64()
            .map(|s| (s, "entropy"))
            .map_err(|e| Failure::Internal(format!("entropy source unavailable: {e}"))),
    }
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), Failure> {
    let eps = budget(args.epsilon)?;
    let text = fs::read_to_string(&args.input).map_err(|e| io_failure(&args.input, e))?;
    let d = read_dataset(&text, args.range.lower, args.range.upper)?;
    let mechanism = Mechanism::from(args.mechanism);
    let (seed, seed_source) = resolve_seed(args.seed)?;
    let est = run_mechanism(&d, eps, mechanism, derive_stream(seed, 0))?;
    let record = serde_json::json!({
        "mechanism": mechanism.name(),
        "epsilon": eps.epsilon(),
        "n_is_private": true,
        "estimate": est.value,
        "seed": seed,
        "seed_source": seed_source,
    });
    println!("{}", est.value);
    println!("{record}");
    eprintln!(
        "note: this release spends epsilon = {}; repeated runs on the same data add up linearly",
        eps.epsilon()
    );
    Ok(())
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), Failure> {
    let (e, lo, hi) = (args.epsilon, args.range.lower, args.range.upper);
    let eps = budget(e)?;
    let swap = swap_minmax_leading(e, lo, hi)?;
    let add_remove = add_remove_minmax_leading(e, lo, hi)?;
    let lower = lower_bound_leading(e, lo, hi)?;
    // n² · MSE leading terms for a dataset whose mean is the range midpoint.
    let mid = generate_dataset(&DatasetSpec::constant(1, (lo + hi) / 2.0).with_bounds(lo, hi))?;
    let alg2 = alg2_mse_bound_leading(&mid, eps)?;
    let alg3 = alg3_mse_bound_leading(&mid, eps)?;

    let mut rows: Vec<(&str, f64)> = vec![
        ("swap min-max risk", swap),
        ("add-remove min-max risk (upper)", add_remove),
        ("add-remove min-max risk (lower)", lower),
        ("shifted n^2 * MSE, mean at midpoint", alg2),
        ("transformed n^2 * MSE, mean at midpoint", alg3),
        ("shifted / transformed, mean at midpoint", alg2 / alg3),
    ];
    if let (Some(n), Some(mean)) = (args.n, args.mean) {
        let spec = DatasetSpec::constant(n, mean).with_bounds(lo, hi);
        let d = generate_dataset(&spec)?;
        let nf = n as f64;
        rows.push(("shifted n^2 * MSE, this dataset", nf * nf * alg2_mse_bound_leading(&d, eps)?));
        rows.push(("transformed n^2 * MSE, this dataset", nf * nf * alg3_mse_bound_leading(&d, eps)?));
        rows.push(("transformed MSE upper bound, this dataset", lemma1_mse_bound(&d, eps, Mechanism::Transformed)?));
    }
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    println!("epsilon = {e}, range = [{lo}, {hi}]");
    for (label, value) in rows {
        println!("{label:<width$}  {value}");
    }
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> dpmean::Result<()>) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    let mut out = BufWriter::new(file);
    f(&mut out).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))?;
    out.flush().map_err(|e| io_failure(path, e))
}

fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.file_stem().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    output.with_file_name(name)
}

fn cmd_figures(args: FiguresArgs) -> Result<(), Failure> {
    let preset = args.preset.as_deref().map(Preset::parse).transpose()?;
    let (seed, seed_source) = match (args.seed, &args.config) {
        (Some(s), _) => (s, "flag"),
        (None, None) => (DEFAULT_SEED, "default"),
        (None, Some(_)) => (0, "config file"),
    };
    let mut config = match (&preset, &args.config) {
        (Some(p), _) => p.config(args.trials.unwrap_or(PRESET_TRIALS), seed),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            let mut cfg = parse_sweep_config(&text)?;
            if let Some(t) = args.trials {
                cfg.trials = t;
            }
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            cfg
        }
        (None, None) => return Err(Failure::Validation("either --preset or --config is required".into())),
    };
    if args.workers.is_some() {
        config.workers = args.workers;
    }
    config.validate()?;

    let reports = sweep(&config)?;
    let rows = match preset {
        Some(p) => figure_rows(p, &reports)?,
        None => reports.into_iter().map(|report| ReportRow { report, ratio: None }).collect(),
    };
    write_file(&args.output, |out| write_reports_csv(&rows, out))?;

    let mut columns = REPORT_HEADER.to_vec();
    if rows.iter().any(|r| r.ratio.is_some()) {
        columns.push(RATIO_COLUMN);
    }
    let mean_grid: Vec<f64> = config.dataset_specs.iter().map(|s| s.target_mean).collect();
    let meta = RunMetadata {
        tool: "dpmean",
        version: env!("CARGO_PKG_VERSION"),
        preset: preset.as_ref().map(Preset::name),
        seed: config.seed,
        seed_source,
        config: &config,
        epsilon_grid: &config.epsilons,
        mean_grid: &mean_grid,
        columns,
    };
    let meta_path = sidecar_path(&args.output);
    write_file(&meta_path, |out| write_metadata(&meta, out))?;
    println!("wrote {} rows to {} (seed {})", rows.len(), args.output.display(), config.seed);
    Ok(())
}

fn cmd_geometry(args: GeometryArgs) -> Result<(), Failure> {
    let seg = SensitivitySegment::unit();
    let balls = [
        ("naive", Transform2x2::IDENTITY),
        ("shifted", Transform2x2::SHIFTED),
        ("transformed", Transform2x2::TRANSFORMED),
    ];
    let mut polygons: Vec<(String, BallPolygon)> = Vec::new();
    println!("{:<12} {:>11} {:>8} {:>9} {:>10}", "ball", "sensitivity", "area", "covers", "symmetric");
    for (id, t) in balls {
        let r = l1_sensitivity_under(&t, &seg)?;
        let poly = ball_polygon(&t, r)?;
        println!(
            "{id:<12} {r:>11} {:>8} {:>9} {:>10}",
            poly.area(),
            covers_sensitivity(&poly, &seg),
            poly.is_centrally_symmetric(1e-12)
        );
        polygons.push((id.to_string(), poly));
    }
    write_file(&args.output, |out| write_polygons_csv(&polygons, out))?;
    println!("wrote {} polygons to {}", polygons.len(), args.output.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Figures(a) => cmd_figures(a),
        Command::Geometry(a) => cmd_geometry(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
