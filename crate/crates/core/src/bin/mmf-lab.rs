//! Command-line front end: single runs, DFA of series files, sweeps,
//! reports and the self-test suite.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mmf_lab::analytics::FitMode;
use mmf_lab::harness::{
    self, read_records, read_series, report_with_mode, selftest, write_fluctuation, write_report, write_series,
    Preset, SweepConfig,
};
use mmf_lab::hurst::{default_scales, dfa, fit_hurst, FitRange, Segmentation};
use mmf_lab::mmf::{run, ModelParams, DEFAULT_PRICE_SCALE};
use mmf_lab::stochastic::DEFAULT_IAAFT_MAX_ITER;
use mmf_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "mmf-lab", version, about = "Modified Mike-Farmer order-book simulation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one run and write its kept mid-quote returns.
    Simulate(SimulateArgs),
    /// Estimate the Hurst index of a series file by DFA.
    Dfa(DfaArgs),
    /// Run a parameter sweep and write per-run records and a manifest.
    Sweep(SweepArgs),
    /// Reduce a record file to tables, correlations and regressions.
    Report(ReportArgs),
    /// Run the invariant self-test suite.
    Selftest {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1.3)]
    alpha_x: f64,
    #[arg(long, default_value_t = 0.8)]
    hurst_x: f64,
    #[arg(long, default_value_t = 0.75)]
    hurst_s: f64,
    #[arg(long, default_value_t = 200_000)]
    n_events: usize,
    /// Trailing returns kept; defaults to a fifth of the events.
    #[arg(long)]
    keep: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_PRICE_SCALE)]
    price_scale: f64,
    #[arg(long, default_value_t = DEFAULT_IAAFT_MAX_ITER)]
    iaaft_max_iter: usize,
    /// Return series file, one value per line.
    #[arg(short, long, default_value = "returns.txt")]
    output: PathBuf,
    /// Write the final book depth as tab-separated text.
    #[arg(long)]
    book_dump: Option<PathBuf>,
}

#[derive(Args)]
struct DfaArgs {
    /// Series file, one value per line.
    input: PathBuf,
    #[arg(long, default_value_t = FitRange::default().min)]
    min_scale: usize,
    #[arg(long, default_value_t = FitRange::default().max_exclusive)]
    max_scale: usize,
    /// Segment from the start only instead of from both ends.
    #[arg(long)]
    forward_only: bool,
    /// Write (scale, F) rows for plotting.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML configuration; keys override the selected preset.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Base profile when no config file is given.
    #[arg(long, default_value = "desk")]
    preset: String,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// Also write the report next to the records.
    #[arg(long)]
    report: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Record file written by `sweep`.
    records: PathBuf,
    /// Directory for report.json and report.txt; defaults to the record
    /// file's directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Fit regressions on cell means instead of individual runs.
    #[arg(long)]
    cell_means: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Dfa(a) => run_dfa(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Report(a) => run_report(a),
        Command::Selftest { seed } => return run_selftest(seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut params = ModelParams::new(a.alpha_x, a.hurst_x, a.hurst_s, a.n_events, a.seed);
    if let Some(keep) = a.keep {
        params = params.with_kept_returns(keep);
    }
    params.price_scale = a.price_scale;
    params.iaaft_max_iter = a.iaaft_max_iter;
    let res = run(&params)?;
    write_series(&a.output, &res.returns.values)?;
    if let Some(path) = &a.book_dump {
        let file = fs::File::create(path).map_err(|e| io_error(path, e))?;
        res.book.write_depth(file).map_err(|e| io_error(path, e))?;
    }
    let summary = serde_json::json!({
        "params": params,
        "kept_returns": res.returns.kept,
        "recorded_returns": res.returns.recorded,
        "diagnostics": res.diagnostics,
        "output": a.output,
    });
    println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
    Ok(())
}

fn run_dfa(a: DfaArgs) -> Result<()> {
    let series = read_series(&a.input)?;
    let range = FitRange {
        min: a.min_scale,
        max_exclusive: a.max_scale,
    };
    let mode = if a.forward_only {
        Segmentation::ForwardOnly
    } else {
        Segmentation::BothEnds
    };
    let scales = default_scales(series.len(), range);
    let fluct = dfa(&series, &scales, mode)?;
    if let Some(path) = &a.plot {
        write_fluctuation(path, &fluct)?;
    }
    let fit = fit_hurst(&fluct, range)?;
    println!(
        "H = {:.4}  intercept = {:.4}  r2 = {:.4}  scales = {}  n = {}",
        fit.hurst,
        fit.intercept,
        fit.r2,
        fit.scales.len(),
        series.len()
    );
    Ok(())
}

fn run_sweep(a: SweepArgs) -> Result<()> {
    let mut config = match &a.config {
        Some(path) => SweepConfig::load(path)?,
        None => SweepConfig::preset(a.preset.parse::<Preset>()?),
    };
    if let Some(dir) = a.output_dir {
        config.output_dir = Some(dir);
    }
    if let Some(seed) = a.master_seed {
        config.master_seed = seed;
    }
    if let Some(w) = a.workers {
        config.workers = w;
    }
    if let Some(r) = a.reps {
        config.reps = r;
    }
    config.validate()?;
    eprintln!(
        "sweep: {} cells x {} reps, {} events per run, {} workers",
        config.cells().len(),
        config.reps,
        config.n_events,
        config.workers
    );
    let out = harness::sweep(&config)?;
    let m = &out.manifest;
    println!(
        "{} runs: {} ok, {} degenerate, {} failed",
        m.runs_total, m.runs_ok, m.runs_degenerate, m.runs_failed
    );
    println!("records:  {}", out.records_path.display());
    println!("manifest: {}", out.manifest_path.display());
    if a.report {
        let rep = report_with_mode(&out.records, FitMode::PerRun)?;
        let files = write_report(&rep, &config.resolved_output_dir())?;
        println!("report:   {}", files.text.display());
    }
    Ok(())
}

fn run_report(a: ReportArgs) -> Result<()> {
    let records = read_records(&a.records)?;
    let mode = if a.cell_means {
        FitMode::CellMeans
    } else {
        FitMode::PerRun
    };
    let rep = report_with_mode(&records, mode)?;
    let dir = a
        .output_dir
        .unwrap_or_else(|| a.records.parent().map(Path::to_path_buf).unwrap_or_default());
    let files = write_report(&rep, &dir)?;
    print!("{rep}");
    eprintln!("wrote {} and {}", files.json.display(), files.text.display());
    Ok(())
}

fn run_selftest(seed: u64) -> ExitCode {
    let checks = selftest::run_all(seed);
    for c in &checks {
        println!("{c}");
    }
    if checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
