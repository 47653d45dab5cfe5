//! `cyclint`: simulate arrivals, fit cyclic rates, and rerun the studies.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cyclic_intensity::coefficients::{fit_coefficients, CoefficientFit};
use cyclic_intensity::experiments::{
    run_convergence, run_dynrange, run_sawtooth, ConvergenceConfig, DynRangeConfig, ExperimentReport, SawtoothConfig,
};
use cyclic_intensity::periodogram::{evaluate_periodogram, DEFAULT_OVERSAMPLE};
use cyclic_intensity::rate_model::preset;
use cyclic_intensity::recovery::{run_recovery, RecoveryConfig, ThresholdMode};
use cyclic_intensity::{simulate_nhpp, Error, EventSeries, GapRule, RateModel, RngStream, WindowKind, WindowSpec};

#[derive(Parser)]
#[command(name = "cyclint", version, about = "Cyclic Poisson rate estimation from event times")]
struct Cli {
    /// Worker threads for replicate-level parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate arrivals from a model file or a named preset.
    Simulate(SimulateArgs),
    /// Write the periodogram of an event file as CSV.
    Periodogram(PeriodogramArgs),
    /// Select frequencies and fit the rate.
    Fit(FitArgs),
    /// Run one of the simulation studies.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Rate model JSON.
    #[arg(long, conflicts_with = "preset")]
    model: Option<PathBuf>,
    /// convergence | sawtooth | lunar | constant
    #[arg(long)]
    preset: Option<String>,
    /// Preset parameter as key=value, repeatable (e.g. r=10, T=3000, rate=5).
    #[arg(long = "param", value_parser = parse_key_value)]
    params: Vec<(String, String)>,
    /// Observation horizon.
    #[arg(long = "horizon", short = 'T')]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Event file: `# T=<horizon>` then one timestamp per line.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, default_value = "hann")]
    window: WindowKind,
    /// Upper end of the searched band `[0, B]`.
    #[arg(long, default_value_t = 0.5)]
    band: f64,
    /// Grid points per `1/T`.
    #[arg(long, default_value_t = DEFAULT_OVERSAMPLE)]
    oversample: usize,
}

#[derive(Args)]
struct PeriodogramArgs {
    #[command(flatten)]
    spectrum: SpectrumArgs,
    /// Keep the peak at zero instead of subtracting the mean-rate term.
    #[arg(long)]
    uncentralized: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Tau,
    TauXi,
    Bic,
}

impl From<ModeArg> for ThresholdMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Tau => ThresholdMode::Tau,
            ModeArg::TauXi => ThresholdMode::TauXi,
            ModeArg::Bic => ThresholdMode::Bic,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    spectrum: SpectrumArgs,
    #[arg(long, value_enum, default_value = "tau-xi")]
    mode: ModeArg,
    /// Exclusion radius in units of 1/T.
    #[arg(long, default_value_t = 3.0)]
    radius: f64,
    #[arg(long, default_value_t = 1e-4)]
    xi: f64,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Defaults to 2 sqrt(log T / T).
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 4.0)]
    gamma: f64,
    /// Homogeneous replicates for the simulated noise level.
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long, default_value_t = 30)]
    max_frequencies: usize,
    #[arg(long)]
    uncentralized: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also emit coefficients with the Gram matrix replaced by the identity.
    #[arg(long)]
    gamma_id: bool,
    /// Write a folded rate profile over this period.
    #[arg(long)]
    period: Option<f64>,
    /// Bins in the folded profile.
    #[arg(long, default_value_t = 24)]
    bins: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyArg {
    Convergence,
    Sawtooth,
    Dynrange,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: StudyArg,
    #[arg(long)]
    replicates: Option<usize>,
    /// Homogeneous replicates behind each simulated noise level.
    #[arg(long)]
    noise_replicates: Option<usize>,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long)]
    oversample: Option<usize>,
    /// Horizon ladder for the convergence study, e.g. 250,500,1000.
    #[arg(long, value_delimiter = ',')]
    ladder: Vec<f64>,
    /// Spacing rules for the convergence study: numbers, `sixth`, `sqrt`.
    #[arg(long, value_delimiter = ',')]
    gaps: Vec<String>,
    /// Amplitude ratios for the dynamic-range study.
    #[arg(long, value_delimiter = ',')]
    ratios: Vec<f64>,
    /// Horizon for the sawtooth and dynamic-range studies.
    #[arg(long = "horizon", short = 'T')]
    horizon: Option<f64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got '{s}'"))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SingularGram { .. } | Error::NotConjugate { .. } | Error::DegenerateFit => 3,
        Error::CapExceeded { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot size worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Periodogram(a) => periodogram(a),
        Command::Fit(a) => fit(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn output(path: Option<&Path>) -> cyclic_intensity::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_events(path: &Path) -> cyclic_intensity::Result<EventSeries> {
    EventSeries::read_from(BufReader::new(File::open(path)?))
}

fn simulate(a: SimulateArgs) -> cyclic_intensity::Result<()> {
    let model: RateModel = match (&a.model, &a.preset) {
        (Some(path), _) => serde_json::from_reader(BufReader::new(File::open(path)?))?,
        (None, Some(name)) => {
            let mut params: BTreeMap<String, String> = a.params.iter().cloned().collect();
            params.entry("T".into()).or_insert_with(|| a.horizon.to_string());
            preset(name, &params)?
        }
        (None, None) => return Err(Error::InvalidParameter("give --model or --preset".into())),
    };
    model.check_nonnegative(a.horizon)?;
    let events = simulate_nhpp(&model, a.horizon, RngStream::new(a.seed, 0))?;
    let mut w = output(a.out.as_deref())?;
    events.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

fn periodogram(a: PeriodogramArgs) -> cyclic_intensity::Result<()> {
    let events = read_events(&a.spectrum.input)?;
    let window = WindowSpec::new(a.spectrum.window, events.horizon())?;
    let grid = evaluate_periodogram(&events, window, a.spectrum.band, a.spectrum.oversample, !a.uncentralized)?;
    let mut w = output(a.out.as_deref())?;
    grid.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> cyclic_intensity::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn fit(a: FitArgs) -> cyclic_intensity::Result<()> {
    let events = read_events(&a.spectrum.input)?;
    if events.is_empty() {
        return Err(Error::NoEvents);
    }
    let horizon = events.horizon();
    let cfg = RecoveryConfig {
        window: a.spectrum.window,
        band: a.spectrum.band,
        radius: a.radius,
        mode: a.mode.into(),
        xi: a.xi,
        alpha: a.alpha,
        beta: a.beta,
        gamma: a.gamma,
        replicates: a.replicates,
        max_frequencies: a.max_frequencies,
        centralized: !a.uncentralized,
        oversample: a.spectrum.oversample,
        ..RecoveryConfig::default()
    };
    cfg.validate(horizon)?;
    if let Some(p) = a.period {
        if !(p.is_finite() && p > 0.0) || a.bins == 0 {
            return Err(Error::InvalidParameter("profile needs a positive period and at least one bin".into()));
        }
    }
    fs::create_dir_all(&a.out_dir)?;

    let window = WindowSpec::new(cfg.window, horizon)?;
    let grid = evaluate_periodogram(&events, window, cfg.band, cfg.oversample, cfg.centralized)?;
    grid.write_csv(BufWriter::new(File::create(a.out_dir.join("spectrum.csv"))?))?;

    let selected = run_recovery(&events, &cfg, RngStream::new(a.seed, 0))?;
    write_json(&a.out_dir.join("frequencies.json"), &selected)?;

    let fit = fit_coefficients(&events, &selected.frequencies, cfg.band, false)?;
    let model = fit.reconstruct()?;
    write_json(&a.out_dir.join("model.json"), &model)?;
    write_json(&a.out_dir.join("coefficients.json"), &fit)?;

    if a.gamma_id {
        let baseline = fit_coefficients(&events, &selected.frequencies, cfg.band, true)?;
        write_json(&a.out_dir.join("coefficients_identity.json"), &baseline)?;
        write_json(&a.out_dir.join("model_identity.json"), &baseline.reconstruct()?)?;
    }
    if let Some(period) = a.period {
        write_profile(&a.out_dir.join("profile.csv"), &events, &fit, period, a.bins)?;
    }
    eprintln!(
        "selected {} frequencies: {:?}",
        selected.len(),
        selected.frequencies
    );
    Ok(())
}

/// Events folded modulo `period` into equal bins: observed rate per bin
/// against the fitted rate averaged over the same exposure.
fn write_profile(path: &Path, events: &EventSeries, fit: &CoefficientFit, period: f64, bins: usize) -> cyclic_intensity::Result<()> {
    let model = fit.reconstruct()?;
    let horizon = events.horizon();
    let width = period / bins as f64;
    let mut counts = vec![0usize; bins];
    for &t in events.timestamps() {
        let b = ((t.rem_euclid(period) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let cycles = (horizon / period).ceil() as usize;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "bin_start,bin_end,exposure,observed_rate,fitted_rate")?;
    for (b, &count) in counts.iter().enumerate() {
        let (lo, hi) = (b as f64 * width, (b + 1) as f64 * width);
        let (mut exposure, mut expected) = (0.0, 0.0);
        for c in 0..cycles {
            let start = (c as f64 * period + lo).min(horizon);
            let end = (c as f64 * period + hi).min(horizon);
            if end > start {
                exposure += end - start;
                expected += model.cumulative_rate(end) - model.cumulative_rate(start);
            }
        }
        let (observed, fitted) =
            if exposure > 0.0 { (count as f64 / exposure, expected / exposure) } else { (f64::NAN, f64::NAN) };
        writeln!(w, "{lo},{hi},{exposure},{observed},{fitted}")?;
    }
    w.flush()?;
    Ok(())
}

fn experiment(a: ExperimentArgs) -> cyclic_intensity::Result<()> {
    let report: ExperimentReport = match a.name {
        StudyArg::Convergence => {
            let mut cfg = ConvergenceConfig { seed: a.seed, ..ConvergenceConfig::default() };
            if !a.ladder.is_empty() {
                cfg.horizons = a.ladder.clone();
            }
            if !a.gaps.is_empty() {
                cfg.rules = a.gaps.iter().map(|g| g.parse::<GapRule>()).collect::<Result<_, _>>()?;
            }
            if let Some(r) = a.replicates {
                cfg.replicates = r;
            }
            if let Some(r) = a.noise_replicates {
                cfg.noise_replicates = r;
            }
            if let Some(o) = a.oversample {
                cfg.oversample = o;
            }
            run_convergence(&cfg)?
        }
        StudyArg::Sawtooth => {
            let mut cfg = SawtoothConfig { seed: a.seed, ..SawtoothConfig::default() };
            if let Some(t) = a.horizon {
                cfg.horizon = t;
            }
            if let Some(r) = a.replicates {
                cfg.replicates = r;
            }
            if let Some(r) = a.noise_replicates {
                cfg.noise_replicates = r;
            }
            if let Some(o) = a.oversample {
                cfg.oversample = o;
            }
            run_sawtooth(&cfg)?
        }
        StudyArg::Dynrange => {
            let mut cfg = DynRangeConfig { seed: a.seed, ..DynRangeConfig::default() };
            if !a.ratios.is_empty() {
                cfg.ratios = a.ratios.clone();
            }
            if let Some(t) = a.horizon {
                cfg.horizon = t;
            }
            if let Some(r) = a.replicates {
                cfg.replicates = r;
            }
            if let Some(r) = a.noise_replicates {
                cfg.noise_replicates = r;
            }
            if let Some(o) = a.oversample {
                cfg.oversample = o;
            }
            run_dynrange(&cfg)?
        }
    };
    let written = report.write_to_dir(&a.out_dir)?;
    print_summary(&report);
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn print_summary(report: &ExperimentReport) {
    let fmt = |s: Option<cyclic_intensity::experiments::Summary>| match s {
        Some(s) => format!("{:.4e} ({:.1e})", s.mean, s.se),
        None => "-".into(),
    };
    println!("{} (seed {}, {:.1} s)", report.name, report.master_seed, report.runtime_secs);
    for a in &report.aggregates {
        println!(
            "  {:<10} {:<12} T={:<6} max_err={} mse={} correct={} spurious={} missed={} detect={} failed={}",
            a.scenario,
            a.method,
            a.horizon,
            fmt(a.max_error),
            fmt(a.mse),
            fmt(a.correct),
            fmt(a.spurious),
            fmt(a.missed),
            a.detection_rate.map_or("-".into(), |d| format!("{d:.2}")),
            a.failures
        );
    }
    for s in &report.slopes {
        println!("  slope {:<10} {:<12} {:.3} ({:.3})", s.scenario, s.method, s.slope, s.slope_se);
    }
}
