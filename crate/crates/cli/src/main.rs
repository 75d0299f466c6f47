//! `vlasov-lab`: run experiments, verify lemmas, fit decay rates.
//!
//! Exit codes: 0 success, 1 runtime error, 2 failed check, 3 invalid
//! configuration or arguments, 4 resource budget exceeded.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vlasov_lab::diagnostics::{decay_fit, default_window, LemmaSuite};
use vlasov_lab::greens::bessel_table_csv;
use vlasov_lab::runner::{
    decay_sweep, exit_code, parse_series_csv, resolve_output_dir, run_experiment, verify_manifest, worker_count, write_failure, write_outcome,
    ExperimentConfig, CHECK_FAILURE_EXIT,
};
use vlasov_lab::LabError;

#[derive(Parser)]
#[command(name = "vlasov-lab", version, about = "Vlasov–Poisson / Vlasov–Yukawa decay laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` config file (defaults apply to absent keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides applied after the file, e.g. `--set grid.nx=32`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its output directory.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the fully resolved config.
    ShowConfig {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the numerical lemma suites.
    VerifyLemmas {
        /// Comma-separated suites (bessel, kernel-integral, ks, commutators) or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Directory for one `<suite>.csv` table per suite.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit `value ∝ (1+t)^p` to a `t,value` series CSV.
    FitDecay {
        series: PathBuf,
        /// Fit window `t0,t1` (default: the last decade up to the final time).
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
    /// Run one experiment per ε and fit the decay of a series.
    DecaySweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated amplitudes.
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, default_value = "sup_rho")]
        series: String,
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
        /// Concurrent runs (default: VLASOV_LAB_WORKERS or the core count).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Tabulate `K_ν(r)` against its envelope as CSV.
    BesselTable {
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5,2")]
        nu: Vec<f64>,
        #[arg(long, default_value_t = 1e-3)]
        r_min: f64,
        #[arg(long, default_value_t = 100.0)]
        r_max: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
    /// Re-hash the files listed in a run directory's manifest.
    VerifyManifest { dir: PathBuf },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected t0,t1")?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad t0 '{a}'"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad t1 '{b}'"))?;
    if !(a >= 0.0 && b > a) {
        return Err("window needs 0 <= t0 < t1".into());
    }
    Ok((a, b))
}

fn load_config(args: &ConfigArgs) -> vlasov_lab::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::parse(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    for (k, o) in args.overrides.iter().enumerate() {
        let (key, value) =
            o.split_once('=').ok_or_else(|| LabError::Config { line: 0, message: format!("override #{} must be KEY=VALUE, got '{o}'", k + 1) })?;
        cfg.set(0, key.trim(), value.trim())?;
    }
    Ok(cfg)
}

fn fail(e: &LabError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(Some(e)) as u8)
}

fn run(config: &ConfigArgs, output: Option<&Path>) -> ExitCode {
    let cfg = match load_config(config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let dir = output.map(Path::to_path_buf).unwrap_or_else(|| resolve_output_dir(&cfg.output));
    match run_experiment(&cfg) {
        Ok(out) => match write_outcome(&dir, &out) {
            Ok(m) => {
                println!("wrote {} ({} observations, t = {}, mass error {:?})", dir.display(), m.observations, m.final_time, m.mass_error);
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Err(f) => {
            if !f.record.times.is_empty() {
                if let Err(e) = write_failure(&dir, &f) {
                    eprintln!("could not write the partial record: {e}");
                } else {
                    eprintln!("partial record written to {}", dir.display());
                }
            }
            fail(&f.error)
        }
    }
}

fn verify_lemmas(suite: &str, output: Option<&Path>) -> ExitCode {
    let suites = match LemmaSuite::parse_list(suite) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let mut all_passed = true;
    for s in suites {
        let report = match s.run() {
            Ok(r) => r,
            Err(e) => return fail(&e),
        };
        println!("[{}] worst ratio {:.4e} (threshold {:.4e})", report.suite, report.worst_ratio, report.threshold);
        for c in &report.checks {
            println!("  {c}");
        }
        all_passed &= report.passed();
        if let Some(dir) = output {
            let written = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join(format!("{}.csv", report.suite)), report.table_csv()));
            if let Err(e) = written {
                return fail(&e.into());
            }
        }
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(CHECK_FAILURE_EXIT as u8)
    }
}

fn fit_decay_file(path: &Path, window: Option<(f64, f64)>) -> vlasov_lab::Result<String> {
    let series = parse_series_csv(&std::fs::read_to_string(path)?)?;
    let series: Vec<_> = series.into_iter().filter(|(_, v)| v.is_finite()).collect();
    let t_end = series.iter().map(|p| p.0).fold(0.0, f64::max);
    let fit = decay_fit(&series, window.unwrap_or_else(|| default_window(t_end)))?;
    Ok(serde_json::to_string_pretty(&fit)?)
}

fn sweep(config: &ConfigArgs, eps: &[f64], series: &str, window: Option<(f64, f64)>, workers: Option<usize>) -> ExitCode {
    let cfg = match load_config(config).and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let window = window.unwrap_or_else(|| default_window(cfg.time.t_end));
    let points = decay_sweep(&cfg, eps, series, window, workers.unwrap_or_else(worker_count));
    match serde_json::to_string_pretty(&points) {
        Ok(s) => println!("{s}"),
        Err(e) => return fail(&e.into()),
    }
    if points.iter().all(|p| p.error.is_none()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, output } => run(&config, output.as_deref()),
        Command::ShowConfig { config } => match load_config(&config) {
            Ok(c) => {
                print!("{}", c.serialize());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::VerifyLemmas { suite, output } => verify_lemmas(&suite, output.as_deref()),
        Command::FitDecay { series, window } => match fit_decay_file(&series, window) {
            Ok(s) => {
                println!("{s}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::DecaySweep { config, eps, series, window, workers } => sweep(&config, &eps, &series, window, workers),
        Command::BesselTable { nu, r_min, r_max, points } => {
            if !(r_min > 0.0 && r_max > r_min && points >= 2) {
                return fail(&LabError::InvalidArgument("bessel-table needs 0 < r_min < r_max and points >= 2".into()));
            }
            let radii: Vec<f64> = (0..points).map(|k| r_min * (r_max / r_min).powf(k as f64 / (points - 1) as f64)).collect();
            match bessel_table_csv(&nu, &radii) {
                Ok(s) => {
                    print!("{s}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::VerifyManifest { dir } => match verify_manifest(&dir) {
            Ok(bad) if bad.is_empty() => {
                println!("manifest ok");
                ExitCode::SUCCESS
            }
            Ok(bad) => {
                for b in bad {
                    println!("mismatch: {b}");
                }
                ExitCode::from(CHECK_FAILURE_EXIT as u8)
            }
            Err(e) => fail(&e),
        },
    }
}
