//! `stablearn` command line.
//!
//! Exit codes: 0 success, 1 usage/configuration/IO, 2 numerical failure.
//! Failures print `{"code": ..., "message": ...}` on stderr.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::config::{Experiment, ExperimentConfig, Format};
use super::experiments::{
    coverage_records, project_one, run_rates, run_spectral, summarize_rates, summarize_spectral,
};
use super::record::write_records;
use crate::densela::{self, Matrix};
use crate::error::{Error, Result};
use crate::stabproj::{epsilon_bound, reverse_i_projection};
use crate::sysid::{least_squares, simulate, InitMode, LinearSystem, Trajectory};

#[derive(Debug, Parser)]
#[command(name = "stablearn", version, about = "Stable system identification via reverse I-projection")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Flat key = value experiment config; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Q = q_scale·I.
    #[arg(long, global = true)]
    q_scale: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, global = true)]
    radius_cap: Option<f64>,
    /// Noise covariance file (default: identity).
    #[arg(long, global = true)]
    sw: Option<PathBuf>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    systems: Option<usize>,
    /// Horizon T.
    #[arg(long, global = true)]
    t: Option<usize>,
    #[arg(long, global = true)]
    t_max: Option<usize>,
    #[arg(long, global = true)]
    t_min: Option<usize>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// True scalar system of the coverage experiment.
    #[arg(long, global = true, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// a_T rule: sqrtT or T^0.75.
    #[arg(long, global = true)]
    a_t: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    oversample_cap: Option<usize>,
    #[arg(long, global = true)]
    rejection_cap: Option<usize>,
    /// Rescale unstable random draws instead of rejecting them.
    #[arg(long, global = true)]
    scale_down: bool,
    /// Add per-stage runtimes to records (output no longer reproducible).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitArg {
    Stationary,
    Zero,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BenchKind {
    Spectral,
    Rates,
    Coverage,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Project a matrix onto the stable matrices; prints JSON.
    Project { matrix: PathBuf },
    /// Least squares from a trajectory file, plus its projection; prints JSON.
    Estimate { trajectory: PathBuf },
    /// Simulate a trajectory and write it in trajectory text format.
    Simulate {
        /// System matrix file.
        #[arg(long = "system")]
        system: PathBuf,
        #[arg(long, value_enum, default_value = "stationary")]
        init: InitArg,
        /// Initial state as comma-separated values; overrides --init.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
    },
    /// Run a Monte-Carlo experiment and write its records.
    Bench {
        #[arg(value_enum)]
        experiment: BenchKind,
    },
}

impl GlobalArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_text(&read(path)?)?;
        }
        macro_rules! set {
            ($($field:ident => $key:literal),*) => {
                $(if let Some(v) = &self.$field {
                    cfg.set($key, &v.to_string())?;
                })*
            };
        }
        set!(delta => "delta", q_scale => "q_scale", seed => "master_seed", radius_cap => "radius_cap",
            n => "n", trials => "trials", systems => "systems", t => "t", t_max => "t_max",
            t_min => "t_min", beta => "beta", theta => "theta", a_t => "a_t", workers => "workers",
            oversample_cap => "oversample_cap", rejection_cap => "rejection_cap");
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if let Some(f) = self.format {
            cfg.format = match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
        }
        cfg.scale_down |= self.scale_down;
        cfg.timings |= self.timings;
        Ok(cfg)
    }

    fn noise(&self, n: usize) -> Result<Matrix> {
        match &self.sw {
            Some(path) => {
                let s_w = Matrix::from_text(&read(path)?)?;
                if s_w.shape() != (n, n) {
                    return Err(Error::DimensionMismatch(format!(
                        "S_w is {}x{}, expected {n}x{n}",
                        s_w.rows(),
                        s_w.cols()
                    )));
                }
                Ok(s_w)
            }
            None => Ok(Matrix::identity(n)),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(value: &T, out: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

/// Writes to `--out` when given, otherwise to `stdout`.
fn emit(cfg: &ExperimentConfig, stdout: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match &cfg.out {
        Some(path) => {
            let mut file = std::io::BufWriter::new(
                fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?,
            );
            f(&mut file)?;
            file.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

/// Summary goes next to the records as `<out>.summary.json`.
fn emit_summary<T: Serialize>(cfg: &ExperimentConfig, summary: &T) -> Result<()> {
    if let Some(path) = &cfg.out {
        let mut name = path.clone().into_os_string();
        name.push(".summary.json");
        let mut buf = Vec::new();
        write_json(summary, &mut buf)?;
        fs::write(&name, buf).map_err(|e| Error::Io(format!("{}: {e}", PathBuf::from(&name).display())))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EstimateOutput {
    #[serde(rename = "T")]
    t: usize,
    theta_hat: Matrix,
    gram_min_eig: f64,
    rho_ls: f64,
    theta_proj: Matrix,
    rho_proj: f64,
    rate: f64,
    epsilon: f64,
    was_already_stable: bool,
}

fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = cli.global.config()?;
    match cli.command {
        Command::Project { matrix } => {
            let theta_prime = Matrix::from_text(&read(&matrix)?)?;
            let s_w = cli.global.noise(theta_prime.rows())?;
            cfg.experiment = Experiment::ProjectOne;
            cfg.validate()?;
            let out = project_one(&theta_prime, &s_w, &cfg)?;
            emit(&cfg, stdout, |w| write_json(&out, w))
        }
        Command::Estimate { trajectory } => {
            let traj = Trajectory::from_text(&read(&trajectory)?)?;
            let s_w = cli.global.noise(traj.dim())?;
            cfg.experiment = Experiment::ProjectOne;
            cfg.validate()?;
            let est = least_squares(&traj)?;
            let q = Matrix::identity(traj.dim()).scale(cfg.q_scale);
            let proj = reverse_i_projection(&est.theta_hat, &s_w, &q, cfg.delta)?;
            let out = EstimateOutput {
                t: est.t,
                rho_ls: densela::spectral_radius(&est.theta_hat)?,
                epsilon: epsilon_bound(&est.theta_hat, &proj, &s_w)?,
                gram_min_eig: est.gram_min_eig,
                rho_proj: proj.spectral_radius_star,
                rate: proj.rate_at_star,
                was_already_stable: proj.was_already_stable,
                theta_hat: est.theta_hat,
                theta_proj: proj.theta_star,
            };
            emit(&cfg, stdout, |w| write_json(&out, w))
        }
        Command::Simulate { system, init, x0 } => {
            let theta = Matrix::from_text(&read(&system)?)?;
            let s_w = cli.global.noise(theta.rows())?;
            let init = match (x0, init) {
                (Some(text), _) => InitMode::Given(
                    text.split(',')
                        .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("--x0 {v:?}: {e}"))))
                        .collect::<Result<_>>()?,
                ),
                (None, InitArg::Stationary) => InitMode::Stationary,
                (None, InitArg::Zero) => InitMode::Zero,
            };
            let t = cfg
                .t
                .ok_or_else(|| Error::Config("simulate needs a horizon (--t)".into()))?;
            let sys = LinearSystem::new(theta, s_w, init)?;
            let traj = simulate(&sys, t, cfg.master_seed)?;
            emit(&cfg, stdout, |w| Ok(w.write_all(traj.to_text().as_bytes())?))
        }
        Command::Bench { experiment } => {
            cfg.experiment = match experiment {
                BenchKind::Spectral => Experiment::Spectral,
                BenchKind::Rates => Experiment::Rates,
                BenchKind::Coverage => Experiment::Coverage,
            };
            let records = match cfg.experiment {
                Experiment::Spectral => {
                    let r = run_spectral(&cfg)?;
                    emit_summary(&cfg, &summarize_spectral(&r))?;
                    r
                }
                Experiment::Rates => {
                    let r = run_rates(&cfg)?;
                    emit_summary(&cfg, &summarize_rates(&r))?;
                    r
                }
                _ => {
                    emit_summary(&cfg, &super::run_coverage(&cfg)?)?;
                    coverage_records(&cfg)?
                }
            };
            emit(&cfg, stdout, |w| write_records(&records, cfg.format, cfg.timings, w))
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    code: &'a str,
    message: String,
}

fn report(stderr: &mut dyn Write, code: &str, message: String) {
    let line = serde_json::to_string(&ErrorReport { code, message }).unwrap_or_default();
    let _ = writeln!(stderr, "{line}");
}

/// Runs the CLI with explicit output streams; returns the exit code.
pub fn run_cli<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            report(stderr, "usage", e.to_string().trim_end().to_string());
            return 1;
        }
    };
    match run(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            report(stderr, e.code(), e.to_string());
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = run_cli(argv, &mut stdout.lock(), &mut stderr.lock());
    let _ = std::io::stdout().flush();
    code
}
