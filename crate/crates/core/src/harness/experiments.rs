use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::config::{Experiment, ExperimentConfig};
use super::record::{ExperimentRecord, Runtimes};
use super::{derive_seed, par_map};
use crate::densela::{self, classify, Matrix, Stability};
use crate::error::{Error, Result};
use crate::stabproj::{self, epsilon_bound, reverse_i_projection};
use crate::sysid::{least_squares, simulate, InitMode, LinearSystem, Trajectory};

/// Eigenvalues 0.9 and 0.95 ± 0.1i.
const SPECTRAL_Y: [[f64; 3]; 3] = [[0.95, 0.1, 1.0], [-0.1, 0.95, 0.0], [0.0, 0.0, 0.9]];

/// θ = Y ⊗ I_m.
pub fn spectral_theta(m: usize) -> Matrix {
    let y = Matrix::from_fn(3, 3, |i, j| SPECTRAL_Y[i][j]);
    y.kron(&Matrix::identity(m))
}

fn require(cfg: &ExperimentConfig, which: Experiment) -> Result<()> {
    if cfg.experiment != which {
        return Err(Error::Config(format!(
            "config is for {:?}, not {:?}",
            cfg.experiment, which
        )));
    }
    cfg.validate()
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

struct Trial<'a> {
    theta: &'a Matrix,
    rho_true: f64,
    s_w: &'a Matrix,
    q: &'a Matrix,
    trial_id: u64,
    seed: u64,
}

impl Trial<'_> {
    /// Least squares on `traj`, then projection and clipping of the estimate.
    fn evaluate(&self, traj: &Trajectory, cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
        let start = Instant::now();
        let theta_hat = least_squares(traj)?.theta_hat;
        let runtime_ms_ls = ms(start);

        let start = Instant::now();
        let proj = reverse_i_projection(&theta_hat, self.s_w, self.q, cfg.delta)?;
        let epsilon = epsilon_bound(&theta_hat, &proj, self.s_w)?;
        let runtime_ms_proj = ms(start);

        let start = Instant::now();
        let clipped = match stabproj::clip_eigenvalues(&theta_hat, cfg.radius_cap) {
            Ok(c) => Some(c),
            Err(Error::DefectiveMatrix { .. }) => None,
            Err(e) => return Err(e),
        };
        let runtime_ms_clip = ms(start);

        let err = |m: &Matrix| densela::operator_norm(&(m - self.theta));
        let (rho_clip, err_clip) = match &clipped {
            Some(c) => (Some(densela::spectral_radius(c)?), Some(err(c)?)),
            None => (None, None),
        };
        Ok(ExperimentRecord {
            trial_id: self.trial_id,
            seed: self.seed,
            t: traj.horizon(),
            rho_true: self.rho_true,
            rho_ls: densela::spectral_radius(&theta_hat)?,
            rho_proj: proj.spectral_radius_star,
            rho_clip,
            err_ls: err(&theta_hat)?,
            err_proj: err(&proj.theta_star)?,
            err_clip,
            rate_at_proj: proj.rate_at_star,
            epsilon,
            ls_was_stable: proj.was_already_stable,
            runtime_ms: cfg.timings.then_some(Runtimes {
                runtime_ms_ls,
                runtime_ms_proj,
                runtime_ms_clip,
            }),
        })
    }
}

/// Trials on θ = Y ⊗ I_m whose least-squares estimate is unstable.
///
/// Candidate trajectories are drawn in index order and the first `trials`
/// with an unstable estimate are kept, so the output does not depend on the
/// worker count. Gives up after `oversample_cap × trials` candidates.
pub fn run_spectral(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    require(cfg, Experiment::Spectral)?;
    let m = cfg.spectral_m()?;
    let t = cfg.spectral_horizon()?;
    let theta = spectral_theta(m);
    let n = theta.rows();
    let s_w = Matrix::identity(n);
    let q = Matrix::identity(n).scale(cfg.q_scale);
    let rho_true = densela::spectral_radius(&theta)?;
    let system = LinearSystem::new(theta.clone(), s_w.clone(), InitMode::Stationary)?;

    let budget = cfg.oversample_cap.saturating_mul(cfg.trials) as u64;
    let chunk = (cfg.trials as u64 * 4).max(64);
    let mut records = Vec::with_capacity(cfg.trials);
    let mut next = 0u64;
    while records.len() < cfg.trials {
        if next >= budget {
            return Err(Error::OversamplingExhausted {
                accepted: records.len(),
                requested: cfg.trials,
                attempts: next as usize,
            });
        }
        let end = (next + chunk).min(budget);
        let batch = par_map(cfg.workers, (next..end).collect(), |k| {
            let seed = derive_seed(cfg.master_seed, k);
            let traj = simulate(&system, t, seed)?;
            let theta_hat = least_squares(&traj)?.theta_hat;
            if classify(densela::spectral_radius(&theta_hat)?) == Stability::Stable {
                return Ok(None);
            }
            let trial = Trial {
                theta: &theta,
                rho_true,
                s_w: &s_w,
                q: &q,
                trial_id: 0,
                seed,
            };
            trial.evaluate(&traj, cfg).map(Some)
        })?;
        for r in batch.into_iter().flatten() {
            if records.len() == cfg.trials {
                break;
            }
            records.push(ExperimentRecord {
                trial_id: records.len() as u64,
                ..r
            });
        }
        next = end;
    }
    Ok(records)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    pub trials: usize,
    pub rho_true: f64,
    pub mean_rho_ls: f64,
    pub mean_rho_proj: f64,
    pub max_rho_proj: f64,
    pub mean_rho_clip: Option<f64>,
    /// Fraction of records with ρ(θ̂) ≥ 1.
    pub fraction_ls_unstable: f64,
    pub fraction_proj_stable: f64,
    pub mean_err_ls: f64,
    pub mean_err_proj: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

pub fn summarize_spectral(records: &[ExperimentRecord]) -> SpectralSummary {
    let frac = |pred: &dyn Fn(&ExperimentRecord) -> bool| {
        records.iter().filter(|r| pred(r)).count() as f64 / records.len().max(1) as f64
    };
    let clip: Vec<f64> = records.iter().filter_map(|r| r.rho_clip).collect();
    SpectralSummary {
        trials: records.len(),
        rho_true: records.first().map_or(f64::NAN, |r| r.rho_true),
        mean_rho_ls: mean(records.iter().map(|r| r.rho_ls)),
        mean_rho_proj: mean(records.iter().map(|r| r.rho_proj)),
        max_rho_proj: records.iter().map(|r| r.rho_proj).fold(f64::NAN, f64::max),
        mean_rho_clip: (!clip.is_empty()).then(|| mean(clip.into_iter())),
        fraction_ls_unstable: frac(&|r| r.rho_ls >= 1.0),
        fraction_proj_stable: frac(&|r| r.rho_proj < 1.0),
        mean_err_ls: mean(records.iter().map(|r| r.err_ls)),
        mean_err_proj: mean(records.iter().map(|r| r.err_proj)),
    }
}

/// Draws a standard-normal matrix until it is stable, or rescales the first
/// unstable draw when `scale_down` is set.
fn sample_stable(n: usize, seed: u64, cfg: &ExperimentConfig) -> Result<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cfg.rejection_cap {
        let draw = Matrix::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        let rho = densela::spectral_radius(&draw)?;
        if classify(rho) == Stability::Stable {
            return Ok(draw);
        }
        if cfg.scale_down {
            return Ok(draw.scale(1.0 / (1.05 * rho)));
        }
    }
    Err(Error::RejectionCapExceeded {
        attempts: cfg.rejection_cap,
        hint: "random normal matrices are rarely stable in this dimension; set scale_down = true (--scale-down) to divide draws by 1.05·ρ".into(),
    })
}

/// Errors of least squares and its projection over a grid of horizons.
///
/// `systems` stable matrices are sampled; each gets `trials` stationary
/// trajectories of length T_max whose prefixes give the grid points.
/// Records are ordered by (trial_id, T).
pub fn run_rates(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    require(cfg, Experiment::Rates)?;
    let n = cfg.n;
    let grid = cfg.rates_grid()?;
    let t_max = cfg.rates_t_max();
    let s_w = Matrix::identity(n);
    let q = Matrix::identity(n).scale(cfg.q_scale);

    let systems = par_map(cfg.workers, (0..cfg.systems as u64).collect(), |s| {
        let sys_seed = derive_seed(cfg.master_seed, s);
        let theta = sample_stable(n, sys_seed, cfg)?;
        let rho = densela::spectral_radius(&theta)?;
        let system = LinearSystem::new(theta, s_w.clone(), InitMode::Stationary)?;
        Ok((sys_seed, rho, system))
    })?;

    let jobs: Vec<(usize, u64)> = (0..cfg.systems)
        .flat_map(|s| (0..cfg.trials as u64).map(move |j| (s, j)))
        .collect();
    let per_trajectory = par_map(cfg.workers, jobs, |(s, j)| {
        let (sys_seed, rho_true, system) = &systems[s];
        let seed = derive_seed(*sys_seed, j + 1);
        let traj = simulate(system, t_max, seed)?;
        let trial = Trial {
            theta: &system.theta,
            rho_true: *rho_true,
            s_w: &s_w,
            q: &q,
            trial_id: s as u64 * cfg.trials as u64 + j,
            seed,
        };
        grid.iter()
            .map(|&t| trial.evaluate(&traj.prefix(t)?, cfg))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(per_trajectory.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct RatesPoint {
    #[serde(rename = "T")]
    pub t: usize,
    pub count: usize,
    pub mean_err_ls: f64,
    pub min_err_ls: f64,
    pub max_err_ls: f64,
    pub mean_err_proj: f64,
    pub min_err_proj: f64,
    pub max_err_proj: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatesSummary {
    pub points: Vec<RatesPoint>,
    /// Least-squares slope of log(mean err) against log T.
    pub slope_ls: f64,
    pub slope_proj: f64,
}

pub fn summarize_rates(records: &[ExperimentRecord]) -> RatesSummary {
    let mut ts: Vec<usize> = records.iter().map(|r| r.t).collect();
    ts.sort_unstable();
    ts.dedup();
    let points: Vec<RatesPoint> = ts
        .into_iter()
        .map(|t| {
            let at: Vec<&ExperimentRecord> = records.iter().filter(|r| r.t == t).collect();
            let ls = at.iter().map(|r| r.err_ls);
            let proj = at.iter().map(|r| r.err_proj);
            RatesPoint {
                t,
                count: at.len(),
                mean_err_ls: mean(ls.clone()),
                min_err_ls: ls.clone().fold(f64::INFINITY, f64::min),
                max_err_ls: ls.fold(0.0, f64::max),
                mean_err_proj: mean(proj.clone()),
                min_err_proj: proj.clone().fold(f64::INFINITY, f64::min),
                max_err_proj: proj.fold(0.0, f64::max),
            }
        })
        .collect();
    let slope = |f: fn(&RatesPoint) -> f64| {
        loglog_slope(&points.iter().map(|p| (p.t as f64, f(p))).collect::<Vec<_>>())
    };
    RatesSummary {
        slope_ls: slope(|p| p.mean_err_ls),
        slope_proj: slope(|p| p.mean_err_proj),
        points,
    }
}

/// Slope of the least-squares line through (log x, log y).
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// One record per scalar trajectory of the coverage experiment.
pub fn coverage_records(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    require(cfg, Experiment::Coverage)?;
    let theta = Matrix::scalar(cfg.theta);
    let s_w = Matrix::scalar(1.0);
    let q = Matrix::scalar(cfg.q_scale);
    let t = cfg.coverage_horizon();
    let system = LinearSystem::new(theta.clone(), s_w.clone(), InitMode::Stationary)?;
    par_map(cfg.workers, (0..cfg.trials as u64).collect(), |i| {
        let seed = derive_seed(cfg.master_seed, i);
        let traj = simulate(&system, t, seed)?;
        let trial = Trial {
            theta: &theta,
            rho_true: cfg.theta.abs(),
            s_w: &s_w,
            q: &q,
            trial_id: i,
            seed,
        };
        trial.evaluate(&traj, cfg)
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageSummary {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "a_T")]
    pub a_t: f64,
    pub beta: f64,
    pub nominal: f64,
    pub trials: usize,
    /// Trials meeting a_T ≥ 2κ log(1/β)/ε², the sample-size condition with
    /// its o(a_T) term dropped.
    pub applicable: usize,
    /// Coverage over applicable trials; 1 when none apply.
    pub frequency: f64,
    pub unconditional_frequency: f64,
    pub positive_epsilon_trials: usize,
    pub positive_epsilon_frequency: f64,
    pub passes: bool,
}

/// Empirical frequency of ‖θ − P(θ̂)‖₂ ≤ ε(√(a_T/T) + 1).
pub fn run_coverage(cfg: &ExperimentConfig) -> Result<CoverageSummary> {
    let records = coverage_records(cfg)?;
    let t = cfg.coverage_horizon();
    let a_t = cfg.a_t.a_t(t);
    let kappa = 1.0;
    let covered = |r: &ExperimentRecord| r.err_proj <= r.epsilon * ((a_t / t as f64).sqrt() + 1.0);
    let applies = |r: &ExperimentRecord| r.epsilon > 0.0 && a_t >= 2.0 * kappa * (1.0 / cfg.beta).ln() / r.epsilon.powi(2);
    let freq = |sel: &dyn Fn(&ExperimentRecord) -> bool| {
        let chosen: Vec<&ExperimentRecord> = records.iter().filter(|r| sel(r)).collect();
        let hits = chosen.iter().filter(|r| covered(r)).count();
        let f = if chosen.is_empty() {
            1.0
        } else {
            hits as f64 / chosen.len() as f64
        };
        (chosen.len(), f)
    };
    let (applicable, frequency) = freq(&applies);
    let (_, unconditional_frequency) = freq(&|_| true);
    let (positive_epsilon_trials, positive_epsilon_frequency) = freq(&|r| r.epsilon > 0.0);
    let nominal = 1.0 - cfg.beta;
    Ok(CoverageSummary {
        t,
        a_t,
        beta: cfg.beta,
        nominal,
        trials: records.len(),
        applicable,
        frequency,
        unconditional_frequency,
        positive_epsilon_trials,
        positive_epsilon_frequency,
        passes: frequency >= nominal - 0.05,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectOutput {
    pub theta_star: Matrix,
    /// ρ(θ*).
    pub rho: f64,
    pub rho_input: f64,
    /// I(θ', θ*).
    pub rate: f64,
    pub epsilon: f64,
    pub epsilon_kappa: f64,
    pub delta: f64,
    pub was_already_stable: bool,
    pub riccati_residual: f64,
}

/// Projects a single matrix with Q = q_scale·I.
pub fn project_one(theta_prime: &Matrix, s_w: &Matrix, cfg: &ExperimentConfig) -> Result<ProjectOutput> {
    let n = theta_prime.ensure_square()?;
    let q = Matrix::identity(n).scale(cfg.q_scale);
    let proj = reverse_i_projection(theta_prime, s_w, &q, cfg.delta)?;
    Ok(ProjectOutput {
        rho: proj.spectral_radius_star,
        rho_input: densela::spectral_radius(theta_prime)?,
        rate: proj.rate_at_star,
        epsilon: proj.epsilon,
        epsilon_kappa: proj.epsilon_kappa,
        delta: proj.delta,
        was_already_stable: proj.was_already_stable,
        riccati_residual: proj.riccati_residual,
        theta_star: proj.theta_star,
    })
}
