//! Simulation of `x_{t+1} = θ x_t + w_t` and least-squares identification of
//! `θ` from a single trajectory.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::densela::text::{content_lines, format_row, parse_values};
use crate::densela::{self, classify, Matrix, Stability, SymmetricEigen};
use crate::error::{Error, Result};
use crate::lyapunov::solve_dlyap;

/// Relative threshold on the smallest Gram eigenvalue (against trace/n).
pub const GRAM_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// `x₀ ~ N(0, S_θ)`, the invariant distribution.
    Stationary,
    Zero,
    Given(Vec<f64>),
}

/// Source of the i.i.d. disturbances `w_t`.
pub trait NoiseModel: Send + Sync {
    fn dim(&self) -> usize;
    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]);
}

/// `w = S_w^{1/2} z` with `z` standard normal.
#[derive(Debug, Clone)]
pub struct GaussianNoise {
    sqrt_cov: Matrix,
}

impl GaussianNoise {
    pub fn new(cov: &Matrix) -> Result<Self> {
        Ok(GaussianNoise {
            sqrt_cov: densela::sqrt_spd(cov)?,
        })
    }
}

impl NoiseModel for GaussianNoise {
    fn dim(&self) -> usize {
        self.sqrt_cov.rows()
    }

    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        out.copy_from_slice(&self.sqrt_cov.mul_vec(&z));
    }
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub theta: Matrix,
    pub s_w: Matrix,
    pub init: InitMode,
    noise: GaussianNoise,
}

impl LinearSystem {
    pub fn new(theta: Matrix, s_w: Matrix, init: InitMode) -> Result<Self> {
        let n = theta.ensure_square()?;
        if s_w.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "theta is {n}x{n} but S_w is {}x{}",
                s_w.rows(),
                s_w.cols()
            )));
        }
        densela::check_spd(&s_w, "S_w")?;
        match &init {
            InitMode::Stationary => {
                let rho = densela::spectral_radius(&theta)?;
                if classify(rho) != Stability::Stable {
                    return Err(Error::UnstableInput { rho });
                }
            }
            InitMode::Given(x0) if x0.len() != n => {
                return Err(Error::DimensionMismatch(format!(
                    "initial state has {} entries, expected {n}",
                    x0.len()
                )));
            }
            _ => {}
        }
        let noise = GaussianNoise::new(&s_w)?;
        Ok(LinearSystem {
            theta,
            s_w,
            init,
            noise,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.rows()
    }

    /// Hash of θ, S_w and the initialization, for provenance.
    pub fn digest(&self) -> u64 {
        let mut h = Sha256::new();
        h.update((self.dim() as u64).to_le_bytes());
        for v in self.theta.as_slice().iter().chain(self.s_w.as_slice()) {
            h.update(v.to_bits().to_le_bytes());
        }
        match &self.init {
            InitMode::Stationary => h.update([0u8]),
            InitMode::Zero => h.update([1u8]),
            InitMode::Given(x) => {
                h.update([2u8]);
                for v in x {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
        let out = h.finalize();
        u64::from_le_bytes(out[..8].try_into().unwrap())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `x_0, …, x_T`.
    pub states: Vec<Vec<f64>>,
    pub seed: u64,
    /// Zero when the generating system is unknown (e.g. read from a file).
    pub system_digest: u64,
}

impl Trajectory {
    pub fn new(states: Vec<Vec<f64>>, seed: u64, system_digest: u64) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::TooShort(format!(
                "{} states, need at least 2",
                states.len()
            )));
        }
        let n = states[0].len();
        if n == 0 || states.iter().any(|s| s.len() != n) {
            return Err(Error::DimensionMismatch("states of unequal length".into()));
        }
        if states.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, col: 0 });
        }
        Ok(Trajectory {
            states,
            seed,
            system_digest,
        })
    }

    /// Number of transitions T.
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    /// The first `t` transitions.
    pub fn prefix(&self, t: usize) -> Result<Trajectory> {
        if t == 0 || t > self.horizon() {
            return Err(Error::TooShort(format!(
                "prefix of {t} transitions from a trajectory of {}",
                self.horizon()
            )));
        }
        Ok(Trajectory {
            states: self.states[..=t].to_vec(),
            seed: self.seed,
            system_digest: self.system_digest,
        })
    }

    /// `T n seed` header, then T+1 rows of n values.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {} {}", self.horizon(), self.dim(), self.seed).unwrap();
        for x in &self.states {
            writeln!(s, "{}", format_row(x)).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Trajectory> {
        let mut lines = content_lines(text);
        let (hl, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("empty trajectory file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [t, n, seed] = fields[..] else {
            return Err(Error::Parse(format!("line {hl}: header must be \"T n seed\"")));
        };
        let parse = |tok: &str, what: &str| {
            tok.parse::<u64>()
                .map_err(|e| Error::Parse(format!("line {hl}: bad {what} {tok:?}: {e}")))
        };
        let (t, n, seed) = (parse(t, "T")? as usize, parse(n, "n")? as usize, parse(seed, "seed")?);
        let mut states = Vec::with_capacity(t + 1);
        for _ in 0..=t {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("expected {} state rows", t + 1)))?;
            states.push(parse_values(line, n, ln)?);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse(format!("line {ln}: trailing data")));
        }
        Trajectory::new(states, seed, 0).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Simulates T transitions with noise drawn from a ChaCha stream keyed by
/// `seed`; identical inputs give bit-identical trajectories.
pub fn simulate(system: &LinearSystem, t: usize, seed: u64) -> Result<Trajectory> {
    if t == 0 {
        return Err(Error::TooShort("horizon must be at least 1".into()));
    }
    let n = system.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = match &system.init {
        InitMode::Zero => vec![0.0; n],
        InitMode::Given(x) => x.clone(),
        InitMode::Stationary => {
            let cov = solve_dlyap(&system.theta, &system.s_w)?.s;
            let mut x = vec![0.0; n];
            GaussianNoise::new(&cov)?.sample(&mut rng, &mut x);
            x
        }
    };
    let mut states = Vec::with_capacity(t + 1);
    states.push(x0);
    let mut w = vec![0.0; n];
    for k in 0..t {
        system.noise.sample(&mut rng, &mut w);
        let next: Vec<f64> = system
            .theta
            .mul_vec(&states[k])
            .into_iter()
            .zip(&w)
            .map(|(a, b)| a + b)
            .collect();
        states.push(next);
    }
    Trajectory::new(states, seed, system.digest())
}

#[derive(Debug, Clone, Serialize)]
pub struct LeastSquaresEstimate {
    pub theta_hat: Matrix,
    /// Σ x_{t−1} x_{t−1}ᵀ.
    pub gram: Matrix,
    pub t: usize,
    pub gram_min_eig: f64,
}

/// θ̂ = (Σ x_t x_{t−1}ᵀ)(Σ x_{t−1} x_{t−1}ᵀ)⁻¹.
pub fn least_squares(traj: &Trajectory) -> Result<LeastSquaresEstimate> {
    least_squares_multi(std::slice::from_ref(traj))
}

/// Least squares over the regression pairs of several trajectories.
pub fn least_squares_multi(trajs: &[Trajectory]) -> Result<LeastSquaresEstimate> {
    let first = trajs
        .first()
        .ok_or_else(|| Error::TooShort("no trajectories".into()))?;
    let n = first.dim();
    if trajs.iter().any(|t| t.dim() != n) {
        return Err(Error::DimensionMismatch("trajectories of different dimension".into()));
    }
    let t: usize = trajs.iter().map(Trajectory::horizon).sum();
    if t < n {
        return Err(Error::TooShort(format!("{t} transitions for a {n}-dimensional state")));
    }
    let (cross, gram) = moments(trajs, n);
    let e = SymmetricEigen::new(&gram)?;
    let gram_min_eig = e.min();
    if !(gram_min_eig > GRAM_RTOL * gram.trace() / n as f64) {
        return Err(Error::SingularGram {
            min_eig: gram_min_eig,
        });
    }
    let theta_hat = densela::solve_linear(&gram, &cross.transpose())?.transpose();
    Ok(LeastSquaresEstimate {
        theta_hat,
        gram,
        t,
        gram_min_eig,
    })
}

/// (Σ x_t x_{t−1}ᵀ, Σ x_{t−1} x_{t−1}ᵀ).
fn moments(trajs: &[Trajectory], n: usize) -> (Matrix, Matrix) {
    let mut cross = vec![0.0; n * n];
    let mut gram = vec![0.0; n * n];
    for traj in trajs {
        for pair in traj.states.windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            for i in 0..n {
                for j in 0..n {
                    cross[i * n + j] += next[i] * prev[j];
                    gram[i * n + j] += prev[i] * prev[j];
                }
            }
        }
    }
    (
        Matrix::new(n, n, cross).expect("finite moments"),
        Matrix::new(n, n, gram).expect("finite moments"),
    )
}

/// ‖Σ (x_t − θ̂ x_{t−1}) x_{t−1}ᵀ‖_F relative to ‖Σ x_t x_{t−1}ᵀ‖_F.
pub fn normal_equation_residual(trajs: &[Trajectory], theta_hat: &Matrix) -> f64 {
    let (cross, gram) = moments(trajs, theta_hat.rows());
    densela::frobenius_norm(&(&cross - &(theta_hat * &gram)))
        / densela::frobenius_norm(&cross).max(f64::MIN_POSITIVE)
}

/// √(T/a_T)(θ̂ − θ) + θ.
pub fn transformed_estimate(theta_hat: &Matrix, theta_true: &Matrix, t: usize, a_t: f64) -> Result<Matrix> {
    theta_hat.ensure_same_shape(theta_true, "transformed estimate")?;
    if !(a_t > 0.0 && a_t.is_finite()) {
        return Err(Error::Config(format!("a_T must be positive, got {a_t}")));
    }
    let factor = (t as f64 / a_t).sqrt();
    Ok(&(theta_hat - theta_true).scale(factor) + theta_true)
}
