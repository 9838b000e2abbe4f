//! Monte-Carlo experiment driver, CLI, configuration and result files.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod record;

pub use config::{Experiment, ExperimentConfig, Format, RateScaling};
pub use experiments::{
    coverage_records, project_one, run_coverage, run_rates, run_spectral, spectral_theta, summarize_rates,
    summarize_spectral, CoverageSummary, ProjectOutput, RatesPoint, RatesSummary, SpectralSummary,
};
pub use record::{write_records, ExperimentRecord, Runtimes, COLUMNS};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Seed of stream `stream` under `master`. Trials get their seeds from
/// their index alone, so results do not depend on scheduling.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Maps `f` over `items` on `workers` threads (0 = all cores), keeping input
/// order. The first error in input order wins.
pub(crate) fn par_map<T, R, F>(workers: usize, items: Vec<T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers != 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| crate::Error::Config(format!("thread pool: {e}")))?;
        let out: Vec<Result<R>> = pool.install(|| items.into_par_iter().map(&f).collect());
        return out.into_iter().collect();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    items.into_iter().map(f).collect()
}
