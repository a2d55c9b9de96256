//! Random-search baseline: draw many group-respecting assignments and keep
//! the one with the lowest RMAE over the window.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{BuddyError, Result};
use crate::ga::random_genes;
use crate::metrics::rmae;
use crate::model::{BuddyAssignment, Feeder, Method, ProfilePool};
use crate::series::{add_into, Window};

pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Debug, Clone)]
pub struct MonteCarloOutcome {
    pub assignment: BuddyAssignment,
    pub best_rmae: f64,
    /// RMAE of every sample, in draw order.
    pub samples: Vec<f64>,
}

impl MonteCarloOutcome {
    /// Fraction of samples scoring strictly better (lower) than `value`.
    pub fn fraction_better_than(&self, value: f64) -> f64 {
        self.samples.iter().filter(|&&r| r < value).count() as f64 / self.samples.len() as f64
    }
}

pub fn monte_carlo_buddy(
    feeder: &Feeder,
    pool: &ProfilePool,
    window: Window,
    n_samples: usize,
    seed: u64,
) -> Result<MonteCarloOutcome> {
    if n_samples == 0 {
        return Err(BuddyError::Config("monte carlo needs at least one sample".into()));
    }
    let candidates = pool.candidates(feeder)?;
    let actual = feeder.substation_window(window)?;
    let profiles = pool
        .profiles()
        .iter()
        .map(|p| p.series.slice(window))
        .collect::<Result<Vec<_>>>()?;

    // all draws happen here, single-threaded, before any evaluation
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Vec<usize>> = (0..n_samples).map(|_| random_genes(&candidates, &mut rng)).collect();

    let samples = draws
        .par_iter()
        .map_init(
            || vec![0.0; window.slots()],
            |buf, genes| {
                buf.fill(0.0);
                for &g in genes {
                    add_into(buf, profiles[g]);
                }
                rmae(actual, buf)
            },
        )
        .collect::<Result<Vec<f64>>>()?;

    let (best, &best_rmae) = samples
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .expect("at least one sample");
    let assignment = BuddyAssignment::from_indices(
        feeder,
        pool,
        &draws[best],
        Method::MonteCarlo,
        0.0,
        Some(window),
        Some(seed),
    );
    Ok(MonteCarloOutcome {
        assignment,
        best_rmae,
        samples,
    })
}
