use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cell_seed;
use crate::error::{BuddyError, Result};
use crate::ga::{evolve, GaConfig};
use crate::metrics::rmae;
use crate::model::{Feeder, Method, ProfilePool};
use crate::monte_carlo::monte_carlo_buddy;
use crate::series::Window;

/// GA against best-of-N random search on one feeder, scored over the
/// training window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McComparisonRow {
    pub feeder_id: String,
    pub n_customers: usize,
    pub rmae_ga: f64,
    pub rmae_mc: f64,
    /// `rmae_mc - rmae_ga`; positive when the GA wins.
    pub difference: f64,
    /// Fraction of random samples strictly better than the GA.
    pub ga_percentile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub n_feeders: usize,
    pub mean_difference: f64,
    pub min_difference: f64,
    /// Feeders where the GA did at least as well as the best sample.
    pub ga_not_worse: usize,
    pub mean_ga_percentile: f64,
}

/// Run the GA at weight 0 and `n_samples` random draws on each feeder.
///
/// Feeders that cannot be run are skipped with a warning.
pub fn run_mc_comparison(
    feeders: &[Feeder],
    pool: &ProfilePool,
    window: Window,
    ga: &GaConfig,
    n_samples: usize,
    master_seed: u64,
) -> Result<Vec<McComparisonRow>> {
    let season: NaiveDate = window.start;
    let weeks = window.days.div_ceil(7);
    let rows: Vec<Option<McComparisonRow>> = feeders
        .par_iter()
        .map(|feeder| {
            let run = || -> Result<McComparisonRow> {
                let cfg = GaConfig {
                    weight: 0.0,
                    seed: cell_seed(master_seed, &feeder.feeder_id, season, weeks, 0.0, Method::Ga),
                    ..ga.clone()
                };
                let g = evolve(feeder, pool, window, &cfg)?;
                let mc_seed = cell_seed(master_seed, &feeder.feeder_id, season, weeks, 0.0, Method::MonteCarlo);
                let mc = monte_carlo_buddy(feeder, pool, window, n_samples, mc_seed)?;
                let actual = feeder.substation_window(window)?;
                let rmae_ga = rmae(actual, &g.assignment.aggregate(feeder, pool, window)?)?;
                Ok(McComparisonRow {
                    feeder_id: feeder.feeder_id.to_string(),
                    n_customers: feeder.n_customers(),
                    rmae_ga,
                    rmae_mc: mc.best_rmae,
                    difference: mc.best_rmae - rmae_ga,
                    ga_percentile: mc.fraction_better_than(rmae_ga),
                })
            };
            match run() {
                Ok(row) => Some(row),
                Err(e) => {
                    log::warn!("skipping feeder {} in random-search comparison: {e}", feeder.feeder_id);
                    None
                }
            }
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

pub fn mc_summary(rows: &[McComparisonRow]) -> Result<McSummary> {
    if rows.is_empty() {
        return Err(BuddyError::InvalidInput("no comparison rows to summarise".into()));
    }
    let n = rows.len() as f64;
    Ok(McSummary {
        n_feeders: rows.len(),
        mean_difference: rows.iter().map(|r| r.difference).sum::<f64>() / n,
        min_difference: rows.iter().map(|r| r.difference).fold(f64::INFINITY, f64::min),
        ga_not_worse: rows.iter().filter(|r| r.difference >= 0.0).count(),
        mean_ga_percentile: rows.iter().map(|r| r.ga_percentile).sum::<f64>() / n,
    })
}

pub fn write_mc_comparison<W: Write>(writer: W, rows: &[McComparisonRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
