//! Experiment orchestration: parameter sweeps, phase-level buddying and the
//! random-search comparison, with tidy CSV/JSON outputs for plotting.

mod compare;
mod phase;
mod sweep;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BuddyError, Result};
use crate::ga::{evolve, GaConfig};
use crate::model::{BuddyAssignment, Feeder, FeederId, Method, ProfilePool};
use crate::monte_carlo::{monte_carlo_buddy, DEFAULT_SAMPLES};
use crate::series::Window;
use crate::simple::simple_buddy;

pub use compare::{mc_summary, run_mc_comparison, write_mc_comparison, McComparisonRow, McSummary};
pub use phase::{
    run_phase_mode, size_matched_comparison, write_phase_comparison, PhaseComparison, PhaseResult, SizeBucket,
};
pub use sweep::{run_sweep, ResultRow, SkippedCell, SweepReport};

/// A grid of training configurations to run for every feeder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub master_seed: u64,
    /// First day of each training season.
    pub seasons: Vec<NaiveDate>,
    /// Training lengths in weeks.
    pub weeks: Vec<u32>,
    pub weights: Vec<f64>,
    pub methods: Vec<Method>,
    /// Evaluation period, inclusive. Defaults to everything the data covers.
    #[serde(default)]
    pub test_start: Option<NaiveDate>,
    #[serde(default)]
    pub test_end: Option<NaiveDate>,
    #[serde(default = "default_samples")]
    pub mc_samples: usize,
    /// GA settings; `weight` and `seed` are overridden per cell.
    #[serde(default)]
    pub ga: GaConfig,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

impl SweepSpec {
    /// Six seasons, one to eight weeks, weights 0 to 1 in steps of 0.1:
    /// 528 cells per feeder and method. Evaluated on 2014-09-01..=2015-08-31.
    pub fn full_grid(methods: Vec<Method>) -> Self {
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).expect("valid date");
        Self {
            master_seed: 0,
            seasons: vec![
                d(2014, 3, 24),
                d(2014, 6, 23),
                d(2014, 9, 29),
                d(2015, 1, 5),
                d(2015, 5, 4),
                d(2015, 7, 27),
            ],
            weeks: (1..=8).collect(),
            weights: (0..=10).map(|k| k as f64 / 10.0).collect(),
            methods,
            test_start: Some(d(2014, 9, 1)),
            test_end: Some(d(2015, 8, 31)),
            mc_samples: DEFAULT_SAMPLES,
            ga: GaConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(BuddyError::Config(m.to_owned()));
        if self.seasons.is_empty() || self.weeks.is_empty() || self.weights.is_empty() || self.methods.is_empty() {
            return fail("sweep needs at least one season, week length, weight and method");
        }
        if self.weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return fail("sweep weights must lie in [0, 1]");
        }
        if self.weeks.contains(&0) {
            return fail("training lengths must be at least one week");
        }
        if let (Some(a), Some(b)) = (self.test_start, self.test_end) {
            if b < a {
                return fail("test_end precedes test_start");
            }
        }
        if self.mc_samples == 0 {
            return fail("mc_samples must be positive");
        }
        GaConfig {
            weight: 0.0,
            ..self.ga.clone()
        }
        .validate()
    }

    pub fn n_cells_per_feeder(&self) -> usize {
        self.seasons.len() * self.weeks.len() * self.weights.len() * self.methods.len()
    }

    pub(crate) fn test_window(&self, available: Window) -> Result<Window> {
        let start = self.test_start.unwrap_or(available.start);
        let end = self
            .test_end
            .unwrap_or_else(|| available.end_exclusive().pred_opt().expect("date in range"));
        Window::inclusive(start, end)
    }
}

/// Seed for one cell, stable under adding or removing other cells.
pub fn cell_seed(master: u64, feeder: &FeederId, season: NaiveDate, weeks: u32, weight: f64, method: Method) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(feeder.as_str().as_bytes());
    h.update([0]);
    h.update(season.format("%Y-%m-%d").to_string().as_bytes());
    h.update(weeks.to_le_bytes());
    h.update(weight.to_bits().to_le_bytes());
    h.update(method.as_str().as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Train one method on one feeder. The simple method ignores `training`,
/// `weight` and `seed`.
pub(crate) fn train(
    feeder: &Feeder,
    pool: &ProfilePool,
    training: Window,
    method: Method,
    weight: f64,
    ga: &GaConfig,
    mc_samples: usize,
    seed: u64,
) -> Result<BuddyAssignment> {
    match method {
        Method::Simple => simple_buddy(feeder, pool),
        Method::Ga => {
            let cfg = GaConfig {
                weight,
                seed,
                ..ga.clone()
            };
            Ok(evolve(feeder, pool, training, &cfg)?.assignment)
        }
        Method::MonteCarlo => Ok(monte_carlo_buddy(feeder, pool, training, mc_samples, seed)?.assignment),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_has_528_cells() {
        let spec = SweepSpec::full_grid(vec![Method::Ga]);
        assert_eq!(spec.n_cells_per_feeder(), 528);
        spec.validate().unwrap();
        assert_eq!(spec.weights[3], 0.3);
    }

    #[test]
    fn seeds_depend_on_every_coordinate() {
        let f = FeederId::from("F1");
        let d = NaiveDate::from_ymd_opt(2014, 9, 29).unwrap();
        let base = cell_seed(1, &f, d, 8, 0.0, Method::Ga);
        assert_eq!(base, cell_seed(1, &f, d, 8, 0.0, Method::Ga));
        let others = [
            cell_seed(2, &f, d, 8, 0.0, Method::Ga),
            cell_seed(1, &FeederId::from("F2"), d, 8, 0.0, Method::Ga),
            cell_seed(1, &f, d.succ_opt().unwrap(), 8, 0.0, Method::Ga),
            cell_seed(1, &f, d, 7, 0.0, Method::Ga),
            cell_seed(1, &f, d, 8, 0.1, Method::Ga),
            cell_seed(1, &f, d, 8, 0.0, Method::MonteCarlo),
        ];
        assert!(others.iter().all(|s| *s != base));
    }

    #[test]
    fn toml_spec() {
        let text = r#"
            master_seed = 7
            seasons = ["2014-09-29"]
            weeks = [1, 8]
            weights = [0.0, 1.0]
            methods = ["simple", "ga", "monte-carlo"]
            test_start = "2014-09-01"
            test_end = "2015-08-31"

            [ga]
            population = 50
            elite = 5
            generations = 60
            reset_generation = 20
        "#;
        let spec = SweepSpec::from_toml(text).unwrap();
        assert_eq!(spec.ga.population, 50);
        assert_eq!(spec.ga.initial_mutation, 0.1);
        assert_eq!(spec.mc_samples, 1000);
        assert_eq!(spec.n_cells_per_feeder(), 12);

        assert!(SweepSpec::from_toml(&text.replace("[0.0, 1.0]", "[1.5]")).is_err());
        assert!(SweepSpec::from_toml(&text.replace("elite = 5", "elite = 50")).is_err());
        assert!(SweepSpec::from_toml(&text.replace("master_seed", "mastr_seed")).is_err());
    }
}
