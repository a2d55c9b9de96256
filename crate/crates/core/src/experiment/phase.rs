use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train;
use crate::error::{BuddyError, Result};
use crate::ga::GaConfig;
use crate::metrics::{rmae, rpde, FeederErrorReport};
use crate::model::{BuddyAssignment, Feeder, FeederId, Method, Phase, ProfilePool};
use crate::series::Window;

/// Scores of one phase's own buddies against that phase's head readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseResult {
    pub feeder_id: String,
    pub phase: u8,
    pub n_customers: usize,
    /// `None` when the phase has no head readings.
    pub rmae: Option<f64>,
    pub rpde: Option<f64>,
}

/// Feeder-level buddying against per-phase buddying, both scored on the
/// feeder head.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseComparison {
    pub feeder_id: String,
    pub method: Method,
    pub weight: f64,
    pub n_customers: usize,
    pub feeder_rmae: f64,
    pub feeder_rpde: f64,
    pub phase_mode_rmae: f64,
    pub phase_mode_rpde: f64,
    /// Customers whose phase was drawn at random for lack of a label.
    pub randomly_allocated: usize,
    #[serde(skip)]
    pub phases: Vec<PhaseResult>,
    #[serde(skip)]
    pub feeder_assignment: BuddyAssignment,
    #[serde(skip)]
    pub phase_assignment: BuddyAssignment,
}

/// Buddy `feeder` whole and phase by phase, then score both at the feeder head.
///
/// Every sub-run uses `seed`, so a feeder whose customers all sit on one
/// phase reproduces the feeder-level run exactly. Unlabelled customers get a
/// random phase drawn from `seed`.
#[allow(clippy::too_many_arguments)]
pub fn run_phase_mode(
    feeder: &Feeder,
    pool: &ProfilePool,
    training: Window,
    test: Window,
    method: Method,
    weight: f64,
    ga: &GaConfig,
    mc_samples: usize,
    seed: u64,
) -> Result<PhaseComparison> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut randomly_allocated = 0;
    let phases: Vec<Phase> = feeder
        .customers
        .iter()
        .map(|c| {
            c.phase.unwrap_or_else(|| {
                randomly_allocated += 1;
                Phase::ALL[rng.random_range(0..Phase::ALL.len())]
            })
        })
        .collect();
    if randomly_allocated > 0 {
        log::warn!(
            "feeder {}: {randomly_allocated} customers have no phase label; allocating at random",
            feeder.feeder_id
        );
    }

    let mut split: BTreeMap<Phase, Vec<usize>> = BTreeMap::new();
    for (j, p) in phases.iter().enumerate() {
        split.entry(*p).or_default().push(j);
    }
    let single_phase = split.len() == 1;

    let whole = train(feeder, pool, training, method, weight, ga, mc_samples, seed)?;
    let mut by_customer = vec![None; feeder.n_customers()];
    let mut phase_results = Vec::with_capacity(split.len());
    for (phase, members) in &split {
        let series = feeder
            .phase_series
            .get(phase)
            .or(if single_phase {
                feeder.substation_series.as_ref()
            } else {
                None
            })
            .cloned();
        if series.is_none() && method != Method::Simple {
            return Err(BuddyError::Config(format!(
                "feeder {} has no readings for phase {}",
                feeder.feeder_id,
                phase.label()
            )));
        }
        let sub = Feeder::new(
            phase_key(&feeder.feeder_id, *phase),
            members.iter().map(|&j| feeder.customers[j].clone()).collect(),
            series,
        )?;
        let assignment = train(&sub, pool, training, method, weight, ga, mc_samples, seed)?;
        let (r, p) = match &sub.substation_series {
            Some(_) => {
                let actual = sub.substation_window(test)?;
                let modeled = assignment.aggregate(&sub, pool, test)?;
                (Some(rmae(actual, &modeled)?), Some(rpde(actual, &modeled)?))
            }
            None => (None, None),
        };
        phase_results.push(PhaseResult {
            feeder_id: feeder.feeder_id.to_string(),
            phase: phase.label(),
            n_customers: members.len(),
            rmae: r,
            rpde: p,
        });
        for (&j, buddy) in members.iter().zip(assignment.buddies) {
            by_customer[j] = Some(buddy);
        }
    }
    let combined = BuddyAssignment {
        feeder_id: feeder.feeder_id.clone(),
        buddies: by_customer
            .into_iter()
            .map(|b| b.expect("every customer has a phase"))
            .collect(),
        method,
        weight: whole.weight,
        training_window: whole.training_window,
        seed: whole.seed,
    };

    let feeder_report = FeederErrorReport::evaluate(feeder, pool, &whole, test)?;
    let phase_report = FeederErrorReport::evaluate(feeder, pool, &combined, test)?;
    Ok(PhaseComparison {
        feeder_id: feeder.feeder_id.to_string(),
        method,
        weight,
        n_customers: feeder.n_customers(),
        feeder_rmae: feeder_report.rmae,
        feeder_rpde: feeder_report.rpde,
        phase_mode_rmae: phase_report.rmae,
        phase_mode_rpde: phase_report.rpde,
        randomly_allocated,
        phases: phase_results,
        feeder_assignment: whole,
        phase_assignment: combined,
    })
}

/// Mean RMAE of feeders and of single phases with `n` or `n + 1` customers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeBucket {
    pub n: usize,
    pub feeder_count: usize,
    pub feeder_mean_rmae: Option<f64>,
    pub phase_count: usize,
    pub phase_mean_rmae: Option<f64>,
}

/// Buckets `n_min..=n_max` over (size, rmae) points for feeders and phases.
pub fn size_matched_comparison(
    feeders: &[(usize, f64)],
    phases: &[(usize, f64)],
    n_min: usize,
    n_max: usize,
) -> Vec<SizeBucket> {
    let mean_of = |points: &[(usize, f64)], n: usize| {
        let v: Vec<f64> = points
            .iter()
            .filter(|(s, _)| *s == n || *s == n + 1)
            .map(|p| p.1)
            .collect();
        let mean = (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        (v.len(), mean)
    };
    (n_min..=n_max)
        .map(|n| {
            let (feeder_count, feeder_mean_rmae) = mean_of(feeders, n);
            let (phase_count, phase_mean_rmae) = mean_of(phases, n);
            SizeBucket {
                n,
                feeder_count,
                feeder_mean_rmae,
                phase_count,
                phase_mean_rmae,
            }
        })
        .collect()
}

/// Write `phase_comparison.csv`, `phases.csv`, `phase_assignments.json`
/// and `size_matched.csv` into `dir`.
pub fn write_phase_comparison(dir: &Path, comparisons: &[PhaseComparison], buckets: &[SizeBucket]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let create = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(name))?)) };

    let mut w = csv::Writer::from_writer(create("phase_comparison.csv")?);
    for c in comparisons {
        w.serialize(c)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(create("phases.csv")?);
    for p in comparisons.iter().flat_map(|c| &c.phases) {
        w.serialize(p)?;
    }
    w.flush()?;

    #[derive(Serialize)]
    struct Pair<'a> {
        feeder: &'a BuddyAssignment,
        phase_mode: &'a BuddyAssignment,
    }
    let pairs: Vec<Pair> = comparisons
        .iter()
        .map(|c| Pair {
            feeder: &c.feeder_assignment,
            phase_mode: &c.phase_assignment,
        })
        .collect();
    let mut json = create("phase_assignments.json")?;
    serde_json::to_writer_pretty(&mut json, &pairs)?;
    json.flush()?;

    let mut w = csv::Writer::from_writer(create("size_matched.csv")?);
    for b in buckets {
        w.serialize(b)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-phase identifiers, for callers that key results by phase.
pub(crate) fn phase_key(feeder: &FeederId, phase: Phase) -> String {
    format!("{feeder}/{}", phase.label())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ga::fitness;
    use crate::pseudo::{generate_pool, make_type1, random_template, SyntheticPoolSpec};

    fn pool() -> ProfilePool {
        ProfilePool::new(
            generate_pool(&SyntheticPoolSpec {
                n_profiles: 50,
                days: 14,
                seed: 8,
                ..Default::default()
            })
            .unwrap(),
        )
        .unwrap()
    }

    fn small_ga() -> GaConfig {
        GaConfig {
            population: 40,
            elite: 6,
            generations: 40,
            reset_generation: Some(15),
            ..Default::default()
        }
    }

    #[test]
    fn simple_method_is_phase_invariant() {
        let pool = pool();
        let t = random_template("F", 20, &pool, 4).unwrap();
        let f = make_type1(&t, &pool, 4).unwrap().feeder;
        let span = pool.span().unwrap();
        let c = run_phase_mode(
            &f,
            &pool,
            Window::weeks(span.start, 1),
            span,
            Method::Simple,
            1.0,
            &small_ga(),
            10,
            1,
        )
        .unwrap();
        assert_eq!(c.feeder_assignment.buddies, c.phase_assignment.buddies);
        assert_eq!(c.feeder_rmae, c.phase_mode_rmae);
        assert!(c.phases.len() > 1);
    }

    #[test]
    fn single_phase_feeder_matches_feeder_run() {
        let pool = pool();
        let t = random_template("F", 8, &pool, 5).unwrap();
        let mut f = make_type1(&t, &pool, 5).unwrap().feeder;
        for c in &mut f.customers {
            c.phase = Some(Phase::new(2).unwrap());
        }
        f.phase_series.clear();
        let span = pool.span().unwrap();
        let c = run_phase_mode(
            &f,
            &pool,
            Window::weeks(span.start, 1),
            span,
            Method::Ga,
            0.0,
            &small_ga(),
            10,
            9,
        )
        .unwrap();
        assert_eq!(c.feeder_assignment.buddies, c.phase_assignment.buddies);
        assert_eq!(c.feeder_rmae, c.phase_mode_rmae);
    }

    #[test]
    fn exact_phase_series_admit_zero_fitness() {
        let pool = pool();
        let t = random_template("F", 9, &pool, 6).unwrap();
        let pf = make_type1(&t, &pool, 6).unwrap();
        let truth = pf.generating_assignment(&pool).unwrap();
        let w = Window::weeks(pool.span().unwrap().start, 1);
        for (phase, series) in &pf.feeder.phase_series {
            let members: Vec<usize> = (0..pf.feeder.n_customers())
                .filter(|&j| pf.feeder.customers[j].phase == Some(*phase))
                .collect();
            let sub = Feeder::new(
                phase_key(&pf.feeder.feeder_id, *phase),
                members.iter().map(|&j| pf.feeder.customers[j].clone()).collect(),
                Some(series.clone()),
            )
            .unwrap();
            let genes: Vec<usize> = members
                .iter()
                .map(|&j| pool.index_of(&truth.buddies[j].profile_id).unwrap())
                .collect();
            assert_eq!(fitness(&genes, &sub, &pool, w, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn missing_labels_are_allocated() {
        let pool = pool();
        let t = random_template("F", 12, &pool, 7).unwrap();
        let mut f = make_type1(&t, &pool, 7).unwrap().feeder;
        for c in &mut f.customers {
            c.phase = None;
        }
        let span = pool.span().unwrap();
        let c = run_phase_mode(
            &f,
            &pool,
            Window::weeks(span.start, 1),
            span,
            Method::Simple,
            1.0,
            &small_ga(),
            10,
            3,
        )
        .unwrap();
        assert_eq!(c.randomly_allocated, 12);
        assert_eq!(c.phases.iter().map(|p| p.n_customers).sum::<usize>(), 12);
    }

    #[test]
    fn buckets_pool_n_and_n_plus_one() {
        let feeders = [(16, 0.2), (17, 0.4), (18, 0.9)];
        let phases = [(17, 0.3)];
        let b = size_matched_comparison(&feeders, &phases, 16, 18);
        assert_eq!(b[0].feeder_count, 2);
        assert!((b[0].feeder_mean_rmae.unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(b[0].phase_mean_rmae, Some(0.3));
        assert_eq!(b[1].feeder_count, 2);
        assert_eq!(b[2].feeder_count, 1);
        assert_eq!(b[2].phase_count, 0);
        assert_eq!(b[2].phase_mean_rmae, None);
    }
}
