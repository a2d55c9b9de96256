//! Validation feeders built entirely from known profiles.
//!
//! A synthetic pool stands in for real monitored customers. Type-1
//! pseudo-feeders draw their customers from the same pool used for
//! buddying, so the right answer is in the search space. Type-2 feeders draw
//! from one half of a demand-ordered split and are buddied from the other.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{BuddyError, Result};
use crate::grouping::{GroupId, GroupMapping};
use crate::ingest::{write_readings, Registry, RegistryRow};
use crate::metrics::per_customer_rmae;
use crate::model::{
    BuddyAssignment, Customer, CustomerId, Feeder, FeederId, MonitoredProfile, Phase, ProfileId, ProfilePool,
};
use crate::series::{add_into, HalfHourlySeries, Window, SLOTS_PER_DAY};

/// Log-normal spread of customers' expected daily demand within a group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandLevel {
    /// Median expected demand, kWh/day.
    pub median: f64,
    pub log_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Volatility {
    /// Standard deviation of the per-slot multiplicative log-normal noise.
    pub noise_sigma: f64,
    /// Expected number of spike events per day.
    pub spikes_per_day: f64,
    /// Mean spike size as a fraction of the customer's daily demand.
    pub spike_fraction: f64,
    /// Relative amplitude of the annual cycle (winter high).
    pub seasonal_amplitude: f64,
}

impl Default for Volatility {
    fn default() -> Self {
        Self {
            noise_sigma: 0.4,
            spikes_per_day: 1.5,
            spike_fraction: 0.06,
            seasonal_amplitude: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupShare {
    pub group: GroupId,
    pub proportion: f64,
    pub demand: DemandLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPoolSpec {
    pub n_profiles: usize,
    pub start: NaiveDate,
    pub days: usize,
    pub groups: Vec<GroupShare>,
    pub volatility: Volatility,
    pub seed: u64,
    pub id_prefix: String,
}

impl Default for SyntheticPoolSpec {
    fn default() -> Self {
        let share = |g, proportion, median| GroupShare {
            group: GroupId(g),
            proportion,
            demand: DemandLevel { median, log_sd: 0.4 },
        };
        Self {
            n_profiles: 240,
            start: NaiveDate::from_ymd_opt(2014, 9, 1).expect("valid date"),
            days: 112,
            groups: vec![
                share(0, 0.20, 7.0),
                share(1, 0.20, 9.0),
                share(2, 0.15, 10.5),
                share(3, 0.15, 13.0),
                share(4, 0.10, 12.0),
                share(5, 0.10, 11.0),
                share(6, 0.10, 9.5),
            ],
            volatility: Volatility::default(),
            seed: 0,
            id_prefix: "P".into(),
        }
    }
}

impl SyntheticPoolSpec {
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.groups.iter().map(|g| g.proportion).sum();
        if self.n_profiles > 0 && (self.groups.is_empty() || (total - 1.0).abs() > 1e-9) {
            return Err(BuddyError::Config(format!(
                "group proportions sum to {total}, expected 1"
            )));
        }
        let v = &self.volatility;
        let bad = self
            .groups
            .iter()
            .any(|g| !(g.proportion >= 0.0 && g.demand.median > 0.0 && g.demand.log_sd >= 0.0))
            || !(v.noise_sigma >= 0.0
                && v.spikes_per_day >= 0.0
                && v.spike_fraction >= 0.0
                && (0.0..1.0).contains(&v.seasonal_amplitude));
        if bad {
            return Err(BuddyError::Config(
                "synthetic pool parameters must be non-negative".into(),
            ));
        }
        if self.days == 0 && self.n_profiles > 0 {
            return Err(BuddyError::Config("synthetic pool needs at least one day".into()));
        }
        Ok(())
    }

    /// Profiles per group by largest remainder, in `groups` order.
    fn group_counts(&self) -> Vec<usize> {
        let quotas: Vec<f64> = self
            .groups
            .iter()
            .map(|g| g.proportion * self.n_profiles as f64)
            .collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let short = self.n_profiles - counts.iter().sum::<usize>();
        for &i in order.iter().take(short) {
            counts[i] += 1;
        }
        counts
    }
}

/// Per-customer daily shape: a baseline plus morning and evening bumps.
#[derive(Debug, Clone, Copy)]
struct DailyShape {
    weights: [f64; SLOTS_PER_DAY],
}

impl DailyShape {
    fn random<R: Rng>(rng: &mut R) -> Self {
        let base = 0.4 + 0.4 * rng.random::<f64>();
        let morning = (
            0.3 + 0.7 * rng.random::<f64>(),
            16.0 + 3.0 * (rng.random::<f64>() - 0.5),
            2.0 + 1.5 * rng.random::<f64>(),
        );
        let evening = (
            1.0 + 1.5 * rng.random::<f64>(),
            37.0 + 4.0 * (rng.random::<f64>() - 0.5),
            2.5 + 2.0 * rng.random::<f64>(),
        );
        let mut weights = [0.0; SLOTS_PER_DAY];
        for (k, w) in weights.iter_mut().enumerate() {
            let t = k as f64;
            let bump = |(amp, centre, width): (f64, f64, f64)| amp * (-0.5 * ((t - centre) / width).powi(2)).exp();
            // overnight trough
            let night = if !(12..=45).contains(&k) { 0.5 } else { 1.0 };
            *w = base * night + bump(morning) + bump(evening);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { weights }
    }
}

fn seasonal_factor(date: NaiveDate, amplitude: f64) -> f64 {
    // peaks mid-January
    let phase = 2.0 * PI * (date.ordinal0() as f64 - 14.0) / 365.25;
    1.0 + amplitude * phase.cos()
}

/// One synthetic series whose expected mean daily demand is `level` kWh/day
/// (before seasonal modulation). Scaling `level` scales every value.
pub fn synthesize_profile<R: Rng>(
    level: f64,
    start: NaiveDate,
    days: usize,
    volatility: &Volatility,
    rng: &mut R,
) -> Result<HalfHourlySeries> {
    let shape = DailyShape::random(rng);
    let sigma = volatility.noise_sigma;
    let noise = LogNormal::new(-sigma * sigma / 2.0, sigma).map_err(|e| BuddyError::Config(e.to_string()))?;
    let spike_p = volatility.spikes_per_day / SLOTS_PER_DAY as f64;
    let base_level = level / (1.0 + volatility.spikes_per_day * volatility.spike_fraction);
    let mut values = Vec::with_capacity(days * SLOTS_PER_DAY);
    for d in 0..days {
        let date = start + Days::new(d as u64);
        let weekend = matches!(date.weekday(), Weekday::Sat | Weekday::Sun);
        let day_level = base_level
            * seasonal_factor(date, volatility.seasonal_amplitude)
            * if weekend { 1.1 } else { 1.0 }
            * (1.0 + 0.1 * rng.sample::<f64, _>(StandardNormal)).max(0.2);
        for w in shape.weights {
            let mut v = day_level * w * noise.sample(rng);
            if rng.random::<f64>() < spike_p {
                let e: f64 = rng.sample(Exp1);
                v += base_level * volatility.spike_fraction * e;
            }
            values.push(v.max(0.0));
        }
    }
    HalfHourlySeries::new(start, values)
}

/// Generate a reproducible pool. Profile `i` uses its own ChaCha stream, so
/// its series does not depend on any other profile's parameters.
pub fn generate_pool(spec: &SyntheticPoolSpec) -> Result<Vec<MonitoredProfile>> {
    spec.validate()?;
    let counts = spec.group_counts();
    let width = spec.n_profiles.max(1).to_string().len().max(3);
    let mut out = Vec::with_capacity(spec.n_profiles);
    let mut i = 0u64;
    for (share, count) in spec.groups.iter().zip(counts) {
        for _ in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i);
            let z: f64 = rng.sample(StandardNormal);
            let level = share.demand.median * (share.demand.log_sd * z).exp();
            let series = synthesize_profile(level, spec.start, spec.days, &spec.volatility, &mut rng)?;
            let id = ProfileId(format!("{}{:0width$}", spec.id_prefix, i));
            out.push(MonitoredProfile::new(id, series, share.group)?);
            i += 1;
        }
    }
    Ok(out)
}

/// A feeder populated only with known profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoFeeder {
    pub feeder: Feeder,
    /// Generating profile of each customer, in feeder order.
    pub truth: Vec<ProfileId>,
}

impl PseudoFeeder {
    pub fn true_profile(&self, customer: &CustomerId) -> Option<&ProfileId> {
        self.feeder
            .customers
            .iter()
            .position(|c| &c.customer_id == customer)
            .map(|j| &self.truth[j])
    }

    /// The generating map as an assignment, for scoring the ideal answer.
    pub fn generating_assignment(&self, pool: &ProfilePool) -> Result<BuddyAssignment> {
        let indices = self
            .truth
            .iter()
            .map(|pid| {
                pool.index_of(pid)
                    .ok_or_else(|| BuddyError::InvalidInput(format!("generating profile {pid} not in pool")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BuddyAssignment::from_indices(
            &self.feeder,
            pool,
            &indices,
            crate::model::Method::Simple,
            1.0,
            None,
            None,
        ))
    }
}

/// A random template feeder: group drawn in proportion to the pool's group
/// sizes, phase uniform over 1..=3. Mean daily demands are placeholders.
pub fn random_template(feeder_id: &str, n_customers: usize, pool: &ProfilePool, seed: u64) -> Result<Feeder> {
    let groups: Vec<GroupId> = pool.profiles().iter().map(|p| p.group).collect();
    if groups.is_empty() {
        return Err(BuddyError::InvalidInput("template needs a non-empty pool".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let customers = (0..n_customers)
        .map(|j| {
            let g = groups[rng.random_range(0..groups.len())];
            let phase = Phase::ALL[rng.random_range(0..3)];
            Customer::new(format!("{feeder_id}-c{j:03}"), g, 0.0).with_phase(phase)
        })
        .collect();
    Feeder::new(feeder_id, customers, None)
}

/// Populate a template with uniformly drawn same-group profiles from `pool`.
///
/// Within a feeder, profiles are drawn without replacement while the group
/// still has unused profiles. Customers take their generating profile's mean
/// daily demand and are not marked as monitored, so buddying must find them.
pub fn make_type1(template: &Feeder, pool: &ProfilePool, seed: u64) -> Result<PseudoFeeder> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining: BTreeMap<GroupId, Vec<usize>> = BTreeMap::new();
    let mut chosen = Vec::with_capacity(template.n_customers());
    for c in &template.customers {
        let members = pool.group_members(c.group);
        if members.is_empty() {
            return Err(BuddyError::Grouping(format!(
                "pool has no profiles in group {} for template customer {}",
                c.group, c.customer_id
            )));
        }
        let left = remaining.entry(c.group).or_default();
        if left.is_empty() {
            left.extend_from_slice(members);
            left.shuffle(&mut rng);
        }
        chosen.push(left.pop().expect("refilled"));
    }

    let span = pool.span().expect("non-empty pool");
    let mut total = vec![0.0; span.slots()];
    let mut phases: BTreeMap<Phase, Vec<f64>> = BTreeMap::new();
    let mut customers = Vec::with_capacity(chosen.len());
    for (c, &i) in template.customers.iter().zip(&chosen) {
        let p = pool.get(i);
        add_into(&mut total, p.series.values());
        if let Some(ph) = c.phase {
            add_into(
                phases.entry(ph).or_insert_with(|| vec![0.0; span.slots()]),
                p.series.values(),
            );
        }
        customers.push(Customer {
            customer_id: c.customer_id.clone(),
            group: c.group,
            mean_daily_demand: p.mean_daily_demand,
            monitored_profile: None,
            phase: c.phase,
        });
    }
    let mut feeder = Feeder::new(
        template.feeder_id.clone(),
        customers,
        Some(HalfHourlySeries::new(span.start, total)?),
    )?;
    feeder.phase_series = phases
        .into_iter()
        .map(|(ph, v)| Ok((ph, HalfHourlySeries::new(span.start, v)?)))
        .collect::<Result<_>>()?;
    let truth = chosen.iter().map(|&i| pool.get(i).profile_id.clone()).collect();
    Ok(PseudoFeeder { feeder, truth })
}

/// Split a pool into populating and buddying halves: within each group sort
/// by mean daily demand (ties by id) and send even positions (0-based) to
/// the populating half, odd positions to the buddying half.
pub fn make_type2_split(pool: &ProfilePool) -> Result<(ProfilePool, ProfilePool)> {
    let mut populate = Vec::new();
    let mut buddy = Vec::new();
    for g in pool.groups() {
        let mut members: Vec<&MonitoredProfile> = pool.group_members(g).iter().map(|&i| pool.get(i)).collect();
        if members.len() < 2 {
            return Err(BuddyError::Split(format!(
                "group {g} has {} profile(s), need at least 2",
                members.len()
            )));
        }
        members.sort_by(|a, b| {
            a.mean_daily_demand
                .total_cmp(&b.mean_daily_demand)
                .then_with(|| a.profile_id.cmp(&b.profile_id))
        });
        for (k, p) in members.into_iter().enumerate() {
            if k % 2 == 0 {
                populate.push(p.clone());
            } else {
                buddy.push(p.clone());
            }
        }
    }
    Ok((ProfilePool::new(populate)?, ProfilePool::new(buddy)?))
}

/// Fraction of customers assigned exactly their generating profile.
pub fn recovery_rate(pseudo: &PseudoFeeder, assignment: &BuddyAssignment) -> f64 {
    let n = pseudo.truth.len();
    if n == 0 {
        return 0.0;
    }
    let hits = pseudo
        .feeder
        .customers
        .iter()
        .zip(&pseudo.truth)
        .filter(|(c, t)| assignment.profile_for(&c.customer_id) == Some(*t))
        .count();
    hits as f64 / n as f64
}

/// Per-customer RMAE of the assigned profiles against the true ones over `window`.
pub fn individual_errors(
    pseudo: &PseudoFeeder,
    truth_pool: &ProfilePool,
    buddy_pool: &ProfilePool,
    assignment: &BuddyAssignment,
    window: Window,
) -> Result<Vec<f64>> {
    let indices = assignment.indices(&pseudo.feeder, buddy_pool)?;
    let truth = pseudo
        .truth
        .iter()
        .map(|pid| {
            truth_pool
                .by_id(pid)
                .ok_or_else(|| BuddyError::InvalidInput(format!("true profile {pid} missing")))?
                .series
                .slice(window)
        })
        .collect::<Result<Vec<_>>>()?;
    let assigned = indices
        .iter()
        .map(|&i| buddy_pool.get(i).series.slice(window))
        .collect::<Result<Vec<_>>>()?;
    per_customer_rmae(&truth, &assigned)
}

/// Write a pool and its pseudo-feeders in the ingestion formats:
/// `profiles.csv` (buddy pool), `customers.csv`, `substations.csv`,
/// `truth.csv` and `truth_profiles.csv` (every generating profile).
pub fn write_pseudo_dataset(
    dir: &Path,
    buddy_pool: &ProfilePool,
    truth_pool: &ProfilePool,
    feeders: &[PseudoFeeder],
    mapping: &GroupMapping,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let attrs = |g: GroupId| {
        mapping
            .representative(g)
            .ok_or_else(|| BuddyError::Grouping(format!("mapping has no rule producing group {g}")))
    };

    write_readings(
        BufWriter::new(File::create(dir.join("profiles.csv"))?),
        buddy_pool.profiles().iter().map(|p| (p.profile_id.as_str(), &p.series)),
    )?;
    write_readings(
        BufWriter::new(File::create(dir.join("truth_profiles.csv"))?),
        truth_pool.profiles().iter().map(|p| (p.profile_id.as_str(), &p.series)),
    )?;

    let mut registry = Registry::default();
    for p in buddy_pool.profiles() {
        registry.rows.push(RegistryRow::from_attributes(
            &format!("M-{}", p.profile_id),
            None,
            None,
            &attrs(p.group)?,
            p.mean_daily_demand,
            Some(p.profile_id.as_str()),
        ));
    }
    let mut substations: Vec<(String, &HalfHourlySeries)> = Vec::new();
    let mut truth = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("truth.csv"))?));
    truth.write_record(["customer_id", "feeder_id", "profile_id"])?;
    for pf in feeders {
        let f = &pf.feeder;
        for (c, t) in f.customers.iter().zip(&pf.truth) {
            registry.rows.push(RegistryRow::from_attributes(
                c.customer_id.as_str(),
                Some(f.feeder_id.as_str()),
                c.phase,
                &attrs(c.group)?,
                c.mean_daily_demand,
                None,
            ));
            truth.write_record([c.customer_id.as_str(), f.feeder_id.as_str(), t.as_str()])?;
        }
        if let Some(s) = &f.substation_series {
            substations.push((f.feeder_id.to_string(), s));
        }
        for (ph, s) in &f.phase_series {
            substations.push((format!("{}/{}", f.feeder_id, ph), s));
        }
    }
    truth.flush()?;
    registry.write(BufWriter::new(File::create(dir.join("customers.csv"))?))?;
    write_readings(
        BufWriter::new(File::create(dir.join("substations.csv"))?),
        substations.iter().map(|(id, s)| (id.as_str(), *s)),
    )?;
    Ok(())
}

/// Read `truth.csv`: feeder id to the generating profile of each customer.
pub fn read_truth(path: &Path) -> Result<BTreeMap<FeederId, BTreeMap<CustomerId, ProfileId>>> {
    #[derive(Deserialize)]
    struct Row {
        customer_id: String,
        feeder_id: String,
        profile_id: String,
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out: BTreeMap<FeederId, BTreeMap<CustomerId, ProfileId>> = BTreeMap::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| BuddyError::Schema {
            row: i + 2,
            message: e.to_string(),
        })?;
        out.entry(FeederId(row.feeder_id))
            .or_default()
            .insert(CustomerId(row.customer_id), ProfileId(row.profile_id));
    }
    Ok(out)
}
