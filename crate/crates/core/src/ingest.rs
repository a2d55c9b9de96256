//! Loading readings and customer registries from CSV, and cleaning raw series.
//!
//! Reading CSV (profiles and substations share this shape):
//!
//! ```text
//! entity_id,date,slot,kwh,flag
//! P001,2014-09-01,0,0.132,ok
//! ```
//!
//! Slots run 0..=47. Flags are `ok`, `missing` or `outlier`; slots absent from
//! the file inside an entity's date range count as missing. Substation entity
//! ids are either `<feeder_id>` or `<feeder_id>/<phase>`.
//!
//! Customer registry CSV:
//!
//! ```text
//! customer_id,feeder_id,phase,profile_class,council_tax_band,has_pv,mean_daily_kwh,monitored_profile_id
//! ```
//!
//! Rows with an empty `feeder_id` describe pool-only monitored customers; they
//! supply the attributes that place each monitored profile in its group.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{BuddyError, Result};
use crate::grouping::{parse_flag, CustomerAttributes, GroupId, GroupMapping, ProfileClass};
use crate::model::{Customer, Feeder, FeederId, MonitoredProfile, Phase, ProfileId, ProfilePool};
use crate::series::{HalfHourlySeries, Window, SLOTS_PER_DAY};

/// Readings above this multiple of the 99th percentile are treated as anomalous.
pub const OUTLIER_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Ok,
    Missing,
    Outlier,
}

/// A raw series before cleaning: one value and quality flag per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct FlaggedSeries {
    pub start: NaiveDate,
    pub values: Vec<f64>,
    pub flags: Vec<Quality>,
}

impl FlaggedSeries {
    pub fn all_ok(series: &HalfHourlySeries) -> Self {
        Self {
            start: series.start(),
            values: series.values().to_vec(),
            flags: vec![Quality::Ok; series.len()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DayType {
    Weekday,
    Weekend,
}

fn day_type(date: NaiveDate) -> DayType {
    match date.weekday() {
        Weekday::Sat | Weekday::Sun => DayType::Weekend,
        _ => DayType::Weekday,
    }
}

/// Linear-interpolated percentile of unsorted data, `q` in [0, 1].
fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Replace missing, outlying and anomalous readings with the average of
/// valid readings from the same half-hour of the same day type (weekday or
/// weekend) across the whole series.
///
/// A reading is valid when flagged ok, non-negative and no larger than
/// [`OUTLIER_FACTOR`] times the 99th percentile of the valid readings. When a
/// slot/day-type class has no valid readings the same slot over all days is
/// used, then the series-wide mean.
pub fn clean_series(raw: &FlaggedSeries, entity: &str) -> Result<HalfHourlySeries> {
    let n = raw.values.len();
    if raw.flags.len() != n {
        return Err(BuddyError::InvalidInput(format!(
            "{entity}: {} flags for {n} values",
            raw.flags.len()
        )));
    }
    if n % SLOTS_PER_DAY != 0 {
        return Err(BuddyError::InvalidInput(format!(
            "{entity}: {n} slots is not a whole number of days"
        )));
    }

    let mut valid: Vec<bool> = raw
        .values
        .iter()
        .zip(&raw.flags)
        .map(|(v, f)| *f == Quality::Ok && v.is_finite() && *v >= 0.0)
        .collect();
    let candidates: Vec<f64> = raw
        .values
        .iter()
        .zip(&valid)
        .filter_map(|(v, ok)| ok.then_some(*v))
        .collect();
    if candidates.is_empty() {
        return Err(BuddyError::UnrecoverableSeries(entity.to_owned()));
    }
    let p99 = percentile(&candidates, 0.99);
    // an all-zero bulk would otherwise flag every positive reading
    if p99 > 0.0 {
        let threshold = OUTLIER_FACTOR * p99;
        for (ok, v) in valid.iter_mut().zip(&raw.values) {
            if *v > threshold {
                *ok = false;
            }
        }
    }
    if valid.iter().all(|ok| *ok) {
        return HalfHourlySeries::new(raw.start, raw.values.clone());
    }

    // [day type][slot] -> (sum, count); index 2 pools both day types
    let mut class_sums = [[(0.0f64, 0usize); SLOTS_PER_DAY]; 3];
    let (mut all_sum, mut all_count) = (0.0, 0usize);
    for (k, (v, ok)) in raw.values.iter().zip(&valid).enumerate() {
        if !ok {
            continue;
        }
        let date = raw.start + Days::new((k / SLOTS_PER_DAY) as u64);
        let slot = k % SLOTS_PER_DAY;
        let dt = day_type(date) as usize;
        for idx in [dt, 2] {
            class_sums[idx][slot].0 += v;
            class_sums[idx][slot].1 += 1;
        }
        all_sum += v;
        all_count += 1;
    }
    let series_mean = all_sum / all_count as f64;

    let mut out = raw.values.clone();
    for (k, ok) in valid.iter().enumerate() {
        if *ok {
            continue;
        }
        let date = raw.start + Days::new((k / SLOTS_PER_DAY) as u64);
        let slot = k % SLOTS_PER_DAY;
        let dt = day_type(date) as usize;
        out[k] = [class_sums[dt][slot], class_sums[2][slot]]
            .into_iter()
            .find(|(_, c)| *c > 0)
            .map(|(s, c)| s / c as f64)
            .unwrap_or(series_mean);
    }
    HalfHourlySeries::new(raw.start, out)
}

/// The `n_weeks` of readings starting on `start`.
pub fn window(series: &HalfHourlySeries, start: NaiveDate, n_weeks: u32) -> Result<HalfHourlySeries> {
    if n_weeks == 0 {
        return Err(BuddyError::Range("training window of zero weeks".into()));
    }
    series.sub_series(Window::weeks(start, n_weeks))
}

#[derive(Debug, Deserialize)]
struct ReadingRecord {
    entity_id: String,
    date: String,
    slot: usize,
    kwh: Option<f64>,
    flag: Option<Quality>,
}

/// Raw per-entity readings as parsed from a reading CSV.
#[derive(Debug, Clone, Default)]
pub struct RawReadingTable {
    pub entities: BTreeMap<String, FlaggedSeries>,
}

impl RawReadingTable {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows: BTreeMap<String, Vec<(NaiveDate, usize, f64, Quality, usize)>> = BTreeMap::new();
        for (i, rec) in rdr.deserialize::<ReadingRecord>().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| BuddyError::Schema {
                row,
                message: e.to_string(),
            })?;
            let date = NaiveDate::parse_from_str(&rec.date, "%Y-%m-%d").map_err(|e| BuddyError::Schema {
                row,
                message: format!("date {:?}: {e}", rec.date),
            })?;
            if rec.slot >= SLOTS_PER_DAY {
                return Err(BuddyError::Schema {
                    row,
                    message: format!("slot {} outside 0..=47", rec.slot),
                });
            }
            let (value, flag) = match (rec.kwh, rec.flag.unwrap_or(Quality::Ok)) {
                (Some(v), f) => (v, f),
                (None, _) => (f64::NAN, Quality::Missing),
            };
            rows.entry(rec.entity_id)
                .or_default()
                .push((date, rec.slot, value, flag, row));
        }

        let mut entities = BTreeMap::new();
        for (id, recs) in rows {
            let first = recs.iter().map(|r| r.0).min().expect("non-empty");
            let last = recs.iter().map(|r| r.0).max().expect("non-empty");
            let days = (last - first).num_days() as usize + 1;
            let mut values = vec![f64::NAN; days * SLOTS_PER_DAY];
            let mut flags = vec![Quality::Missing; days * SLOTS_PER_DAY];
            let mut seen = vec![false; days * SLOTS_PER_DAY];
            for (date, slot, v, f, row) in recs {
                let k = (date - first).num_days() as usize * SLOTS_PER_DAY + slot;
                if std::mem::replace(&mut seen[k], true) {
                    return Err(BuddyError::Schema {
                        row,
                        message: format!("duplicate reading for {id} on {date} slot {slot}"),
                    });
                }
                values[k] = v;
                flags[k] = f;
            }
            entities.insert(
                id,
                FlaggedSeries {
                    start: first,
                    values,
                    flags,
                },
            );
        }
        Ok(Self { entities })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_reader(File::open(path)?)
    }

    /// Clean every entity, setting aside those with under a day of valid data.
    pub fn clean(&self) -> (BTreeMap<String, HalfHourlySeries>, Vec<Rejection>) {
        let mut cleaned = BTreeMap::new();
        let mut rejected = Vec::new();
        for (id, raw) in &self.entities {
            let n_ok = raw.flags.iter().filter(|f| **f == Quality::Ok).count();
            if n_ok < SLOTS_PER_DAY {
                let reason = format!("only {n_ok} valid readings, need at least one whole day");
                log::warn!("rejecting {id}: {reason}");
                rejected.push(Rejection {
                    entity_id: id.clone(),
                    reason,
                });
                continue;
            }
            match clean_series(raw, id) {
                Ok(s) => {
                    cleaned.insert(id.clone(), s);
                }
                Err(e) => {
                    log::warn!("rejecting {id}: {e}");
                    rejected.push(Rejection {
                        entity_id: id.clone(),
                        reason: e.to_string(),
                    });
                }
            }
        }
        (cleaned, rejected)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub entity_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ProfileLoad {
    pub profiles: Vec<MonitoredProfile>,
    pub rejected: Vec<Rejection>,
}

/// Parse, clean and group monitored profiles. `groups` gives each profile's group.
pub fn read_profiles<R: Read>(reader: R, groups: &HashMap<ProfileId, GroupId>) -> Result<ProfileLoad> {
    let table = RawReadingTable::from_reader(reader)?;
    if table.entities.is_empty() {
        log::warn!("profile file contains no readings");
    }
    let (cleaned, mut rejected) = table.clean();
    let mut profiles = Vec::with_capacity(cleaned.len());
    for (id, series) in cleaned {
        let pid = ProfileId(id);
        match groups.get(&pid) {
            Some(&g) => profiles.push(MonitoredProfile::new(pid, series, g)?),
            None => {
                log::warn!("rejecting profile {pid}: no registry attributes");
                rejected.push(Rejection {
                    entity_id: pid.0,
                    reason: "no registry row gives this profile's attributes".into(),
                });
            }
        }
    }
    Ok(ProfileLoad { profiles, rejected })
}

pub fn load_profiles(path: &Path, groups: &HashMap<ProfileId, GroupId>) -> Result<ProfileLoad> {
    read_profiles(File::open(path)?, groups)
}

/// Cleaned substation series keyed by feeder, with optional per-phase series.
#[derive(Debug, Clone, Default)]
pub struct SubstationReadings {
    pub feeders: BTreeMap<FeederId, HalfHourlySeries>,
    pub phases: BTreeMap<(FeederId, Phase), HalfHourlySeries>,
    pub rejected: Vec<Rejection>,
}

pub fn read_substations<R: Read>(reader: R) -> Result<SubstationReadings> {
    let (cleaned, rejected) = RawReadingTable::from_reader(reader)?.clean();
    let mut out = SubstationReadings {
        rejected,
        ..Default::default()
    };
    for (id, series) in cleaned {
        match id.rsplit_once('/') {
            Some((feeder, phase)) => {
                let label: u8 = phase
                    .parse()
                    .map_err(|_| BuddyError::InvalidInput(format!("substation entity {id:?}: bad phase label")))?;
                out.phases
                    .insert((FeederId(feeder.to_owned()), Phase::new(label)?), series);
            }
            None => {
                out.feeders.insert(FeederId(id), series);
            }
        }
    }
    Ok(out)
}

pub fn load_substations(path: &Path) -> Result<SubstationReadings> {
    read_substations(File::open(path)?)
}

/// One line of the customer registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryRow {
    pub customer_id: String,
    #[serde(default)]
    pub feeder_id: Option<String>,
    #[serde(default)]
    pub phase: Option<u8>,
    pub profile_class: u8,
    #[serde(default)]
    pub council_tax_band: Option<String>,
    pub has_pv: String,
    pub mean_daily_kwh: f64,
    #[serde(default)]
    pub monitored_profile_id: Option<String>,
}

impl RegistryRow {
    pub fn attributes(&self) -> Result<CustomerAttributes> {
        let band = match self.council_tax_band.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(s) if s.eq_ignore_ascii_case("unknown") => None,
            Some(s) => Some(s.parse()?),
        };
        Ok(CustomerAttributes::new(
            ProfileClass::try_from(self.profile_class)?,
            band,
            parse_flag(&self.has_pv)?,
        ))
    }

    pub fn from_attributes(
        customer_id: &str,
        feeder_id: Option<&str>,
        phase: Option<Phase>,
        attrs: &CustomerAttributes,
        mean_daily_kwh: f64,
        monitored_profile_id: Option<&str>,
    ) -> Self {
        Self {
            customer_id: customer_id.to_owned(),
            feeder_id: feeder_id.map(str::to_owned),
            phase: phase.map(Phase::label),
            profile_class: attrs.profile_class.into(),
            council_tax_band: attrs.council_tax_band.map(|b| b.letter().to_string()),
            has_pv: if attrs.has_pv { "Y" } else { "N" }.into(),
            mean_daily_kwh,
            monitored_profile_id: monitored_profile_id.map(str::to_owned),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    pub rows: Vec<RegistryRow>,
}

impl Registry {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let rows = rdr
            .deserialize::<RegistryRow>()
            .enumerate()
            .map(|(i, r)| {
                r.map_err(|e| BuddyError::Schema {
                    row: i + 2,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_reader(File::open(path)?)
    }

    /// Group of every monitored profile named in the registry.
    pub fn profile_groups(&self, mapping: &GroupMapping) -> Result<HashMap<ProfileId, GroupId>> {
        let mut out = HashMap::new();
        for (i, row) in self.rows.iter().enumerate() {
            let Some(pid) = row.monitored_profile_id.as_deref().filter(|s| !s.is_empty()) else {
                continue;
            };
            let g = row
                .attributes()
                .and_then(|a| mapping.assign(&a))
                .map_err(|e| BuddyError::Schema {
                    row: i + 2,
                    message: e.to_string(),
                })?;
            if let Some(prev) = out.insert(ProfileId(pid.to_owned()), g) {
                if prev != g {
                    return Err(BuddyError::Grouping(format!(
                        "profile {pid} registered in groups {prev} and {g}"
                    )));
                }
            }
        }
        Ok(out)
    }

    /// Build feeders from rows carrying a feeder id. Monitored customers
    /// found in `pool` take their profile's mean daily demand.
    pub fn feeders(
        &self,
        mapping: &GroupMapping,
        pool: &ProfilePool,
        substations: &SubstationReadings,
    ) -> Result<Vec<Feeder>> {
        let mut grouped: BTreeMap<&str, Vec<Customer>> = BTreeMap::new();
        for (i, row) in self.rows.iter().enumerate() {
            let Some(fid) = row.feeder_id.as_deref().filter(|s| !s.is_empty()) else {
                continue;
            };
            let schema = |message: String| BuddyError::Schema { row: i + 2, message };
            let attrs = row.attributes().map_err(|e| schema(e.to_string()))?;
            let group = mapping.assign(&attrs).map_err(|e| schema(e.to_string()))?;
            let mut customer = Customer::new(row.customer_id.as_str(), group, row.mean_daily_kwh);
            if let Some(p) = row.phase {
                customer.phase = Some(Phase::new(p).map_err(|e| schema(e.to_string()))?);
            }
            if let Some(pid) = row.monitored_profile_id.as_deref().filter(|s| !s.is_empty()) {
                match pool.by_id(&ProfileId(pid.to_owned())) {
                    Some(p) => customer = customer.monitored(p),
                    None => log::warn!(
                        "customer {} names monitored profile {pid}, which is not in the pool",
                        row.customer_id
                    ),
                }
            }
            grouped.entry(fid).or_default().push(customer);
        }
        grouped
            .into_iter()
            .map(|(fid, customers)| {
                let id = FeederId(fid.to_owned());
                let series = substations.feeders.get(&id).cloned();
                let mut feeder = Feeder::new(id.clone(), customers, series)?;
                feeder.phase_series = substations
                    .phases
                    .range((id.clone(), Phase::ALL[0])..=(id.clone(), Phase::ALL[2]))
                    .map(|((_, ph), s)| (*ph, s.clone()))
                    .collect();
                Ok(feeder)
            })
            .collect()
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Write series as reading CSV rows, all flagged ok.
pub fn write_readings<'a, W: Write>(
    writer: W,
    entities: impl IntoIterator<Item = (&'a str, &'a HalfHourlySeries)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["entity_id", "date", "slot", "kwh", "flag"])?;
    for (id, series) in entities {
        for (k, v) in series.values().iter().enumerate() {
            let date = series.start() + Days::new((k / SLOTS_PER_DAY) as u64);
            w.write_record([
                id,
                &date.format("%Y-%m-%d").to_string(),
                &(k % SLOTS_PER_DAY).to_string(),
                &v.to_string(),
                "ok",
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Trim profiles to the calendar span they all share, recomputing means.
pub fn trim_to_common_span(profiles: Vec<MonitoredProfile>) -> Result<Vec<MonitoredProfile>> {
    let Some(span) = profiles
        .iter()
        .map(|p| Window::new(p.series.start(), p.series.days() as u32))
        .try_fold(None::<Window>, |acc, w| match acc {
            None => Some(Some(w)),
            Some(a) => a.intersect(w).map(Some),
        })
        .flatten()
    else {
        if profiles.is_empty() {
            return Ok(profiles);
        }
        return Err(BuddyError::Alignment("monitored profiles share no common days".into()));
    };
    profiles
        .into_iter()
        .map(|p| {
            if p.series.start() == span.start && p.series.days() == span.days as usize {
                Ok(p)
            } else {
                MonitoredProfile::new(p.profile_id, p.series.sub_series(span)?, p.group)
            }
        })
        .collect()
}

/// Everything needed to buddy: the pool and the feeders to model.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub pool: ProfilePool,
    pub feeders: Vec<Feeder>,
    pub rejected: Vec<Rejection>,
}

pub fn load_dataset(
    profiles: &Path,
    customers: &Path,
    substations: Option<&Path>,
    mapping: &GroupMapping,
) -> Result<Dataset> {
    let registry = Registry::from_path(customers)?;
    let groups = registry.profile_groups(mapping)?;
    let ProfileLoad { profiles, mut rejected } = load_profiles(profiles, &groups)?;
    let pool = ProfilePool::new(trim_to_common_span(profiles)?)?;
    let subs = match substations {
        Some(p) => load_substations(p)?,
        None => SubstationReadings::default(),
    };
    rejected.extend(subs.rejected.iter().cloned());
    let feeders = registry.feeders(mapping, &pool, &subs)?;
    Ok(Dataset {
        pool,
        feeders,
        rejected,
    })
}
