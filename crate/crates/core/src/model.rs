//! Customers, feeders, the monitored profile pool and buddy assignments.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{BuddyError, Result};
use crate::grouping::GroupId;
use crate::series::{mean_daily_demand, HalfHourlySeries, Window};

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(ProfileId);
string_id!(CustomerId);
string_id!(FeederId);

/// One of the three phases of a feeder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Phase(u8);

impl Phase {
    pub const ALL: [Phase; 3] = [Phase(1), Phase(2), Phase(3)];

    pub fn new(label: u8) -> Result<Self> {
        match label {
            1..=3 => Ok(Phase(label)),
            other => Err(BuddyError::InvalidInput(format!("phase {other} not in 1..=3"))),
        }
    }

    pub fn label(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Phase {
    type Error = BuddyError;
    fn try_from(v: u8) -> Result<Self> {
        Phase::new(v)
    }
}

impl From<Phase> for u8 {
    fn from(p: Phase) -> u8 {
        p.0
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A monitored customer's cleaned half-hourly series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoredProfile {
    pub profile_id: ProfileId,
    pub series: HalfHourlySeries,
    pub mean_daily_demand: f64,
    pub group: GroupId,
}

impl MonitoredProfile {
    pub fn new(profile_id: ProfileId, series: HalfHourlySeries, group: GroupId) -> Result<Self> {
        let mean_daily_demand = mean_daily_demand(&series)?;
        Ok(Self {
            profile_id,
            series,
            mean_daily_demand,
            group,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub customer_id: CustomerId,
    pub group: GroupId,
    /// Mean daily demand in kWh/day, usually from quarterly meter reads.
    pub mean_daily_demand: f64,
    /// Own monitored profile, for the few customers that have one.
    pub monitored_profile: Option<ProfileId>,
    pub phase: Option<Phase>,
}

impl Customer {
    pub fn new(customer_id: impl Into<CustomerId>, group: GroupId, mean_daily_demand: f64) -> Self {
        Self {
            customer_id: customer_id.into(),
            group,
            mean_daily_demand,
            monitored_profile: None,
            phase: None,
        }
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = Some(phase);
        self
    }

    pub fn monitored(mut self, profile: &MonitoredProfile) -> Self {
        self.monitored_profile = Some(profile.profile_id.clone());
        self.mean_daily_demand = profile.mean_daily_demand;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feeder {
    pub feeder_id: FeederId,
    pub customers: Vec<Customer>,
    pub substation_series: Option<HalfHourlySeries>,
    /// Per-phase head readings, when monitored.
    #[serde(default)]
    pub phase_series: BTreeMap<Phase, HalfHourlySeries>,
}

impl Feeder {
    pub fn new(
        feeder_id: impl Into<FeederId>,
        customers: Vec<Customer>,
        substation_series: Option<HalfHourlySeries>,
    ) -> Result<Self> {
        let feeder_id = feeder_id.into();
        if customers.is_empty() {
            return Err(BuddyError::InvalidInput(format!("feeder {feeder_id} has no customers")));
        }
        if let Some(c) = customers.iter().find(|c| !(c.mean_daily_demand >= 0.0)) {
            return Err(BuddyError::InvalidInput(format!(
                "customer {} has negative or undefined mean daily demand",
                c.customer_id
            )));
        }
        Ok(Self {
            feeder_id,
            customers,
            substation_series,
            phase_series: BTreeMap::new(),
        })
    }

    pub fn n_customers(&self) -> usize {
        self.customers.len()
    }

    /// Readings for `window`, or an error naming what is missing.
    pub fn substation_window(&self, window: Window) -> Result<&[f64]> {
        let series = self
            .substation_series
            .as_ref()
            .ok_or_else(|| BuddyError::Config(format!("feeder {} has no substation readings", self.feeder_id)))?;
        series.slice(window)
    }
}

/// The monitored profiles available for buddying, sorted by profile id.
///
/// All profiles share a start date and length so that any window can be cut
/// from every profile at the same offsets.
#[derive(Debug, Clone)]
pub struct ProfilePool {
    profiles: Vec<MonitoredProfile>,
    by_id: HashMap<ProfileId, usize>,
    by_group: BTreeMap<GroupId, Vec<usize>>,
}

impl ProfilePool {
    pub fn new(mut profiles: Vec<MonitoredProfile>) -> Result<Self> {
        profiles.sort_by(|a, b| a.profile_id.cmp(&b.profile_id));
        if let Some(w) = profiles.windows(2).find(|w| w[0].profile_id == w[1].profile_id) {
            return Err(BuddyError::InvalidInput(format!(
                "duplicate profile id {}",
                w[0].profile_id
            )));
        }
        if let Some(first) = profiles.first() {
            let (start, len) = (first.series.start(), first.series.len());
            if let Some(p) = profiles
                .iter()
                .find(|p| p.series.start() != start || p.series.len() != len)
            {
                return Err(BuddyError::Alignment(format!(
                    "profile {} covers {} slots from {}, pool uses {len} from {start}",
                    p.profile_id,
                    p.series.len(),
                    p.series.start()
                )));
            }
        }
        let by_id = profiles
            .iter()
            .enumerate()
            .map(|(i, p)| (p.profile_id.clone(), i))
            .collect();
        let mut by_group: BTreeMap<GroupId, Vec<usize>> = BTreeMap::new();
        for (i, p) in profiles.iter().enumerate() {
            by_group.entry(p.group).or_default().push(i);
        }
        Ok(Self {
            profiles,
            by_id,
            by_group,
        })
    }

    pub fn profiles(&self) -> &[MonitoredProfile] {
        &self.profiles
    }

    pub fn into_profiles(self) -> Vec<MonitoredProfile> {
        self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn get(&self, index: usize) -> &MonitoredProfile {
        &self.profiles[index]
    }

    pub fn index_of(&self, id: &ProfileId) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn by_id(&self, id: &ProfileId) -> Option<&MonitoredProfile> {
        self.index_of(id).map(|i| &self.profiles[i])
    }

    /// Indices of the profiles in `group`, in profile-id order.
    pub fn group_members(&self, group: GroupId) -> &[usize] {
        self.by_group.get(&group).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn groups(&self) -> impl Iterator<Item = GroupId> + '_ {
        self.by_group.keys().copied()
    }

    /// Candidate profile indices for each customer, in feeder order.
    ///
    /// A monitored customer whose profile is in the pool has exactly one
    /// candidate: its own profile.
    pub fn candidates(&self, feeder: &Feeder) -> Result<Vec<Vec<usize>>> {
        feeder
            .customers
            .iter()
            .map(|c| {
                if let Some(own) = &c.monitored_profile {
                    if let Some(i) = self.index_of(own) {
                        if self.profiles[i].group != c.group {
                            return Err(BuddyError::Grouping(format!(
                                "customer {} in group {} is monitored by profile {own} of group {}",
                                c.customer_id, c.group, self.profiles[i].group
                            )));
                        }
                        return Ok(vec![i]);
                    }
                }
                let members = self.group_members(c.group);
                if members.is_empty() {
                    return Err(BuddyError::Grouping(format!(
                        "no monitored profiles in group {} for customer {} on feeder {}",
                        c.group, c.customer_id, feeder.feeder_id
                    )));
                }
                Ok(members.to_vec())
            })
            .collect()
    }

    /// Window of the pool's shared calendar.
    pub fn span(&self) -> Option<Window> {
        self.profiles
            .first()
            .map(|p| Window::new(p.series.start(), p.series.days() as u32))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Simple,
    Ga,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Simple => "simple",
            Method::Ga => "ga",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = BuddyError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" | "sa" => Ok(Method::Simple),
            "ga" => Ok(Method::Ga),
            "monte-carlo" | "mc" => Ok(Method::MonteCarlo),
            other => Err(BuddyError::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Buddy {
    pub customer_id: CustomerId,
    pub profile_id: ProfileId,
}

/// Which monitored profile stands in for each customer on a feeder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuddyAssignment {
    pub feeder_id: FeederId,
    /// One entry per customer, in feeder order.
    pub buddies: Vec<Buddy>,
    pub method: Method,
    pub weight: f64,
    pub training_window: Option<Window>,
    pub seed: Option<u64>,
}

impl BuddyAssignment {
    pub(crate) fn from_indices(
        feeder: &Feeder,
        pool: &ProfilePool,
        indices: &[usize],
        method: Method,
        weight: f64,
        training_window: Option<Window>,
        seed: Option<u64>,
    ) -> Self {
        let buddies = feeder
            .customers
            .iter()
            .zip(indices)
            .map(|(c, &i)| Buddy {
                customer_id: c.customer_id.clone(),
                profile_id: pool.get(i).profile_id.clone(),
            })
            .collect();
        Self {
            feeder_id: feeder.feeder_id.clone(),
            buddies,
            method,
            weight,
            training_window,
            seed,
        }
    }

    pub fn profile_for(&self, customer: &CustomerId) -> Option<&ProfileId> {
        self.buddies
            .iter()
            .find(|b| &b.customer_id == customer)
            .map(|b| &b.profile_id)
    }

    /// Pool indices in feeder order, checking the assignment covers every
    /// customer with a same-group profile.
    pub fn indices(&self, feeder: &Feeder, pool: &ProfilePool) -> Result<Vec<usize>> {
        let lookup: HashMap<&CustomerId, &ProfileId> =
            self.buddies.iter().map(|b| (&b.customer_id, &b.profile_id)).collect();
        feeder
            .customers
            .iter()
            .map(|c| {
                let pid = lookup
                    .get(&c.customer_id)
                    .ok_or_else(|| BuddyError::InvalidInput(format!("customer {} has no buddy", c.customer_id)))?;
                let i = pool
                    .index_of(pid)
                    .ok_or_else(|| BuddyError::InvalidInput(format!("profile {pid} not in pool")))?;
                if pool.get(i).group != c.group {
                    return Err(BuddyError::Grouping(format!(
                        "customer {} (group {}) buddied to {pid} (group {})",
                        c.customer_id,
                        c.group,
                        pool.get(i).group
                    )));
                }
                Ok(i)
            })
            .collect()
    }

    /// Aggregate of the assigned profiles over `window`.
    pub fn aggregate(&self, feeder: &Feeder, pool: &ProfilePool, window: Window) -> Result<Vec<f64>> {
        let indices = self.indices(feeder, pool)?;
        aggregate_indices(pool, &indices, window)
    }

    /// Σ_j |U_j − Û_{k_j}|, the quantity the simple method minimises.
    pub fn mean_demand_mismatch(&self, feeder: &Feeder, pool: &ProfilePool) -> Result<f64> {
        let indices = self.indices(feeder, pool)?;
        Ok(feeder
            .customers
            .iter()
            .zip(&indices)
            .map(|(c, &i)| (c.mean_daily_demand - pool.get(i).mean_daily_demand).abs())
            .sum())
    }
}

pub(crate) fn aggregate_indices(pool: &ProfilePool, indices: &[usize], window: Window) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; window.slots()];
    for &i in indices {
        crate::series::add_into(&mut acc, pool.get(i).series.slice(window)?);
    }
    Ok(acc)
}
