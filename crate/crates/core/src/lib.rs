//! Buddying of unmonitored low-voltage customers to real half-hourly demand
//! profiles drawn from a pool of monitored customers.
//!
//! Two methods assign the buddies. [`simple::simple_buddy`] picks, for each
//! customer, the same-group profile with the closest mean daily demand.
//! [`ga::evolve`] runs a genetic algorithm that also fits the aggregate of the
//! buddied profiles to the feeder's substation readings. [`monte_carlo`] is a
//! random-search baseline, [`metrics`] scores the results and
//! [`pseudo`] builds synthetic validation feeders with known answers.

pub mod error;
pub mod experiment;
pub mod ga;
pub mod grouping;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod monte_carlo;
pub mod pseudo;
pub mod series;
pub mod simple;

pub use error::{BuddyError, Result};
pub use ga::{evolve, fitness, GaConfig, GaOutcome};
pub use grouping::{assign_group, CustomerAttributes, GroupId, GroupMapping};
pub use metrics::{fit_power_law, per_customer_rmae, rmae, rpde, FeederErrorReport, PowerLawFit};
pub use model::{
    BuddyAssignment, Customer, CustomerId, Feeder, FeederId, Method, MonitoredProfile, Phase, ProfileId, ProfilePool,
};
pub use monte_carlo::{monte_carlo_buddy, MonteCarloOutcome};
pub use series::{aggregate, mean_daily_demand, HalfHourlySeries, Window};
pub use simple::simple_buddy;
