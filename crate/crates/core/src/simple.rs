//! The simple buddy: each customer gets the same-group profile whose mean
//! daily demand is closest to its own. Substation readings play no part.

use crate::error::Result;
use crate::model::{BuddyAssignment, Feeder, Method, ProfilePool};

/// Closest-mean buddying. Ties go to the lowest profile id; monitored
/// customers whose profile is in the pool keep their own profile.
pub fn simple_buddy(feeder: &Feeder, pool: &ProfilePool) -> Result<BuddyAssignment> {
    let candidates = pool.candidates(feeder)?;
    let indices: Vec<usize> = feeder
        .customers
        .iter()
        .zip(&candidates)
        .map(|(c, cands)| closest(pool, cands, c.mean_daily_demand))
        .collect();
    Ok(BuddyAssignment::from_indices(
        feeder,
        pool,
        &indices,
        Method::Simple,
        1.0,
        None,
        None,
    ))
}

/// Candidates are in profile-id order, so a strict `<` keeps the lowest id on ties.
pub(crate) fn closest(pool: &ProfilePool, candidates: &[usize], target: f64) -> usize {
    let mut best = candidates[0];
    let mut best_gap = (target - pool.get(best).mean_daily_demand).abs();
    for &i in &candidates[1..] {
        let gap = (target - pool.get(i).mean_daily_demand).abs();
        if gap < best_gap {
            best = i;
            best_gap = gap;
        }
    }
    best
}
