//! Half-hourly energy series and the calendar windows cut from them.
//!
//! Slots are positional: slot `k` of a series starting on `start` belongs to
//! day `start + k / 48`, half-hour `k % 48`. No timezone or DST handling.

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{BuddyError, Result};

pub const SLOTS_PER_DAY: usize = 48;
pub const SLOTS_PER_WEEK: usize = SLOTS_PER_DAY * 7;

/// Energy readings in kWh per half-hour slot, covering whole days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfHourlySeries {
    start: NaiveDate,
    values: Vec<f64>,
}

impl HalfHourlySeries {
    pub fn new(start: NaiveDate, values: Vec<f64>) -> Result<Self> {
        if values.len() % SLOTS_PER_DAY != 0 {
            return Err(BuddyError::InvalidInput(format!(
                "series length {} is not a whole number of days",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(BuddyError::InvalidInput(format!("non-finite value at slot {k}")));
        }
        Ok(Self { start, values })
    }

    pub fn zeros(start: NaiveDate, days: usize) -> Self {
        Self {
            start,
            values: vec![0.0; days * SLOTS_PER_DAY],
        }
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    /// First day not covered by the series.
    pub fn end_exclusive(&self) -> NaiveDate {
        self.start + Days::new(self.days() as u64)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn days(&self) -> usize {
        self.values.len() / SLOTS_PER_DAY
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn covers(&self, window: Window) -> bool {
        window.start >= self.start && window.end_exclusive() <= self.end_exclusive()
    }

    /// Borrow the slots of `window`, or a range error if it is not covered.
    pub fn slice(&self, window: Window) -> Result<&[f64]> {
        if window.days == 0 {
            return Err(BuddyError::Range("window has zero length".into()));
        }
        if window.start < self.start {
            return Err(BuddyError::Range(format!(
                "window starts {} before series start {}",
                window.start, self.start
            )));
        }
        if window.end_exclusive() > self.end_exclusive() {
            return Err(BuddyError::Range(format!(
                "window ending {} runs past series end {}",
                window.end_exclusive(),
                self.end_exclusive()
            )));
        }
        let offset = (window.start - self.start).num_days() as usize * SLOTS_PER_DAY;
        Ok(&self.values[offset..offset + window.slots()])
    }

    pub fn sub_series(&self, window: Window) -> Result<HalfHourlySeries> {
        Ok(Self {
            start: window.start,
            values: self.slice(window)?.to_vec(),
        })
    }
}

/// A run of whole calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Window {
    pub start: NaiveDate,
    pub days: u32,
}

impl Window {
    pub fn new(start: NaiveDate, days: u32) -> Self {
        Self { start, days }
    }

    pub fn weeks(start: NaiveDate, weeks: u32) -> Self {
        Self { start, days: weeks * 7 }
    }

    /// Window from `start` through `end` inclusive.
    pub fn inclusive(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        let days = (end - start).num_days() + 1;
        if days < 1 {
            return Err(BuddyError::Range(format!("window end {end} precedes start {start}")));
        }
        Ok(Self {
            start,
            days: days as u32,
        })
    }

    pub fn end_exclusive(&self) -> NaiveDate {
        self.start + Days::new(self.days as u64)
    }

    pub fn slots(&self) -> usize {
        self.days as usize * SLOTS_PER_DAY
    }

    /// Overlap of two windows, if any.
    pub fn intersect(&self, other: Window) -> Option<Window> {
        let start = self.start.max(other.start);
        let end = self.end_exclusive().min(other.end_exclusive());
        (end > start).then(|| Window {
            start,
            days: (end - start).num_days() as u32,
        })
    }
}

/// Mean daily demand in kWh/day: the series total divided by its number of days.
pub fn mean_daily_demand(series: &HalfHourlySeries) -> Result<f64> {
    if series.is_empty() {
        return Err(BuddyError::InvalidInput("mean daily demand of an empty series".into()));
    }
    Ok(series.total() / series.days() as f64)
}

/// Slot-wise sum of aligned series. An empty list yields `n_slots` zeros.
pub fn aggregate(start: NaiveDate, n_slots: usize, series: &[&HalfHourlySeries]) -> Result<HalfHourlySeries> {
    let mut out = vec![0.0; n_slots];
    for (i, s) in series.iter().enumerate() {
        if s.len() != n_slots || s.start != start {
            return Err(BuddyError::Alignment(format!(
                "series {i} has {} slots from {}, expected {n_slots} from {start}",
                s.len(),
                s.start
            )));
        }
        add_into(&mut out, &s.values);
    }
    HalfHourlySeries::new(start, out)
}

#[inline]
pub(crate) fn add_into(acc: &mut [f64], values: &[f64]) {
    for (a, v) in acc.iter_mut().zip(values) {
        *a += v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day0() -> NaiveDate {
        NaiveDate::from_ymd_opt(2014, 9, 1).unwrap()
    }

    fn constant(v: f64, days: usize) -> HalfHourlySeries {
        HalfHourlySeries::new(day0(), vec![v; days * SLOTS_PER_DAY]).unwrap()
    }

    #[test]
    fn mean_daily_demand_examples() {
        assert_eq!(mean_daily_demand(&constant(0.0, 1)).unwrap(), 0.0);
        assert_eq!(mean_daily_demand(&constant(0.5, 2)).unwrap(), 24.0);
        let ramp: Vec<f64> = (1..=48).map(f64::from).collect();
        let s = HalfHourlySeries::new(day0(), ramp).unwrap();
        // 48 * 49 / 2 over one day
        assert_eq!(mean_daily_demand(&s).unwrap(), 1176.0);
    }

    #[test]
    fn mean_daily_demand_rejects_empty() {
        let s = HalfHourlySeries::new(day0(), vec![]).unwrap();
        assert!(matches!(mean_daily_demand(&s), Err(BuddyError::InvalidInput(_))));
    }

    #[test]
    fn partial_days_rejected() {
        assert!(HalfHourlySeries::new(day0(), vec![1.0; 47]).is_err());
        assert!(HalfHourlySeries::new(day0(), vec![f64::NAN; 48]).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let empty = aggregate(day0(), 48, &[]).unwrap();
        assert_eq!(empty.values(), &[0.0; 48][..]);

        let x = HalfHourlySeries::new(day0(), (0..48).map(|k| k as f64 * 0.1).collect()).unwrap();
        let z = constant(0.0, 1);
        assert_eq!(aggregate(day0(), 48, &[&x, &z]).unwrap(), x);

        let sum = aggregate(day0(), 48, &[&constant(0.2, 1), &constant(0.3, 1)]).unwrap();
        assert!(sum.values().iter().all(|v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn aggregate_rejects_misaligned() {
        let a = constant(1.0, 1);
        let b = constant(1.0, 2);
        assert!(matches!(
            aggregate(day0(), 48, &[&a, &b]),
            Err(BuddyError::Alignment(_))
        ));
        let shifted = HalfHourlySeries::new(day0().succ_opt().unwrap(), vec![1.0; 48]).unwrap();
        assert!(aggregate(day0(), 48, &[&a, &shifted]).is_err());
    }

    #[test]
    fn slicing_respects_calendar() {
        let s = HalfHourlySeries::new(day0(), (0..48 * 10).map(f64::from).collect()).unwrap();
        let w = Window::new(day0() + Days::new(2), 3);
        let sl = s.slice(w).unwrap();
        assert_eq!(sl.len(), 144);
        assert_eq!(sl[0], 96.0);
        assert!(s.slice(Window::new(day0() + Days::new(8), 3)).is_err());
        assert!(s.slice(Window::new(day0().pred_opt().unwrap(), 1)).is_err());
    }

    #[test]
    fn window_intersection() {
        let a = Window::new(day0(), 10);
        let b = Window::new(day0() + Days::new(5), 10);
        assert_eq!(a.intersect(b), Some(Window::new(day0() + Days::new(5), 5)));
        assert_eq!(a.intersect(Window::new(day0() + Days::new(10), 1)), None);
        assert_eq!(Window::inclusive(day0(), day0() + Days::new(364)).unwrap().days, 365);
    }

    fn day_blocks(days: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..5.0, days * SLOTS_PER_DAY)
    }

    proptest! {
        #[test]
        fn aggregate_commutes_and_adds_means(a in day_blocks(2), b in day_blocks(2), c in day_blocks(2)) {
            let sa = HalfHourlySeries::new(day0(), a).unwrap();
            let sb = HalfHourlySeries::new(day0(), b).unwrap();
            let sc = HalfHourlySeries::new(day0(), c).unwrap();
            let abc = aggregate(day0(), 96, &[&sa, &sb, &sc]).unwrap();
            let cba = aggregate(day0(), 96, &[&sc, &sb, &sa]).unwrap();
            let ab = aggregate(day0(), 96, &[&sa, &sb]).unwrap();
            let ab_c = aggregate(day0(), 96, &[&ab, &sc]).unwrap();
            for ((x, y), z) in abc.values().iter().zip(cba.values()).zip(ab_c.values()) {
                prop_assert!((x - y).abs() < 1e-12);
                prop_assert!((x - z).abs() < 1e-12);
            }
            let lhs = mean_daily_demand(&ab).unwrap();
            let rhs = mean_daily_demand(&sa).unwrap() + mean_daily_demand(&sb).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        }

        #[test]
        fn mean_invariant_under_day_reordering(v in day_blocks(4), rot in 0usize..4) {
            let s = HalfHourlySeries::new(day0(), v.clone()).unwrap();
            let mut days: Vec<&[f64]> = v.chunks(SLOTS_PER_DAY).collect();
            days.rotate_left(rot);
            days.swap(0, 3);
            let shuffled = HalfHourlySeries::new(day0(), days.concat()).unwrap();
            let a = mean_daily_demand(&s).unwrap();
            let b = mean_daily_demand(&shuffled).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }
}
