//! Error measures for buddied feeders and the error-vs-size power-law fit.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{BuddyError, Result};
use crate::model::{BuddyAssignment, Feeder, FeederId, Method, ProfilePool};
use crate::series::Window;

fn check_pair(actual: &[f64], modeled: &[f64]) -> Result<()> {
    if actual.len() != modeled.len() {
        return Err(BuddyError::Alignment(format!(
            "actual has {} slots, modeled {}",
            actual.len(),
            modeled.len()
        )));
    }
    if actual.is_empty() {
        return Err(BuddyError::InvalidInput("empty series".into()));
    }
    Ok(())
}

/// Relative mean absolute error: `Σ_t |a(t) - s(t)| / (H * S)` where `s`
/// is the actual series, `H` its length and `S` its total.
///
/// Note the extra division by `H` compared with the GA fitness.
pub fn rmae(actual: &[f64], modeled: &[f64]) -> Result<f64> {
    check_pair(actual, modeled)?;
    let total: f64 = actual.iter().sum();
    if !(total > 0.0) {
        return Err(BuddyError::Degenerate("actual series sums to zero".into()));
    }
    let abs: f64 = actual.iter().zip(modeled).map(|(s, a)| (a - s).abs()).sum();
    Ok(abs / (actual.len() as f64 * total))
}

/// Relative peak demand error: `(max s - max a) / max s`.
///
/// Positive when the model underestimates the actual peak, negative when it
/// overestimates it.
pub fn rpde(actual: &[f64], modeled: &[f64]) -> Result<f64> {
    check_pair(actual, modeled)?;
    let peak = actual.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(BuddyError::Degenerate("actual peak is not positive".into()));
    }
    let modeled_peak = modeled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((peak - modeled_peak) / peak)
}

/// RMAE of each customer's assigned profile against their true profile.
pub fn per_customer_rmae<T: AsRef<[f64]>, A: AsRef<[f64]>>(truth: &[T], assigned: &[A]) -> Result<Vec<f64>> {
    if truth.len() != assigned.len() {
        return Err(BuddyError::Alignment(format!(
            "{} true series but {} assigned",
            truth.len(),
            assigned.len()
        )));
    }
    truth
        .iter()
        .zip(assigned)
        .map(|(t, a)| rmae(t.as_ref(), a.as_ref()))
        .collect()
}

/// Feeder-level accuracy of one assignment, with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederErrorReport {
    pub feeder_id: FeederId,
    pub n_customers: usize,
    pub rmae: f64,
    pub rpde: f64,
    /// Only known for pseudo-feeders, where each customer's true series exists.
    pub per_customer_rmae: Option<Vec<f64>>,
    pub method: Method,
    pub weight: f64,
    pub training_window: Option<Window>,
    pub evaluation_window: Window,
}

impl FeederErrorReport {
    /// Score `assignment` against the feeder's substation readings over `window`.
    pub fn evaluate(feeder: &Feeder, pool: &ProfilePool, assignment: &BuddyAssignment, window: Window) -> Result<Self> {
        let actual = feeder.substation_window(window)?;
        let modeled = assignment.aggregate(feeder, pool, window)?;
        Ok(Self {
            feeder_id: feeder.feeder_id.clone(),
            n_customers: feeder.n_customers(),
            rmae: rmae(actual, &modeled)?,
            rpde: rpde(actual, &modeled)?,
            per_customer_rmae: None,
            method: assignment.method,
            weight: assignment.weight,
            training_window: assignment.training_window,
            evaluation_window: window,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub x: f64,
    pub fit: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Least-squares fit of `y = a * x^(-b)` in log-log space.
///
/// Intervals are two-sided 99% Student-t intervals from ordinary least
/// squares on `ln y = ln a - b ln x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub a_interval: (f64, f64),
    pub b_interval: (f64, f64),
    pub n_points: usize,
    /// Residual standard deviation in log space.
    pub residual_sd: f64,
    pub t_quantile: f64,
    mean_log_x: f64,
    sxx: f64,
    /// Confidence band for the fitted curve at each distinct input x.
    pub band: Vec<BandPoint>,
}

pub const POWER_LAW_CONFIDENCE: f64 = 0.99;

impl PowerLawFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.a * x.powf(-self.b)
    }

    /// Confidence band for the mean curve at `x`.
    pub fn band_at(&self, x: f64) -> BandPoint {
        let lx = x.ln();
        let centre = self.a.ln() - self.b * lx;
        let half = self.t_quantile
            * self.residual_sd
            * (1.0 / self.n_points as f64 + (lx - self.mean_log_x).powi(2) / self.sxx).sqrt();
        BandPoint {
            x,
            fit: centre.exp(),
            lower: (centre - half).exp(),
            upper: (centre + half).exp(),
        }
    }
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    let n = points.len();
    if n < 3 {
        return Err(BuddyError::Fit(format!("need at least 3 points, got {n}")));
    }
    if let Some(p) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(BuddyError::Fit(format!("point {p:?} is not strictly positive")));
    }
    let lx: Vec<f64> = points.iter().map(|(x, _)| x.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|(_, y)| y.ln()).collect();
    let nf = n as f64;
    let mx = lx.iter().sum::<f64>() / nf;
    let my = ly.iter().sum::<f64>() / nf;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(BuddyError::Fit("all x values are equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let residual_sd = (sse / (nf - 2.0)).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .map_err(|e| BuddyError::Fit(e.to_string()))?
        .inverse_cdf(0.5 + POWER_LAW_CONFIDENCE / 2.0);
    let se_slope = residual_sd / sxx.sqrt();
    let se_intercept = residual_sd * (1.0 / nf + mx * mx / sxx).sqrt();

    let b = -slope;
    let mut fit = PowerLawFit {
        a: intercept.exp(),
        b,
        a_interval: (
            (intercept - t * se_intercept).exp(),
            (intercept + t * se_intercept).exp(),
        ),
        b_interval: (b - t * se_slope, b + t * se_slope),
        n_points: n,
        residual_sd,
        t_quantile: t,
        mean_log_x: mx,
        sxx,
        band: Vec::new(),
    };
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    fit.band = xs.into_iter().map(|x| fit.band_at(x)).collect();
    Ok(fit)
}
