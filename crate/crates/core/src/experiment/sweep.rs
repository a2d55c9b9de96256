use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cell_seed, train, SweepSpec};
use crate::error::{BuddyError, Result};
use crate::ingest::Dataset;
use crate::metrics::{fit_power_law, FeederErrorReport, PowerLawFit};
use crate::model::{BuddyAssignment, Feeder, FeederId, Method, ProfilePool};
use crate::series::Window;

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub feeder_id: String,
    pub method: Method,
    pub season: NaiveDate,
    pub weeks: u32,
    pub weight: f64,
    pub rmae: f64,
    pub rpde: f64,
    pub n_customers: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub feeder_id: String,
    pub method: Method,
    pub season: NaiveDate,
    pub weeks: u32,
    pub weight: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
struct AssignmentRecord<'a> {
    season: NaiveDate,
    weeks: u32,
    weight: f64,
    evaluation_window: Window,
    assignment: &'a BuddyAssignment,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<ResultRow>,
    /// Assignment behind each row, same order.
    pub assignments: Vec<(BuddyAssignment, Window)>,
    pub skipped: Vec<SkippedCell>,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    feeder: usize,
    method: Method,
    season: NaiveDate,
    weeks: u32,
    weight: f64,
}

fn run_cell(
    spec: &SweepSpec,
    feeder: &Feeder,
    pool: &ProfilePool,
    cell: Cell,
) -> Result<(ResultRow, BuddyAssignment, Window)> {
    let span = pool
        .span()
        .ok_or_else(|| BuddyError::Config("empty profile pool".into()))?;
    let series = feeder.substation_series.as_ref().ok_or_else(|| {
        BuddyError::Config(format!(
            "feeder {} has no substation readings to evaluate against",
            feeder.feeder_id
        ))
    })?;
    let available = span
        .intersect(Window::new(series.start(), series.days() as u32))
        .ok_or_else(|| BuddyError::Range("substation and pool share no days".into()))?;
    let test = spec.test_window(available)?;

    let training = Window::weeks(cell.season, cell.weeks);
    let seed = cell_seed(
        spec.master_seed,
        &feeder.feeder_id,
        cell.season,
        cell.weeks,
        cell.weight,
        cell.method,
    );
    let assignment = train(
        feeder,
        pool,
        training,
        cell.method,
        cell.weight,
        &spec.ga,
        spec.mc_samples,
        seed,
    )?;
    let seed = (cell.method != Method::Simple).then_some(seed);
    let report = FeederErrorReport::evaluate(feeder, pool, &assignment, test)?;
    let row = ResultRow {
        feeder_id: feeder.feeder_id.to_string(),
        method: cell.method,
        season: cell.season,
        weeks: cell.weeks,
        weight: cell.weight,
        rmae: report.rmae,
        rpde: report.rpde,
        n_customers: feeder.n_customers(),
        seed,
    };
    Ok((row, assignment, test))
}

/// Train and evaluate every (feeder, method, season, weeks, weight) cell.
///
/// Cells run in parallel; rows come back in grid order. A cell that cannot
/// run (say its training window lies outside the data) is skipped and
/// listed in [`SweepReport::skipped`].
pub fn run_sweep(spec: &SweepSpec, data: &Dataset) -> Result<SweepReport> {
    spec.validate()?;
    let mut cells = Vec::with_capacity(data.feeders.len() * spec.n_cells_per_feeder());
    for feeder in 0..data.feeders.len() {
        for &method in &spec.methods {
            for &season in &spec.seasons {
                for &weeks in &spec.weeks {
                    for &weight in &spec.weights {
                        cells.push(Cell {
                            feeder,
                            method,
                            season,
                            weeks,
                            weight,
                        });
                    }
                }
            }
        }
    }
    let outcomes: Vec<_> = cells
        .par_iter()
        .map(|&cell| (cell, run_cell(spec, &data.feeders[cell.feeder], &data.pool, cell)))
        .collect();

    let mut report = SweepReport {
        rows: Vec::new(),
        assignments: Vec::new(),
        skipped: Vec::new(),
    };
    for (cell, outcome) in outcomes {
        match outcome {
            Ok((row, assignment, test)) => {
                report.rows.push(row);
                report.assignments.push((assignment, test));
            }
            Err(e) => {
                let feeder_id = data.feeders[cell.feeder].feeder_id.to_string();
                log::warn!(
                    "skipping {feeder_id} {} {} {}w w={}: {e}",
                    cell.method,
                    cell.season,
                    cell.weeks,
                    cell.weight
                );
                report.skipped.push(SkippedCell {
                    feeder_id,
                    method: cell.method,
                    season: cell.season,
                    weeks: cell.weeks,
                    weight: cell.weight,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Serialize)]
struct SurfaceRow {
    method: Method,
    season: NaiveDate,
    weeks: u32,
    weight: f64,
    mean_rmae: f64,
    mean_rpde: f64,
    n_feeders: usize,
}

#[derive(Debug, Serialize)]
struct SizeRow<'a> {
    feeder_id: &'a str,
    method: Method,
    season: NaiveDate,
    weeks: u32,
    weight: f64,
    n_customers: usize,
    rmae: f64,
    rmae_per_customer: f64,
}

#[derive(Debug, Serialize)]
struct RpdeRow<'a> {
    method: Method,
    season: NaiveDate,
    weeks: u32,
    weight: f64,
    feeder_id: &'a str,
    rpde: f64,
}

#[derive(Debug, Serialize)]
struct FitRecord {
    method: Method,
    season: NaiveDate,
    weeks: u32,
    weight: f64,
    fit: PowerLawFit,
}

impl SweepReport {
    /// Rows sharing a (method, season, weeks, weight) coordinate, in first-seen order.
    fn by_configuration(&self) -> Vec<((Method, NaiveDate, u32, f64), Vec<&ResultRow>)> {
        let mut out: Vec<((Method, NaiveDate, u32, f64), Vec<&ResultRow>)> = Vec::new();
        for row in &self.rows {
            let key = (row.method, row.season, row.weeks, row.weight);
            match out.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push(row),
                None => out.push((key, vec![row])),
            }
        }
        out
    }

    pub fn write_results_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Write `results.csv`, `assignments.json`, `skipped.csv` and the plot
    /// data files `surface.csv`, `error_vs_size.csv`, `rpde.csv` and
    /// `powerlaw.json`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let create = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(name))?)) };

        self.write_results_csv(create("results.csv")?)?;

        let records: Vec<AssignmentRecord> = self
            .rows
            .iter()
            .zip(&self.assignments)
            .map(|(row, (a, test))| AssignmentRecord {
                season: row.season,
                weeks: row.weeks,
                weight: row.weight,
                evaluation_window: *test,
                assignment: a,
            })
            .collect();
        let mut json = create("assignments.json")?;
        serde_json::to_writer_pretty(&mut json, &records)?;
        json.flush()?;

        let mut skipped = csv::Writer::from_writer(create("skipped.csv")?);
        skipped.write_record(["feeder_id", "method", "season", "weeks", "weight", "reason"])?;
        for s in &self.skipped {
            skipped.serialize(s)?;
        }
        skipped.flush()?;

        let groups = self.by_configuration();
        let mut surface = csv::Writer::from_writer(create("surface.csv")?);
        let mut fits = Vec::new();
        for ((method, season, weeks, weight), rows) in &groups {
            let n = rows.len() as f64;
            surface.serialize(SurfaceRow {
                method: *method,
                season: *season,
                weeks: *weeks,
                weight: *weight,
                mean_rmae: rows.iter().map(|r| r.rmae).sum::<f64>() / n,
                mean_rpde: rows.iter().map(|r| r.rpde).sum::<f64>() / n,
                n_feeders: rows.len(),
            })?;
            let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n_customers as f64, r.rmae)).collect();
            if let Ok(fit) = fit_power_law(&points) {
                fits.push(FitRecord {
                    method: *method,
                    season: *season,
                    weeks: *weeks,
                    weight: *weight,
                    fit,
                });
            }
        }
        surface.flush()?;
        let mut json = create("powerlaw.json")?;
        serde_json::to_writer_pretty(&mut json, &fits)?;
        json.flush()?;

        let mut size = csv::Writer::from_writer(create("error_vs_size.csv")?);
        let mut rpde = csv::Writer::from_writer(create("rpde.csv")?);
        for row in &self.rows {
            size.serialize(SizeRow {
                feeder_id: &row.feeder_id,
                method: row.method,
                season: row.season,
                weeks: row.weeks,
                weight: row.weight,
                n_customers: row.n_customers,
                rmae: row.rmae,
                rmae_per_customer: row.rmae / row.n_customers as f64,
            })?;
            rpde.serialize(RpdeRow {
                method: row.method,
                season: row.season,
                weeks: row.weeks,
                weight: row.weight,
                feeder_id: &row.feeder_id,
                rpde: row.rpde,
            })?;
        }
        size.flush()?;
        rpde.flush()?;
        Ok(())
    }

    /// Rows for one feeder id.
    pub fn rows_for<'a>(&'a self, feeder: &'a FeederId) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.feeder_id == feeder.as_str())
    }
}
