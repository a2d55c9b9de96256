use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use buddy::experiment::{
    cell_seed, mc_summary, run_mc_comparison, run_phase_mode, run_sweep, size_matched_comparison, write_mc_comparison,
    write_phase_comparison, SweepSpec,
};
use buddy::ingest::{load_dataset, load_profiles, Dataset};
use buddy::pseudo::{
    generate_pool, individual_errors, make_type1, make_type2_split, random_template, read_truth, recovery_rate,
    write_pseudo_dataset, PseudoFeeder, SyntheticPoolSpec,
};
use buddy::{fit_power_law, BuddyError, GaConfig, GroupMapping, Method, ProfileId, ProfilePool, Result, Window};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

#[derive(Parser)]
#[command(
    name = "buddy",
    version,
    about = "Buddy unmonitored LV customers to monitored demand profiles"
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, env = "BUDDY_WORKERS", global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep over seasons, training lengths, weights and methods.
    Run(RunArgs),
    /// Generate or score pseudo-feeders.
    #[command(subcommand)]
    Pseudo(PseudoCommand),
    /// Compare the GA with best-of-N random search per feeder.
    McCompare(McArgs),
    /// Compare feeder-level with phase-by-phase buddying.
    PhaseCompare(PhaseArgs),
    /// Fit y = a * x^(-b) to two columns of a CSV file.
    FitPowerlaw(FitArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Monitored profile readings: entity_id,date,slot,kwh,flag
    #[arg(long)]
    profiles: PathBuf,
    /// Customer registry CSV.
    #[arg(long)]
    customers: PathBuf,
    /// Substation readings; entity ids are feeder ids or feeder/phase.
    #[arg(long)]
    substations: Option<PathBuf>,
    /// Grouping rules (.toml or .csv) replacing the built-in table.
    #[arg(long)]
    mapping: Option<PathBuf>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let mapping = match &self.mapping {
            Some(p) => GroupMapping::from_path(p)?,
            None => GroupMapping::default(),
        };
        let data = load_dataset(&self.profiles, &self.customers, self.substations.as_deref(), &mapping)?;
        for r in &data.rejected {
            log::warn!("rejected {}: {}", r.entity_id, r.reason);
        }
        Ok(data)
    }
}

#[derive(Args)]
struct RunArgs {
    /// Sweep configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    /// Replace the configured methods.
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    /// Random-search sample count.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
}

#[derive(Subcommand)]
enum PseudoCommand {
    /// Write a synthetic pool and pseudo-feeders in the ingestion formats.
    Gen(GenArgs),
    /// Buddy pseudo-feeders and score against the generating profiles.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PseudoKind {
    /// Customers drawn from the buddy pool itself.
    Type1,
    /// Customers drawn from half of a demand-ordered split, buddied from the other half.
    Type2,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "type1")]
    kind: PseudoKind,
    #[arg(long, default_value_t = 20)]
    feeders: usize,
    #[arg(long, default_value_t = 10)]
    min_customers: usize,
    #[arg(long, default_value_t = 40)]
    max_customers: usize,
    /// Synthetic pool size.
    #[arg(long, default_value_t = 240)]
    pool_size: usize,
    #[arg(long, default_value_t = 112)]
    days: usize,
    #[arg(long, default_value = "2014-09-01")]
    start: NaiveDate,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ValidateArgs {
    /// Directory written by `pseudo gen`.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value = "ga")]
    method: Method,
    #[arg(long, default_value_t = 0.0)]
    weight: f64,
    /// First training day (default: first day of the data).
    #[arg(long)]
    season: Option<NaiveDate>,
    #[arg(long, default_value_t = 8)]
    weeks: u32,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// GA settings (TOML).
    #[arg(long)]
    ga_config: Option<PathBuf>,
    /// Per-feeder CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    season: Option<NaiveDate>,
    #[arg(long, default_value_t = 8)]
    weeks: u32,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    ga_config: Option<PathBuf>,
    /// Per-feeder CSV (default: stdout). The summary goes to stdout as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PhaseArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "ga")]
    method: Method,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    weights: Vec<f64>,
    #[arg(long)]
    season: Option<NaiveDate>,
    #[arg(long, default_value_t = 8)]
    weeks: u32,
    /// Evaluation period, inclusive (default: all data).
    #[arg(long)]
    test_start: Option<NaiveDate>,
    #[arg(long)]
    test_end: Option<NaiveDate>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    ga_config: Option<PathBuf>,
    /// Size range for the matched feeder/phase buckets.
    #[arg(long, default_value_t = 16)]
    size_min: usize,
    #[arg(long, default_value_t = 36)]
    size_max: usize,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "n_customers")]
    x: String,
    #[arg(long, default_value = "rmae")]
    y: String,
    /// Keep only rows where COLUMN equals VALUE, e.g. `--filter method=ga`.
    #[arg(long, value_parser = parse_filter)]
    filter: Vec<(String, String)>,
}

fn parse_filter(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_owned(), v.to_owned()))
        .ok_or_else(|| format!("expected COLUMN=VALUE, got {s:?}"))
}

fn read_ga_config(path: Option<&Path>) -> Result<GaConfig> {
    match path {
        Some(p) => GaConfig::from_toml(&std::fs::read_to_string(p)?),
        None => Ok(GaConfig::default()),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn span(pool: &ProfilePool) -> Result<Window> {
    pool.span()
        .ok_or_else(|| BuddyError::InvalidInput("no usable monitored profiles".into()))
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let mut spec = SweepSpec::from_toml(&std::fs::read_to_string(&args.config)?)?;
    if !args.method.is_empty() {
        spec.methods = args.method;
    }
    if let Some(n) = args.samples {
        spec.mc_samples = n;
    }
    if let Some(s) = args.master_seed {
        spec.master_seed = s;
    }
    let data = args.data.load()?;
    let report = run_sweep(&spec, &data)?;
    report.write_outputs(&args.out)?;
    print_json(&serde_json::json!({
        "feeders": data.feeders.len(),
        "rows": report.rows.len(),
        "skipped": report.skipped.len(),
        "out": args.out,
    }))
}

fn pseudo_gen(args: GenArgs) -> Result<()> {
    if args.min_customers == 0 || args.min_customers > args.max_customers {
        return Err(BuddyError::Config("need 1 <= min-customers <= max-customers".into()));
    }
    let spec = SyntheticPoolSpec {
        n_profiles: args.pool_size,
        start: args.start,
        days: args.days,
        seed: args.seed,
        ..Default::default()
    };
    let full = ProfilePool::new(generate_pool(&spec)?)?;
    let (source, buddies) = match args.kind {
        PseudoKind::Type1 => (full.clone(), full.clone()),
        PseudoKind::Type2 => make_type2_split(&full)?,
    };
    let span_sizes = (args.max_customers - args.min_customers + 1) as u64;
    let feeders = (0..args.feeders)
        .map(|i| {
            let fseed = args.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            let n = args.min_customers + (fseed.wrapping_mul(2_654_435_761) % span_sizes) as usize;
            let template = random_template(&format!("F{i:03}"), n, &source, fseed)?;
            make_type1(&template, &source, fseed)
        })
        .collect::<Result<Vec<_>>>()?;
    write_pseudo_dataset(&args.out, &buddies, &full, &feeders, &GroupMapping::default())?;
    print_json(&serde_json::json!({
        "feeders": feeders.len(),
        "buddy_pool": buddies.len(),
        "truth_pool": full.len(),
        "out": args.out,
    }))
}

fn pseudo_validate(args: ValidateArgs) -> Result<()> {
    let dir = &args.dir;
    let mapping = GroupMapping::default();
    let data = load_dataset(
        &dir.join("profiles.csv"),
        &dir.join("customers.csv"),
        Some(&dir.join("substations.csv")),
        &mapping,
    )?;
    let truth = read_truth(&dir.join("truth.csv"))?;

    let mut truth_groups: HashMap<ProfileId, buddy::GroupId> = data
        .pool
        .profiles()
        .iter()
        .map(|p| (p.profile_id.clone(), p.group))
        .collect();
    let mut pseudo = Vec::with_capacity(data.feeders.len());
    for f in &data.feeders {
        let map = truth
            .get(&f.feeder_id)
            .ok_or_else(|| BuddyError::InvalidInput(format!("no truth for feeder {}", f.feeder_id)))?;
        let ids = f
            .customers
            .iter()
            .map(|c| {
                let pid = map
                    .get(&c.customer_id)
                    .cloned()
                    .ok_or_else(|| BuddyError::InvalidInput(format!("no truth for customer {}", c.customer_id)))?;
                truth_groups.insert(pid.clone(), c.group);
                Ok(pid)
            })
            .collect::<Result<Vec<_>>>()?;
        pseudo.push(PseudoFeeder {
            feeder: f.clone(),
            truth: ids,
        });
    }
    let truth_pool = ProfilePool::new(load_profiles(&dir.join("truth_profiles.csv"), &truth_groups)?.profiles)?;

    let ga = read_ga_config(args.ga_config.as_deref())?;
    let full = span(&data.pool)?;
    let training = Window::weeks(args.season.unwrap_or(full.start), args.weeks);

    #[derive(serde::Serialize)]
    struct Row {
        feeder_id: String,
        n_customers: usize,
        recovery_rate: f64,
        mean_individual_rmae: f64,
        rmae: f64,
    }
    let rows = pseudo
        .par_iter()
        .map(|pf| -> Result<Row> {
            let f = &pf.feeder;
            let seed = cell_seed(
                args.seed,
                &f.feeder_id,
                training.start,
                args.weeks,
                args.weight,
                args.method,
            );
            let assignment = match args.method {
                Method::Simple => buddy::simple_buddy(f, &data.pool)?,
                Method::Ga => {
                    buddy::evolve(
                        f,
                        &data.pool,
                        training,
                        &GaConfig {
                            weight: args.weight,
                            seed,
                            ..ga.clone()
                        },
                    )?
                    .assignment
                }
                Method::MonteCarlo => buddy::monte_carlo_buddy(f, &data.pool, training, args.samples, seed)?.assignment,
            };
            let individual = individual_errors(pf, &truth_pool, &data.pool, &assignment, full)?;
            let report = buddy::FeederErrorReport::evaluate(f, &data.pool, &assignment, full)?;
            Ok(Row {
                feeder_id: f.feeder_id.to_string(),
                n_customers: f.n_customers(),
                recovery_rate: recovery_rate(pf, &assignment),
                mean_individual_rmae: individual.iter().sum::<f64>() / individual.len() as f64,
                rmae: report.rmae,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn mc_compare(args: McArgs) -> Result<()> {
    let data = args.data.load()?;
    let ga = read_ga_config(args.ga_config.as_deref())?;
    let window = Window::weeks(args.season.unwrap_or(span(&data.pool)?.start), args.weeks);
    let rows = run_mc_comparison(&data.feeders, &data.pool, window, &ga, args.samples, args.seed)?;
    match &args.out {
        Some(p) => write_mc_comparison(BufWriter::new(File::create(p)?), &rows)?,
        None => write_mc_comparison(io::stdout().lock(), &rows)?,
    }
    if args.out.is_some() {
        print_json(&serde_json::to_value(mc_summary(&rows)?)?)?;
    }
    Ok(())
}

fn phase_compare(args: PhaseArgs) -> Result<()> {
    let data = args.data.load()?;
    let ga = read_ga_config(args.ga_config.as_deref())?;
    let full = span(&data.pool)?;
    let training = Window::weeks(args.season.unwrap_or(full.start), args.weeks);
    let last = full.end_exclusive().pred_opt().expect("date in range");
    let test = Window::inclusive(args.test_start.unwrap_or(full.start), args.test_end.unwrap_or(last))?;

    let jobs: Vec<(usize, f64)> = (0..data.feeders.len())
        .flat_map(|i| args.weights.iter().map(move |&w| (i, w)))
        .collect();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(i, w)| {
            let f = &data.feeders[i];
            let seed = cell_seed(args.seed, &f.feeder_id, training.start, args.weeks, w, args.method);
            (
                f,
                run_phase_mode(f, &data.pool, training, test, args.method, w, &ga, args.samples, seed),
            )
        })
        .collect();
    let mut comparisons = Vec::new();
    for (f, outcome) in outcomes {
        match outcome {
            Ok(c) => comparisons.push(c),
            Err(e) => log::warn!("skipping feeder {} in phase comparison: {e}", f.feeder_id),
        }
    }

    let first_weight = args.weights.first().copied().unwrap_or(0.0);
    let at_first: Vec<_> = comparisons.iter().filter(|c| c.weight == first_weight).collect();
    let feeder_points: Vec<(usize, f64)> = at_first.iter().map(|c| (c.n_customers, c.feeder_rmae)).collect();
    let phase_points: Vec<(usize, f64)> = at_first
        .iter()
        .flat_map(|c| c.phases.iter().filter_map(|p| p.rmae.map(|r| (p.n_customers, r))))
        .collect();
    let buckets = size_matched_comparison(&feeder_points, &phase_points, args.size_min, args.size_max);
    write_phase_comparison(&args.out, &comparisons, &buckets)?;
    print_json(&serde_json::json!({
        "comparisons": comparisons.len(),
        "out": args.out,
    }))
}

fn fit_powerlaw(args: FitArgs) -> Result<()> {
    let mut rdr = csv::Reader::from_path(&args.input)?;
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| BuddyError::InvalidInput(format!("no column {name:?} in {}", args.input.display())))
    };
    let (xi, yi) = (column(&args.x)?, column(&args.y)?);
    let filters = args
        .filter
        .iter()
        .map(|(k, v)| Ok((column(k)?, v.as_str())))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if filters.iter().any(|(c, v)| record.get(*c) != Some(*v)) {
            continue;
        }
        let num = |c: usize| -> Result<f64> {
            record.get(c).unwrap_or("").parse().map_err(|_| BuddyError::Schema {
                row: i + 2,
                message: format!("column {} is not a number", headers.get(c).unwrap_or("")),
            })
        };
        points.push((num(xi)?, num(yi)?));
    }
    let fit = fit_power_law(&points)?;
    print_json(&serde_json::to_value(&fit)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size worker pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Pseudo(PseudoCommand::Gen(a)) => pseudo_gen(a),
        Command::Pseudo(PseudoCommand::Validate(a)) => pseudo_validate(a),
        Command::McCompare(a) => mc_compare(a),
        Command::PhaseCompare(a) => phase_compare(a),
        Command::FitPowerlaw(a) => fit_powerlaw(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.to_string(), "kind": e.kind() });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
