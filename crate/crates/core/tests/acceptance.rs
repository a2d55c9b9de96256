//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any hard criterion fails. Run with
//! `cargo test -p buddy-core --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use buddy::experiment::{run_sweep, SweepSpec};
use buddy::grouping::GroupId;
use buddy::ingest::Dataset;
use buddy::pseudo::{
    generate_pool, individual_errors, make_type1, make_type2_split, random_template, recovery_rate, DemandLevel,
    GroupShare, PseudoFeeder, SyntheticPoolSpec,
};
use buddy::{
    evolve, fit_power_law, fitness, monte_carlo_buddy, rmae, rpde, simple_buddy, Customer, Feeder, GaConfig, GaOutcome,
    HalfHourlySeries, Method, Phase, ProfilePool, Window,
};
use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

struct Outcome {
    id: &'static str,
    passed: bool,
    soft: bool,
    detail: String,
    elapsed: Duration,
}

fn pool(spec: SyntheticPoolSpec) -> ProfilePool {
    ProfilePool::new(generate_pool(&spec).expect("pool")).expect("pool")
}

fn even_groups(n_groups: u8, median: f64) -> Vec<GroupShare> {
    (0..n_groups)
        .map(|g| GroupShare {
            group: GroupId(g),
            proportion: 1.0 / n_groups as f64,
            demand: DemandLevel {
                median: median + g as f64,
                log_sd: 0.4,
            },
        })
        .collect()
}

fn training(pool: &ProfilePool, weeks: u32) -> Window {
    Window::weeks(pool.span().unwrap().start, weeks)
}

fn rmae_of(pf: &Feeder, pool: &ProfilePool, a: &buddy::BuddyAssignment, w: Window) -> f64 {
    let modeled = a.aggregate(pf, pool, w).unwrap();
    rmae(pf.substation_window(w).unwrap(), &modeled).unwrap()
}

fn non_increasing(trace: &[f64]) -> bool {
    trace.windows(2).all(|p| p[1] <= p[0])
}

/// Whether each group received the right multiset of profiles.
fn recovered_up_to_swaps(pf: &PseudoFeeder, a: &buddy::BuddyAssignment) -> bool {
    let mut by_group: std::collections::BTreeMap<GroupId, (Vec<String>, Vec<String>)> = Default::default();
    for ((c, t), b) in pf.feeder.customers.iter().zip(&pf.truth).zip(&a.buddies) {
        let e = by_group.entry(c.group).or_default();
        e.0.push(t.to_string());
        e.1.push(b.profile_id.to_string());
    }
    by_group.values_mut().all(|(t, b)| {
        t.sort();
        b.sort();
        t == b
    })
}

// ---------------------------------------------------------------- 1

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let pool = pool(SyntheticPoolSpec {
        n_profiles: 60,
        days: 28,
        seed: 101,
        ..Default::default()
    });
    let mut means: Vec<f64> = pool.profiles().iter().map(|p| p.mean_daily_demand).collect();
    means.sort_by(f64::total_cmp);
    let distinct = means.windows(2).all(|w| w[0] != w[1]);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut perfect = 0;
    for i in 0..50u64 {
        let n = rng.random_range(10..=40);
        let t = random_template(&format!("S{i}"), n, &pool, 1000 + i).unwrap();
        let pf = make_type1(&t, &pool, 2000 + i).unwrap();
        let a = simple_buddy(&pf.feeder, &pool).unwrap();
        if recovery_rate(&pf, &a) == 1.0 {
            perfect += 1;
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        id: "1",
        passed: distinct && perfect == 50 && elapsed < Duration::from_secs(10),
        soft: false,
        detail: format!("simple buddy exact recovery on {perfect}/50 feeders, distinct pool means: {distinct}"),
        elapsed,
    }
}

// ---------------------------------------------------------------- 2, 5, 6

struct SmallRun {
    recovered: bool,
    trace: Vec<f64>,
}

struct McRun {
    ga_rmae: f64,
    mc_rmae: f64,
    trace: Vec<f64>,
}

/// A template whose customers all sit in different groups, so that the
/// zero-fitness assignment is unique.
fn distinct_group_template(id: &str, n: usize, seed: u64) -> Feeder {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups: Vec<u8> = (0..7).collect();
    groups.shuffle(&mut rng);
    let customers = groups[..n]
        .iter()
        .enumerate()
        .map(|(j, &g)| {
            Customer::new(format!("{id}-c{j}"), GroupId(g), 0.0).with_phase(Phase::new(1 + (j % 3) as u8).unwrap())
        })
        .collect();
    Feeder::new(id, customers, None).unwrap()
}

fn small_pool(seed: u64) -> ProfilePool {
    let pool = pool(SyntheticPoolSpec {
        n_profiles: 56,
        days: 28,
        groups: even_groups(7, 8.0),
        seed,
        ..Default::default()
    });
    assert!(pool.groups().all(|g| pool.group_members(g).len() <= 8));
    pool
}

fn small_instances() -> (Vec<SmallRun>, Duration) {
    let start = Instant::now();
    let runs = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let pool = small_pool(500 + i);
            let n = 2 + (i % 4) as usize;
            let t = distinct_group_template(&format!("G{i}"), n, 700 + i);
            let pf = make_type1(&t, &pool, 900 + i).unwrap();
            let out = evolve(&pf.feeder, &pool, training(&pool, 2), &GaConfig::default().with_seed(i)).unwrap();
            SmallRun {
                recovered: recovery_rate(&pf, &out.assignment) == 1.0,
                trace: out.trace,
            }
        })
        .collect();
    (runs, start.elapsed())
}

fn mc_instances() -> (Vec<McRun>, Duration) {
    let start = Instant::now();
    let full = pool(SyntheticPoolSpec {
        seed: 202,
        ..Default::default()
    });
    let (populate, buddies) = make_type2_split(&full).unwrap();
    let window = training(&buddies, 8);
    let runs = (0..30u64)
        .map(|i| {
            let n = 20 + ((i * 7) % 21) as usize;
            let t = random_template(&format!("M{i}"), n, &populate, 3000 + i).unwrap();
            let pf = make_type1(&t, &populate, 4000 + i).unwrap();
            let f = &pf.feeder;
            let ga: GaOutcome = evolve(f, &buddies, window, &GaConfig::default().with_seed(i)).unwrap();
            let mc = monte_carlo_buddy(f, &buddies, window, 1000, 10_000 + i).unwrap();
            McRun {
                ga_rmae: rmae_of(f, &buddies, &ga.assignment, window),
                mc_rmae: mc.best_rmae,
                trace: ga.trace,
            }
        })
        .collect();
    (runs, start.elapsed())
}

fn criterion_2(runs: &[SmallRun], elapsed: Duration) -> Outcome {
    let ok = runs.iter().filter(|r| r.recovered).count();
    Outcome {
        id: "2",
        passed: ok >= 95 && elapsed < Duration::from_secs(120),
        soft: false,
        detail: format!("GA exact recovery on {ok}/100 small instances (need >= 95)"),
        elapsed,
    }
}

/// Same-group customers can swap profiles without changing the aggregate, so
/// literal recovery on unrestricted templates is reported for information.
fn criterion_2_unrestricted() -> String {
    let results: Vec<(bool, bool)> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let pool = small_pool(500 + i);
            let n = 2 + (i % 4) as usize;
            let t = random_template(&format!("U{i}"), n, &pool, 800 + i).unwrap();
            let pf = make_type1(&t, &pool, 900 + i).unwrap();
            let out = evolve(&pf.feeder, &pool, training(&pool, 2), &GaConfig::default().with_seed(i)).unwrap();
            (
                recovery_rate(&pf, &out.assignment) == 1.0,
                recovered_up_to_swaps(&pf, &out.assignment),
            )
        })
        .collect();
    let literal = results.iter().filter(|r| r.0).count();
    let swaps = results.iter().filter(|r| r.1).count();
    format!("unrestricted groups: literal {literal}/100, up to same-group swaps {swaps}/100")
}

fn criterion_5(runs: &[McRun], elapsed: Duration) -> Outcome {
    let wins = runs.iter().filter(|r| r.ga_rmae <= r.mc_rmae).count();
    let mean = |f: fn(&McRun) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
    Outcome {
        id: "5",
        passed: wins * 10 >= runs.len() * 7 && elapsed < Duration::from_secs(900),
        soft: false,
        detail: format!(
            "GA <= best-of-1000 random on {wins}/{} feeders; mean training RMAE GA {:.3e}, random {:.3e}",
            runs.len(),
            mean(|r| r.ga_rmae),
            mean(|r| r.mc_rmae)
        ),
        elapsed,
    }
}

fn criterion_6(small: &[SmallRun], mc: &[McRun]) -> Outcome {
    let start = Instant::now();
    let traces: Vec<&Vec<f64>> = small
        .iter()
        .map(|r| &r.trace)
        .chain(mc.iter().map(|r| &r.trace))
        .collect();
    let full_length = traces.iter().all(|t| t.len() == 101);
    let monotone = traces.iter().filter(|t| non_increasing(t)).count();
    Outcome {
        id: "6",
        passed: full_length && monotone == traces.len(),
        soft: false,
        detail: format!(
            "{monotone}/{} best-so-far traces non-increasing over 100 generations",
            traces.len()
        ),
        elapsed: start.elapsed(),
    }
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let full = pool(SyntheticPoolSpec {
        n_profiles: 120,
        days: 28,
        seed: 303,
        ..Default::default()
    });
    let (populate, buddies) = make_type2_split(&full).unwrap();
    let mut feeders = Vec::new();
    for i in 0..10u64 {
        let n = 10 + (i as usize * 3);
        let t = random_template(&format!("A{i}"), n, &full, 60 + i).unwrap();
        feeders.push((make_type1(&t, &full, 70 + i).unwrap().feeder, &full));
        let t = random_template(&format!("B{i}"), n, &populate, 80 + i).unwrap();
        feeders.push((make_type1(&t, &populate, 90 + i).unwrap().feeder, &buddies));
    }
    let objectives = |generations: usize| -> Vec<(f64, f64)> {
        feeders
            .par_iter()
            .enumerate()
            .map(|(i, (f, p))| {
                let sa = simple_buddy(f, p).unwrap().mean_demand_mismatch(f, p).unwrap();
                let cfg = GaConfig {
                    generations,
                    ..GaConfig::default().with_weight(1.0).with_seed(i as u64)
                };
                let ga = evolve(f, p, training(p, 1), &cfg)
                    .unwrap()
                    .assignment
                    .mean_demand_mismatch(f, p)
                    .unwrap();
                (sa, ga)
            })
            .collect()
    };
    let matched = |results: &[(f64, f64)]| {
        results
            .iter()
            .filter(|(sa, ga)| (sa - ga).abs() <= 1e-9 * sa.abs().max(ga.abs()).max(f64::MIN_POSITIVE))
            .count()
    };
    let results = objectives(GaConfig::default().generations);
    let equal = matched(&results);
    let worst = results.iter().map(|(sa, ga)| ga - sa).fold(0.0f64, f64::max);
    let longer = matched(&objectives(200));
    Outcome {
        id: "3",
        passed: equal == results.len(),
        soft: false,
        detail: format!(
            "GA at w=1 (defaults) matches the simple objective on {equal}/{n} feeders, largest excess \
             {worst:.3e} kWh/day; with 200 generations {longer}/{n}",
            n = results.len()
        ),
        elapsed: start.elapsed(),
    }
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let pool = pool(SyntheticPoolSpec {
        n_profiles: 80,
        days: 14,
        seed: 404,
        ..Default::default()
    });
    let w = training(&pool, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checks = 0;
    let mut violations = 0;
    for i in 0..20u64 {
        let t = random_template(&format!("L{i}"), 5 + i as usize, &pool, i).unwrap();
        let pf = make_type1(&t, &pool, 40 + i).unwrap();
        let cands = pool.candidates(&pf.feeder).unwrap();
        for _ in 0..10 {
            let genes: Vec<usize> = cands.iter().map(|c| c[rng.random_range(0..c.len())]).collect();

            let mut other_u = pf.feeder.clone();
            for c in &mut other_u.customers {
                c.mean_daily_demand *= rng.random_range(0.1..5.0);
            }
            let base0 = fitness(&genes, &pf.feeder, &pool, w, 0.0).unwrap();
            let pert0 = fitness(&genes, &other_u, &pool, w, 0.0).unwrap();

            let mut other_s = pf.feeder.clone();
            let s = other_s.substation_series.as_ref().unwrap();
            let noisy: Vec<f64> = s
                .values()
                .iter()
                .map(|v| v * rng.random_range(0.5..2.0) + 0.1)
                .collect();
            other_s.substation_series = Some(HalfHourlySeries::new(s.start(), noisy).unwrap());
            let base1 = fitness(&genes, &pf.feeder, &pool, w, 1.0).unwrap();
            let pert1 = fitness(&genes, &other_s, &pool, w, 1.0).unwrap();

            checks += 2;
            violations += usize::from(base0 != pert0) + usize::from(base1 != pert1);
        }
    }
    Outcome {
        id: "4",
        passed: violations == 0,
        soft: false,
        detail: format!("{} of {checks} perturbations changed the fitness", violations),
        elapsed: start.elapsed(),
    }
}

// ---------------------------------------------------------------- 7

/// Direct loop evaluation of the relative mean absolute error.
fn rmae_oracle(s: &[f64], a: &[f64]) -> f64 {
    let mut abs = 0.0;
    let mut total = 0.0;
    for t in 0..s.len() {
        abs += (a[t] - s[t]).abs();
        total += s[t];
    }
    abs / (s.len() as f64 * total)
}

/// Direct evaluation of the relative peak error: (max s - max a) / max s.
fn rpde_oracle(s: &[f64], a: &[f64]) -> f64 {
    let mut ms = f64::NEG_INFINITY;
    let mut ma = f64::NEG_INFINITY;
    for t in 0..s.len() {
        if s[t] > ms {
            ms = s[t];
        }
        if a[t] > ma {
            ma = a[t];
        }
    }
    (ms - ma) / ms
}

fn close(x: f64, y: f64, rel: f64) -> bool {
    x == y || (x - y).abs() <= rel * x.abs().max(y.abs())
}

/// Readings on a 1/1024 kWh grid, so that scaling by 0.5 or 3 is exact.
fn grid_series<R: Rng>(rng: &mut R, h: usize, lo: u32, hi: u32) -> Vec<f64> {
    (0..h).map(|_| rng.random_range(lo..=hi) as f64 / 1024.0).collect()
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bad_oracle = 0;
    let mut bad_scale = 0;
    for _ in 0..1000 {
        let h = 48 * rng.random_range(1..=14);
        let s = grid_series(&mut rng, h, 10, 5120);
        let a = grid_series(&mut rng, h, 0, 5120);
        let (r, p) = (rmae(&s, &a).unwrap(), rpde(&s, &a).unwrap());
        if !close(r, rmae_oracle(&s, &a), 1e-12) || !close(p, rpde_oracle(&s, &a), 1e-12) {
            bad_oracle += 1;
        }
        for lambda in [0.5, 3.0] {
            let ls: Vec<f64> = s.iter().map(|v| v * lambda).collect();
            let la: Vec<f64> = a.iter().map(|v| v * lambda).collect();
            if !close(rmae(&ls, &la).unwrap(), r, 1e-12) || !close(rpde(&ls, &la).unwrap(), p, 1e-12) {
                bad_scale += 1;
            }
        }
    }

    // continuous readings: oracle agreement, plus the size of the scaling
    // drift caused by rounding lambda * x before the metric sees it
    let mut bad_continuous = 0;
    let mut drift = 0.0f64;
    for _ in 0..1000 {
        let h = 48 * rng.random_range(1..=14);
        let s: Vec<f64> = (0..h).map(|_| rng.random_range(0.01..5.0)).collect();
        let a: Vec<f64> = (0..h).map(|_| rng.random_range(0.0..5.0)).collect();
        let (r, p) = (rmae(&s, &a).unwrap(), rpde(&s, &a).unwrap());
        if !close(r, rmae_oracle(&s, &a), 1e-12) || !close(p, rpde_oracle(&s, &a), 1e-12) {
            bad_continuous += 1;
        }
        let ls: Vec<f64> = s.iter().map(|v| v * 3.0).collect();
        let la: Vec<f64> = a.iter().map(|v| v * 3.0).collect();
        drift = drift.max((rpde(&ls, &la).unwrap() - p).abs());
    }
    Outcome {
        id: "7",
        passed: bad_oracle == 0 && bad_scale == 0 && bad_continuous == 0,
        soft: false,
        detail: format!(
            "1000 grid pairs: {bad_oracle} oracle and {bad_scale} scaling mismatches; \
             1000 continuous pairs: {bad_continuous} oracle mismatches, rpde drift under rounded x3 scaling {drift:.1e}"
        ),
        elapsed: start.elapsed(),
    }
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let xs: Vec<f64> = (0..20).map(|k| 5.0 + k as f64 * 45.0 / 19.0).collect();
    let exact: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 2.0 / x)).collect();
    let fit = fit_power_law(&exact).unwrap();
    let exact_ok = (fit.a - 2.0).abs() <= 1e-9 && (fit.b - 1.0).abs() <= 1e-9;

    let normal = Normal::new(0.0, 0.05).unwrap();
    let in_band = (0..100u64)
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<(f64, f64)> = xs
                .iter()
                .map(|&x| (x, 2.0 / x * f64::exp(normal.sample(&mut rng))))
                .collect();
            let f = fit_power_law(&pts).unwrap();
            (f.a_interval.0..=f.a_interval.1).contains(&2.0) && (f.b_interval.0..=f.b_interval.1).contains(&1.0)
        })
        .count();
    Outcome {
        id: "8",
        passed: exact_ok && in_band >= 97,
        soft: false,
        detail: format!(
            "noise-free fit a={:.12} b={:.12}; truth inside 99% intervals for {in_band}/100 noisy seeds",
            fit.a, fit.b
        ),
        elapsed: start.elapsed(),
    }
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let full = pool(SyntheticPoolSpec {
        seed: 909,
        ..Default::default()
    });
    let (populate, buddies) = make_type2_split(&full).unwrap();
    let span = buddies.span().unwrap();
    let window = training(&buddies, 8);
    let points: Vec<(f64, f64)> = (5..=50usize)
        .into_par_iter()
        .map(|n| {
            let t = random_template(&format!("N{n}"), n, &populate, 5000 + n as u64).unwrap();
            let pf = make_type1(&t, &populate, 6000 + n as u64).unwrap();
            let a = evolve(&pf.feeder, &buddies, window, &GaConfig::default().with_seed(n as u64))
                .unwrap()
                .assignment;
            (n as f64, rmae_of(&pf.feeder, &buddies, &a, span))
        })
        .collect();
    let fit = fit_power_law(&points).unwrap();
    Outcome {
        id: "9",
        passed: fit.b > 0.0,
        soft: false,
        detail: format!(
            "46 feeders, sizes 5-50: RMAE ~ {:.3e} * n^-{:.3} (b 99% interval {:.3}..{:.3})",
            fit.a, fit.b, fit.b_interval.0, fit.b_interval.1
        ),
        elapsed: start.elapsed(),
    }
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let pool = pool(SyntheticPoolSpec {
        n_profiles: 60,
        days: 28,
        seed: 1010,
        ..Default::default()
    });
    let feeders = (0..4u64)
        .map(|i| {
            let t = random_template(&format!("D{i}"), 8 + 4 * i as usize, &pool, i).unwrap();
            make_type1(&t, &pool, 10 + i).unwrap().feeder
        })
        .collect();
    let data = Dataset {
        pool,
        feeders,
        rejected: vec![],
    };
    let d = |day| NaiveDate::from_ymd_opt(2014, 9, day).unwrap();
    let spec = SweepSpec {
        master_seed: 42,
        seasons: vec![d(1), d(8)],
        weeks: vec![1, 2],
        weights: vec![0.0, 0.5, 1.0],
        methods: vec![Method::Simple, Method::Ga, Method::MonteCarlo],
        test_start: None,
        test_end: None,
        mc_samples: 200,
        ga: GaConfig::default(),
    };
    let render = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let report = run_sweep(&spec, &data).unwrap();
            let mut buf = Vec::new();
            report.write_results_csv(&mut buf).unwrap();
            buf
        })
    };
    let first = render(4);
    let again = render(4);
    let serial = render(1);
    Outcome {
        id: "10",
        passed: first == again && first == serial && !first.is_empty(),
        soft: false,
        detail: format!(
            "results.csv ({} bytes) identical across reruns: {}, with 1 vs 4 workers: {}",
            first.len(),
            first == again,
            first == serial
        ),
        elapsed: start.elapsed(),
    }
}

// ---------------------------------------------------------------- 11

fn criterion_11() -> Outcome {
    let start = Instant::now();
    let full = pool(SyntheticPoolSpec {
        seed: 1111,
        ..Default::default()
    });
    let (populate, buddies) = make_type2_split(&full).unwrap();
    let span = buddies.span().unwrap();
    let window = training(&buddies, 8);
    let weights = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 1.0];
    let suite: Vec<PseudoFeeder> = (0..30u64)
        .map(|i| {
            let t = random_template(&format!("W{i}"), 20 + (i as usize % 21), &populate, 7000 + i).unwrap();
            make_type1(&t, &populate, 8000 + i).unwrap()
        })
        .collect();
    let surface: Vec<f64> = weights
        .iter()
        .map(|&w| {
            let per_feeder: Vec<f64> = suite
                .par_iter()
                .enumerate()
                .map(|(i, pf)| {
                    let cfg = GaConfig::default().with_weight(w).with_seed(i as u64);
                    let a = evolve(&pf.feeder, &buddies, window, &cfg).unwrap().assignment;
                    let e = individual_errors(pf, &full, &buddies, &a, span).unwrap();
                    e.iter().sum::<f64>() / e.len() as f64
                })
                .collect();
            per_feeder.iter().sum::<f64>() / per_feeder.len() as f64
        })
        .collect();
    let (e0, e1) = (surface[0], surface[weights.len() - 1]);
    let best_mid = (1..weights.len() - 1)
        .min_by(|&i, &j| surface[i].total_cmp(&surface[j]))
        .unwrap();
    let passed = surface[best_mid] <= e0 && surface[best_mid] <= e1;
    let table: Vec<String> = weights
        .iter()
        .zip(&surface)
        .map(|(w, e)| format!("w={w}: {e:.4e}"))
        .collect();
    Outcome {
        id: "11",
        passed,
        soft: true,
        detail: format!("mean per-customer RMAE {}", table.join(", ")),
        elapsed: start.elapsed(),
    }
}

fn report(o: &Outcome) {
    let status = match (o.passed, o.soft) {
        (true, _) => "PASS",
        (false, false) => "FAIL",
        (false, true) => "SOFT-FAIL",
    };
    println!(
        "criterion {:>2}: {status} ({:.1}s) {}",
        o.id,
        o.elapsed.as_secs_f64(),
        o.detail
    );
}

fn main() -> ExitCode {
    let mut outcomes = Vec::new();
    let mut run = |o: Outcome| {
        report(&o);
        outcomes.push(o);
    };
    run(criterion_1());
    let (small, small_time) = small_instances();
    run(criterion_2(&small, small_time));
    println!("              {}", criterion_2_unrestricted());
    run(criterion_3());
    run(criterion_4());
    let (mc, mc_time) = mc_instances();
    run(criterion_5(&mc, mc_time));
    run(criterion_6(&small, &mc));
    run(criterion_7());
    run(criterion_8());
    run(criterion_9());
    run(criterion_10());
    run(criterion_11());

    let hard_failures = outcomes.iter().filter(|o| !o.passed && !o.soft).count();
    println!(
        "acceptance: {} passed, {hard_failures} failed, {} soft",
        outcomes.iter().filter(|o| o.passed).count(),
        outcomes.iter().filter(|o| o.soft && !o.passed).count()
    );
    if hard_failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
