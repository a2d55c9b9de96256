//! Genetic-algorithm buddying.
//!
//! A genome assigns one pool profile to every customer on a feeder. Fitness
//! weighs how well the aggregate of the assigned profiles tracks the
//! substation readings against how well each profile's mean daily demand
//! matches its customer's:
//!
//! ```text
//! F = (1 - w) * Σ_t |a(t) - s(t)| / S  +  w * Σ_j |U_j - Û_k(j)| / D
//! ```
//!
//! with `S = Σ_t s(t)` and `D = Σ_j U_j`. Lower is better.
//!
//! Each run draws from one seeded ChaCha stream in a fixed order: the initial
//! population, then for every generation all crossovers followed by all
//! mutations. Fitness is evaluated in parallel only after the draws.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BuddyError, Result};
use crate::model::{BuddyAssignment, Feeder, Method, ProfilePool};
use crate::series::Window;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationDecay {
    /// `p0 * (1 - gen / generations)`.
    Linear,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    /// Weight of the mean-daily-demand term, in [0, 1].
    pub weight: f64,
    pub population: usize,
    /// Number of best genomes kept as parents each generation.
    pub elite: usize,
    pub generations: usize,
    pub initial_mutation: f64,
    pub mutation_decay: MutationDecay,
    /// Generation at which the population is re-randomised around the best genome.
    pub reset_generation: Option<usize>,
    /// Exponent applied to each slot's absolute error in the feeder term.
    /// 1 gives the standard fitness; larger values penalise peaks harder.
    pub fitness_p: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            weight: 0.0,
            population: 100,
            elite: 10,
            generations: 100,
            initial_mutation: 0.1,
            mutation_decay: MutationDecay::Linear,
            reset_generation: Some(40),
            fitness_p: 1.0,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: GaConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(BuddyError::Config(m));
        if !(0.0..=1.0).contains(&self.weight) {
            return fail(format!("weight {} outside [0, 1]", self.weight));
        }
        if self.elite < 2 || self.elite >= self.population {
            return fail(format!(
                "need 2 <= elite < population, got elite {} population {}",
                self.elite, self.population
            ));
        }
        if self.generations == 0 {
            return fail("generations must be positive".into());
        }
        if let Some(r) = self.reset_generation {
            if r == 0 || r >= self.generations {
                return fail(format!("reset generation {r} must lie in 1..{}", self.generations));
            }
        }
        if !(0.0..=1.0).contains(&self.initial_mutation) {
            return fail(format!("mutation rate {} outside [0, 1]", self.initial_mutation));
        }
        if !(self.fitness_p >= 1.0) {
            return fail(format!("fitness exponent {} must be >= 1", self.fitness_p));
        }
        Ok(())
    }

    /// Mutation probability used when breeding generation `gen` (0-based).
    pub fn mutation_rate(&self, gen: usize) -> f64 {
        match self.mutation_decay {
            MutationDecay::Constant => self.initial_mutation,
            MutationDecay::Linear => self.initial_mutation * (1.0 - gen as f64 / self.generations as f64),
        }
    }
}

/// Pool indices, one per customer in feeder order, with cached fitness.
#[derive(Debug, Clone, PartialEq)]
pub struct Genome {
    pub genes: Vec<usize>,
    pub fitness: f64,
}

impl Genome {
    fn unevaluated(genes: Vec<usize>) -> Self {
        Self {
            genes,
            fitness: f64::NAN,
        }
    }
}

/// Everything needed to score genomes for one feeder and training window.
pub struct FitnessModel<'a> {
    weight: f64,
    p: f64,
    target: Option<&'a [f64]>,
    target_total: f64,
    profiles: Vec<&'a [f64]>,
    demand: Vec<f64>,
    demand_total: f64,
    profile_demand: Vec<f64>,
}

impl<'a> FitnessModel<'a> {
    pub fn new(feeder: &'a Feeder, pool: &'a ProfilePool, window: Window, weight: f64, fitness_p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(BuddyError::Config(format!("weight {weight} outside [0, 1]")));
        }
        let (target, target_total, profiles) = if weight < 1.0 {
            let target = feeder.substation_window(window)?;
            let total: f64 = target.iter().sum();
            if !(total > 0.0) {
                return Err(BuddyError::Degenerate(format!(
                    "feeder {} has zero total demand over the training window",
                    feeder.feeder_id
                )));
            }
            let profiles = pool
                .profiles()
                .iter()
                .map(|p| p.series.slice(window))
                .collect::<Result<Vec<_>>>()?;
            (Some(target), total, profiles)
        } else {
            (None, 0.0, Vec::new())
        };
        let demand: Vec<f64> = feeder.customers.iter().map(|c| c.mean_daily_demand).collect();
        let demand_total: f64 = demand.iter().sum();
        if weight > 0.0 && !(demand_total > 0.0) {
            return Err(BuddyError::Degenerate(format!(
                "feeder {} has zero total mean daily demand",
                feeder.feeder_id
            )));
        }
        Ok(Self {
            weight,
            p: fitness_p,
            target,
            target_total,
            profiles,
            demand,
            demand_total,
            profile_demand: pool.profiles().iter().map(|p| p.mean_daily_demand).collect(),
        })
    }

    pub fn evaluate(&self, genes: &[usize]) -> f64 {
        let mut buf = vec![0.0; self.target.map_or(0, <[f64]>::len)];
        self.evaluate_with(genes, &mut buf)
    }

    /// Evaluate using `buf` (length H) as scratch space for the aggregate.
    fn evaluate_with(&self, genes: &[usize], buf: &mut [f64]) -> f64 {
        let mut total = 0.0;
        if let Some(target) = self.target {
            buf.fill(0.0);
            for &g in genes {
                crate::series::add_into(buf, self.profiles[g]);
            }
            let err: f64 = if self.p == 1.0 {
                buf.iter().zip(target).map(|(a, s)| (a - s).abs()).sum()
            } else {
                buf.iter().zip(target).map(|(a, s)| (a - s).abs().powf(self.p)).sum()
            };
            total += (1.0 - self.weight) * err / self.target_total;
        }
        if self.weight > 0.0 {
            let err: f64 = genes
                .iter()
                .zip(&self.demand)
                .map(|(&g, u)| (u - self.profile_demand[g]).abs())
                .sum();
            total += self.weight * err / self.demand_total;
        }
        total
    }

    fn slots(&self) -> usize {
        self.target.map_or(0, <[f64]>::len)
    }
}

/// Fitness of `genes` (pool indices in feeder order) over `window` at weight `w`.
pub fn fitness(genes: &[usize], feeder: &Feeder, pool: &ProfilePool, window: Window, w: f64) -> Result<f64> {
    if genes.len() != feeder.n_customers() {
        return Err(BuddyError::InvalidInput(format!(
            "genome has {} genes for {} customers",
            genes.len(),
            feeder.n_customers()
        )));
    }
    Ok(FitnessModel::new(feeder, pool, window, w, 1.0)?.evaluate(genes))
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub assignment: BuddyAssignment,
    pub best: Genome,
    /// Best fitness seen so far: after initialisation, then after each generation.
    pub trace: Vec<f64>,
}

/// One uniform draw per customer from its candidates; pinned customers draw nothing.
pub(crate) fn random_genes<R: Rng>(candidates: &[Vec<usize>], rng: &mut R) -> Vec<usize> {
    candidates
        .iter()
        .map(|c| {
            if c.len() == 1 {
                c[0]
            } else {
                c[rng.random_range(0..c.len())]
            }
        })
        .collect()
}

struct Search<'a> {
    candidates: Vec<Vec<usize>>,
    /// Positions with more than one candidate.
    free: Vec<usize>,
    model: FitnessModel<'a>,
    rng: ChaCha8Rng,
}

impl Search<'_> {
    fn random_genome(&mut self) -> Genome {
        Genome::unevaluated(random_genes(&self.candidates, &mut self.rng))
    }

    fn crossover(&mut self, elite: &[Genome]) -> Genome {
        // tiny search spaces can leave fewer distinct genomes than parents needed
        if elite.len() < 2 {
            return Genome::unevaluated(elite[0].genes.clone());
        }
        let i = self.rng.random_range(0..elite.len());
        let mut j = self.rng.random_range(0..elite.len() - 1);
        if j >= i {
            j += 1;
        }
        let (a, b) = (&elite[i].genes, &elite[j].genes);
        let genes = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| if x == y || self.rng.random_bool(0.5) { x } else { y })
            .collect();
        Genome::unevaluated(genes)
    }

    fn mutate(&mut self, genome: &mut Genome, rate: f64) {
        for &pos in &self.free {
            if self.rng.random::<f64>() < rate {
                let cands = &self.candidates[pos];
                let current = cands
                    .binary_search(&genome.genes[pos])
                    .expect("gene drawn from its candidates");
                // uniform over the other candidates
                let mut k = self.rng.random_range(0..cands.len() - 1);
                if k >= current {
                    k += 1;
                }
                genome.genes[pos] = cands[k];
            }
        }
    }

    fn evaluate(&self, genomes: &mut [Genome]) {
        let slots = self.model.slots();
        genomes.par_iter_mut().filter(|g| g.fitness.is_nan()).for_each_init(
            || vec![0.0; slots],
            |buf, g| g.fitness = self.model.evaluate_with(&g.genes, buf),
        );
    }
}

/// Best `n` distinct genomes, ordered by fitness then genes.
fn select(mut genomes: Vec<Genome>, n: usize) -> Vec<Genome> {
    genomes.sort_by(|a, b| a.fitness.total_cmp(&b.fitness).then_with(|| a.genes.cmp(&b.genes)));
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    for g in genomes {
        if out.len() == n {
            break;
        }
        if seen.insert(g.genes.clone()) {
            out.push(g);
        }
    }
    out
}

/// Evolve a buddy assignment for `feeder` over the training `window`.
///
/// The population is initialised with random same-group genomes; each
/// generation the best `elite` distinct genomes are kept, `population`
/// children are bred from random pairs of them (shared genes kept, the rest
/// taken from either parent with equal chance) and mutated, and the elite is
/// re-selected from parents and children together. At `reset_generation` the
/// population is re-randomised, keeping only the best genome. The best genome
/// ever seen is returned.
pub fn evolve(feeder: &Feeder, pool: &ProfilePool, window: Window, config: &GaConfig) -> Result<GaOutcome> {
    config.validate()?;
    let candidates = pool.candidates(feeder)?;
    let free = (0..candidates.len()).filter(|&j| candidates[j].len() > 1).collect();
    let model = FitnessModel::new(feeder, pool, window, config.weight, config.fitness_p)?;
    let mut search = Search {
        candidates,
        free,
        model,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
    };

    let mut population: Vec<Genome> = (0..config.population).map(|_| search.random_genome()).collect();
    search.evaluate(&mut population);
    let mut elite = select(population, config.elite);
    let mut best = elite[0].clone();
    let mut trace = Vec::with_capacity(config.generations + 1);
    trace.push(best.fitness);

    for gen in 1..=config.generations {
        let candidates_for_selection = if config.reset_generation == Some(gen) {
            let mut fresh: Vec<Genome> = (0..config.population - 1).map(|_| search.random_genome()).collect();
            search.evaluate(&mut fresh);
            fresh.push(best.clone());
            fresh
        } else {
            let rate = config.mutation_rate(gen - 1);
            let mut children: Vec<Genome> = (0..config.population).map(|_| search.crossover(&elite)).collect();
            for child in &mut children {
                search.mutate(child, rate);
            }
            search.evaluate(&mut children);
            children.extend(elite);
            children
        };
        elite = select(candidates_for_selection, config.elite);
        if elite[0].fitness < best.fitness {
            best = elite[0].clone();
        }
        trace.push(best.fitness);
    }

    let assignment = BuddyAssignment::from_indices(
        feeder,
        pool,
        &best.genes,
        Method::Ga,
        config.weight,
        Some(window),
        Some(config.seed),
    );
    Ok(GaOutcome {
        assignment,
        best,
        trace,
    })
}
