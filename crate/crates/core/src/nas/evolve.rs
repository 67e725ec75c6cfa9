//! Generational NSGA-II driver with a deduplicating evaluation cache.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::genome::Genome;
use super::nsga::{assign_rank_and_crowding, make_offspring, pareto_front, select_survivors, Individual, Objectives};
use crate::dataset::WindowedDataset;
use crate::error::{Error, Result};
use crate::nn::spec::{count_params, Dims};
use crate::nn::train::{train, TrainConfig};
use crate::rng::{derive_seed, seeded};

/// RMSE recorded for a candidate whose training failed.
pub const FAILURE_RMSE: f64 = 10.0;

/// Scores one canonical genome. Must be deterministic in the genome.
pub trait Evaluator: Sync {
    fn dims(&self) -> Dims;
    fn evaluate(&self, genome: &Genome) -> Result<Objectives>;
}

/// Runs a batch of independent evaluations, returning results in input order.
pub trait Executor {
    fn run(&self, evaluator: &dyn Evaluator, genomes: &[Genome]) -> Vec<Result<Objectives>>;
}

pub struct SerialExecutor;

impl Executor for SerialExecutor {
    fn run(&self, evaluator: &dyn Evaluator, genomes: &[Genome]) -> Vec<Result<Objectives>> {
        genomes.iter().map(|g| evaluator.evaluate(g)).collect()
    }
}

/// Trains each candidate with the search budget and reports its objectives.
/// The training seed is derived from the run seed and the genome, so a
/// genome's score does not depend on when or whether it was cached.
pub struct TrainingEvaluator<'a> {
    pub train_set: &'a WindowedDataset,
    pub val_set: &'a WindowedDataset,
    pub config: TrainConfig,
    pub dims: Dims,
}

impl Evaluator for TrainingEvaluator<'_> {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn evaluate(&self, genome: &Genome) -> Result<Objectives> {
        let spec = genome.decode();
        let cfg = self.config.with_seed(derive_seed(self.config.seed, genome.fingerprint()));
        let model = train(&spec, self.dims, self.train_set, self.val_set, &cfg)?;
        Ok(Objectives {
            val_rmse: model.meta.best_val_rmse,
            param_count: count_params(&spec, self.dims),
            depth: genome.depth(),
        })
    }
}

/// Canonical genome → objectives, with lookup statistics.
#[derive(Debug, Clone, Default)]
pub struct EvalCache {
    entries: BTreeMap<Genome, Objectives>,
    enabled: bool,
    pub hits: usize,
    pub misses: usize,
}

impl EvalCache {
    pub fn new() -> Self {
        Self { enabled: true, ..Self::default() }
    }

    /// A cache that never remembers: every lookup is a miss.
    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn get(&self, genome: &Genome) -> Option<Objectives> {
        self.entries.get(&genome.repair()).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Genome, &Objectives)> {
        self.entries.iter()
    }

    /// Objectives for every genome. Misses are deduplicated within the batch,
    /// so each distinct genome is trained at most once; failed trainings get
    /// the sentinel RMSE and are reported in `failures`.
    pub fn evaluate_batch(
        &mut self,
        genomes: &[Genome],
        evaluator: &dyn Evaluator,
        executor: &dyn Executor,
        failures: &mut Vec<(Genome, String)>,
    ) -> Vec<Objectives> {
        let keys: Vec<Genome> = genomes.iter().map(Genome::repair).collect();
        let mut pending: Vec<Genome> = Vec::new();
        for k in &keys {
            if !self.enabled || (!self.entries.contains_key(k) && !pending.contains(k)) {
                pending.push(*k);
            }
        }
        self.misses += pending.len();
        self.hits += keys.len() - pending.len();
        let results = executor.run(evaluator, &pending);
        let mut fresh: BTreeMap<Genome, Objectives> = BTreeMap::new();
        let dims = evaluator.dims();
        for (g, r) in pending.iter().zip(results) {
            let obj = r.unwrap_or_else(|e| {
                failures.push((*g, e.to_string()));
                Objectives { val_rmse: FAILURE_RMSE, param_count: count_params(&g.decode(), dims), depth: g.depth() }
            });
            fresh.insert(*g, obj);
        }
        let out = keys.iter().map(|k| fresh.get(k).or_else(|| self.entries.get(k)).copied()).collect::<Option<Vec<_>>>();
        if self.enabled {
            self.entries.append(&mut fresh);
        }
        out.unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub seed: u64,
    pub use_cache: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { population: 20, generations: 10, crossover_prob: 0.9, mutation_prob: 0.15, seed: 0, use_cache: true }
    }
}

/// Reduced training budget for candidates during search. Chosen front
/// members are retrained afterwards with the full protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBudget {
    /// Share of pooled source-train windows each candidate trains on.
    pub fraction: f64,
    /// Lower bound on the subsample size, so small datasets still give each
    /// candidate enough optimizer steps.
    pub min_windows: usize,
    pub train: TrainConfig,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            fraction: 0.10,
            min_windows: 1024,
            train: TrainConfig { max_epochs: 20, patience: 5, batch_size: 32, ..TrainConfig::default() },
        }
    }
}

impl SearchBudget {
    /// Seeded subsample of `train` honoring both the fraction and the floor.
    pub fn subsample(&self, train: &WindowedDataset, seed: u64) -> WindowedDataset {
        if train.is_empty() {
            return train.clone();
        }
        let wanted = libm::ceil(train.len() as f64 * self.fraction) as usize;
        let n = wanted.max(self.min_windows).min(train.len());
        train.sample_windows(n, seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub population: Vec<Individual>,
    pub front: Vec<Individual>,
    /// Distinct trainings performed so far.
    pub evaluations: usize,
    pub failures: Vec<(Genome, String)>,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub population: Vec<Individual>,
    pub cache: EvalCache,
    pub history: Vec<GenerationRecord>,
}

impl SearchResult {
    pub fn front(&self) -> Vec<Individual> {
        pareto_front(&self.population)
    }

    pub fn unique_evaluations(&self) -> usize {
        self.cache.misses
    }
}

fn individuals(genomes: &[Genome], objectives: Vec<Objectives>) -> Vec<Individual> {
    genomes.iter().zip(objectives).map(|(g, o)| Individual::new(g.repair(), o)).collect()
}

/// Generational NSGA-II: evaluate a random population, then for each
/// generation breed as many children, evaluate them, and keep the best
/// `population` of parents plus children by rank and crowding.
pub fn evolve(config: &SearchConfig, evaluator: &dyn Evaluator, executor: &dyn Executor) -> Result<SearchResult> {
    if config.population < 2 || config.population % 2 != 0 {
        return Err(Error::precondition("population size must be even and at least 2"));
    }
    let mut rng = seeded(derive_seed(config.seed, 0x6e5a));
    let mut cache = if config.use_cache { EvalCache::new() } else { EvalCache::disabled() };
    let mut history = Vec::with_capacity(config.generations + 1);

    let genomes: Vec<Genome> = (0..config.population).map(|_| Genome::random(&mut rng)).collect();
    let mut failures = Vec::new();
    let objs = cache.evaluate_batch(&genomes, evaluator, executor, &mut failures);
    let mut pop = individuals(&genomes, objs);
    assign_rank_and_crowding(&mut pop);
    history.push(GenerationRecord {
        generation: 0,
        front: pareto_front(&pop),
        population: pop.clone(),
        evaluations: cache.misses,
        failures,
    });

    for generation in 1..=config.generations {
        let kids = make_offspring(&pop, &mut rng, config.crossover_prob, config.mutation_prob)?;
        let mut failures = Vec::new();
        let objs = cache.evaluate_batch(&kids, evaluator, executor, &mut failures);
        let mut combined = pop;
        combined.extend(individuals(&kids, objs));
        pop = select_survivors(combined, config.population);
        history.push(GenerationRecord {
            generation,
            front: pareto_front(&pop),
            population: pop.clone(),
            evaluations: cache.misses,
            failures,
        });
    }
    Ok(SearchResult { population: pop, cache, history })
}
