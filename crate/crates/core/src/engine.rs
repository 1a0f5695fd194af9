//! Steady-state genetic algorithm with restricted tournament replacement.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fitness::{Evaluator, FitnessError};
use crate::genome::{Genome, GenomeError, Level};
use crate::operators::{self, OperatorError};
use crate::tree::decode;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("RTS window {window} exceeds population size {population}")]
    WindowTooLarge { window: usize, population: usize },
    #[error(transparent)]
    Genome(#[from] GenomeError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Fitness(#[from] FitnessError),
}

/// Operator suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Hierarchical crossover + small-perturbation mutation.
    Hga,
    /// One-point crossover + bit-wise mutation.
    Sga1,
    /// Two-point crossover + bit-wise mutation.
    Sga2,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Hga, Algorithm::Sga1, Algorithm::Sga2];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Hga => "hga",
            Algorithm::Sga1 => "sga1",
            Algorithm::Sga2 => "sga2",
        }
    }

    pub fn crossover<R: Rng + ?Sized>(
        self,
        p1: &Genome,
        p2: &Genome,
        rng: &mut R,
    ) -> Result<(Genome, Genome), OperatorError> {
        match self {
            Algorithm::Hga => operators::hierarchical_crossover(p1, p2, rng),
            Algorithm::Sga1 => operators::one_point_crossover(p1, p2, rng),
            Algorithm::Sga2 => operators::two_point_crossover(p1, p2, rng),
        }
    }

    pub fn mutate<R: Rng + ?Sized>(
        self,
        genome: &Genome,
        rate: f64,
        rng: &mut R,
    ) -> Result<Genome, OperatorError> {
        match self {
            Algorithm::Hga => operators::small_perturbation_mutation(genome, rate, rng),
            Algorithm::Sga1 | Algorithm::Sga2 => operators::bitwise_mutation(genome, rate, rng),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hga" => Ok(Algorithm::Hga),
            "sga1" => Ok(Algorithm::Sga1),
            "sga2" => Ok(Algorithm::Sga2),
            other => Err(format!("unknown algorithm {other:?} (expected hga, sga1 or sga2)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub leaf_count: usize,
    pub max_depth: Level,
    pub algorithm: Algorithm,
    pub population_size: usize,
    pub max_evaluations: usize,
    pub mutation_rate: f64,
    pub rts_window: usize,
    pub seed: u64,
}

impl GaConfig {
    /// Mutation rate 0.1 and RTS window 5.
    pub fn new(
        leaf_count: usize,
        max_depth: Level,
        algorithm: Algorithm,
        population_size: usize,
        max_evaluations: usize,
        seed: u64,
    ) -> Self {
        GaConfig {
            leaf_count,
            max_depth,
            algorithm,
            population_size,
            max_evaluations,
            mutation_rate: 0.1,
            rts_window: 5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |msg: String| Err(EngineError::InvalidConfig(msg));
        if self.leaf_count < 2 {
            return bad(format!("leaf count {} < 2", self.leaf_count));
        }
        if self.max_depth < 1 {
            return bad("maximum depth must be at least 1".into());
        }
        if self.population_size < 2 {
            return bad(format!("population size {} < 2", self.population_size));
        }
        if self.max_evaluations < self.population_size {
            return bad(format!(
                "evaluation budget {} is smaller than the population ({})",
                self.max_evaluations, self.population_size
            ));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad(format!("mutation rate {} outside [0, 1]", self.mutation_rate));
        }
        if self.rts_window < 1 {
            return bad("RTS window must be at least 1".into());
        }
        if self.rts_window > self.population_size {
            return Err(EngineError::WindowTooLarge {
                window: self.rts_window,
                population: self.population_size,
            });
        }
        if self.algorithm != Algorithm::Hga && self.leaf_count < 3 {
            return bad(format!(
                "{} needs genomes of at least two digits (leaf count >= 3)",
                self.algorithm
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Genome,
    /// Utility of the simplified genome.
    pub fitness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub evaluation: usize,
    pub best_fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best_genome: Genome,
    pub best_fitness: f64,
    pub evaluations_used: usize,
    /// One point per improvement of the best-so-far fitness, starting with
    /// the first evaluation.
    pub trajectory: Vec<TrajectoryPoint>,
    pub seed: u64,
}

/// Evaluates genomes on their simplified form and keeps the budget ledger.
struct Budgeted<'a, E: ?Sized> {
    evaluator: &'a E,
    used: usize,
    limit: usize,
    best: Option<Individual>,
    trajectory: Vec<TrajectoryPoint>,
}

impl<'a, E: Evaluator + ?Sized> Budgeted<'a, E> {
    fn new(evaluator: &'a E, limit: usize) -> Self {
        Budgeted {
            evaluator,
            used: 0,
            limit,
            best: None,
            trajectory: Vec::new(),
        }
    }

    fn exhausted(&self) -> bool {
        self.used >= self.limit
    }

    fn evaluate(&mut self, genome: Genome) -> Result<Individual, EngineError> {
        debug_assert!(!self.exhausted());
        let fitness = self.evaluator.evaluate(&decode(&genome.simplify()))?;
        self.used += 1;
        let improved = self.best.as_ref().is_none_or(|b| fitness > b.fitness);
        let individual = Individual { genome, fitness };
        if improved {
            self.best = Some(individual.clone());
            self.trajectory.push(TrajectoryPoint {
                evaluation: self.used,
                best_fitness: fitness,
            });
        }
        Ok(individual)
    }
}

/// Random initial population; each member costs one evaluation.
pub fn init_population<E, R>(
    cfg: &GaConfig,
    evaluator: &E,
    rng: &mut R,
) -> Result<Vec<Individual>, EngineError>
where
    E: Evaluator + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let mut budget = Budgeted::new(evaluator, cfg.population_size);
    init_with(cfg, &mut budget, rng)
}

fn init_with<E, R>(
    cfg: &GaConfig,
    budget: &mut Budgeted<'_, E>,
    rng: &mut R,
) -> Result<Vec<Individual>, EngineError>
where
    E: Evaluator + ?Sized,
    R: Rng + ?Sized,
{
    (0..cfg.population_size)
        .map(|_| {
            let genome = Genome::random(cfg.leaf_count, cfg.max_depth, rng)?;
            budget.evaluate(genome)
        })
        .collect()
}

/// Restricted tournament replacement: the offspring competes with the
/// closest of `window` distinct random members (first sampled wins distance
/// ties) and replaces it only when strictly fitter. Returns the replaced
/// index, if any.
pub fn rts_replace<R: Rng + ?Sized>(
    population: &mut [Individual],
    offspring: Individual,
    window: usize,
    rng: &mut R,
) -> Result<Option<usize>, EngineError> {
    if window == 0 || window > population.len() {
        return Err(EngineError::WindowTooLarge {
            window,
            population: population.len(),
        });
    }
    let mut closest: Option<(usize, usize)> = None;
    for idx in sample(rng, population.len(), window).iter() {
        let d = population[idx].genome.distance(&offspring.genome)?;
        if closest.is_none_or(|(_, best)| d < best) {
            closest = Some((idx, d));
        }
    }
    let (victim, _) = closest.expect("window is non-empty");
    if offspring.fitness > population[victim].fitness {
        population[victim] = offspring;
        Ok(Some(victim))
    } else {
        Ok(None)
    }
}

/// Runs the configured GA with an RNG seeded from `cfg.seed`.
pub fn run<E: Evaluator + ?Sized>(cfg: &GaConfig, evaluator: &E) -> Result<RunResult, EngineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    run_with_rng(cfg, evaluator, &mut rng)
}

pub fn run_with_rng<E, R>(cfg: &GaConfig, evaluator: &E, rng: &mut R) -> Result<RunResult, EngineError>
where
    E: Evaluator + ?Sized,
    R: Rng + ?Sized,
{
    run_observed(cfg, evaluator, rng, |_| {})
}

/// Like [`run_with_rng`], calling `observe` with the population after every
/// replacement step.
pub fn run_observed<E, R, F>(
    cfg: &GaConfig,
    evaluator: &E,
    rng: &mut R,
    mut observe: F,
) -> Result<RunResult, EngineError>
where
    E: Evaluator + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(&[Individual]),
{
    cfg.validate()?;
    let mut budget = Budgeted::new(evaluator, cfg.max_evaluations);
    let mut population = init_with(cfg, &mut budget, rng)?;
    observe(&population);

    while !budget.exhausted() {
        let picks = sample(rng, population.len(), 2);
        let (p1, p2) = (&population[picks.index(0)].genome, &population[picks.index(1)].genome);
        let (o1, o2) = cfg.algorithm.crossover(p1, p2, rng)?;
        for child in [o1, o2] {
            if budget.exhausted() {
                break;
            }
            let child = cfg.algorithm.mutate(&child, cfg.mutation_rate, rng)?;
            let individual = budget.evaluate(child)?;
            rts_replace(&mut population, individual, cfg.rts_window, rng)?;
            observe(&population);
        }
    }

    let best = budget.best.expect("population is evaluated before the loop");
    Ok(RunResult {
        best_genome: best.genome,
        best_fitness: best.fitness,
        evaluations_used: budget.used,
        trajectory: budget.trajectory,
        seed: cfg.seed,
    })
}
