//! Experiment orchestration, exhaustive-search oracles and reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{self, Algorithm, EngineError, GaConfig, TrajectoryPoint};
use crate::fitness::{EnvironmentParams, Evaluator, FitnessError, IrUtilityModel};
use crate::genome::{is_canonical_digits, Genome, GenomeError, Level};
use crate::metrics::{self, MetricsError, WilcoxonResult};
use crate::tree::decode;

/// Default cap on `M^(N-1)` for exhaustive enumeration.
pub const DEFAULT_SPACE_LIMIT: u128 = 1 << 26;

/// Relative tolerance for counting a run as having found the best fitness.
pub const DEFAULT_SUCCESS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("search space of {size} genomes exceeds the limit of {limit}")]
    SpaceTooLarge { size: String, limit: u128 },
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Genome(#[from] GenomeError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Fitness(#[from] FitnessError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// `M^(N-1)`, or `None` on overflow.
pub fn space_size(leaf_count: usize, max_depth: Level) -> Option<u128> {
    let len = u32::try_from(leaf_count.checked_sub(1)?).ok()?;
    u128::from(max_depth).checked_pow(len)
}

fn check_space(leaf_count: usize, max_depth: Level, limit: u128) -> Result<u128, HarnessError> {
    if leaf_count < 2 {
        return Err(GenomeError::EmptyGenome.into());
    }
    if max_depth == 0 {
        return Err(GenomeError::InvalidMaxDepth.into());
    }
    match space_size(leaf_count, max_depth) {
        Some(size) if size <= limit => Ok(size),
        Some(size) => Err(HarnessError::SpaceTooLarge {
            size: size.to_string(),
            limit,
        }),
        None => Err(HarnessError::SpaceTooLarge {
            size: format!("{max_depth}^{}", leaf_count - 1),
            limit,
        }),
    }
}

/// Lexicographic odometer over digit sequences with a fixed prefix.
#[derive(Debug, Clone)]
pub struct GenomeIter {
    current: Vec<Level>,
    fixed: usize,
    max_depth: Level,
    done: bool,
}

impl GenomeIter {
    fn new(prefix: &[Level], len: usize, max_depth: Level) -> Self {
        let mut current = prefix.to_vec();
        current.resize(len, 1);
        GenomeIter {
            current,
            fixed: prefix.len(),
            max_depth,
            done: len == 0,
        }
    }

    fn advance(&mut self) {
        for i in (self.fixed..self.current.len()).rev() {
            if self.current[i] < self.max_depth {
                self.current[i] += 1;
                return;
            }
            self.current[i] = 1;
        }
        self.done = true;
    }

    /// Calls `f` on every digit sequence in order without allocating a
    /// [`Genome`] per step.
    pub fn for_each_digits<F: FnMut(&[Level])>(mut self, mut f: F) {
        while !self.done {
            f(&self.current);
            self.advance();
        }
    }
}

impl Iterator for GenomeIter {
    type Item = Genome;

    fn next(&mut self) -> Option<Genome> {
        if self.done {
            return None;
        }
        let g = Genome::from_raw(self.current.clone(), self.max_depth);
        self.advance();
        Some(g)
    }
}

/// Every genome for `(N, M)` exactly once, in lexicographic order.
pub fn enumerate_genomes(leaf_count: usize, max_depth: Level) -> Result<GenomeIter, HarnessError> {
    enumerate_genomes_within(leaf_count, max_depth, DEFAULT_SPACE_LIMIT)
}

pub fn enumerate_genomes_within(
    leaf_count: usize,
    max_depth: Level,
    limit: u128,
) -> Result<GenomeIter, HarnessError> {
    check_space(leaf_count, max_depth, limit)?;
    Ok(GenomeIter::new(&[], leaf_count - 1, max_depth))
}

/// Prefixes that split the space into independent chunks for parallel work.
fn partitions(len: usize, max_depth: Level) -> Vec<Vec<Level>> {
    GenomeIter::new(&[], len.min(2), max_depth)
        .map(Genome::into_digits)
        .collect()
}

/// Number of fixed points of `simplify`, the effective search space size.
pub fn count_canonical(leaf_count: usize, max_depth: Level) -> Result<u64, HarnessError> {
    count_canonical_within(leaf_count, max_depth, DEFAULT_SPACE_LIMIT)
}

pub fn count_canonical_within(
    leaf_count: usize,
    max_depth: Level,
    limit: u128,
) -> Result<u64, HarnessError> {
    check_space(leaf_count, max_depth, limit)?;
    let len = leaf_count - 1;
    Ok(partitions(len, max_depth)
        .par_iter()
        .map(|prefix| {
            let mut count = 0u64;
            GenomeIter::new(prefix, len, max_depth).for_each_digits(|d| {
                if is_canonical_digits(d, max_depth) {
                    count += 1;
                }
            });
            count
        })
        .sum())
}

/// Evaluates every canonical genome and returns the lexicographically first
/// maximizer with its utility.
pub fn brute_force_best<E>(
    leaf_count: usize,
    max_depth: Level,
    evaluator: &E,
) -> Result<(Genome, f64), HarnessError>
where
    E: Evaluator + Sync + ?Sized,
{
    brute_force_best_within(leaf_count, max_depth, evaluator, DEFAULT_SPACE_LIMIT)
}

pub fn brute_force_best_within<E>(
    leaf_count: usize,
    max_depth: Level,
    evaluator: &E,
    limit: u128,
) -> Result<(Genome, f64), HarnessError>
where
    E: Evaluator + Sync + ?Sized,
{
    check_space(leaf_count, max_depth, limit)?;
    let len = leaf_count - 1;
    let chunk_best = partitions(len, max_depth)
        .par_iter()
        .map(|prefix| -> Result<Option<(Vec<Level>, f64)>, FitnessError> {
            let mut best: Option<(Vec<Level>, f64)> = None;
            let mut failure = None;
            GenomeIter::new(prefix, len, max_depth).for_each_digits(|d| {
                if failure.is_some() || !is_canonical_digits(d, max_depth) {
                    return;
                }
                let genome = Genome::from_raw(d.to_vec(), max_depth);
                match evaluator.evaluate(&decode(&genome)) {
                    Ok(u) => {
                        if best.as_ref().is_none_or(|(_, b)| u > *b) {
                            best = Some((d.to_vec(), u));
                        }
                    }
                    Err(e) => failure = Some(e),
                }
            });
            match failure {
                Some(e) => Err(e),
                None => Ok(best),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;

    // chunks are in lexicographic order, so strict improvement keeps the
    // first maximizer
    let mut best: Option<(Vec<Level>, f64)> = None;
    for (digits, u) in chunk_best.into_iter().flatten() {
        if best.as_ref().is_none_or(|(_, b)| u > *b) {
            best = Some((digits, u));
        }
    }
    let (digits, u) = best.expect("at least one canonical genome exists");
    Ok((Genome::from_raw(digits, max_depth), u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub leaf_count: usize,
    pub population_size: usize,
    pub max_evaluations: usize,
}

impl CaseConfig {
    pub const fn new(leaf_count: usize, population_size: usize, max_evaluations: usize) -> Self {
        CaseConfig {
            leaf_count,
            population_size,
            max_evaluations,
        }
    }
}

/// Database count, population size and evaluation budget of the ten
/// benchmark cases.
pub const TABLE_CASES: [CaseConfig; 10] = [
    CaseConfig::new(12, 50, 2_000),
    CaseConfig::new(14, 100, 5_000),
    CaseConfig::new(16, 200, 10_000),
    CaseConfig::new(18, 500, 50_000),
    CaseConfig::new(20, 500, 50_000),
    CaseConfig::new(22, 500, 50_000),
    CaseConfig::new(24, 500, 100_000),
    CaseConfig::new(26, 500, 100_000),
    CaseConfig::new(28, 500, 100_000),
    CaseConfig::new(30, 1_000, 200_000),
];

/// Returns the benchmark case for `leaf_count`, if there is one.
pub fn table_case(leaf_count: usize) -> Option<CaseConfig> {
    TABLE_CASES.iter().copied().find(|c| c.leaf_count == leaf_count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub cases: Vec<CaseConfig>,
    pub algorithms: Vec<Algorithm>,
    pub runs_per_case: usize,
    pub max_depth: Level,
    pub mutation_rate: f64,
    pub rts_window: usize,
    pub base_seed: u64,
    pub env: EnvironmentParams,
    /// Cases whose genome space is at most this large also get an
    /// exhaustive-search optimum. Zero disables the oracle.
    pub oracle_space_limit: u128,
    /// Relative tolerance used for the success rate.
    pub success_tolerance: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            cases: TABLE_CASES.to_vec(),
            algorithms: Algorithm::ALL.to_vec(),
            runs_per_case: 10,
            max_depth: 4,
            mutation_rate: 0.1,
            rts_window: 5,
            base_seed: 0,
            env: EnvironmentParams::default(),
            oracle_space_limit: DEFAULT_SPACE_LIMIT,
            success_tolerance: DEFAULT_SUCCESS_TOLERANCE,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if self.cases.is_empty() {
            return bad("no cases");
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms");
        }
        if self.runs_per_case == 0 {
            return bad("runs_per_case must be at least 1");
        }
        if !(self.success_tolerance >= 0.0) {
            return bad("success_tolerance must be non-negative");
        }
        self.env.validate()?;
        for case in &self.cases {
            for &algorithm in &self.algorithms {
                self.ga_config(case, algorithm, 0).validate()?;
            }
        }
        Ok(())
    }

    pub fn ga_config(&self, case: &CaseConfig, algorithm: Algorithm, seed: u64) -> GaConfig {
        GaConfig {
            leaf_count: case.leaf_count,
            max_depth: self.max_depth,
            algorithm,
            population_size: case.population_size,
            max_evaluations: case.max_evaluations,
            mutation_rate: self.mutation_rate,
            rts_window: self.rts_window,
            seed,
        }
    }
}

/// Seed of one run: `base ^ H(case, algorithm, run)` with `H` the first eight
/// bytes of a SHA-256 digest.
pub fn derive_seed(base_seed: u64, leaf_count: usize, algorithm: Algorithm, run: usize) -> u64 {
    let digest = Sha256::digest(format!("{leaf_count}:{}:{run}", algorithm.name()).as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    base_seed ^ u64::from_le_bytes(head)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub best_fitness: Option<f64>,
    pub best_genome: Option<Genome>,
    pub evaluations_used: usize,
    pub trajectory: Vec<TrajectoryPoint>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub leaf_count: usize,
    pub algorithm: Algorithm,
    pub apre_percent: Option<f64>,
    pub success_rate: Option<f64>,
    pub runs: Vec<RunRecord>,
}

impl CellReport {
    pub fn successful_fitness(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.best_fitness).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BestSource {
    Observed,
    Enumeration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub leaf_count: usize,
    pub population_size: usize,
    pub max_evaluations: usize,
    /// Reference value for PRE and SR.
    pub f_best: Option<f64>,
    pub f_best_source: Option<BestSource>,
    /// Best fitness over all runs of all algorithms.
    pub f_best_observed: Option<f64>,
    pub enumeration_optimum: Option<f64>,
    pub enumeration_genome: Option<Genome>,
    /// Number of canonical genomes (fixed points of simplification); not
    /// comparable with organization counts from pruned enumerators.
    pub canonical_genomes: Option<u64>,
    pub cells: Vec<CellReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub first: Algorithm,
    pub second: Algorithm,
    /// APRE vectors over cases where both algorithms have a value.
    pub cases: Vec<usize>,
    pub result: Option<WilcoxonResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub algorithms: Vec<Algorithm>,
    pub cases: Vec<CaseReport>,
    pub wilcoxon: Vec<PairwiseTest>,
}

/// Runs every `(case, algorithm, run)` cell with the default utility model.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let model = IrUtilityModel::new(cfg.env)?;
    run_experiment_with(cfg, &model)
}

pub fn run_experiment_with<E>(cfg: &ExperimentConfig, evaluator: &E) -> Result<ExperimentReport, HarnessError>
where
    E: Evaluator + Sync + ?Sized,
{
    cfg.validate()?;

    let jobs: Vec<(usize, Algorithm, usize)> = cfg
        .cases
        .iter()
        .enumerate()
        .flat_map(|(ci, _)| {
            cfg.algorithms
                .iter()
                .flat_map(move |&a| (0..cfg.runs_per_case).map(move |r| (ci, a, r)))
        })
        .collect();

    let records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(ci, algorithm, run)| {
            let case = &cfg.cases[ci];
            let seed = derive_seed(cfg.base_seed, case.leaf_count, algorithm, run);
            let ga = cfg.ga_config(case, algorithm, seed);
            match engine::run(&ga, evaluator) {
                Ok(r) => RunRecord {
                    run,
                    seed,
                    best_fitness: Some(r.best_fitness),
                    best_genome: Some(r.best_genome),
                    evaluations_used: r.evaluations_used,
                    trajectory: r.trajectory,
                    error: None,
                },
                Err(e) => RunRecord {
                    run,
                    seed,
                    best_fitness: None,
                    best_genome: None,
                    evaluations_used: 0,
                    trajectory: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut records = records.into_iter();
    let mut cases = Vec::with_capacity(cfg.cases.len());
    for case in &cfg.cases {
        let cells = cfg
            .algorithms
            .iter()
            .map(|&algorithm| CellReport {
                leaf_count: case.leaf_count,
                algorithm,
                apre_percent: None,
                success_rate: None,
                runs: records.by_ref().take(cfg.runs_per_case).collect(),
            })
            .collect();

        let oracle = if check_space(case.leaf_count, cfg.max_depth, cfg.oracle_space_limit).is_ok() {
            let (genome, utility) =
                brute_force_best_within(case.leaf_count, cfg.max_depth, evaluator, cfg.oracle_space_limit)?;
            let canonical = count_canonical_within(case.leaf_count, cfg.max_depth, cfg.oracle_space_limit)?;
            Some((genome, utility, canonical))
        } else {
            None
        };

        let mut report = CaseReport {
            leaf_count: case.leaf_count,
            population_size: case.population_size,
            max_evaluations: case.max_evaluations,
            f_best: None,
            f_best_source: None,
            f_best_observed: None,
            enumeration_optimum: oracle.as_ref().map(|o| o.1),
            canonical_genomes: oracle.as_ref().map(|o| o.2),
            enumeration_genome: oracle.map(|o| o.0),
            cells,
        };
        fill_case_metrics(&mut report, cfg.success_tolerance)?;
        cases.push(report);
    }

    let wilcoxon = pairwise_tests(&cfg.algorithms, &cases)?;
    Ok(ExperimentReport {
        config: cfg.clone(),
        algorithms: cfg.algorithms.clone(),
        cases,
        wilcoxon,
    })
}

/// Recomputes fBest, APRE and SR of one case from its stored runs.
pub fn fill_case_metrics(case: &mut CaseReport, tolerance: f64) -> Result<(), HarnessError> {
    let observed = case
        .cells
        .iter()
        .flat_map(|c| c.successful_fitness())
        .fold(None, |acc: Option<f64>, f| Some(acc.map_or(f, |a| a.max(f))));
    case.f_best_observed = observed;
    let (best, source) = match (observed, case.enumeration_optimum) {
        (Some(o), Some(e)) if e >= o => (Some(e), Some(BestSource::Enumeration)),
        (None, Some(e)) => (Some(e), Some(BestSource::Enumeration)),
        (Some(o), _) => (Some(o), Some(BestSource::Observed)),
        (None, None) => (None, None),
    };
    case.f_best = best;
    case.f_best_source = source;

    for cell in &mut case.cells {
        let fitness = cell.successful_fitness();
        match best {
            Some(b) if !fitness.is_empty() && b > 0.0 => {
                // a run counted as a success contributes no error, so
                // rounding noise between equivalent optima stays out of APRE
                let pres = fitness
                    .iter()
                    .map(|&f| if (b - f).abs() <= tolerance * b { Ok(0.0) } else { metrics::pre(f, b) })
                    .collect::<Result<Vec<_>, _>>()?;
                cell.apre_percent = Some(metrics::apre(&pres)?);
                cell.success_rate = Some(metrics::success_rate(&fitness, b, tolerance * b)?);
            }
            _ => {
                cell.apre_percent = None;
                cell.success_rate = None;
            }
        }
    }
    Ok(())
}

/// Wilcoxon tests over per-case APRE vectors for every algorithm pair.
pub fn pairwise_tests(algorithms: &[Algorithm], cases: &[CaseReport]) -> Result<Vec<PairwiseTest>, HarnessError> {
    let apre_of = |case: &CaseReport, a: Algorithm| {
        case.cells
            .iter()
            .find(|c| c.algorithm == a)
            .and_then(|c| c.apre_percent)
    };
    let mut out = Vec::new();
    for (i, &first) in algorithms.iter().enumerate() {
        for &second in &algorithms[i + 1..] {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            let mut labels = Vec::new();
            for case in cases {
                if let (Some(x), Some(y)) = (apre_of(case, first), apre_of(case, second)) {
                    xs.push(x);
                    ys.push(y);
                    labels.push(case.leaf_count);
                }
            }
            let result = if xs.is_empty() {
                None
            } else {
                Some(metrics::wilcoxon_signed_rank(&xs, &ys)?)
            };
            out.push(PairwiseTest {
                first,
                second,
                cases: labels,
                result,
            });
        }
    }
    Ok(out)
}

/// Recomputes every derived field of `report` from its stored runs.
pub fn recompute(report: &mut ExperimentReport) -> Result<(), HarnessError> {
    let tolerance = report.config.success_tolerance;
    for case in &mut report.cases {
        fill_case_metrics(case, tolerance)?;
    }
    report.wilcoxon = pairwise_tests(&report.algorithms, &report.cases)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub const CSV_HEADER: &str = "case,algorithm,apre_percent,sr,f_best,runs";

fn cell_text(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn report_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for case in &report.cases {
        for cell in &case.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                case.leaf_count,
                cell.algorithm,
                cell_text(cell.apre_percent),
                cell_text(cell.success_rate),
                cell_text(case.f_best),
                cell.runs.len()
            );
        }
    }
    out
}

pub fn report_json(report: &ExperimentReport) -> Result<String, HarnessError> {
    Ok(serde_json::to_string_pretty(report)?)
}

pub fn write_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<(), HarnessError> {
    let text = match format {
        ReportFormat::Csv => report_csv(report),
        ReportFormat::Json => report_json(report)?,
    };
    fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_report(path: &Path) -> Result<ExperimentReport, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}
