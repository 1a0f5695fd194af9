//! Acceptance gate. Prints one line per criterion and exits nonzero when any
//! of them fails.

mod common;

use std::cell::Cell;
use std::collections::HashSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use orgevo_core::engine::{self, Algorithm, GaConfig};
use orgevo_core::fitness::{EnvironmentParams, IrUtilityModel};
use orgevo_core::harness::{self, CaseConfig, ExperimentConfig};
use orgevo_core::metrics::wilcoxon_signed_rank;
use orgevo_core::operators::{
    bitwise_mutation, hierarchical_crossover, one_point_crossover, small_perturbation_mutation,
    two_point_crossover,
};
use orgevo_core::{decode, encode, Genome, Level, OrganizationTree};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

const SGA1: [f64; 10] = [0.1103, 0.0090, 0.0966, 0.0940, 0.1150, 0.2037, 0.3376, 0.1556, 0.2104, 0.2470];
const SGA2: [f64; 10] = [0.1122, 0.0460, 0.0869, 0.0372, 0.3076, 0.3085, 0.4914, 0.3494, 0.5307, 0.4825];
const HGA: [f64; 10] = [0.0370, 0.0, 0.0, 0.0505, 0.0749, 0.0031, 0.0406, 0.0, 0.0067, 0.0];

fn wilcoxon_reproduction() -> Check {
    let start = Instant::now();
    let p1 = wilcoxon_signed_rank(&HGA, &SGA1).map_err(|e| e.to_string())?.p_two_sided;
    let p2 = wilcoxon_signed_rank(&HGA, &SGA2).map_err(|e| e.to_string())?.p_two_sided;
    within(start.elapsed(), Duration::from_secs(1))?;
    ensure((p1 - 0.001953125).abs() < 1e-12, || format!("HGA vs SGA1 p = {p1}"))?;
    ensure((p2 - 0.00390625).abs() < 1e-12, || format!("HGA vs SGA2 p = {p2}"))?;
    Ok(format!("p = {p1} and {p2}"))
}

fn small_spaces() -> impl Iterator<Item = (usize, Level)> {
    (2..=8).flat_map(|n| (1..=4).map(move |m| (n, m)))
}

fn codec_suite() -> Check {
    let start = Instant::now();
    let mut checked = 0;
    for (n, m) in small_spaces() {
        let mut seen: HashSet<OrganizationTree> = HashSet::new();
        for g in common::all_genomes(n, m) {
            let t = decode(&g);
            let back = encode(&t, m).map_err(|e| format!("{g}: {e}"))?;
            ensure(back == g, || format!("{g} round-trips to {back}"))?;
            let levels: Vec<Level> = (1..=n).map(|i| g.leaf_level(i).unwrap()).collect();
            ensure(t.leaf_levels() == levels, || format!("{g}: leaf levels disagree"))?;
            ensure(t.leaf_count() == n && t.depth() <= m, || format!("{g}: bad shape"))?;
            ensure(seen.insert(t), || format!("{g} decodes to an earlier tree"))?;
            checked += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{checked} genomes"))
}

fn simplify_suite() -> Check {
    let start = Instant::now();
    let mut checked = 0;
    for (n, m) in small_spaces() {
        for g in common::all_genomes(n, m) {
            let s = g.simplify();
            let oracle = common::simplify_via_tree(&g);
            ensure(s == oracle, || format!("{g}: simplify {s}, oracle {oracle}"))?;
            ensure(s.simplify() == s, || format!("{g}: simplify not idempotent"))?;
            ensure(common::no_single_child_nodes(&decode(&s)), || {
                format!("{g}: {s} keeps a single-child node")
            })?;
            checked += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("{checked} genomes"))
}

type Crossover = fn(&Genome, &Genome, &mut ChaCha8Rng) -> Result<(Genome, Genome), String>;
type Mutation = fn(&Genome, &mut ChaCha8Rng) -> Result<Genome, String>;

fn sorted_pair(a: &Genome, b: &Genome) -> Vec<Level> {
    let mut v = [a.digits(), b.digits()].concat();
    v.sort_unstable();
    v
}

fn valid(g: &Genome, len: usize, m: Level) -> bool {
    g.len() == len && g.max_depth() == m && Genome::new(g.digits().to_vec(), m).is_ok()
}

fn operator_suite() -> Check {
    const PAIRS: u64 = 10_000;
    let start = Instant::now();
    let crossovers: [(&str, Crossover); 3] = [
        ("hierarchical", |a, b, r| hierarchical_crossover(a, b, r).map_err(|e| e.to_string())),
        ("one-point", |a, b, r| one_point_crossover(a, b, r).map_err(|e| e.to_string())),
        ("two-point", |a, b, r| two_point_crossover(a, b, r).map_err(|e| e.to_string())),
    ];
    let mutations: [(&str, Mutation); 2] = [
        ("bit-wise", |g, r| bitwise_mutation(g, 0.3, r).map_err(|e| e.to_string())),
        ("small-perturbation", |g, r| {
            small_perturbation_mutation(g, 0.3, r).map_err(|e| e.to_string())
        }),
    ];
    let (n, m) = (10, 4);
    let len = n - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..PAIRS {
        let p1 = Genome::random(n, m, &mut rng).unwrap();
        let p2 = Genome::random(n, m, &mut rng).unwrap();
        for (name, op) in crossovers {
            let (o1, o2) = op(&p1, &p2, &mut ChaCha8Rng::seed_from_u64(i))?;
            let (r1, r2) = op(&p1, &p2, &mut ChaCha8Rng::seed_from_u64(i))?;
            ensure(o1 == r1 && o2 == r2, || format!("{name}: not deterministic on {p1} x {p2}"))?;
            ensure(valid(&o1, len, m) && valid(&o2, len, m), || {
                format!("{name}: invalid offspring from {p1} x {p2}")
            })?;
            let reseeded = name == "hierarchical" && (p1.max_digit() == 1 || p2.max_digit() == 1);
            if !reseeded {
                ensure(sorted_pair(&o1, &o2) == sorted_pair(&p1, &p2), || {
                    format!("{name}: digit multiset changed on {p1} x {p2}")
                })?;
            }
        }
        for (name, op) in mutations {
            let o = op(&p1, &mut ChaCha8Rng::seed_from_u64(i))?;
            ensure(o == op(&p1, &mut ChaCha8Rng::seed_from_u64(i))?, || {
                format!("{name}: not deterministic on {p1}")
            })?;
            ensure(valid(&o, len, m), || format!("{name}: invalid child of {p1}"))?;
            if name == "small-perturbation" {
                ensure(o.digits().iter().zip(p1.digits()).all(|(a, b)| a.abs_diff(*b) <= 1), || {
                    format!("{name}: step above 1 from {p1} to {o}")
                })?;
            }
        }
    }

    // one level only: every operator must return the single genome there is
    let flat = Genome::new(vec![1; len], 1).unwrap();
    for i in 0..PAIRS {
        for (name, op) in crossovers {
            let (o1, o2) = op(&flat, &flat, &mut ChaCha8Rng::seed_from_u64(i))?;
            ensure(o1 == flat && o2 == flat, || format!("{name}: moved under one level"))?;
        }
        for (name, op) in mutations {
            let o = op(&flat, &mut ChaCha8Rng::seed_from_u64(i))?;
            ensure(o == flat, || format!("{name}: moved under one level"))?;
        }
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("{PAIRS} pairs per operator"))
}

fn optimization_oracle() -> Check {
    let start = Instant::now();
    let model = IrUtilityModel::default();
    let (best, optimum) = harness::brute_force_best(12, 4, &model).map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig {
        cases: vec![harness::table_case(12).unwrap()],
        algorithms: vec![Algorithm::Hga],
        oracle_space_limit: 0,
        ..ExperimentConfig::default()
    };
    let report = harness::run_experiment(&cfg).map_err(|e| e.to_string())?;
    let cell = &report.cases[0].cells[0];
    let mut hits = 0;
    for run in &cell.runs {
        let f = run.best_fitness.ok_or("a run failed")?;
        ensure(f <= optimum + 1e-9, || format!("run {} beats the optimum: {f}", run.run))?;
        if (optimum - f).abs() <= harness::DEFAULT_SUCCESS_TOLERANCE * optimum {
            hits += 1;
        }
    }
    ensure(hits >= 6, || format!("only {hits}/10 runs reach {optimum:.6} ({best})"))?;
    Ok(format!("{hits}/10 runs reach {optimum:.6} at {best}, {:.1?}", start.elapsed()))
}

fn trend_at(env: EnvironmentParams) -> Result<(Option<f64>, [Option<f64>; 3]), String> {
    let cfg = ExperimentConfig {
        cases: vec![harness::table_case(20).unwrap()],
        oracle_space_limit: 0,
        env,
        ..ExperimentConfig::default()
    };
    let report = harness::run_experiment(&cfg).map_err(|e| e.to_string())?;
    let case = &report.cases[0];
    let apre = |a: Algorithm| case.cells.iter().find(|c| c.algorithm == a).and_then(|c| c.apre_percent);
    Ok((
        case.f_best_observed,
        [apre(Algorithm::Hga), apre(Algorithm::Sga1), apre(Algorithm::Sga2)],
    ))
}

fn comparative_trend() -> Check {
    let start = Instant::now();
    let (observed, apres) = trend_at(EnvironmentParams::default())?;
    if let [Some(h), Some(s1), Some(s2)] = apres {
        let summary = format!("APRE hga {h:.4}, sga1 {s1:.4}, sga2 {s2:.4}");
        ensure(h <= s1 && h <= s2, || summary.clone())?;
        return Ok(format!("{summary}, {:.1?}", start.elapsed()));
    }
    // every organization of 20 databases answers in about a second or more,
    // so the default model scores them all 0 and APRE has no reference
    let floor = fastest_response(20, 4, &EnvironmentParams::default());
    let mut why = format!(
        "APRE undefined: best observed utility {observed:?}, fastest possible response {floor:.4} s"
    );
    let raised = EnvironmentParams {
        utility_ceiling: 2000.0,
        ..EnvironmentParams::default()
    };
    if let (_, [Some(h), Some(s1), Some(s2)]) = trend_at(raised)? {
        why += &format!("; with ceiling 2000: APRE hga {h:.4}, sga1 {s1:.4}, sga2 {s2:.4}");
    }
    Err(why)
}

/// Lowest response time over all organizations of `n` databases, by dynamic
/// programming over balanced splits (response time grows with the leaf count
/// of every subtree, so balanced children are optimal for a fixed fan-out).
fn fastest_response(n: usize, max_depth: Level, env: &EnvironmentParams) -> f64 {
    let merge = |c: usize| {
        let rate = env.response_service_rate / c as f64 - env.query_rate;
        if rate > 0.0 { 1.0 / rate } else { f64::INFINITY }
    };
    let database = 1.0 / (env.process_service_rate - env.query_rate);
    let hop = 2.0 * env.message_latency;
    let split = |n: usize, c: usize| (0..c).map(move |i| n / c + usize::from(i < n % c));
    // best[level][n]: fastest subtree with n leaves rooted at `level`
    let mut best = vec![vec![f64::INFINITY; n + 1]; max_depth as usize + 2];
    for level in (1..=max_depth as usize).rev() {
        for leaves in 1..=n {
            if leaves == 1 && level > 1 {
                best[level][1] = database;
                continue;
            }
            let first = if level == 1 { 1 } else { 2 };
            best[level][leaves] = (first..=leaves)
                .map(|c| {
                    let slowest = split(leaves, c).map(|s| best[level + 1][s]).fold(0.0, f64::max);
                    hop + slowest + merge(c)
                })
                .fold(f64::INFINITY, f64::min);
        }
    }
    (1..=n)
        .map(|k| {
            let slowest = split(n, k).map(|s| best[1][s]).fold(0.0, f64::max);
            if k == 1 { slowest } else { hop + slowest + merge(k) }
        })
        .fold(f64::INFINITY, f64::min)
}

fn engine_invariants() -> Check {
    let model = IrUtilityModel::default();
    for (i, algorithm) in Algorithm::ALL.into_iter().enumerate() {
        for budget in [50, 51, 333] {
            let calls = Cell::new(0usize);
            let counting = |t: &OrganizationTree| {
                calls.set(calls.get() + 1);
                orgevo_core::fitness::evaluate(t, &model.env)
            };
            let cfg = GaConfig::new(14, 4, algorithm, 20, budget, i as u64 + 3);
            let result = engine::run(&cfg, &counting).map_err(|e| e.to_string())?;
            ensure(calls.get() == budget && result.evaluations_used == budget, || {
                format!("{algorithm}: {} calls, {} reported, budget {budget}", calls.get(), result.evaluations_used)
            })?;
            let steps = &result.trajectory;
            ensure(
                steps.windows(2).all(|w| {
                    w[1].best_fitness >= w[0].best_fitness && w[1].evaluation > w[0].evaluation
                }),
                || format!("{algorithm}: trajectory not monotone"),
            )?;
            ensure(steps.last().map(|p| p.best_fitness) == Some(result.best_fitness), || {
                format!("{algorithm}: trajectory ends below the best")
            })?;
        }
    }
    let cfg = ExperimentConfig {
        cases: vec![CaseConfig::new(9, 16, 400), CaseConfig::new(12, 20, 600)],
        runs_per_case: 3,
        base_seed: 11,
        ..ExperimentConfig::default()
    };
    let first = harness::report_json(&harness::run_experiment(&cfg).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let second = harness::report_json(&harness::run_experiment(&cfg).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure(first == second, || "reports differ between executions".into())?;
    Ok(format!("budgets exact, {} byte report reproduced", first.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 7] = [
        ("wilcoxon reproduction", wilcoxon_reproduction),
        ("codec round trip and injectivity", codec_suite),
        ("simplification oracle", simplify_suite),
        ("operator properties", operator_suite),
        ("optimization oracle (N=12)", optimization_oracle),
        ("comparative trend (N=20)", comparative_trend),
        ("engine invariants", engine_invariants),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
