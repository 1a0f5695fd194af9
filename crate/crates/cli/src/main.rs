use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use orgevo_core::engine::{self, Algorithm, GaConfig};
use orgevo_core::fitness::{EnvironmentParams, FitnessError, IrUtilityModel};
use orgevo_core::harness::{self, ExperimentConfig, ExperimentReport, HarnessError, ReportFormat};
use orgevo_core::{decode, encode, Genome, GenomeError, OrganizationTree};

#[derive(Parser)]
#[command(name = "orgevo", version, about = "Evolve hierarchical multi-agent organizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single GA optimization and write its result as JSON.
    Run {
        #[arg(long)]
        dbs: usize,
        #[arg(long, default_value_t = 4)]
        max_depth: u8,
        #[arg(long, default_value = "hga")]
        algo: Algorithm,
        /// Defaults to the benchmark setting for this database count.
        #[arg(long)]
        pop: Option<usize>,
        /// Defaults to the benchmark setting for this database count.
        #[arg(long)]
        evals: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        mutation_rate: f64,
        #[arg(long, default_value_t = 5)]
        rts_window: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Environment parameters as JSON (same keys as the experiment `env`).
        #[arg(long)]
        env: Option<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a batch experiment and write report.json and report.csv.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// List every genome, or count them.
    Enumerate {
        #[arg(long)]
        dbs: usize,
        #[arg(long, default_value_t = 4)]
        max_depth: u8,
        /// Print the total and canonical counts only.
        #[arg(long)]
        count_only: bool,
        /// Also report the exhaustive-search optimum under the default model.
        #[arg(long)]
        best: bool,
    },
    /// Recompute APRE, SR and Wilcoxon tests from stored reports.
    Stats {
        #[arg(long, num_args = 1.., required = true)]
        reports: Vec<PathBuf>,
    },
    /// Encode a tree JSON file into a genome.
    Encode {
        #[arg(long)]
        tree: PathBuf,
        /// Defaults to the depth of the tree.
        #[arg(long)]
        max_depth: Option<u8>,
    },
    /// Decode a genome into tree JSON.
    Decode {
        #[arg(long)]
        genome: String,
        #[arg(long)]
        max_depth: u8,
        /// Remove single-child chains before decoding.
        #[arg(long)]
        simplify: bool,
    },
}

enum Failure {
    Usage(String),
    Infeasible(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Infeasible(m) | Failure::Io(m) => m,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::SpaceTooLarge { .. } | HarnessError::Fitness(FitnessError::Infeasible { .. }) => {
                Failure::Infeasible(e.to_string())
            }
            HarnessError::Io { .. } => Failure::Io(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<GenomeError> for Failure {
    fn from(e: GenomeError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<engine::EngineError> for Failure {
    fn from(e: engine::EngineError) -> Self {
        match e {
            engine::EngineError::Fitness(FitnessError::Infeasible { .. }) => Failure::Infeasible(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| Failure::Io(e.to_string()))
        }
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn print_summary(report: &ExperimentReport) {
    print!("{}", harness::report_csv(report));
    for test in &report.wilcoxon {
        match test.result {
            Some(r) => println!(
                "wilcoxon {} vs {}: W = {}, n = {}, p = {:.6}",
                test.first, test.second, r.w_statistic, r.n_effective, r.p_two_sided
            ),
            None => println!("wilcoxon {} vs {}: no paired cases", test.first, test.second),
        }
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            dbs,
            max_depth,
            algo,
            pop,
            evals,
            mutation_rate,
            rts_window,
            seed,
            env,
            out,
        } => {
            let table = harness::table_case(dbs);
            let population_size = pop.or(table.map(|c| c.population_size)).ok_or_else(|| {
                Failure::Usage(format!("--pop is required for {dbs} databases"))
            })?;
            let max_evaluations = evals.or(table.map(|c| c.max_evaluations)).ok_or_else(|| {
                Failure::Usage(format!("--evals is required for {dbs} databases"))
            })?;
            let env: EnvironmentParams = match env {
                Some(path) => parse_json(&path)?,
                None => EnvironmentParams::default(),
            };
            let model = IrUtilityModel::new(env).map_err(|e| Failure::Usage(e.to_string()))?;
            let cfg = GaConfig {
                leaf_count: dbs,
                max_depth,
                algorithm: algo,
                population_size,
                max_evaluations,
                mutation_rate,
                rts_window,
                seed,
            };
            let result = engine::run(&cfg, &model)?;
            let text = serde_json::to_string_pretty(&result).map_err(|e| Failure::Io(e.to_string()))?;
            write_text(out.as_deref(), &text)?;
            if out.is_some() {
                println!(
                    "best {} (utility {:.4}) after {} evaluations",
                    result.best_genome, result.best_fitness, result.evaluations_used
                );
            }
            Ok(())
        }
        Command::Experiment { config, out_dir } => {
            let cfg: ExperimentConfig = parse_json(&config)?;
            let report = harness::run_experiment(&cfg)?;
            fs::create_dir_all(&out_dir)
                .map_err(|e| Failure::Io(format!("cannot create {}: {e}", out_dir.display())))?;
            harness::write_report(&report, ReportFormat::Json, &out_dir.join("report.json"))?;
            harness::write_report(&report, ReportFormat::Csv, &out_dir.join("report.csv"))?;
            print_summary(&report);
            Ok(())
        }
        Command::Enumerate {
            dbs,
            max_depth,
            count_only,
            best,
        } => {
            if count_only {
                let total = harness::space_size(dbs, max_depth)
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "overflow".into());
                let canonical = harness::count_canonical(dbs, max_depth)?;
                println!("genomes {total}");
                println!("canonical {canonical}");
            } else {
                let iter = harness::enumerate_genomes(dbs, max_depth)?;
                let mut out = std::io::BufWriter::new(std::io::stdout().lock());
                for g in iter {
                    writeln!(out, "{g}").map_err(|e| Failure::Io(e.to_string()))?;
                }
            }
            if best {
                let (g, u) = harness::brute_force_best(dbs, max_depth, &IrUtilityModel::default())?;
                println!("best {g} utility {u:.6}");
            }
            Ok(())
        }
        Command::Stats { reports } => {
            let mut merged: Option<ExperimentReport> = None;
            for path in &reports {
                let report = harness::read_report(path)?;
                match merged.as_mut() {
                    None => merged = Some(report),
                    Some(m) => {
                        m.cases.extend(report.cases);
                        for a in report.algorithms {
                            if !m.algorithms.contains(&a) {
                                m.algorithms.push(a);
                            }
                        }
                    }
                }
            }
            let mut report = merged.expect("clap requires at least one report");
            harness::recompute(&mut report)?;
            print_summary(&report);
            Ok(())
        }
        Command::Encode { tree, max_depth } => {
            let tree: OrganizationTree = parse_json(&tree)?;
            let genome = encode(&tree, max_depth.unwrap_or_else(|| tree.depth()))?;
            println!("{genome}");
            Ok(())
        }
        Command::Decode {
            genome,
            max_depth,
            simplify,
        } => {
            let mut genome = Genome::parse(&genome, max_depth)?;
            if simplify {
                genome = genome.simplify();
            }
            let text = serde_json::to_string_pretty(&decode(&genome)).map_err(|e| Failure::Io(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => e.exit(),
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
