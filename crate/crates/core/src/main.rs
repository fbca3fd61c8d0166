use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fsa_search::harness::{self, DomainFile, Experiment, JointPolicy, OUT_DIR_ENV};
use fsa_search::sim::Evaluation;

#[derive(Parser)]
#[command(version, about = "Policy search for multi-robot planning with macro-actions")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated seeds overriding the configuration.
    #[arg(long, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured solver once per seed.
    Solve(RunArgs),
    /// Compare acceleration schemes for the discrete solver.
    CompareAccel(RunArgs),
    /// Sweep observation discretization and run the continuous solver.
    SweepDiscretization(RunArgs),
    /// Value a saved policy on a domain.
    Evaluate {
        #[arg(long)]
        policy: PathBuf,
        /// Domain file.
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n_traj: usize,
        /// Defaults to the domain's design horizon.
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seed_list: Vec<u64>,
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
    },
}

fn run_experiment(args: &RunArgs, prefix: &str) -> fsa_search::Result<()> {
    let exp = Experiment::load(&args.config)?;
    let seeds = args.seed_list.clone().unwrap_or_else(|| exp.config.seeds.clone());
    if seeds.is_empty() {
        return Err(fsa_search::Error::Config("seed list is empty".into()));
    }
    let out = args
        .out
        .clone()
        .or_else(|| exp.config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let results = match prefix {
        "solve" => harness::solve(&exp, &seeds)?,
        "compare_accel" => harness::compare_accel(&exp, &seeds)?,
        _ => harness::sweep_discretization(&exp, &seeds)?,
    };
    let files = harness::write_outputs(&out, prefix, &results, exp.config.output.timing)?;
    print!("{}", harness::render_summary(&results));
    println!("trace: {}", files.trace.display());
    println!("summary: {}", files.summary.display());
    Ok(())
}

fn run_evaluate(
    policy: &Path,
    domain: &Path,
    n_traj: usize,
    horizon: Option<u64>,
    seeds: &[u64],
    out: Option<PathBuf>,
) -> fsa_search::Result<()> {
    let policy = JointPolicy::load(policy)?;
    let domain = DomainFile::load(domain)?.build()?;
    let horizon = horizon.unwrap_or_else(|| domain.kind().default_horizon());
    let mut rows = Vec::new();
    for &seed in seeds {
        let Evaluation { mean, stderr, n } = harness::evaluate_policy(&policy, &domain, horizon, n_traj, seed)?;
        println!("seed {seed}: {mean:.6} ± {stderr:.6} ({n} rollouts)");
        rows.push(format!(
            "{seed},{},{},{n}\n",
            harness::fmt_f64(mean),
            harness::fmt_f64(stderr)
        ));
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        let path = dir.join("evaluate.csv");
        std::fs::write(&path, format!("seed,value,stderr,n_traj\n{}", rows.concat()))?;
        println!("written: {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match &cli.command {
        Command::Solve(a) => run_experiment(a, "solve"),
        Command::CompareAccel(a) => run_experiment(a, "compare_accel"),
        Command::SweepDiscretization(a) => run_experiment(a, "sweep_discretization"),
        Command::Evaluate {
            policy,
            domain,
            n_traj,
            horizon,
            seed_list,
            out,
        } => run_evaluate(policy, domain, *n_traj, *horizon, seed_list, out.clone()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
