//! `forgevqe`: command-line driver for neural Schrödinger forging runs.
//!
//! Exit codes: 0 success (selection converged), 1 runtime failure,
//! 2 invalid configuration or usage, 3 selection stopped at `max_iters`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use schmidt_forge::pipeline::{
    cmd_correlators, cmd_entropy, cmd_exact, cmd_score, cmd_select, cmd_vqe, Experiment, ExperimentConfig, VqeResult,
    RESULT_FILE,
};
use schmidt_forge::selection::Termination;
use schmidt_forge::Error;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_MAX_ITERS: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "forgevqe", version, about = "Schrödinger entanglement forging with neural bitstring selection")]
struct Cli {
    /// Worker threads for term and pair evaluation (default: all cores).
    #[arg(long, global = true, env = "FORGEVQE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Select the k basis pairs with the autoregressive sampler.
    Select(RunArgs),
    /// Pair selection (or another pair source) followed by the forged VQE.
    Vqe(RunArgs),
    /// Exact ground state and Schmidt spectrum of the configured model.
    Exact(RunArgs),
    /// ⟨Z_i Z_j⟩ table of a finished VQE run, forged against exact.
    Correlators {
        #[command(flatten)]
        run: RunArgs,
        /// `result.json` of the VQE run (default: <out>/result.json).
        #[arg(long)]
        result: Option<PathBuf>,
    },
    /// Entropy trace of a finished VQE run.
    Entropy {
        /// `result.json` of the VQE run.
        #[arg(long)]
        result: PathBuf,
        /// Directory for `entropy.csv` (default: next to the result).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a set file against the exact top-k pairs.
    Score {
        #[command(flatten)]
        run: RunArgs,
        /// Set file (`σA σB [λ]` per line).
        #[arg(long)]
        set: PathBuf,
    },
}

fn experiment(args: &RunArgs) -> schmidt_forge::Result<Experiment> {
    let mut cfg = ExperimentConfig::load(&args.config).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read {}: {io}", args.config.display())),
        other => other,
    })?;
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &args.out {
        cfg = cfg.with_output_dir(out);
    }
    Experiment::new(cfg)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let start = Instant::now();
    let code = match cli.command {
        Command::Select(args) => {
            let exp = experiment(&args)?;
            let r = cmd_select(&exp)?;
            println!(
                "selection: {:?} after {} iterations, subspace energy {}",
                r.selection.termination, r.selection.iterations, r.selection.subspace_energy
            );
            if let Some(s) = &r.score {
                println!("hits {}/{} (strict {}/{})", s.hits, s.k, s.strict_hits, s.k);
            }
            println!("wrote {}", exp.config.outputs.dir.display());
            match r.selection.termination {
                Termination::Converged => 0,
                Termination::MaxIterations => EXIT_MAX_ITERS,
            }
        }
        Command::Vqe(args) => {
            let exp = experiment(&args)?;
            let r = cmd_vqe(&exp)?;
            println!("final energy {}", r.final_energy);
            match (r.exact_energy, r.final_delta) {
                (Some(e0), Some(d)) => println!("exact {e0}, delta {d:.3e}"),
                _ => println!("delta not available (exact oracle disabled for this model)"),
            }
            if let Some(b) = &r.baseline {
                println!(
                    "random baseline over {} sets: energy {} ± {}",
                    b.energies.len(),
                    b.mean_energy,
                    b.std_energy
                );
            }
            println!("wrote {}", exp.config.outputs.dir.display());
            0
        }
        Command::Exact(args) => {
            let exp = experiment(&args)?;
            let r = cmd_exact(&exp)?;
            println!("ground energy {} (residual {:.1e}), entropy {}", r.energy, r.residual, r.entropy);
            for (k, w) in &r.truncated_weights {
                println!("top-{k} Schmidt weight {w:.6}");
            }
            0
        }
        Command::Correlators { run, result } => {
            let exp = experiment(&run)?;
            let path = result.unwrap_or_else(|| exp.config.outputs.dir.join(RESULT_FILE));
            let res = VqeResult::load(&path).with_context(|| format!("reading {}", path.display()))?;
            let rows = cmd_correlators(&exp, &res)?;
            let worst = rows.iter().filter_map(|r| r.abs_error).fold(0.0, f64::max);
            println!("{} correlators, largest abs error {worst:.3e}", rows.len());
            0
        }
        Command::Entropy { result, out } => {
            let res = VqeResult::load(&result).with_context(|| format!("reading {}", result.display()))?;
            let dir = out.unwrap_or_else(|| result.parent().map(PathBuf::from).unwrap_or_default());
            let rows = cmd_entropy(&res, &dir)?;
            if let Some((epoch, s)) = rows.last() {
                println!("entropy at epoch {epoch}: {s}");
            }
            0
        }
        Command::Score { run, set } => {
            let exp = experiment(&run)?;
            let r = cmd_score(&exp, &set)?;
            println!(
                "hits {}/{} (strict {}/{}), exact top-{} weight {:.6}",
                r.score.hits, r.score.k, r.score.strict_hits, r.score.k, r.score.k, r.score.exact_truncated_weight
            );
            0
        }
    };
    eprintln!("elapsed {:.2}s", start.elapsed().as_secs_f64());
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = matches!(
                e.downcast_ref::<Error>(),
                Some(Error::Config(_) | Error::Parse { .. } | Error::InvalidInput(_))
            );
            ExitCode::from(if config_error { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}
