use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nck_scma::harness::{emit_csv, emit_trace, parse_snr_range, run_prepared, Experiment, ExperimentConfig};
use nck_scma::oracle::{run_suite, SUITES};
use nck_scma::Error;

#[derive(Parser)]
#[command(name = "nck-scma", version, about = "NCK-SCMA link-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an SNR sweep and write a CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Replace the configured SNR list with `start:stop:step` (dB).
        #[arg(long, value_name = "A:B:STEP", allow_hyphen_values = true)]
        snr_override: Option<String>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV (defaults to the config's `output`, else stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Also write per-iteration syndrome counts to `<out>.trace.csv`.
        #[arg(long)]
        verbose: bool,
    },
    /// Check a config and the files it references without simulating.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a brute-force reference suite.
    Oracle {
        /// One of the suite names, or `all`.
        name: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_io() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn simulate(
    config: PathBuf,
    snr_override: Option<String>,
    trials: Option<u64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: usize,
    verbose: bool,
) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(r) = snr_override {
        cfg.snr_db = parse_snr_range(&r)?;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out = match out {
        Some(p) => Some(p),
        None => cfg.output.as_ref().map(|p| cfg.resolve(p)),
    };
    let exp = Experiment::prepare(cfg)?;
    let run = run_prepared(&exp, threads, verbose)?;
    match &out {
        Some(path) => {
            emit_csv(&run.metrics, &exp.config, path)?;
            log::info!("wrote {}", path.display());
            if verbose {
                let mut trace = path.clone().into_os_string();
                trace.push(".trace.csv");
                emit_trace(&run.trace, PathBuf::from(trace))?;
            }
        }
        None => print!("{}", nck_scma::harness::render_csv(&run.metrics, &exp.config)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            snr_override,
            trials,
            seed,
            out,
            threads,
            verbose,
        } => simulate(config, snr_override, trials, seed, out, threads, verbose),
        Command::Validate { config } => ExperimentConfig::load(&config).and_then(Experiment::prepare).map(|exp| {
            let c = &exp.schedule.config;
            println!(
                "ok: J = {}, R = {}, M = {}, N = {}, (K_eq, T, K_in) = ({}, {}, {}), N_R = {}, {} SNR points",
                exp.codebook.users(),
                exp.codebook.resources(),
                exp.codebook.order(),
                exp.code.len(),
                c.k_eq,
                c.packets,
                c.initial_reps,
                c.total_slots,
                exp.config.snr_db.len()
            );
        }),
        Command::Oracle { name, seed } => run_suite(&name, seed).and_then(|checks| {
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed == 0 {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{failed} of {} checks failed (suites: {})", checks.len(), SUITES.join(", "))))
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
