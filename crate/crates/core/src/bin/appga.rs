use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use appga::experiment::{compare_report, image_metric_tables, load_traces, run_experiment, write_report};
use appga::solvers::{momentum_condition_check, GnSchedule, Momentum};
use appga::Error;

#[derive(Parser)]
#[command(name = "appga", version, about = "2D PET reconstruction experiments")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "APPGA_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, reconstruct and write every artifact for one config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `[output] dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Noise seed (overrides `[noise] seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tabulate traces from experiment directories or trace CSVs.
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Check the momentum condition for `t_k = a k^ω + b`.
    CheckSchedule {
        #[arg(long)]
        omega: f64,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = 10_000)]
        kmax: u64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parameter(_) | Error::Schedule(_) | Error::Spec(_) | Error::Format { .. } => 2,
        Error::NonFinite { .. } | Error::Domain(_) | Error::PowerIteration { .. } | Error::Shape(_) => 3,
        Error::Io(_) => 1,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let (dir, outcome) = run_experiment(&config, out.as_deref(), seed)?;
            for r in &outcome.runs {
                println!(
                    "{:<20} phi {:.10e}  re {:.3e}",
                    r.spec.label,
                    r.trace.last().phi,
                    r.trace.last().re
                );
            }
            println!("wrote {}", dir.display());
        }
        Command::Report { paths, out } => {
            let (traces, reference_phi) = load_traces(&paths)?;
            let mut report = compare_report(&traces, reference_phi)?;
            report.tables.extend(image_metric_tables(&paths)?);
            write_report(&report, &out)?;
            for f in &report.findings {
                let below = f.first_below_ppga.map_or("-".to_string(), |k| k.to_string());
                println!("{:<20} final NOFV {:.3e}  below PPGA from k = {below}", f.label, f.final_nofv);
            }
            println!("wrote {}", out.display());
        }
        Command::CheckSchedule { omega, a, b, kmax } => {
            let schedule = GnSchedule::new(a, b, omega)?;
            let report = momentum_condition_check(&Momentum::Gn(schedule), kmax)?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Config(format!("cannot serialise report: {e}")))?;
            println!("{json}");
            if !report.all_hold {
                return Err(Error::Schedule("the momentum condition does not hold".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
