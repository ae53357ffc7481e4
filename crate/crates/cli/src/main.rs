use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use poro_core::harness::{run, run_reciprocity, verify, RunConfig, VerifyKind};

/// Poroelastic wave simulator: time loop, reciprocity test and property checks.
#[derive(Parser)]
#[command(name = "poro", version)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration, writing the outputs it names.
    Run {
        config: PathBuf,
        /// Override `time.n_steps`.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Run the two legs of the `[reciprocity]` block and compare them.
    Reciprocity {
        config: PathBuf,
        /// Largest relative L2 misfit that counts as a pass.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Property check: adjointness, energy, contractivity, convergence,
    /// strang_symmetry, or all.
    Verify { kind: String, config: PathBuf },
}

fn load(path: &Path) -> Result<RunConfig, String> {
    RunConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn execute(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Run { config, steps } => {
            let mut cfg = load(&config)?;
            if let Some(n) = steps {
                cfg.time.n_steps = n;
            }
            let out = run(&cfg).map_err(|e| e.to_string())?;
            let last = out.energy.last().map_or(0.0, |e| e.2);
            println!(
                "{} steps, dt = {:.6e} s, cfl = {:.3}, final energy = {last:.6e} J/m",
                out.traces.n_steps(),
                out.dt,
                out.cfl
            );
            if let Some(p) = &cfg.output.trace_path {
                println!("traces: {}", p.display());
            }
            if !out.snapshots.is_empty() {
                println!("snapshots: {}", out.snapshots.len());
            }
            Ok(true)
        }
        Command::Reciprocity { config, tol } => {
            let cfg = load(&config)?;
            let r = run_reciprocity(&cfg).map_err(|e| e.to_string())?;
            let passed = r.misfit < tol;
            println!("{} {}", if passed { "PASS" } else { "FAIL" }, r.summary());
            Ok(passed)
        }
        Command::Verify { kind, config } => {
            let cfg = load(&config)?;
            let kinds = if kind == "all" {
                VerifyKind::ALL.to_vec()
            } else {
                vec![kind.parse::<VerifyKind>().map_err(|e| e.to_string())?]
            };
            let mut passed = true;
            for k in kinds {
                let r = verify(k, &cfg).map_err(|e| e.to_string())?;
                println!("{r}");
                passed &= r.passed();
            }
            Ok(passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
