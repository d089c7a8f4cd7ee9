use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tcs_core::runner::{self, error_exit_code, Status};
use tcs_core::scenario::{Scenario, DEFAULTS_TOML};
use tcs_core::Error;

#[derive(Parser, Debug)]
#[command(name = "tcs", version, about = "Trajectory-coherent Gaussian states and the small-time obstruction")]
struct Cli {
    /// Print the documented default scenario and exit.
    #[arg(long, global = true)]
    print_defaults: bool,

    /// Worker threads for parallel trials (default: all cores).
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the scenario.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides `seed` from the scenario.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classical, Riccati, packet and reference PDE for one control.
    Propagate(RunArgs),
    /// Distance to the Gaussian-profile set, T**, and the control battery.
    Obstruct(RunArgs),
    /// Print C_N, C_* and T* as JSON.
    Constants {
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        /// Bound on the operator norm of the Hessian of V.
        #[arg(long, default_value_t = 1.0)]
        hess_sup: f64,
        /// Take dim and hess_sup from the [potential] and b from [initial].
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
    },
    /// Invariant suite on a scenario.
    Check(RunArgs),
}

fn load(args: &RunArgs) -> Result<(tcs_core::scenario::ResolvedScenario, PathBuf), Error> {
    let mut sc = match &args.config {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    if let Some(s) = args.seed {
        sc.seed = s;
    }
    if let Some(o) = &args.out {
        sc.output_dir = o.clone();
    }
    let out = sc.output_dir.clone();
    Ok((sc.resolve()?, out))
}

fn run(cmd: Command) -> Result<Status, Error> {
    match cmd {
        Command::Propagate(a) => {
            let (rs, out) = load(&a)?;
            let s = runner::cmd_propagate(&rs, &out)?;
            println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
            Ok(s.status())
        }
        Command::Obstruct(a) => {
            let (rs, out) = load(&a)?;
            let r = runner::cmd_obstruct(&rs, &out)?;
            let worst = r.trials.iter().map(|t| t.min_distance).fold(f64::INFINITY, f64::min);
            println!(
                "delta0 = {:.9}  delta = {:.9}  T* = {:.9}  T** = {:.9}\nclosest approach over {} trials = {:.9}\nverdict = {}  bounds_ok = {}",
                r.delta0,
                r.delta,
                r.t_star,
                r.t_double_star,
                r.trials.len(),
                worst,
                r.verdict,
                r.bounds_ok
            );
            Ok(runner::obstruct_status(&r))
        }
        Command::Constants { dim, b, hess_sup, config } => {
            let c = match config {
                Some(p) => {
                    let rs = Scenario::load(&p)?.resolve()?;
                    runner::constants(rs.potential.dim(), rs.b, rs.potential.hess_sup())?
                }
                None => runner::constants(dim, b, hess_sup)?,
            };
            println!("{}", serde_json::to_string_pretty(&c).expect("constants serialize"));
            Ok(Status::Ok)
        }
        Command::Check(a) => {
            let (rs, out) = load(&a)?;
            let r = runner::cmd_check(&rs, &out)?;
            for c in &r.checks {
                println!(
                    "{:<28} {:>12.3e} <= {:<8.1e} {}",
                    c.name,
                    c.value,
                    c.tolerance,
                    if c.pass { "ok" } else { "FAIL" }
                );
            }
            Ok(r.status())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_defaults {
        print!("{DEFAULTS_TOML}");
        return ExitCode::SUCCESS;
    }
    let Some(cmd) = cli.command else {
        eprintln!("tcs: no subcommand given (try --help)");
        return ExitCode::from(3);
    };
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("tcs: cannot configure {k} threads: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cmd) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("tcs: {e}");
            ExitCode::from(error_exit_code(&e))
        }
    }
}
