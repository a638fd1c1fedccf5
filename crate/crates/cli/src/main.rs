use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use scnse::converge::{ConvergenceReport, Study};
use scnse::ensemble::WORKERS_ENV;
use scnse::integrator::SimConfig;
use scnse::io::{parse_config, MANIFEST_FILE};
use scnse::verify::cmd_verify;
use scnse::{workflow, Error};

const EXIT_VALIDATION: u8 = 1;
const EXIT_BLOWUP: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

/// Stochastic constrained Navier-Stokes on the 2D torus.
#[derive(Parser)]
#[command(name = "scnse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Workers {
    /// Worker threads for path-parallel runs.
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one path and write its time series and final snapshot.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo moment estimates over independent paths.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        paths: usize,
        /// Moment exponents, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        p: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        workers: Workers,
    },
    /// Check the operator identities on seeded random fields.
    Verify,
    /// Time-step or Galerkin refinement study.
    #[command(group(ArgGroup::new("study").required(true).args(["dt_levels", "n_levels"])))]
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dt_levels: Option<usize>,
        #[arg(long)]
        n_levels: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        /// A manifest file or the directory holding it.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        workers: Workers,
    },
}

fn load_config(path: &Path) -> Result<SimConfig, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

fn print_converge(r: &ConvergenceReport) {
    let unit = match r.study {
        Study::Dt => "dt",
        Study::N => "n_max",
    };
    for (i, e) in r.errors.iter().enumerate() {
        let ratio = if i > 0 { format!("  ratio {:.3}", r.ratios[i - 1]) } else { String::new() };
        println!(
            "{unit} {} vs {}: sup_t |du|_H = {e:.6e}{ratio}",
            r.levels[i],
            r.levels[i + 1]
        );
    }
    println!("fitted order {:.3}", r.fitted_order);
    println!("{}", if r.pass { "PASS" } else { "FAIL" });
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = load_config(&config)?;
            let (_, traj) = workflow::simulate(&cfg, &out)?;
            let d = traj.diag.last().expect("at least one time level");
            println!("steps {}", traj.len() - 1);
            println!(
                "t = {}: |u|_H = {:.16e}  ||u||_V^2 = {:.16e}  constraint error {:.3e}",
                traj.times.last().expect("nonempty"),
                d.norms.h,
                d.norms.v_sq,
                scnse::diagnostics::constraint_error(&traj)
            );
            println!("wrote {}", out.display());
        }
        Command::Ensemble {
            config,
            paths,
            p,
            out,
            workers,
        } => {
            let cfg = load_config(&config)?;
            let (_, run, check) = workflow::ensemble(&cfg, paths, &p, workers.workers, &out)?;
            let s = &run.stats;
            println!("paths {}", s.n_paths);
            println!(
                "E||u(T)||_V^2 = {:.6e} (SE {:.2e})",
                s.mean_v_sq.last().expect("nonempty"),
                s.se_v_sq.last().expect("nonempty")
            );
            println!(
                "E int |u|_D(A)^2 dt = {:.6e} (SE {:.2e})",
                s.mean_int_da, s.se_int_da
            );
            println!(
                "moment check {}: worst margin {:.3e} ({} at t = {})",
                if check.pass { "PASS" } else { "FAIL" },
                check.worst_margin,
                check.worst_quantity,
                check.worst_t
            );
            println!("wrote {}", out.display());
        }
        Command::Verify => {
            let report = cmd_verify()?;
            for c in &report.checks {
                println!("{c}");
            }
            if !report.pass() {
                return Ok(EXIT_ACCEPTANCE);
            }
        }
        Command::Converge {
            config,
            dt_levels,
            n_levels,
            out,
        } => {
            let cfg = load_config(&config)?;
            let (study, levels) = match (dt_levels, n_levels) {
                (Some(k), _) => (Study::Dt, k),
                (None, Some(k)) => (Study::N, k),
                (None, None) => unreachable!("clap requires one study"),
            };
            let (_, report) = workflow::converge(&cfg, study, levels, &out)?;
            print_converge(&report);
            if !report.pass {
                return Ok(EXIT_ACCEPTANCE);
            }
        }
        Command::Replay {
            manifest,
            out,
            workers,
        } => {
            let path = if manifest.is_dir() {
                manifest.join(MANIFEST_FILE)
            } else {
                manifest
            };
            workflow::replay(&path, &out, workers.workers)?;
            println!("replayed {} into {}", path.display(), out.display());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Blowup { .. } => EXIT_BLOWUP,
                _ => EXIT_VALIDATION,
            })
        }
    }
}
