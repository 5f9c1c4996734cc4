//! `ringcat`: command line front end for the three-mode microring simulator.
//!
//! Exit codes: 0 success, 2 configuration/input error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ringcat_core::io;
use ringcat_core::scenario::{
    compare_runs, emit_artifacts, run_scenario, scan_extremum, ScenarioConfig,
};
use ringcat_core::states::{partial_trace_pure, to_density, DensityMatrix, StateLabel};
use ringcat_core::wigner::{linspace, wigner_grid};
use ringcat_core::{Result, SimError};

/// Largest single-mode density matrix the `wigner` subcommand accepts.
const WIGNER_DIM_LIMIT: usize = 256;

#[derive(Parser)]
#[command(name = "ringcat", version, about = "Three-mode chi^(3) microring simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write all artifacts to an output directory.
    Run {
        /// Scenario configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the master RNG seed of the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of trajectories of the configuration.
        #[arg(long)]
        trajectories: Option<usize>,
    },
    /// Propagate a scenario and report only the extremal time tau*.
    Scan {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate the Wigner function of a stored state on a grid.
    Wigner {
        /// State file: a pure-state or density-matrix document.
        #[arg(long)]
        state: PathBuf,
        /// Mode to reduce to (1-based) when the state spans several modes.
        #[arg(long, default_value_t = 3)]
        mode: usize,
        /// Grid as xmin,xmax,nx,pmin,pmax,np.
        #[arg(long, default_value = "-8,8,201,-8,8,201", allow_hyphen_values = true)]
        grid: String,
        /// Output file (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two run directories: mode-wise fidelities at tau*.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Optional JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_grid(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(SimError::InvalidConfig(
            "grid must be xmin,xmax,nx,pmin,pmax,np".into(),
        ));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| SimError::InvalidConfig(format!("bad grid number {s:?}")))
    };
    let count = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| SimError::InvalidConfig(format!("bad grid count {s:?}")))
    };
    let (xmin, xmax, nx) = (num(parts[0])?, num(parts[1])?, count(parts[2])?);
    let (pmin, pmax, np) = (num(parts[3])?, num(parts[4])?, count(parts[5])?);
    if nx < 2 || np < 2 || xmax <= xmin || pmax <= pmin {
        return Err(SimError::InvalidConfig("degenerate Wigner grid".into()));
    }
    Ok((linspace(xmin, xmax, nx), linspace(pmin, pmax, np)))
}

/// Loads a state file as a single-mode density matrix, reducing pure
/// multimode states to `mode` (1-based).
fn load_mode_density(path: &PathBuf, mode: usize) -> Result<DensityMatrix> {
    let rho = match io::load_state(path) {
        Ok(psi) => {
            let n_modes = psi.space().mode_count();
            if n_modes == 1 {
                to_density(&psi)
            } else {
                if mode == 0 || mode > n_modes {
                    return Err(SimError::InvalidMode(mode));
                }
                partial_trace_pure(&psi, &[mode - 1])?
            }
        }
        Err(_) => {
            let rho = io::load_density(path)?;
            match &rho.label {
                StateLabel::Modes { modes, .. } if modes.len() == 1 => rho,
                _ => {
                    return Err(SimError::InvalidConfig(
                        "density file must hold a single-mode state".into(),
                    ))
                }
            }
        }
    };
    if rho.dim() > WIGNER_DIM_LIMIT {
        return Err(SimError::DenseLimit {
            dim: rho.dim(),
            limit: WIGNER_DIM_LIMIT,
        });
    }
    Ok(rho)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| io::fmt_g9(x)).unwrap_or_else(|| "undefined".into())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            trajectories,
        } => {
            let mut cfg = ScenarioConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(n) = trajectories {
                cfg.n_traj = n;
            }
            let run = run_scenario(&cfg)?;
            emit_artifacts(&run, &out)?;
            let s = &run.summary;
            println!("config_hash {}", s.config_hash);
            println!("solver {}", s.solver_used);
            match &s.tau_star {
                Some(star) => {
                    println!("tau_star {}", io::fmt_g9(star.n3_first_max));
                    if let Some(obs) = &s.at_tau_star {
                        println!(
                            "n1 {} n3 {}",
                            io::fmt_g9(obs.n[0]),
                            io::fmt_g9(obs.n[2])
                        );
                        println!("ff1 {} ff3 {}", fmt_opt(obs.ff[0]), fmt_opt(obs.ff[2]));
                        println!("k {}", fmt_opt(obs.k));
                    }
                }
                None => println!("tau_star none"),
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Scan { config } => {
            let cfg = ScenarioConfig::from_file(&config)?;
            let star = scan_extremum(&cfg)?;
            println!("tau_star_n3_max {}", io::fmt_g9(star.n3_first_max));
            println!("tau_star_n1_min {}", io::fmt_g9(star.n1_first_min));
            println!("grid_tau {}", io::fmt_g9(star.grid_tau));
            Ok(())
        }
        Command::Wigner {
            state,
            mode,
            grid,
            out,
        } => {
            let (xs, ps) = parse_grid(&grid)?;
            let rho = load_mode_density(&state, mode)?;
            let g = wigner_grid(&rho, &xs, &ps)?;
            match out {
                Some(path) => {
                    io::write_wigner(&path, &[], &g)?;
                    println!("wrote {}", path.display());
                }
                None => {
                    println!("# x p w");
                    for (ix, &x) in g.xs.iter().enumerate() {
                        for (ip, &p) in g.ps.iter().enumerate() {
                            println!(
                                "{} {} {}",
                                io::fmt_g9(x),
                                io::fmt_g9(p),
                                io::fmt_g9(g.value(ix, ip))
                            );
                        }
                    }
                }
            }
            let (min, mx, mp) = g.min();
            eprintln!(
                "min_w {} at ({}, {})",
                io::fmt_g9(min),
                io::fmt_g9(mx),
                io::fmt_g9(mp)
            );
            Ok(())
        }
        Command::Compare { a, b, out } => {
            let report = compare_runs(&a, &b)?;
            println!(
                "tau_a {} tau_b {}",
                io::fmt_g9(report.tau_a),
                io::fmt_g9(report.tau_b)
            );
            for (m, f) in report.fidelity.iter().enumerate() {
                println!("fidelity_mode{} {}", m + 1, io::fmt_g9(*f));
            }
            if let Some(path) = out {
                io::write_json(&path, &report)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
