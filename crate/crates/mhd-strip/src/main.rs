//! Command-line entry point: single runs, viscosity sweeps, the
//! verification suite and the manufactured-solution convergence study.
//! Exit codes: 0 success, 1 validation failure, 2 solver abort.

use std::io::Read;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mhd_strip::checks;
use mhd_strip::config::{parse_config, to_canonical_json, Config};
use mhd_strip::dynamics::SolverKind;
use mhd_strip::experiments::{self, RunError};

#[derive(Parser)]
#[command(
    name = "mhd-strip",
    about = "2D compressible non-resistive MHD on a wall-bounded strip: viscous/ideal solvers, conormal norms, viscosity sweeps"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one run (viscous with --epsilon, or --ideal).
    Run {
        /// Config file path, or '-' for stdin.
        #[arg(long)]
        config: String,
        /// Viscosity scale in (0, 1].
        #[arg(long)]
        epsilon: Option<f64>,
        /// Run the ideal (epsilon = 0) system instead.
        #[arg(long, default_value_t = false)]
        ideal: bool,
    },
    /// Run the ideal solver plus every epsilon in the config's sweep list.
    Sweep {
        #[arg(long)]
        config: String,
    },
    /// Commutator tables, inequality probes and operator order checks.
    Verify {
        #[arg(long)]
        config: String,
    },
    /// Manufactured-solution convergence study over doubling grids.
    Mms {
        #[arg(long)]
        config: String,
        /// Number of grid levels (32^2, 64^2, ...).
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Emit the canonical reference configuration (all defaults).
    ReferenceConfig,
}

fn load_config(path: &str) -> Result<Config, String> {
    let text = if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| format!("reading stdin: {e}"))?;
        buf
    } else {
        std::fs::read_to_string(path).map_err(|e| format!("reading {path}: {e}"))?
    };
    parse_config(&text).map_err(|e| e.to_string())
}

fn run_exit(err: &RunError) -> ExitCode {
    match err {
        RunError::Solver { .. } => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::ReferenceConfig => {
            print!("{}", to_canonical_json(&Config::default()));
            ExitCode::SUCCESS
        }
        Cmd::Run {
            config,
            epsilon,
            ideal,
        } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(1);
                }
            };
            let eps = match (epsilon, ideal) {
                (Some(_), true) | (None, false) => {
                    eprintln!("run needs exactly one of --epsilon or --ideal");
                    return ExitCode::from(1);
                }
                (Some(e), false) => {
                    if !(e > 0.0 && e <= 1.0) {
                        eprintln!("--epsilon must lie in (0, 1], got {e}");
                        return ExitCode::from(1);
                    }
                    Some(e)
                }
                (None, true) => None,
            };
            match experiments::run_and_write(&cfg, eps, Path::new(&cfg.output.dir)) {
                Ok(run) => {
                    println!(
                        "{}: {} report rows, max N_m = {:.6e}, wall drift = {:.3e}",
                        run.label,
                        run.norm_rows.len(),
                        run.nm_max,
                        run.wall_drift_max
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    run_exit(&e)
                }
            }
        }
        Cmd::Sweep { config } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(1);
                }
            };
            match experiments::run_sweep(&cfg, Path::new(&cfg.output.dir)) {
                Ok(result) => {
                    let mut stdout = std::io::stdout();
                    experiments::print_sweep_summary(&mut stdout, &result).ok();
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("sweep failed: {e}");
                    run_exit(&e)
                }
            }
        }
        Cmd::Verify { config } => {
            if let Err(e) = load_config(&config) {
                eprintln!("config error: {e}");
                return ExitCode::from(1);
            }
            let mut rows = Vec::new();
            rows.extend(checks::operator_order_checks());
            rows.extend(checks::commutator_checks());
            rows.extend(checks::inequality_probe_checks());
            let mut all_pass = true;
            println!("{:<44} {:>14} {:>20} result", "check", "value", "window");
            for row in &rows {
                let ok = row.pass();
                all_pass &= ok;
                println!(
                    "{:<44} {:>14.6e} [{:>8.2e}, {:>7.2e}] {}",
                    row.name,
                    row.value,
                    row.lo,
                    row.hi,
                    if ok { "pass" } else { "FAIL" }
                );
            }
            if all_pass {
                println!("all {} checks passed", rows.len());
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Cmd::Mms { config, levels } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(1);
                }
            };
            if levels < 2 {
                eprintln!("--levels must be at least 2");
                return ExitCode::from(1);
            }
            let rows = checks::mms_study(&cfg, levels, 1e-2, 0.2);
            let mut all_pass = true;
            println!("{:<10} {:<6} {:>12} {:>10} result", "solver", "field", "grids", "order");
            for row in &rows {
                let ok = row.order >= 1.8 && row.order <= 2.3;
                all_pass &= ok;
                let solver = match row.solver {
                    SolverKind::Viscous => "viscous",
                    SolverKind::Ideal => "ideal",
                };
                println!(
                    "{:<10} {:<6} {:>5}->{:<5} {:>10.3} {}",
                    solver,
                    row.field,
                    row.coarse_n,
                    row.coarse_n * 2,
                    row.order,
                    if ok { "pass" } else { "FAIL" }
                );
            }
            if all_pass {
                println!("all observed orders within [1.8, 2.3]");
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
