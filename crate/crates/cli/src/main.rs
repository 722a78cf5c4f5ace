use std::path::PathBuf;
use std::process::ExitCode;

use avclbf_cli::sweep::{default_out, sweep_command, Axis};
use avclbf_cli::verify::verify;
use avclbf_cli::{format_admissibility, parse_scenario, run_command, RunOptions, RunReport, EXIT_ERROR};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "avclbf", version, about = "Run reach-avoid unicycle experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run {
        scenario: PathBuf,
        /// Output directory (default: out/<scenario id>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the control interval in seconds.
        #[arg(long)]
        dt: Option<f64>,
        /// Override the horizon in seconds.
        #[arg(long)]
        tmax: Option<f64>,
        /// Validate and print the admissibility report only.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run every combination of the given axis values.
    Sweep {
        scenario: PathBuf,
        /// FIELD=v1,v2,... with a dotted field path, e.g. targets.0.radius_m=0.5,1,1.5
        #[arg(long = "axis")]
        axes: Vec<Axis>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a trajectory CSV against its scenario.
    Verify { trajectory: PathBuf, scenario: PathBuf },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            dt,
            tmax,
            dry_run,
        } => run_command(
            &scenario,
            &RunOptions {
                out,
                dt,
                t_max: tmax,
                dry_run,
            },
        )
        .map(|report| {
            match &report {
                RunReport::DryRun(a) => {
                    let id = scenario.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
                    print!("{}", format_admissibility(id, a));
                }
                RunReport::Completed { log, artifacts } => {
                    println!("{}", serde_json::to_string_pretty(&log.summary).unwrap_or_default());
                    for d in &log.diagnostics {
                        eprintln!("note: {d}");
                    }
                    for p in artifacts {
                        eprintln!("wrote {}", p.display());
                    }
                }
            }
            report.exit_code()
        }),
        Command::Sweep { scenario, axes, out } => {
            let out = out.unwrap_or_else(|| default_out(&scenario));
            sweep_command(&scenario, &axes, Some(&out)).map(|rows| {
                for r in &rows {
                    match &r.error {
                        Some(e) => println!("cell {} [{}]: error: {e}", r.cell, r.labels.join(", ")),
                        None => println!(
                            "cell {} [{}]: {} t_r = {}",
                            r.cell,
                            r.labels.join(", "),
                            r.status,
                            r.t_r_s.map_or("-".into(), |t| format!("{t:.3} s"))
                        ),
                    }
                }
                eprintln!("wrote {}", out.join("sweep.csv").display());
                0
            })
        }
        Command::Verify { trajectory, scenario } => parse_scenario(&scenario)
            .map_err(|e| avclbf_cli::describe(&scenario, e))
            .and_then(|cfg| verify(&trajectory, &cfg))
            .map(|report| {
                print!("{}", report.render());
                if report.ok() {
                    0
                } else {
                    EXIT_ERROR
                }
            }),
    };
    match result {
        Ok(c) => code(c),
        Err(e) => {
            eprintln!("error: {e:#}");
            code(EXIT_ERROR)
        }
    }
}
