use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cutstokes_cli::run::write_error;
use cutstokes_cli::selftest::run_selftest;
use cutstokes_cli::study::workers_from_env;
use cutstokes_cli::{run_study, run_to_dir, write_study, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "cutstokes", version, about = "Cut finite element Stokes solver on moving domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation from a JSON config.
    Run { config: PathBuf },
    /// Run a convergence study from a JSON config with a `study` section.
    Study { config: PathBuf },
    /// Check basic invariants.
    Selftest,
}

fn report(err: &CliError, dir: Option<&PathBuf>) -> ExitCode {
    eprintln!("error: {err}");
    if let Some(dir) = dir {
        if let Err(e) = write_error(dir, err) {
            eprintln!("error: {e}");
        }
    }
    ExitCode::from(2)
}

/// Output directory named in a config that failed to load.
fn output_dir_hint(path: &PathBuf) -> Option<PathBuf> {
    let text = std::fs::read_to_string(path).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    let dir = v.get("output_dir").and_then(|d| d.as_str()).unwrap_or("out");
    Some(PathBuf::from(dir))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return report(&e, output_dir_hint(&config).as_ref()),
            };
            match run_to_dir(&cfg) {
                Ok(out) => {
                    let s = &out.stability;
                    println!(
                        "steps {} max_residual {:.2e} energy_ratio {:.3} blow_up {}",
                        out.diagnostics.len(),
                        out.max_residual,
                        s.max_detrended_ratio,
                        s.blow_up
                    );
                    if out.passed() {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("monitor failed: see {}", cfg.output_dir.join("summary.json").display());
                        ExitCode::FAILURE
                    }
                }
                Err(e) => report(&e, Some(&cfg.output_dir)),
            }
        }
        Command::Study { config } => {
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return report(&e, output_dir_hint(&config).as_ref()),
            };
            let result = workers_from_env().and_then(|w| run_study(&cfg, w)).and_then(|r| write_study(&cfg, &r).map(|f| (r, f)));
            match result {
                Ok((r, files)) => {
                    for f in files {
                        println!("wrote {}", f.display());
                    }
                    let failed = r.cells().iter().filter(|c| c.values.is_err()).count();
                    if failed > 0 {
                        eprintln!("{failed} of {} runs failed", r.cells().len());
                        ExitCode::FAILURE
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => report(&e, Some(&cfg.output_dir)),
            }
        }
        Command::Selftest => {
            let checks = run_selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
