#![allow(clippy::neg_cmp_op_on_partial_ord)]

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use fracfreq::runner::{acceptance, parse_config, run_cases, write_artifacts, CaseConfig, Stage};
use fracfreq::Error;

#[derive(Parser)]
#[command(
    name = "fracfreq",
    version,
    about = "Frequency analysis for fractional Hardy-Schrodinger problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Case file; repeat to run several cases.
    #[arg(long = "config", global = true)]
    configs: Vec<PathBuf>,
    /// Output directory; each case writes into OUT/<case id>.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of cases run in parallel.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Angular eigenvalues only.
    Spectrum,
    /// Spectrum and the extension solve.
    Solve,
    /// Frequency function, exponent classification and blow-up.
    Almgren,
    /// Mode-by-mode solution and the beta coefficients.
    Fourier,
    /// Functional inequalities on the solved field.
    Inequalities,
    /// Run the acceptance catalog.
    Accept,
}

fn load(paths: &[PathBuf], stage: Stage) -> Result<Vec<CaseConfig>, Error> {
    if paths.is_empty() {
        return Err(Error::Config(vec!["no --config given".into()]));
    }
    let mut out = Vec::new();
    let mut problems = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(p)?;
        match parse_config(&text) {
            Ok(mut c) => {
                c.run.pipeline = vec![stage];
                out.push(c);
            }
            Err(Error::Config(v)) => {
                problems.extend(v.into_iter().map(|m| format!("{}: {m}", p.display())))
            }
            Err(e) => return Err(e),
        }
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(Error::Config(problems))
    }
}

fn accept(out: Option<&PathBuf>) -> ExitCode {
    let outcomes = acceptance::run_all();
    for o in &outcomes {
        println!("{o}");
    }
    if let Some(dir) = out {
        for run in acceptance::catalog_runs().iter().flatten() {
            if let Err(e) = write_artifacts(run, &dir.join(&run.config.id)) {
                eprintln!("{}: {e}", run.config.id);
                return ExitCode::from(2);
            }
        }
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!(
        "{} of {} criteria passed",
        outcomes.len() - failed,
        outcomes.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stage = match cli.command {
        Command::Accept => return accept(cli.out.as_ref()),
        Command::Spectrum => Stage::Spectrum,
        Command::Solve => Stage::Solve,
        Command::Almgren => Stage::Almgren,
        Command::Fourier => Stage::Fourier,
        Command::Inequalities => Stage::Inequalities,
    };
    let configs = match load(&cli.configs, stage) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let mut worst = 0;
    for (c, r) in configs
        .iter()
        .zip(run_cases(&configs, cli.out.as_deref(), cli.jobs))
    {
        match r {
            Ok(s) => {
                let mut line = format!("{}: {} in {:.2} s", s.case_id, stage, s.wall_time_s);
                if let Some(a) = &s.almgren {
                    line += &format!(
                        ", gamma_hat = {:.6}, k0 = {}, mu_k0 = {:.6}",
                        a.gamma_hat, a.classification.k0, a.classification.mu_k0
                    );
                }
                if let Some(i) = &s.inequalities {
                    line += &format!(
                        ", inequalities {}/{} passed",
                        i.passed,
                        i.checked - i.report_only
                    );
                }
                if let Some(why) = &s.rejection {
                    line += &format!(", rejected: {why}");
                }
                println!("{line}");
            }
            Err(e) => {
                eprintln!("{}: {e}", c.id);
                worst = worst.max(e.exit_code());
            }
        }
    }
    ExitCode::from(worst as u8)
}
