use std::path::PathBuf;
use std::process::ExitCode;

use alm_cli::{load, run_experiment, run_report, run_scenarios, run_solve, Overrides};
use alm_core::evaluation::TestKind;
use alm_core::formulations::ModelKind;
use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "alm", version, about = "Pension fund asset-liability experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration file and report every problem.
    Validate(Common),
    /// Estimate regimes and write the reduced scenario set.
    Scenarios(Common),
    /// Solve one model at one ψ.
    Solve(Common),
    /// Run the ψ sweep and the out-of-sample evaluation.
    Experiment(Common),
    /// Recompute the evaluation tables of a finished run.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        test: Option<TestArg>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated: deterministic, sp, mixture, box, wasserstein.
    #[arg(long, value_delimiter = ',', value_parser = parse_model)]
    models: Option<Vec<ModelKind>>,
    #[arg(long, value_delimiter = ',')]
    psi: Option<Vec<f64>>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    test: Option<TestArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    Welch,
    Pooled,
}

impl From<TestArg> for TestKind {
    fn from(t: TestArg) -> Self {
        match t {
            TestArg::Welch => TestKind::Welch,
            TestArg::Pooled => TestKind::Pooled,
        }
    }
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    ModelKind::parse(s).ok_or_else(|| format!("unknown model `{s}`"))
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            models: self.models.clone(),
            psi: self.psi.clone(),
            jobs: self.jobs,
            test: self.test.map(Into::into),
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate(c) => {
            let l = load(&c.config, &c.overrides())?;
            println!(
                "ok: {} models, {} ψ values, horizon {}",
                l.config.models.len(),
                l.config.psi.len(),
                l.config.fund.horizon
            );
            Ok(true)
        }
        Command::Scenarios(c) => {
            let l = load(&c.config, &c.overrides())?;
            let m = run_scenarios(&l, c.jobs)?;
            println!("wrote {} files to {}", m.artifacts.len(), l.out_dir.display());
            Ok(true)
        }
        Command::Solve(c) => {
            let l = load(&c.config, &c.overrides())?;
            let r = run_solve(&l, c.jobs)?;
            for cell in &r.cells {
                match &cell.outcome.strategy {
                    Some(s) => println!(
                        "{} ψ={}: {} average y = {:.6}",
                        cell.model.label(),
                        cell.psi,
                        cell.outcome.status,
                        s.average_contribution_rate()
                    ),
                    None => println!("{} ψ={}: {}", cell.model.label(), cell.psi, cell.outcome.status),
                }
            }
            Ok(r.ok)
        }
        Command::Experiment(c) => {
            let l = load(&c.config, &c.overrides())?;
            let r = run_experiment(&l, c.jobs)?;
            let bad = r.cells.iter().filter(|c| !c.is_conclusive()).count();
            println!(
                "{} cells solved ({} inconclusive); results in {}",
                r.cells.len(),
                bad,
                r.out_dir.display()
            );
            Ok(r.ok)
        }
        Command::Report { out, test } => {
            run_report(&out, test.map(Into::into))?;
            println!("rewrote evaluation tables in {}", out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
