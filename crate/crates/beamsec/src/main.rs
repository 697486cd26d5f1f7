use std::path::PathBuf;
use std::process::ExitCode;

use beamsec::config::Format;
use beamsec::{RunError, ScenarioConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "beamsec", version, about = "Beam-domain secure transmission scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Power allocation at every SNR point.
    Solve(Common),
    /// Monte-Carlo rates against the deterministic bound over the SNR grid.
    Sweep(Common),
    /// Convergence traces of the solver loops.
    Convergence(Common),
    /// Analytical property suites; exit code 4 on any failure.
    Verify(Common),
    /// Per-iteration solver time over a (K, M) grid.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides outputs.dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides outputs.format.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Common {
    fn load(&self) -> Result<(ScenarioConfig, usize), RunError> {
        let mut cfg = ScenarioConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.out_dir {
            cfg.outputs.dir = d.clone();
        }
        if let Some(f) = self.format {
            cfg.outputs.format = f;
        }
        let workers = match self.workers {
            Some(0) => return Err(RunError::Config("--workers: must be at least 1".into())),
            Some(w) => w,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        Ok((cfg, workers))
    }
}

fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Solve(c) => {
            let (cfg, w) = c.load()?;
            beamsec::cmd_solve(&cfg, w)
        }
        Command::Sweep(c) => {
            let (cfg, w) = c.load()?;
            beamsec::cmd_sweep(&cfg, w)
        }
        Command::Convergence(c) => {
            let (cfg, w) = c.load()?;
            beamsec::cmd_convergence(&cfg, w)
        }
        Command::Verify(c) => {
            let (cfg, w) = c.load()?;
            let report = beamsec::cmd_verify(&cfg, w)?;
            for s in &report.suites {
                println!("{}: {} ({})", s.name, if s.passed { "pass" } else { "FAIL" }, s.summary);
            }
            Ok(())
        }
        Command::Bench(c) => {
            let (cfg, w) = c.load()?;
            let s = beamsec::cmd_bench(&cfg, w)?;
            if let Some(slope) = s.slope {
                println!("per-iteration time slope vs KM: {slope:.3}");
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
            eprintln!("beamsec: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
