use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fedcross_core::data::io::write_federation;
use fedcross_core::experiment::{run_comparison, run_epoch_sweep, run_eq4, run_landscape, ExperimentPlan};
use fedcross_core::Error;

#[derive(Parser)]
#[command(name = "fedcross", version, about = "Federated segmentation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic federation and write it as CSV.
    GenerateData(Common),
    /// Train and evaluate every configured strategy.
    Run(Common),
    /// Local-epoch sweep with degradation statistics.
    Sweep(Common),
    /// Decompose FedAvg rounds into their unrolled update terms.
    AnalyzeEq4(Common),
    /// Loss along the segment between two locally trained models.
    Landscape(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment plan; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces the plan's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = rayon default).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl Common {
    fn plan(&self) -> fedcross_core::Result<ExperimentPlan> {
        let mut plan = match &self.config {
            Some(path) => ExperimentPlan::load(path)?,
            None => ExperimentPlan::default(),
        };
        if let Some(seed) = self.seed {
            plan.training.seeds = vec![seed];
        }
        if let Some(out) = &self.out {
            plan.output.dir = out.clone();
        }
        Ok(plan)
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Toml(_) => 2,
        Error::Numerical(_) => 3,
        _ => 1,
    }
}

fn generate(plan: &ExperimentPlan, dir: &Path) -> fedcross_core::Result<()> {
    std::fs::create_dir_all(dir)?;
    for &seed in &plan.training.seeds {
        let federation = plan.federation(seed)?;
        let path = dir.join(format!("federation_seed{seed}.csv"));
        write_federation(&federation, BufWriter::new(File::create(&path)?))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn execute(command: &Command) -> fedcross_core::Result<()> {
    let common = match command {
        Command::GenerateData(c)
        | Command::Run(c)
        | Command::Sweep(c)
        | Command::AnalyzeEq4(c)
        | Command::Landscape(c) => c,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))?;
    let plan = common.plan()?;
    let dir = plan.output.dir.clone();
    log::info!("seeds {:?}, writing to {}", plan.training.seeds, dir.display());
    match command {
        Command::GenerateData(_) => generate(&plan, &dir)?,
        Command::Run(_) => {
            let outcome = run_comparison(&plan)?;
            for cell in &outcome.cells {
                println!("seed {:>4}  {:<13} global DSC {:.4}", cell.seed, cell.report.method, cell.report.global_dsc);
            }
        }
        Command::Sweep(_) => {
            let outcome = run_epoch_sweep(&plan)?;
            for d in &outcome.degradation {
                println!("seed {:>4}  {:<9} DSC(E={}) - DSC(E={}) = {:.4}", d.seed, d.strategy, d.e_first, d.e_last, d.delta);
            }
        }
        Command::AnalyzeEq4(_) => {
            for &seed in &plan.training.seeds {
                let out = dir.join(format!("seed{seed}"));
                let rounds = run_eq4(&plan, seed, Some(&out))?;
                let worst = rounds.iter().map(|r| r.report.relative_residual()).fold(0.0, f64::max);
                let non_descent = rounds.iter().filter(|r| !r.term3_is_descent).count();
                println!(
                    "seed {seed}: {} rounds, max relative residual {worst:e}, term3 non-descent in {non_descent}",
                    rounds.len()
                );
            }
        }
        Command::Landscape(_) => {
            for &seed in &plan.training.seeds {
                let out = dir.join(format!("seed{seed}"));
                let res = run_landscape(&plan, seed, Some(&out))?;
                println!(
                    "seed {seed}: endpoints min {:.5}, midpoint {:.5}",
                    res.endpoint_min(),
                    res.midpoint()
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
