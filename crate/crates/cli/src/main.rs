use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use latwalk_cli::{export_kernel, list_experiments, run, Overrides};

#[derive(Parser)]
#[command(name = "latwalk", version, about = "Spectral multiplier experiments for the random walk on Z^n")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run { config: PathBuf },
    /// List the registered experiments.
    List,
    /// Write the kernel of A^k as CSV.
    ExportKernel {
        #[arg(long)]
        n: usize,
        #[arg(long = "M")]
        m: usize,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if cli.workers == Some(0) {
        eprintln!("error: --workers must be at least 1");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::List => {
            print!("{}", list_experiments());
            return ExitCode::SUCCESS;
        }
        Command::ExportKernel { n, m, k, out } => export_kernel(n, m, k, &out).map(|_| true),
        Command::Run { config } => {
            let overrides = Overrides { seed: cli.seed, out_dir: cli.out_dir, workers: cli.workers };
            run(&config, &overrides).map(|(report, dir)| {
                for g in &report.gates {
                    println!("{} {}: {:?} (target {})", if g.pass { "PASS" } else { "FAIL" }, g.name, g.value, g.target);
                }
                println!("{} -> {}", report.experiment, dir.display());
                report.pass
            })
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
