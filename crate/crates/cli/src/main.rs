use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cosmolab::run::{report, resolve_out_dir, run_scenario, RunError, RunStatus, Scenario};

const EXIT_VERDICT: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "cosmolab", version, about = "Run cosmolab scenarios and summarize their manifests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario config and write its outputs and manifest.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for parallel loops.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Verify manifests and tabulate their verdicts.
    Report {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        /// Also write the table as CSV to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn run(config: &Path, out: Option<&Path>, threads: Option<usize>) -> ExitCode {
    if let Some(k) = threads {
        if k == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let scenario = match Scenario::load(config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let dir = resolve_out_dir(&scenario, config, out);
    match run_scenario(&scenario, &dir) {
        Ok(m) => {
            for v in &m.verdicts {
                println!("{:<32} {}", v.name, v.verdict);
            }
            println!("manifest: {}", dir.join(cosmolab::run::MANIFEST_NAME).display());
            if m.status == RunStatus::Ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERDICT)
            }
        }
        Err(e @ RunError::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_VERDICT)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, threads } => run(&config, out.as_deref(), threads),
        Command::Report { manifests, csv } => {
            let r = report(&manifests);
            print!("{}", r.to_text());
            if let Some(path) = csv {
                if let Err(e) = std::fs::write(&path, r.to_csv()) {
                    eprintln!("error: writing {}: {e}", path.display());
                    return ExitCode::from(EXIT_VERDICT);
                }
            }
            if r.all_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERDICT)
            }
        }
    }
}
