use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use csf_lab::acceptance::{self, DEFAULT_SEED};
use csf_lab::experiment::{exit_code, load_config, run};

#[derive(Parser)]
#[command(name = "csf-lab", version, about = "Curve shortening flow experiments near great circles on the sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding `out_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the acceptance suite, or selected criteria.
    Check {
        /// Criterion id (1-13); repeat to select several.
        #[arg(long = "criterion", value_parser = clap::value_parser!(u64).range(1..=13))]
        criteria: Vec<u64>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
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
    match cli.command {
        Command::Run { config, out, seed } => {
            let result = load_config(&config, out, seed).and_then(|cfg| run(&cfg));
            match &result {
                Ok(summary) => {
                    println!("{}", serde_json::to_string_pretty(summary).expect("summary serializes"));
                    for f in summary.flags.iter().filter(|f| !f.passed) {
                        eprintln!("invariant failed: {} (criterion {})", f.name, f.criterion);
                    }
                }
                Err(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code(&result) as u8)
        }
        Command::Check { criteria, seed } => {
            let ids: Vec<usize> = if criteria.is_empty() {
                (1..=13).collect()
            } else {
                criteria.into_iter().map(|c| c as usize).collect()
            };
            let mut failed = 0;
            for id in ids {
                let r = acceptance::run(id, seed);
                let tag = if r.passed { "PASS" } else { "FAIL" };
                println!("[{tag}] AC{:02} {}: {} ({:.1}s)", r.id, r.name, r.detail, r.seconds);
                failed += usize::from(!r.passed);
            }
            ExitCode::from(u8::from(failed > 0))
        }
    }
}
