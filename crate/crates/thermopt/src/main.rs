use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use thermopt::scenario::{parse_scenario, run, Progress};

/// Scenario runner for work-maximizing thermodynamic processes.
#[derive(Parser)]
#[command(name = "thermopt", version, about)]
struct Cli {
    /// Path to the scenario JSON document.
    scenario: PathBuf,
    /// Override the scenario's output_path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress progress lines on standard error.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let progress = Progress { quiet: cli.quiet };
    let fail_early = |msg: String| {
        eprintln!("{msg}");
        let payload = serde_json::json!({ "error": msg }).to_string();
        println!("{payload}");
        if let Some(out) = &cli.out {
            let _ = std::fs::write(out, &payload);
        }
        ExitCode::from(3)
    };
    let text = match std::fs::read_to_string(&cli.scenario) {
        Ok(t) => t,
        Err(e) => {
            return fail_early(format!(
                "cannot read scenario {}: {e}",
                cli.scenario.display()
            ))
        }
    };
    let mut scenario = match parse_scenario(&text) {
        Ok(s) => s,
        Err(e) => return fail_early(e.to_string()),
    };
    if let Some(out) = cli.out {
        scenario.output_path = out.to_string_lossy().into_owned();
    }
    match run(&scenario, &progress) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{msg}");
            let payload = serde_json::json!({ "error": msg }).to_string();
            let _ = std::fs::write(&scenario.output_path, &payload);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
