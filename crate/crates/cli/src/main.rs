use anyhow::Context;
use std::process::ExitCode;

use clap::Parser;
use omx_cli::commands::{run, Cli};

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("OMX_THREADS") {
        let n: usize = v.parse().with_context(|| format!("OMX_THREADS must be a positive integer, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| run(cli).map_err(anyhow::Error::from));
    match result {
        Ok(outcome) => {
            for w in outcome.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
