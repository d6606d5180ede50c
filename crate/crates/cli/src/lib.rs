//! Command-line tools and HTTP service for accessibility-reachability analysis.

pub mod commands;
pub mod config;
pub mod error;
pub mod project;
pub mod server;

use config::{Cli, Command};
use error::{CliError, Result};
use serde_json::Value;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(CliError::config)
}

/// Runs one parsed invocation; long-running commands stop on Ctrl-C.
pub fn run(cli: Cli) -> Result<Value> {
    match cli.command {
        Command::Compute(a) => commands::compute(&a),
        Command::Impact(a) => commands::impact(&a),
        Command::Test(a) => commands::test(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Ingest(a) => {
            let rt = runtime()?;
            let stop = Arc::new(AtomicBool::new(false));
            let flag = stop.clone();
            rt.spawn(async move {
                if tokio::signal::ctrl_c().await.is_ok() {
                    flag.store(true, Ordering::SeqCst);
                }
            });
            let out = commands::ingest(&a, &stop);
            rt.shutdown_background();
            out
        }
        Command::Serve(a) => {
            runtime()?.block_on(server::serve(&a, async {
                let _ = tokio::signal::ctrl_c().await;
            }))?;
            Ok(Value::Null)
        }
    }
}
