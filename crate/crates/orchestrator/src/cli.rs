use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use slicing_core::scenario::bundled;
use slicing_core::sim::{EngineOptions, RunOutput};

use crate::run::{read_scenario, run_batch, summarize, write_run_dir};
use crate::session::{Session, SessionConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_SCENARIO: u8 = 2;
pub const EXIT_VIOLATION: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "sliceorch", version, about = "Intent-driven slice orchestrator and simulator")]
#[command(args_conflicts_with_subcommands = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,

    #[command(flatten)]
    pub serve: ServeArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario to its horizon and write a run directory.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file (TOML or JSON), or `exp1` / `exp2`.
    pub scenario: PathBuf,
    /// Run directory to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep the assurance loop off for the whole run.
    #[arg(long)]
    pub no_assurance: bool,
    /// Exit with status 3 if any slice misses its SLA in any frame.
    #[arg(long)]
    pub fail_on_violation: bool,
    /// Reserved; the simulator is deterministic and ignores it.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Serve the HTTP API on this address.
    #[arg(long, value_name = "ADDR")]
    pub serve: Option<SocketAddr>,
    /// Scenario for the live session. Defaults to the exp1 topology with no
    /// slices.
    #[arg(long, requires = "serve")]
    pub scenario: Option<PathBuf>,
    /// Wall-clock milliseconds between frames while the session runs.
    #[arg(long, default_value_t = 1000, requires = "serve")]
    pub frame_ms: u64,
    /// Start ticking immediately instead of waiting for `POST /session/start`.
    #[arg(long, requires = "serve")]
    pub autostart: bool,
    /// Keep the assurance loop off.
    #[arg(long, requires = "serve")]
    pub no_assurance: bool,
    /// Write the session's history here on shutdown.
    #[arg(long, requires = "serve")]
    pub out: Option<PathBuf>,
}

pub fn run_command(args: &RunArgs) -> u8 {
    let scenario = match read_scenario(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SCENARIO;
        }
    };
    let options = EngineOptions {
        disable_assurance: args.no_assurance,
        ..Default::default()
    };
    let result = run_batch(&scenario, options, args.seed);
    if let Some(dir) = &args.out {
        if let Err(e) = write_run_dir(dir, &scenario, &result.output, &result.summary) {
            eprintln!("error: writing {}: {e}", dir.display());
            return EXIT_IO;
        }
    }
    let text = serde_json::to_string_pretty(&result.summary).expect("summaries serialize");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    if args.fail_on_violation && result.summary.violations > 0 {
        eprintln!("{} slice-frames violated their SLA", result.summary.violations);
        return EXIT_VIOLATION;
    }
    EXIT_OK
}

pub async fn serve(args: &ServeArgs, addr: SocketAddr) -> u8 {
    let scenario = match &args.scenario {
        Some(p) => match read_scenario(p) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_SCENARIO;
            }
        },
        None => {
            let mut s = bundled::exp1();
            s.name = "idle".into();
            s.events.clear();
            s
        }
    };
    let session = Session::spawn(
        &scenario,
        SessionConfig {
            frame_period: Duration::from_millis(args.frame_ms.max(1)),
            options: EngineOptions {
                disable_assurance: args.no_assurance,
                ..Default::default()
            },
            ..Default::default()
        },
    );
    if args.autostart && session.set_running(true).await.is_err() {
        return EXIT_IO;
    }
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: binding {addr}: {e}");
            return EXIT_IO;
        }
    };
    eprintln!("listening on {}", listener.local_addr().map_or(addr, |a| a));
    let app = crate::api::router(session.clone());
    let served = axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    if let Err(e) = served {
        eprintln!("error: {e}");
        return EXIT_IO;
    }
    if let Some(dir) = &args.out {
        let output = RunOutput {
            frames: session.frames_since(None),
            log: session.records_since(None),
        };
        let summary = summarize(&scenario.name, &output.frames, &output.log);
        if let Err(e) = write_run_dir(dir, &scenario, &output, &summary) {
            eprintln!("error: writing {}: {e}", dir.display());
            return EXIT_IO;
        }
    }
    EXIT_OK
}
