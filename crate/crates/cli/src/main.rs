mod commands;
mod config;
mod manifest;

use clap::Parser;
use commands::{command_name, execute, primary_output, resolve, Cli};
use manifest::{peak_rss_kib, write_atomic, FileHash, RunManifest, Telemetry};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let started = Instant::now();
    let started_unix_secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);

    let config = match resolve(cli.command, cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let manifest_path = cli.manifest.clone().unwrap_or_else(|| match primary_output(&config) {
        Some(p) => {
            let mut s = p.into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
        None => PathBuf::from(format!("negobench-{}.manifest.json", command_name(&config))),
    });

    let mut outputs = vec![];
    let (inputs, failure) = match execute(&config) {
        Ok(run) => {
            let mut failure = run.failure;
            for a in &run.artifacts {
                let written = match &a.path {
                    Some(p) => write_atomic(p, &a.bytes),
                    None => std::io::stdout().write_all(&a.bytes).map_err(Into::into),
                };
                if let Err(e) = written {
                    failure.get_or_insert(e);
                    break;
                }
                outputs.push(FileHash::of(&a.label(), &a.bytes));
            }
            (run.inputs, failure)
        }
        Err(e) => (vec![], Some(e)),
    };
    let exit_code = failure.as_ref().map_or(0, |e| e.exit_code());
    if let Some(e) = &failure {
        eprintln!("error: {e}");
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        argv,
        config,
        inputs,
        outputs,
        exit_code,
        error: failure.as_ref().map(|e| e.to_string()),
        telemetry: Telemetry {
            started_unix_secs,
            wall_secs: started.elapsed().as_secs_f64(),
            peak_rss_kib: peak_rss_kib(),
        },
    };
    if let Err(e) = manifest.write(&manifest_path) {
        eprintln!("error: cannot write manifest {}: {e}", manifest_path.display());
        if exit_code == 0 {
            return ExitCode::from(e.exit_code() as u8);
        }
    }
    ExitCode::from(exit_code as u8)
}
