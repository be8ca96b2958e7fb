mod args;
mod commands;
mod output;
mod specs;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde_json::json;

use args::{load_config, Cli, Options};
use commands::{Ctx, Status};
use output::{short_hash, Manifest, Output};

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Status, String> {
    let started = now_ms();
    let base = match &cli.config {
        Some(path) => load_config(path)?,
        None => Options::default(),
    };
    let options = cli.options.over(base);
    let seed = options.seed.ok_or("--seed is required (on the command line or in the config file)")?;
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err("--workers must be positive".into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global().map_err(|e| e.to_string())?;
    }
    let name = cli.command.name();
    let canonical = serde_json::to_string(&json!({"command": name, "options": options})).map_err(|e| e.to_string())?;
    let hash = short_hash(&canonical);
    let dir = cli.out.unwrap_or_else(|| PathBuf::from("out"));
    let mut out = Output::new(&dir, &name, &hash)?;
    let (status, parameters) = commands::run(cli.command, &mut Ctx { opts: &options, seed, out: &mut out })?;
    let manifest = Manifest {
        command: &name,
        config: &options,
        config_hash: &hash,
        seed,
        parameters,
        version: env!("CARGO_PKG_VERSION"),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        outputs: Vec::new(),
    };
    let path = out.finish(manifest)?;
    println!("wrote {}", path.display());
    Ok(status)
}
