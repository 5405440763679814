mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::Outcome;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "emflow", version, about = "Self-expanders and expander mean curvature flow in rotational symmetry")]
struct Cli {
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root of the artifact tree.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Override a config entry, e.g. `--set grid.h=0.015625` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for every expander asymptotic to the cone.
    SolveExpander,
    /// Lowest eigenpair of the stability operator of each (or the selected) profile.
    Spectrum,
    /// Perturb a profile along its first eigenfunction and run the graphical flow.
    FlowGraphical,
    /// Evolve the configured shape with the level-set scheme.
    FlowLevelset,
    /// Distance between two evolving balls against the avoidance bound.
    Avoidance,
    /// Shrinking-ball barrier around a point outside an evolving ball.
    Barrier,
    /// Intersect two balls and round off the corner.
    Smooth,
    /// Flow line from an unstable expander down to a stable one.
    MorseLine,
    /// Re-check a saved morse-line run directory.
    Certify {
        /// Run directory (or its `record` subdirectory).
        dir: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SolveExpander => "solve-expander",
            Command::Spectrum => "spectrum",
            Command::FlowGraphical => "flow-graphical",
            Command::FlowLevelset => "flow-levelset",
            Command::Avoidance => "avoidance",
            Command::Barrier => "barrier",
            Command::Smooth => "smooth",
            Command::MorseLine => "morse-line",
            Command::Certify { .. } => "certify",
        }
    }
}

fn run_dir(out: &Path, sub: &str) -> PathBuf {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
    let base = out.join(sub).join(&stamp);
    let mut dir = base.clone();
    let mut k = 1;
    while dir.exists() {
        dir = out.join(sub).join(format!("{stamp}-{k}"));
        k += 1;
    }
    dir
}

fn save(cfg: &RunConfig, sub: &str, out: &Path, outcome: Outcome) -> emflow::Result<(PathBuf, bool)> {
    let dir = run_dir(out, sub);
    std::fs::create_dir_all(&dir)?;
    let passed = outcome.passed();
    let mut files: Vec<String> = (outcome.write)(&dir)?
        .iter()
        .map(|p| p.strip_prefix(&dir).unwrap_or(p).to_string_lossy().into_owned())
        .collect();
    files.sort();
    let manifest = json!({
        "command": sub,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "seed": cfg.seed,
        "results": outcome.results,
        "acceptance": outcome.acceptance,
        "passed": passed,
        "files": files,
    });
    emflow::report::write_json(&dir.join("manifest.json"), &manifest)?;
    for c in &outcome.acceptance {
        let v = c.value.map_or("-".into(), |v| format!("{v:.6e}"));
        println!("{} {} (value {v})", if c.passed { "PASS" } else { "FAIL" }, c.name);
    }
    Ok((dir, passed))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match config::load(cli.config.as_deref(), &cli.set, cli.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let sub = cli.command.name();
    let outcome = match &cli.command {
        Command::SolveExpander => commands::solve(&cfg),
        Command::Spectrum => commands::spectrum(&cfg),
        Command::FlowGraphical => commands::flow_graphical(&cfg),
        Command::FlowLevelset => commands::flow_levelset(&cfg),
        Command::Avoidance => commands::avoidance(&cfg),
        Command::Barrier => commands::barrier(&cfg),
        Command::Smooth => commands::smooth(&cfg),
        Command::MorseLine => commands::morse_line(&cfg),
        Command::Certify { dir } => commands::certify_saved(&cfg, dir),
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(emflow::Error::Config(msg)) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match save(&cfg, sub, &cli.out, outcome) {
        Ok((dir, passed)) => {
            println!("{}", dir.join("manifest.json").display());
            ExitCode::from(if passed { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error writing artifacts: {e}");
            ExitCode::from(1)
        }
    }
}
