use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trem_harness::acceptance;
use trem_harness::config::{parse_kv, ExperimentConfig, ExperimentKind};
use trem_harness::experiments::{default_config, run_experiment};
use trem_harness::output::{Manifest, ARTIFACT_VERSION};

#[derive(Parser)]
#[command(name = "trem", version, about = "Metropolis dynamics on the truncated random energy model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cloud census over independent environments (cloud-census)
    Census(Common),
    /// Spectral data and eigenvalue bounds of every component (spectral-suite)
    Spectral(Common),
    /// Front-end clock samples, Laplace transforms and Lévy tails (clock-convergence)
    Clock(Common),
    /// Two-time correlation against the arcsine law (aging-curve)
    Aging(Common),
    /// High-temperature step counts over n-6, n-3, n (hightemp-lln)
    Lln(Common),
    /// Limit-condition estimators (condition-check)
    Conditions(Common),
    /// The full acceptance suite; exits 2 if a criterion fails
    Check(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    cstar: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    /// output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value configuration file; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut put = |k: &'static str, s: Option<String>| {
            if let Some(s) = s {
                v.push((k, s));
            }
        };
        put("n", self.n.map(|x| x.to_string()));
        put("cstar", self.cstar.map(|x| x.to_string()));
        put("beta", self.beta.map(|x| x.to_string()));
        put("epsilon", self.epsilon.map(|x| x.to_string()));
        put("seed", self.seed.map(|x| x.to_string()));
        put("replicas", self.replicas.map(|x| x.to_string()));
        put("t", self.t.map(|x| x.to_string()));
        put("workers", self.workers.map(|x| x.to_string()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        v
    }
}

fn usage(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    eprintln!("usage: trem <census|spectral|clock|aging|lln|conditions|check> [--n N] [--cstar C] [--beta B] [--epsilon E] [--seed S] [--replicas R] [--t T] [--workers W] [--out DIR] [--config FILE]");
    ExitCode::from(1)
}

/// Defaults for the kind, then the config file, then flags.
fn build_config(kind: ExperimentKind, common: &Common) -> Result<ExperimentConfig, String> {
    let mut cfg = default_config(kind, 1);
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let pairs = parse_kv(&text).map_err(|e| e.to_string())?;
        if let Some(k) = pairs.get("kind") {
            let k: ExperimentKind = k.parse().map_err(|e: trem_harness::config::ConfigError| e.to_string())?;
            if k != kind {
                return Err(format!("config kind `{k}` does not match the subcommand `{kind}`"));
            }
        }
        cfg.apply(&pairs).map_err(|e| e.to_string())?;
    }
    for (k, v) in common.overrides() {
        cfg.set(k, &v).map_err(|e| e.to_string())?;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn run_check(common: &Common) -> ExitCode {
    let seed = common.seed.unwrap_or(1);
    let workers = common.workers.unwrap_or(1);
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let start = std::time::Instant::now();
    let report = match acceptance::run_all(seed, workers, |o| println!("{o}")) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut m = Manifest::new();
    m.set("kind", "check");
    m.set("master_seed", seed);
    m.set("workers", workers);
    m.set("artifact_version", ARTIFACT_VERSION);
    for o in &report.outcomes {
        m.set(format!("criterion_{}", o.id), if o.pass { "pass" } else { "fail" });
    }
    m.set("wall_time_s", start.elapsed().as_secs_f64());
    let written = std::fs::create_dir_all(&out).and_then(|_| {
        for (name, bytes) in &report.files {
            std::fs::write(out.join(name), bytes)?;
        }
        m.write(&out)
    });
    if let Err(e) = written {
        eprintln!("error: cannot write outputs to {}: {e}", out.display());
        return ExitCode::from(2);
    }
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let info = matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
            let _ = e.print();
            return if info { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    let (kind, common) = match &cli.command {
        Command::Census(c) => (ExperimentKind::CloudCensus, c),
        Command::Spectral(c) => (ExperimentKind::SpectralSuite, c),
        Command::Clock(c) => (ExperimentKind::ClockConvergence, c),
        Command::Aging(c) => (ExperimentKind::AgingCurve, c),
        Command::Lln(c) => (ExperimentKind::HightempLln, c),
        Command::Conditions(c) => (ExperimentKind::ConditionCheck, c),
        Command::Check(c) => return run_check(c),
    };
    let cfg = match build_config(kind, common) {
        Ok(c) => c,
        Err(msg) => return usage(&msg),
    };
    match run_experiment(&cfg) {
        Ok(out) => {
            if let Err(e) = out.write(&cfg.out) {
                eprintln!("error: cannot write outputs to {}: {e}", cfg.out.display());
                return ExitCode::from(1);
            }
            for (k, v) in &out.manifest.entries {
                println!("{k}={v}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => usage(&e.to_string()),
    }
}
