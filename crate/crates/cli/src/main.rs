use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use leoroute_core::harness::{checkpoint_scenario, compare, run_eval, run_train_with, EvalOutcome, PolicySource};
use leoroute_core::nn::Checkpoint;
use leoroute_core::{Algorithm, MetricsReport, Scenario};
use serde_json::json;

#[derive(Parser)]
#[command(name = "leoroute", version, about = "LEO constellation routing simulator and learners")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a learning router and write checkpoint, metrics and diagnostics.
    Train {
        #[arg(long)]
        scenario: PathBuf,
        /// primal-avg, primal-cvar or madqn
        #[arg(long)]
        algo: Algorithm,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy evaluation of a checkpoint or a baseline router.
    Eval {
        #[arg(long, conflicts_with = "baseline")]
        checkpoint: Option<PathBuf>,
        /// spf or random; needs --scenario
        #[arg(long)]
        baseline: Option<Algorithm>,
        /// Overrides the scenario stored in the checkpoint.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Comma-separated; defaults to the scenario seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Report file (JSON); printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate reports and write plot data.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_json_lines<T: serde::Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for r in rows {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn train(scenario: &Path, algo: Algorithm, seed: u64, out: &Path) -> Result<()> {
    let sc = Scenario::load(scenario).with_context(|| format!("loading {}", scenario.display()))?;
    fs::create_dir_all(out)?;
    let hash = sc.hash();
    log::info!("training {algo} on {} (scenario {hash}), seed {seed}", sc.name);
    let outcome = run_train_with(&sc, algo, seed, |row| {
        log::info!(
            "epoch {} t={:.1}s drop={:.4} e2e={:.2}ms queuing={:.2}ms cvar={:.2}ms",
            row.epoch,
            row.time,
            row.drop_rate,
            row.e2e_mean * 1e3,
            row.queuing_mean * 1e3,
            row.queuing_cvar * 1e3
        );
    })?;
    outcome.checkpoint.save(&out.join("checkpoint.json"))?;
    let tagged = outcome.history.iter().map(|h| {
        let mut v = serde_json::to_value(h).expect("row serializes");
        v["scenario_hash"] = json!(hash);
        v["seed"] = json!(seed);
        v
    });
    write_json_lines(&out.join("metrics.jsonl"), tagged)?;
    write_json_lines(&out.join("diagnostics.jsonl"), &outcome.diagnostics)?;
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&outcome.last_epoch)?)?;
    fs::write(out.join("scenario.toml"), sc.to_toml())?;
    println!("{}", serde_json::to_string(&outcome.last_epoch.interval(sc.train.epochs - 1, 0.0))?);
    Ok(())
}

fn eval(
    checkpoint: Option<PathBuf>,
    baseline: Option<Algorithm>,
    scenario: Option<PathBuf>,
    seeds: Vec<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let (source, stored) = match (checkpoint, baseline) {
        (Some(p), _) => {
            let ck = Checkpoint::read(&p).with_context(|| format!("reading checkpoint {}", p.display()))?;
            let sc = checkpoint_scenario(&ck).ok();
            (PolicySource::Checkpoint(Box::new(ck)), sc)
        }
        (None, Some(a)) if !a.learns() => (PolicySource::Baseline(a), None),
        (None, Some(a)) => bail!("{a} needs --checkpoint"),
        (None, None) => bail!("give --checkpoint or --baseline"),
    };
    let sc = match (scenario, stored) {
        (Some(p), _) => Scenario::load(&p).with_context(|| format!("loading {}", p.display()))?,
        (None, Some(s)) => s,
        (None, None) => bail!("--scenario is required for baselines"),
    };
    let seeds = if seeds.is_empty() { sc.seeds.clone() } else { seeds };
    let outcome = run_eval(&sc, &source, &seeds)?;
    let text = serde_json::to_string_pretty(&outcome)?;
    match out {
        Some(p) => {
            fs::write(&p, text)?;
            let r = &outcome.pooled;
            println!(
                "{}: drop={:.4} e2e={:.2}ms queuing={:.2}±{:.2}ms cvar={:.2}ms violations={:.4}",
                r.label,
                r.drop_rate,
                r.e2e_mean * 1e3,
                r.queuing_mean * 1e3,
                r.queuing_std * 1e3,
                r.queuing_cvar * 1e3,
                r.violation_rate
            );
        }
        None => println!("{text}"),
    }
    Ok(())
}

/// Accepts a bare report (training summary) or an evaluation outcome.
fn read_report(path: &Path) -> Result<MetricsReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(e) = serde_json::from_str::<EvalOutcome>(&text) {
        return Ok(e.pooled);
    }
    serde_json::from_str(&text).with_context(|| format!("{} is not a metrics report", path.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().cmd {
        Cmd::Train { scenario, algo, seed, out } => train(&scenario, algo, seed, &out),
        Cmd::Eval { checkpoint, baseline, scenario, seeds, out } => eval(checkpoint, baseline, scenario, seeds, out),
        Cmd::Compare { reports, out } => {
            let reports = reports.iter().map(|p| read_report(p)).collect::<Result<Vec<_>>>()?;
            let c = compare(&reports)?;
            c.write_to(&out)?;
            for w in &c.warnings {
                log::warn!("{w}");
            }
            print!("{}", c.table);
            Ok(())
        }
    }
}
