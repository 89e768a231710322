use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use serde_json::json;
use twentyq::agent::{load_checkpoint, save_checkpoint, Agent, AgentKind};
use twentyq::config::Config;
use twentyq::experiment::{
    build_kb, evaluate, prepare_ka, run_is_experiment, run_ka_experiment, sweep_t1,
};
use twentyq::kb_file::save_kb;
use twentyq::report::{prepare_out_dir, write_curve, write_cycles, write_episodes, write_summary, write_sweep};
use twentyq::service::{serve, GameService, ServiceSettings};
use twentyq::{Error, Result};
use twentyq_core::agents::EntropyAgent;
use twentyq_core::KnowledgeBase;

#[derive(Parser)]
#[command(name = "twentyq", version, about = "Train, evaluate and serve a 20 Questions agent")]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set train.lr=5e-4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Run seed (same as `--set seed=N`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Write into a non-empty output directory.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate (or load) the KB and write it to `kb.tsv`.
    GenKb,
    /// Train an IS agent, then evaluate it.
    TrainIs,
    /// Evaluate `agent.checkpoint`, or the entropy agent.
    EvalIs,
    /// Holdout KB, frozen IS policy, KA commit cycles.
    RunKa,
    /// Train and evaluate once per `sweep.t1_values` entry.
    SweepT1,
    /// Serve the game API.
    Serve,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenKb => "gen-kb",
            Command::TrainIs => "train-is",
            Command::EvalIs => "eval-is",
            Command::RunKa => "run-ka",
            Command::SweepT1 => "sweep-t1",
            Command::Serve => "serve",
        }
    }
}

fn load_policy(config: &Config, kb: &KnowledgeBase) -> Result<Option<Agent>> {
    match &config.agent.checkpoint {
        Some(p) => Ok(Some(load_checkpoint(p, kb)?.agent)),
        None if config.agent.kind == AgentKind::Entropy => Ok(Some(Agent::Entropy(EntropyAgent::new(kb)))),
        None => Ok(None),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut overrides = cli.set.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    let config = Config::load(cli.config.as_deref(), &overrides)?;
    let out = cli.out.as_path();
    let name = cli.command.name();
    let path = |f: &str| out.join(f);
    let kb = build_kb(&config)?;
    if kb.num_questions() < config.game.total {
        return Err(Error::Config(format!(
            "game.total {} exceeds the KB's {} questions",
            config.game.total,
            kb.num_questions()
        )));
    }
    if let Command::Serve = cli.command {
        return run_service(&config, kb);
    }
    prepare_out_dir(out, cli.force)?;
    match cli.command {
        Command::GenKb => {
            let files = [path("kb.tsv")];
            save_kb(&kb, &files[0])?;
            let metrics = json!({
                "entities": kb.num_entities(),
                "questions": kb.num_questions(),
                "known_entries": kb.known_count(),
                "density": kb.known_count() as f64 / (kb.num_entities() * kb.num_questions()) as f64,
            });
            write_summary(out, name, &config, metrics, &files)?;
        }
        Command::TrainIs => {
            let report = run_is_experiment(&config, &kb)?;
            let files = [path("learning_curve.csv"), path("episodes.csv"), path("policy.ckpt")];
            write_curve(&files[0], &report.trained.curve)?;
            write_episodes(&files[1], &kb, &report.eval.episodes)?;
            save_checkpoint(&report.trained.agent, config.game.t1, &[], &files[2])?;
            let metrics = json!({
                "winning_rate": report.eval.winning_rate,
                "wins": report.eval.wins,
                "eval_episodes": report.eval.episodes.len(),
                "train_episodes": report.trained.episodes,
                "train_steps": report.trained.steps,
            });
            write_summary(out, name, &config, metrics, &files)?;
        }
        Command::EvalIs => {
            let agent = load_policy(&config, &kb)?
                .ok_or_else(|| Error::Config("eval-is needs agent.checkpoint unless agent.kind = entropy".into()))?;
            let t1 = config.game.t1;
            let eval = evaluate(&agent, &kb, &kb, t1, config.eval.episodes, config.eval.seed)?;
            let files = [path("episodes.csv")];
            write_episodes(&files[0], &kb, &eval.episodes)?;
            let metrics = json!({
                "winning_rate": eval.winning_rate,
                "wins": eval.wins,
                "eval_episodes": eval.episodes.len(),
            });
            write_summary(out, name, &config, metrics, &files)?;
        }
        Command::RunKa => {
            let setup = prepare_ka(&config, &kb, load_policy(&config, &kb)?)?;
            let report = run_ka_experiment(&config, &kb, &setup, config.selector()?)?;
            let mut files = vec![path("ka_cycles.csv"), path("kb_after.tsv")];
            write_cycles(&files[0], &report.rows)?;
            save_kb(&report.final_kb, &files[1])?;
            if !setup.curve.is_empty() {
                files.push(path("learning_curve.csv"));
                write_curve(&files[2], &setup.curve)?;
            }
            let first = report.rows.first().expect("cycle 0 row");
            let last = report.rows.last().expect("cycle 0 row");
            let metrics = json!({
                "selector": report.selector.name(),
                "holdout_removed": setup.split.removed.len(),
                "initial_kb_size": first.kb_size,
                "final_kb_size": last.kb_size,
                "initial_kb_distance": first.kb_distance,
                "final_kb_distance": last.kb_distance,
                "committed_total": report.rows.iter().map(|r| r.committed).sum::<usize>(),
                "continuation": report.continuation.map(|c| json!({
                    "with_ka": c.with_ka,
                    "without_ka": c.without_ka,
                })),
            });
            write_summary(out, name, &config, metrics, &files)?;
        }
        Command::SweepT1 => {
            let rows = sweep_t1(&config, &kb)?;
            let files = [path("sweep_t1.csv")];
            write_sweep(&files[0], &rows, config.eval.episodes)?;
            let metrics = json!({
                "winning_rates": rows.iter().map(|r| json!({"t1": r.t1, "winning_rate": r.winning_rate})).collect::<Vec<_>>(),
            });
            write_summary(out, name, &config, metrics, &files)?;
        }
        Command::Serve => unreachable!("handled above"),
    }
    eprintln!("{name}: wrote {}", out.display());
    Ok(())
}

fn run_service(config: &Config, kb: KnowledgeBase) -> Result<()> {
    let policy = load_policy(config, &kb)?
        .ok_or_else(|| Error::Config("serve needs agent.checkpoint unless agent.kind = entropy".into()))?;
    let run = config.ka_run(config.selector()?);
    let settings = ServiceSettings {
        t1: run.t1,
        t2: run.t2,
        n_c: run.n_c,
        selector: run.selector,
        gmf: run.gmf,
        buffer_size: run.buffer_size,
        reject: run.reject,
        commit_all: run.commit_all,
        max_sessions: config.service.max_sessions,
        session_timeout: Duration::from_secs(config.service.session_timeout_secs),
        kb_out: config.service.kb_out.clone(),
        seed: config.seed,
    };
    let service = Arc::new(GameService::new(policy, kb, settings)?);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::Io {
        path: Path::new("tokio runtime").to_path_buf(),
        source: e,
    })?;
    eprintln!("serving on {}", config.service.bind);
    runtime
        .block_on(serve(service, &config.service.bind))
        .map_err(|e| Error::Io {
            path: PathBuf::from(&config.service.bind),
            source: e,
        })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
