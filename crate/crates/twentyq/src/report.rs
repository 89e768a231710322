//! CSV and JSON outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use twentyq_core::agents::CurvePoint;
use twentyq_core::ka::CycleRow;
use twentyq_core::KnowledgeBase;

use crate::agent::ENCODER_VERSION;
use crate::config::Config;
use crate::error::{io_err, Error, Result};
use crate::experiment::{EpisodeRecord, SweepRow};

/// Create `dir`, refusing to reuse a non-empty directory unless `force`.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(io_err(dir))?;
        if entries.next().is_some() && !force {
            return Err(Error::OutputExists(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(f))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(io_err(path))
}

pub fn write_episodes(path: &Path, kb: &KnowledgeBase, episodes: &[EpisodeRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["episode", "target", "guess", "win"])?;
    let ids = kb.entities();
    for (i, e) in episodes.iter().enumerate() {
        w.write_record([
            i.to_string(),
            ids[e.target].id.clone(),
            ids[e.guess].id.clone(),
            u8::from(e.win).to_string(),
        ])?;
    }
    finish(w, path)
}

pub fn write_curve(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["episode", "winning_rate", "epsilon", "loss"])?;
    for p in curve {
        w.write_record([
            p.episode.to_string(),
            p.winning_rate.to_string(),
            p.epsilon.to_string(),
            p.loss.map(|l| l.to_string()).unwrap_or_default(),
        ])?;
    }
    finish(w, path)
}

pub fn write_cycles(path: &Path, rows: &[CycleRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "cycle",
        "kb_size",
        "kb_distance",
        "committed",
        "discarded_wrong_guess",
        "rejected_total",
    ])?;
    for r in rows {
        w.write_record([
            r.cycle.to_string(),
            r.kb_size.to_string(),
            r.kb_distance.to_string(),
            r.committed.to_string(),
            r.discarded_wrong_guess.to_string(),
            r.rejected_total.to_string(),
        ])?;
    }
    finish(w, path)
}

pub fn write_sweep(path: &Path, rows: &[SweepRow], eval_episodes: usize) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t1", "winning_rate", "eval_episodes", "train_steps"])?;
    for r in rows {
        w.write_record([
            r.t1.to_string(),
            r.winning_rate.to_string(),
            eval_episodes.to_string(),
            r.train_steps.to_string(),
        ])?;
    }
    finish(w, path)
}

#[derive(Debug, Serialize)]
struct Versions {
    twentyq: &'static str,
    encoder: u32,
}

#[derive(Debug, Serialize)]
struct Seeds {
    run: u64,
    kb: u64,
    eval: u64,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    command: &'a str,
    config: &'a Config,
    metrics: Value,
    files: Vec<String>,
    seeds: Seeds,
    versions: Versions,
}

/// Write `summary.json`: the command, the full config, metrics, the files
/// produced, seeds and versions. Nothing time-dependent goes in.
pub fn write_summary(dir: &Path, command: &str, config: &Config, metrics: Value, files: &[PathBuf]) -> Result<()> {
    let summary = Summary {
        command,
        config,
        metrics,
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
        seeds: Seeds {
            run: config.seed,
            kb: config.kb.seed,
            eval: config.eval.seed,
        },
        versions: Versions {
            twentyq: env!("CARGO_PKG_VERSION"),
            encoder: ENCODER_VERSION,
        },
    };
    let path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))
}
