//! Text format for knowledge bases.
//!
//! ```text
//! #la-kb v1
//! entity    <id> <popularity> <name>
//! question  <id> <text>
//! entry     <m> <n> <c_yes> <c_no> <c_unknown>
//! rejected  <m> <n>
//! ```
//!
//! Fields are tab-separated and sections appear in that order. Popularity is
//! written in shortest round-trip form, so save then load is exact.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use twentyq_core::kb::{Entity, EntryCounts, Question};
use twentyq_core::KnowledgeBase;

use crate::error::{io_err, parse_err, Error, Result};

pub const KB_HEADER: &str = "#la-kb v1";

fn check_field(value: &str, line: usize, field: &'static str, allow_tab: bool) -> Result<()> {
    if value.contains('\n') || value.contains('\r') || (!allow_tab && value.contains('\t')) {
        return Err(parse_err(line, field, "contains a tab or line break"));
    }
    Ok(())
}

/// Serialize to the text format.
pub fn kb_to_string(kb: &KnowledgeBase) -> Result<String> {
    let mut out = String::new();
    out.push_str(KB_HEADER);
    out.push('\n');
    for (i, e) in kb.entities().iter().enumerate() {
        check_field(&e.id, i, "entity id", false)?;
        check_field(&e.name, i, "entity name", true)?;
        writeln!(out, "entity\t{}\t{}\t{}", e.id, e.popularity, e.name).unwrap();
    }
    for (i, q) in kb.questions().iter().enumerate() {
        check_field(&q.id, i, "question id", false)?;
        check_field(&q.text, i, "question text", true)?;
        writeln!(out, "question\t{}\t{}", q.id, q.text).unwrap();
    }
    for ((m, n), c) in kb.known_entries() {
        writeln!(out, "entry\t{m}\t{n}\t{}\t{}\t{}", c.yes, c.no, c.unknown).unwrap();
    }
    for (m, n) in kb.rejected() {
        writeln!(out, "rejected\t{m}\t{n}").unwrap();
    }
    Ok(out)
}

#[derive(PartialEq, PartialOrd)]
enum Section {
    Entities,
    Questions,
    Entries,
    Rejected,
}

fn parse_index(s: &str, line: usize, field: &'static str, len: usize) -> Result<usize> {
    let v: usize = s
        .parse()
        .map_err(|_| parse_err(line, field, format!("`{s}` is not a non-negative integer")))?;
    if v >= len {
        return Err(parse_err(line, field, format!("index {v} out of range (size {len})")));
    }
    Ok(v)
}

fn parse_count(s: &str, line: usize, field: &'static str) -> Result<u32> {
    if s.starts_with('-') {
        return Err(parse_err(line, field, format!("negative count `{s}`")));
    }
    s.parse()
        .map_err(|_| parse_err(line, field, format!("`{s}` is not a count")))
}

/// Parse the text format. Errors carry the 1-based line number and field.
pub fn parse_kb(text: &str) -> Result<KnowledgeBase> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h.trim_end() == KB_HEADER => {}
        Some((_, h)) => return Err(parse_err(1, "header", format!("expected `{KB_HEADER}`, found `{h}`"))),
        None => return Err(parse_err(1, "header", "empty file")),
    }
    let mut entities = Vec::new();
    let mut questions = Vec::new();
    let mut entries: Vec<(usize, usize, usize, EntryCounts)> = Vec::new();
    let mut rejected: Vec<(usize, usize, usize)> = Vec::new();
    let mut section = Section::Entities;
    for (ln, raw) in lines {
        if raw.is_empty() {
            continue;
        }
        let (kind, rest) = raw.split_once('\t').unwrap_or((raw, ""));
        let next = match kind {
            "entity" => Section::Entities,
            "question" => Section::Questions,
            "entry" => Section::Entries,
            "rejected" => Section::Rejected,
            other => return Err(parse_err(ln, "kind", format!("unknown line kind `{other}`"))),
        };
        if next < section {
            return Err(parse_err(ln, "kind", format!("`{kind}` line after a later section")));
        }
        section = next;
        match section {
            Section::Entities => {
                let f: Vec<&str> = rest.splitn(3, '\t').collect();
                if f.len() != 3 {
                    return Err(parse_err(ln, "entity", "expected id, popularity and name"));
                }
                let popularity: f64 = f[1]
                    .parse()
                    .map_err(|_| parse_err(ln, "popularity", format!("`{}` is not a number", f[1])))?;
                if !(popularity > 0.0) || !popularity.is_finite() {
                    return Err(parse_err(ln, "popularity", "must be positive and finite"));
                }
                entities.push(Entity {
                    id: f[0].to_string(),
                    popularity,
                    name: f[2].to_string(),
                });
            }
            Section::Questions => {
                let f: Vec<&str> = rest.splitn(2, '\t').collect();
                if f.len() != 2 {
                    return Err(parse_err(ln, "question", "expected id and text"));
                }
                questions.push(Question {
                    id: f[0].to_string(),
                    text: f[1].to_string(),
                });
            }
            Section::Entries => {
                let f: Vec<&str> = rest.split('\t').collect();
                if f.len() != 5 {
                    return Err(parse_err(ln, "entry", "expected m, n and three counts"));
                }
                let m = parse_index(f[0], ln, "m", entities.len())?;
                let n = parse_index(f[1], ln, "n", questions.len())?;
                let counts = EntryCounts::new(
                    parse_count(f[2], ln, "c_yes")?,
                    parse_count(f[3], ln, "c_no")?,
                    parse_count(f[4], ln, "c_unknown")?,
                )
                .map_err(|e| parse_err(ln, "entry", e.to_string()))?;
                entries.push((ln, m, n, counts));
            }
            Section::Rejected => {
                let f: Vec<&str> = rest.split('\t').collect();
                if f.len() != 2 {
                    return Err(parse_err(ln, "rejected", "expected m and n"));
                }
                rejected.push((
                    ln,
                    parse_index(f[0], ln, "m", entities.len())?,
                    parse_index(f[1], ln, "n", questions.len())?,
                ));
            }
        }
    }
    let mut kb = KnowledgeBase::new(entities, questions).map_err(|e| parse_err(0, "kb", e.to_string()))?;
    let mut seen = BTreeSet::new();
    for (ln, m, n, c) in entries {
        if !seen.insert((m, n)) {
            return Err(parse_err(ln, "entry", format!("duplicate entry ({m}, {n})")));
        }
        kb.set_counts(m, n, c).map_err(Error::Core)?;
    }
    let mut seen = BTreeSet::new();
    for (ln, m, n) in rejected {
        if !seen.insert((m, n)) {
            return Err(parse_err(ln, "rejected", format!("duplicate rejection ({m}, {n})")));
        }
        kb.reject(m, n).map_err(Error::Core)?;
    }
    Ok(kb)
}

pub fn save_kb(kb: &KnowledgeBase, path: &Path) -> Result<()> {
    let text = kb_to_string(kb)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn load_kb(path: &Path) -> Result<KnowledgeBase> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_kb(&text)
}
