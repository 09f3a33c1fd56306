//! Explicit-state files for external model checkers.
//!
//! * `<stem>.sta`: one `<index>:(k1,...,kT)` line per state.
//! * `<stem>.tra`: header `<states> <transitions>`, then `<src> <dst> <prob>`.
//! * `<stem>.time.trew`, `<stem>.power.trew`: `<src> <dst> <reward>`.
//!
//! Reals are printed with 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pcosync_core::analysis::RewardKind;
use pcosync_core::{DtmcModel, GlobalState};

pub const REWARD_KINDS: [RewardKind; 2] = [RewardKind::Time, RewardKind::Power];

#[derive(Debug, Clone, PartialEq)]
pub struct ExportPaths {
    pub states: PathBuf,
    pub transitions: PathBuf,
    pub rewards: Vec<(RewardKind, PathBuf)>,
}

impl ExportPaths {
    pub fn new(dir: &Path, stem: &str) -> Self {
        ExportPaths {
            states: dir.join(format!("{stem}.sta")),
            transitions: dir.join(format!("{stem}.tra")),
            rewards: REWARD_KINDS
                .iter()
                .map(|&k| (k, dir.join(format!("{stem}.{}.trew", k.id()))))
                .collect(),
        }
    }
}

#[inline]
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_states<W: Write>(model: &DtmcModel, mut w: W) -> std::io::Result<()> {
    for (i, s) in model.states().iter().enumerate() {
        writeln!(w, "{i}:{s}")?;
    }
    w.flush()
}

pub fn write_transitions<W: Write>(model: &DtmcModel, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{} {}", model.num_states(), model.num_transitions())?;
    for s in 0..model.num_states() {
        for tr in model.transitions(s) {
            writeln!(w, "{s} {} {}", tr.target, real(tr.probability))?;
        }
    }
    w.flush()
}

pub fn write_rewards<W: Write>(
    model: &DtmcModel,
    kind: RewardKind,
    mut w: W,
) -> std::io::Result<()> {
    for s in 0..model.num_states() {
        for tr in model.transitions(s) {
            writeln!(w, "{s} {} {}", tr.target, real(kind.of(tr)))?;
        }
    }
    w.flush()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn write_model(model: &DtmcModel, dir: &Path, stem: &str) -> Result<ExportPaths> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let paths = ExportPaths::new(dir, stem);
    write_states(model, create(&paths.states)?)?;
    write_transitions(model, create(&paths.transitions)?)?;
    for (kind, path) in &paths.rewards {
        write_rewards(model, *kind, create(path)?)?;
    }
    Ok(paths)
}

pub fn read_states(text: &str) -> Result<Vec<GlobalState>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let Some((i, s)) = line.split_once(':') else {
            bail!("line {}: expected `<index>:(k1,...)`", lineno + 1);
        };
        if i.parse::<usize>().ok() != Some(out.len()) {
            bail!(
                "line {}: expected index {}, got `{i}`",
                lineno + 1,
                out.len()
            );
        }
        out.push(s.parse().with_context(|| format!("line {}", lineno + 1))?);
    }
    Ok(out)
}

/// `(src, dst, value)` triples.
pub type Entries = Vec<(usize, usize, f64)>;

fn entry(line: &str, lineno: usize) -> Result<(usize, usize, f64)> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    let [src, dst, v] = parts[..] else {
        bail!("line {lineno}: expected `<src> <dst> <value>`");
    };
    let parse = |s: &str| {
        s.parse::<usize>()
            .with_context(|| format!("line {lineno}: bad index `{s}`"))
    };
    Ok((
        parse(src)?,
        parse(dst)?,
        v.parse()
            .with_context(|| format!("line {lineno}: bad value `{v}`"))?,
    ))
}

/// Parses a transitions file, returning the declared state count and the
/// entries.
pub fn read_transitions(text: &str) -> Result<(usize, Entries)> {
    let mut lines = text.lines();
    let header = lines.next().context("empty transitions file")?;
    let counts: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .context("bad header")?;
    let [states, transitions] = counts[..] else {
        bail!("header must be `<states> <transitions>`");
    };
    let entries: Entries = lines
        .enumerate()
        .map(|(i, l)| entry(l, i + 2))
        .collect::<Result<_>>()?;
    if entries.len() != transitions {
        bail!(
            "header declares {transitions} transitions, found {}",
            entries.len()
        );
    }
    if let Some(e) = entries.iter().find(|e| e.0 >= states || e.1 >= states) {
        bail!(
            "transition {} -> {} is out of range for {states} states",
            e.0,
            e.1
        );
    }
    Ok((states, entries))
}

pub fn read_rewards(text: &str) -> Result<Entries> {
    text.lines()
        .enumerate()
        .map(|(i, l)| entry(l, i + 1))
        .collect()
}
