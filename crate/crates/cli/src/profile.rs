//! Hardware profiles: the built-in `micaz` plus `<name>.profile` files in a
//! profile directory, written in the same `key = value` form as configs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pcosync_core::HardwareProfile;

use crate::values::num;

pub const PROFILE_DIR_ENV: &str = "PCOSYNC_PROFILE_DIR";
pub const EXTENSION: &str = "profile";

const FIELDS: [&str; 6] = [
    "idle_a",
    "receive_a",
    "transmit_a",
    "voltage_v",
    "cycle_s",
    "message_s",
];

pub fn builtin(name: &str) -> Option<HardwareProfile> {
    (name == "micaz").then(HardwareProfile::micaz)
}

pub fn to_text(p: &HardwareProfile) -> String {
    let mut out = String::new();
    writeln!(out, "name = {}", p.name).unwrap();
    for (key, value) in FIELDS.iter().zip(fields(p)) {
        writeln!(out, "{key} = {}", num(value)).unwrap();
    }
    out
}

fn fields(p: &HardwareProfile) -> [f64; 6] {
    [
        p.idle_a,
        p.receive_a,
        p.transmit_a,
        p.voltage_v,
        p.cycle_s,
        p.message_s,
    ]
}

pub fn parse(text: &str, fallback_name: &str) -> Result<HardwareProfile> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected `key = value`", lineno + 1);
        };
        let k = k.trim();
        if k != "name" && !FIELDS.contains(&k) {
            bail!("line {}: unknown profile key `{k}`", lineno + 1);
        }
        if map.insert(k.to_string(), v.trim().to_string()).is_some() {
            bail!("line {}: `{k}` given twice", lineno + 1);
        }
    }
    let mut get = |k: &str| -> Result<f64> {
        let v = map.remove(k).with_context(|| format!("missing `{k}`"))?;
        v.parse()
            .with_context(|| format!("`{k}`: `{v}` is not a number"))
    };
    let profile = HardwareProfile {
        idle_a: get("idle_a")?,
        receive_a: get("receive_a")?,
        transmit_a: get("transmit_a")?,
        voltage_v: get("voltage_v")?,
        cycle_s: get("cycle_s")?,
        message_s: get("message_s")?,
        name: map
            .remove("name")
            .unwrap_or_else(|| fallback_name.to_string()),
    };
    Ok(profile.validate()?)
}

pub fn path_for(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.{EXTENSION}"))
}

/// Resolves a profile by built-in name, by file path, or by name inside
/// `dir`.
pub fn resolve(name: &str, dir: Option<&Path>) -> Result<HardwareProfile> {
    if let Some(p) = builtin(name) {
        return Ok(p);
    }
    let direct = Path::new(name);
    let path = if direct.extension().is_some_and(|e| e == EXTENSION)
        || name.contains(std::path::MAIN_SEPARATOR)
    {
        direct.to_path_buf()
    } else if let Some(dir) = dir {
        path_for(dir, name)
    } else {
        bail!("unknown profile `{name}` (set --profile-dir or {PROFILE_DIR_ENV} to load profile files)");
    };
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(name)
        .to_string();
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading profile {}", path.display()))?;
    parse(&text, &stem).with_context(|| format!("in profile {}", path.display()))
}

/// Built-in names followed by the profile files found in `dir`, sorted.
pub fn list(dir: Option<&Path>) -> Result<Vec<String>> {
    let mut names = vec!["micaz".to_string()];
    if let Some(dir) = dir {
        if dir.is_dir() {
            let mut found = Vec::new();
            for entry in
                std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))?
            {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == EXTENSION) {
                    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                        found.push(stem.to_string());
                    }
                }
            }
            found.sort();
            names.extend(found.into_iter().filter(|n| builtin(n).is_none()));
        }
    }
    Ok(names)
}

pub fn save(dir: &Path, profile: &HardwareProfile) -> Result<PathBuf> {
    if builtin(&profile.name).is_some() {
        bail!("`{}` is a built-in profile", profile.name);
    }
    if profile.name.is_empty() || profile.name.contains(['/', '\\']) {
        bail!("invalid profile name `{}`", profile.name);
    }
    profile.clone().validate()?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = path_for(dir, &profile.name);
    std::fs::write(&path, to_text(profile))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
