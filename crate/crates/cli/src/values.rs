//! Parameter lists: `a,b,c`, `start:step:stop`, or a mix of both.

use anyhow::{bail, Context, Result};

/// Parses every comma-separated item, expanding `start:step:stop` ranges
/// (both ends inclusive).
pub fn parse_u32_list(spec: &str) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for item in items(spec)? {
        match item.split(':').collect::<Vec<_>>()[..] {
            [v] => out.push(parse_u32(v)?),
            [a, s, b] => {
                let (a, s, b) = (parse_u32(a)?, parse_u32(s)?, parse_u32(b)?);
                if s == 0 {
                    bail!("range step must be positive in `{item}`");
                }
                if a > b {
                    bail!("range start exceeds stop in `{item}`");
                }
                out.extend((a..=b).step_by(s as usize));
            }
            _ => bail!("expected a value or start:step:stop, got `{item}`"),
        }
    }
    Ok(out)
}

pub fn parse_f64_list(spec: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in items(spec)? {
        match item.split(':').collect::<Vec<_>>()[..] {
            [v] => out.push(parse_f64(v)?),
            [a, s, b] => {
                let (a, s, b) = (parse_f64(a)?, parse_f64(s)?, parse_f64(b)?);
                if s.is_nan() || s <= 0.0 {
                    bail!("range step must be positive in `{item}`");
                }
                if a > b {
                    bail!("range start exceeds stop in `{item}`");
                }
                let steps = ((b - a) / s + 1e-9).floor() as u64;
                // 0.1:0.1:1.0 should give 0.3, not 0.30000000000000004
                out.extend((0..=steps).map(|i| tidy(a + i as f64 * s)));
            }
            _ => bail!("expected a value or start:step:stop, got `{item}`"),
        }
    }
    Ok(out)
}

fn items(spec: &str) -> Result<Vec<&str>> {
    let items: Vec<&str> = spec.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        bail!("empty item in list `{spec}`");
    }
    Ok(items)
}

fn parse_u32(s: &str) -> Result<u32> {
    s.trim()
        .parse()
        .with_context(|| format!("`{s}` is not a non-negative integer"))
}

fn parse_f64(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .with_context(|| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        bail!("`{s}` is not finite");
    }
    Ok(v)
}

fn tidy(x: f64) -> f64 {
    format!("{x:.12}").parse().expect("formatted float parses")
}

/// CSV/text rendering of a real: shortest round-trip form, `inf` for
/// unbounded values.
pub fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}
