//! Parameter sweeps over dotted scenario fields.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use avclbf::scenario::parse_scenario_str;
use rayon::prelude::*;
use serde_json::Value;

use crate::output::{write_artifacts, write_atomic};

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub field: String,
    pub values: Vec<Value>,
    /// Values as written on the command line.
    pub labels: Vec<String>,
}

/// Splits on commas that are not inside brackets or braces.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '[' | '{' => depth += 1,
            ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(s[start..].trim());
    parts
}

fn parse_value(raw: &str) -> Value {
    if let Some(pi) = parse_pi(raw) {
        return serde_json::json!(pi);
    }
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// `pi`, `pi/4`, `-pi/6`, `2pi/3`.
fn parse_pi(raw: &str) -> Option<f64> {
    let (sign, rest) = match raw.strip_prefix('-') {
        Some(r) => (-1.0, r),
        None => (1.0, raw),
    };
    let (num, den) = match rest.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().ok()?),
        None => (rest, 1.0),
    };
    let k = match num.strip_suffix("pi")? {
        "" => 1.0,
        k => k.parse::<f64>().ok()?,
    };
    Some(sign * k * std::f64::consts::PI / den)
}

impl std::str::FromStr for Axis {
    type Err = anyhow::Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (field, values) = spec
            .split_once('=')
            .ok_or_else(|| anyhow!("axis `{spec}` must look like FIELD=v1,v2,..."))?;
        let field = field.trim();
        if field.is_empty() {
            bail!("axis `{spec}` has an empty field name");
        }
        let labels: Vec<String> = split_top_level(values)
            .into_iter()
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        if labels.is_empty() {
            bail!("axis `{field}` has no values");
        }
        Ok(Axis {
            field: field.to_string(),
            values: labels.iter().map(|l| parse_value(l)).collect(),
            labels,
        })
    }
}

/// Sets a dotted path like `targets.0.radius_m` inside a JSON document.
pub fn set_field(doc: &mut Value, field: &str, value: Value) -> Result<()> {
    let segments: Vec<&str> = field.split('.').collect();
    let mut cur = doc;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    if !map.contains_key(*seg) {
                        bail!("unknown field `{field}`");
                    }
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.get_mut(*seg).ok_or_else(|| anyhow!("unknown field `{field}`"))?
            }
            Value::Array(items) => {
                let k: usize = seg.parse().map_err(|_| anyhow!("`{seg}` in `{field}` is not an index"))?;
                let len = items.len();
                let slot = items
                    .get_mut(k)
                    .ok_or_else(|| anyhow!("index {k} in `{field}` out of range ({len} entries)"))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => bail!("`{field}` descends into a scalar"),
        };
    }
    unreachable!("empty field path")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: usize,
    pub labels: Vec<String>,
    pub scenario_id: String,
    pub status: String,
    pub t_r_s: Option<f64>,
    pub min_safety_margin: Option<f64>,
    pub max_envelope_violation: Option<f64>,
    pub step_count: Option<usize>,
    pub wall_time_s: Option<f64>,
    pub error: Option<String>,
}

fn cells(axes: &[Axis]) -> Vec<Vec<usize>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                (0..axis.values.len()).map(move |k| {
                    let mut p = prefix.clone();
                    p.push(k);
                    p
                })
            })
            .collect()
    })
}

/// One run per combination of axis values, in parallel. A cell whose config
/// is invalid reports its error and the sweep carries on.
pub fn sweep_command(template: &Path, axes: &[Axis], out: Option<&Path>) -> Result<Vec<SweepRow>> {
    let text = std::fs::read_to_string(template).with_context(|| format!("reading {}", template.display()))?;
    let base: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", template.display()))?;
    let combos = cells(axes);

    let rows: Vec<SweepRow> = combos
        .par_iter()
        .enumerate()
        .map(|(cell, pick)| {
            let labels: Vec<String> = pick.iter().zip(axes).map(|(&k, a)| a.labels[k].clone()).collect();
            let failed = |id: String, e: String| SweepRow {
                cell,
                labels: labels.clone(),
                scenario_id: id,
                status: "error".into(),
                t_r_s: None,
                min_safety_margin: None,
                max_envelope_violation: None,
                step_count: None,
                wall_time_s: None,
                error: Some(e),
            };
            let mut doc = base.clone();
            for (&k, axis) in pick.iter().zip(axes) {
                if let Err(e) = set_field(&mut doc, &axis.field, axis.values[k].clone()) {
                    return failed(String::new(), e.to_string());
                }
            }
            let base_id = doc.get("id").and_then(Value::as_str).unwrap_or("scenario").to_string();
            let id = if axes.is_empty() { base_id } else { format!("{base_id}_cell{cell}") };
            doc["id"] = Value::String(id.clone());
            let cfg = match serde_json::to_string_pretty(&doc)
                .map_err(|e| e.to_string())
                .and_then(|s| parse_scenario_str(&s).map_err(|e| e.to_string()))
            {
                Ok(c) => c,
                Err(e) => return failed(id, e),
            };
            let log = match avclbf::run(&cfg) {
                Ok(l) => l,
                Err(e) => return failed(id, e.to_string()),
            };
            if let Some(dir) = out {
                if let Err(e) = write_artifacts(&dir.join(&id), &cfg, &log) {
                    return failed(id, format!("{e:#}"));
                }
            }
            let s = &log.summary;
            SweepRow {
                cell,
                labels,
                scenario_id: id,
                status: serde_json::to_value(s.status)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default(),
                t_r_s: s.t_r_s,
                min_safety_margin: s.min_safety_margin,
                max_envelope_violation: s.max_envelope_violation,
                step_count: Some(s.step_count),
                wall_time_s: Some(s.wall_time_s),
                error: None,
            }
        })
        .collect();

    if let Some(dir) = out {
        write_atomic(&dir.join("sweep.csv"), &sweep_csv(axes, &rows)?)?;
    }
    Ok(rows)
}

pub fn sweep_csv(axes: &[Axis], rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["cell".to_string()];
    header.extend(axes.iter().map(|a| a.field.clone()));
    header.extend(
        [
            "scenario_id",
            "status",
            "t_r_s",
            "min_safety_margin",
            "max_envelope_violation",
            "step_count",
            "wall_time_s",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let mut rec = vec![r.cell.to_string()];
        rec.extend(r.labels.iter().cloned());
        rec.extend([
            r.scenario_id.clone(),
            r.status.clone(),
            f(r.t_r_s),
            f(r.min_safety_margin),
            f(r.max_envelope_violation),
            r.step_count.map(|c| c.to_string()).unwrap_or_default(),
            f(r.wall_time_s),
            r.error.clone().unwrap_or_default(),
        ]);
        w.write_record(&rec)?;
    }
    w.into_inner().context("flushing csv buffer")
}

pub fn default_out(template: &Path) -> PathBuf {
    let stem = template.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    PathBuf::from("out").join(format!("{stem}_sweep"))
}
