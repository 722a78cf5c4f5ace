//! Trajectory, summary and plot-series files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use avclbf::reach::{self, Envelope};
use avclbf::scenario::ScenarioConfig;
use avclbf::sim::{self, Sample};
use avclbf::{ControllerConfig, QpStatus, TrajectoryLog};

/// Column header of `trajectory.csv` for a scenario.
pub fn trajectory_header(cfg: &ScenarioConfig) -> Vec<String> {
    let mut cols: Vec<String> = ["t", "x", "y", "theta", "v", "a1", "u1", "u2", "nu1"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((0..cfg.targets.len()).map(|i| format!("h_{i}")));
    cols.extend((0..cfg.regions.len()).map(|i| format!("b_{i}")));
    cols.extend(["psi0", "feasible", "kkt_residual"].map(String::from));
    cols
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Smallest ψ₀ over the targets, for AVCLBF runs.
pub fn min_psi0(s: &Sample) -> Option<f64> {
    s.targets.iter().filter_map(|t| t.psi0).reduce(f64::min)
}

pub fn trajectory_row(s: &Sample) -> Vec<String> {
    let mut row = vec![
        format!("{:e}", s.t),
        format!("{:e}", s.state.x),
        format!("{:e}", s.state.y),
        format!("{:e}", s.state.theta),
        format!("{:e}", s.state.v),
        format!("{:e}", s.a1),
        opt(s.u.map(|u| u.u1)),
        opt(s.u.map(|u| u.u2)),
        opt(s.nu1),
    ];
    row.extend(s.targets.iter().map(|t| format!("{:e}", t.h)));
    row.extend(s.regions.iter().map(|r| format!("{:e}", r.b)));
    row.push(opt(min_psi0(s)));
    row.push(if s.qp_status == Some(QpStatus::Infeasible) { "0" } else { "1" }.into());
    row.push(opt(s.kkt_residual));
    row
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().context("flushing csv buffer")
}

/// Writes via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
    ));
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn trajectory_csv(cfg: &ScenarioConfig, log: &TrajectoryLog) -> Result<Vec<u8>> {
    csv_bytes(&trajectory_header(cfg), log.samples.iter().map(trajectory_row))
}

/// Plot-ready series: name → CSV bytes.
pub fn series(cfg: &ScenarioConfig, log: &TrajectoryLog) -> Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    let (_, envelopes) = sim::envelopes(cfg);

    let mut header = vec!["t".to_string()];
    for i in 0..cfg.targets.len() {
        header.push(format!("h_{i}"));
        header.push(format!("envelope_{i}"));
    }
    let rows = log.samples.iter().map(|s| {
        let mut r = vec![format!("{:e}", s.t)];
        for (tv, env) in s.targets.iter().zip(&envelopes) {
            r.push(format!("{:e}", tv.h));
            r.push(opt(env.as_ref().map(|e: &Envelope| e.eval(s.t))));
        }
        r
    });
    out.push(("h.csv".into(), csv_bytes(&header, rows)?));

    let mut header = vec!["t".to_string()];
    for i in 0..cfg.regions.len() {
        header.push(format!("b_{i}"));
        header.push(format!("psi1_{i}"));
    }
    let rows = log.samples.iter().map(|s| {
        let mut r = vec![format!("{:e}", s.t)];
        for rv in &s.regions {
            r.push(format!("{:e}", rv.b));
            r.push(format!("{:e}", rv.psi1));
        }
        r
    });
    out.push(("b.csv".into(), csv_bytes(&header, rows)?));

    let header: Vec<String> = ["t", "a1"].map(String::from).to_vec();
    let rows = log.samples.iter().map(|s| vec![format!("{:e}", s.t), format!("{:e}", s.a1)]);
    out.push(("a1.csv".into(), csv_bytes(&header, rows)?));

    let header: Vec<String> = ["t", "u1", "u2", "nu1"].map(String::from).to_vec();
    let rows = log.samples.iter().map(|s| {
        vec![
            format!("{:e}", s.t),
            opt(s.u.map(|u| u.u1)),
            opt(s.u.map(|u| u.u2)),
            opt(s.nu1),
        ]
    });
    out.push(("u.csv".into(), csv_bytes(&header, rows)?));

    if let ControllerConfig::Avclbf(g) = &cfg.controller {
        let s0 = cfg.initial_state();
        let mut header = vec!["t".to_string(), "c_integral".to_string()];
        let mut critical = Vec::new();
        for (i, tg) in cfg.targets.iter().enumerate() {
            header.push(format!("critical_{i}"));
            let (h0, _) = reach::h_value(tg, &s0);
            critical.push(reach::critical_value(h0, g.q).ok().map(|c| c + g.c_schedule.integral(0.0)));
        }
        let t_end = log
            .predicted_reach_times
            .iter()
            .flatten()
            .copied()
            .fold(cfg.sim.t_max, f64::max);
        let n = (t_end / cfg.sim.dt).ceil() as usize;
        let rows = (0..=n).map(|k| {
            let t = k as f64 * cfg.sim.dt;
            let mut r = vec![format!("{t:e}"), format!("{:e}", g.c_schedule.integral(t))];
            r.extend(critical.iter().map(|c| opt(*c)));
            r
        });
        out.push(("c_integral.csv".into(), csv_bytes(&header, rows)?));
    }
    Ok(out)
}

/// Writes `trajectory.csv`, `summary.json` and (optionally) `series/*.csv`.
pub fn write_artifacts(dir: &Path, cfg: &ScenarioConfig, log: &TrajectoryLog) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let p = dir.join("trajectory.csv");
    write_atomic(&p, &trajectory_csv(cfg, log)?)?;
    written.push(p);
    let p = dir.join("summary.json");
    let mut json = serde_json::to_vec_pretty(&log.summary)?;
    json.push(b'\n');
    write_atomic(&p, &json)?;
    written.push(p);
    if cfg.output.write_series {
        for (name, bytes) in series(cfg, log)? {
            let p = dir.join("series").join(name);
            write_atomic(&p, &bytes)?;
            written.push(p);
        }
    }
    Ok(written)
}
