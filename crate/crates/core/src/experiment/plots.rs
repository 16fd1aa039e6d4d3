use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::runner::RunReport;
use crate::approx::build_cutoff_profile;
use crate::bounds::bound_margins;
use crate::solver::KernelSlice;
use crate::{Error, Result};

/// Files written by [`emit_plots`] and the ones that could not be produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotManifest {
    pub dir: PathBuf,
    pub emitted: Vec<String>,
    /// `(file, reason)` pairs.
    pub missing: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

const FILES: [&str; 4] = [
    "kernel_slice.csv",
    "zeta_profile.csv",
    "bound_margin.csv",
    "cutoff_profile.csv",
];

/// Largest number of time nodes written to `kernel_slice.csv`.
const MAX_PLOT_TIMES: usize = 65;

/// Turns the artifacts of a run directory into plot-ready CSV files and
/// writes `manifest.json`. A directory without a run report yields an empty
/// manifest and a warning.
pub fn emit_plots(dir: &Path) -> Result<PlotManifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = PlotManifest {
        dir: dir.to_path_buf(),
        emitted: Vec::new(),
        missing: Vec::new(),
        warnings: Vec::new(),
    };
    let report_path = dir.join("report.json");
    let report: Option<RunReport> = match std::fs::read_to_string(&report_path) {
        Ok(text) => Some(serde_json::from_str(&text)?),
        Err(_) => {
            manifest.warnings.push(format!(
                "no report.json in {}; nothing to plot",
                dir.display()
            ));
            None
        }
    };
    let csv = dir.join("kernel_slice_raw.csv");
    let side = dir.join("kernel_slice_raw.json");
    let slice = if csv.exists() && side.exists() {
        Some(KernelSlice::read(&csv, &side)?)
    } else {
        None
    };

    for name in FILES {
        let produced = match (name, &report) {
            (_, None) => Err("no run report".to_string()),
            ("kernel_slice.csv", _) => slice
                .as_ref()
                .map(kernel_csv)
                .ok_or_else(|| "no kernel slice".to_string()),
            ("zeta_profile.csv", Some(r)) => zeta_csv(r),
            ("bound_margin.csv", Some(r)) => match &slice {
                Some(s) => margin_csv(r, s),
                None => Err("no kernel slice".to_string()),
            },
            (_, Some(r)) => cutoff_csv(r),
        };
        match produced {
            Ok(text) => {
                let path = dir.join(name);
                std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                manifest.emitted.push(name.to_string());
            }
            Err(reason) => manifest.missing.push((name.to_string(), reason)),
        }
    }
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn kernel_csv(slice: &KernelSlice) -> String {
    let grid = &slice.grid;
    let stride = grid.steps.div_ceil(MAX_PLOT_TIMES - 1).max(1);
    let mut out = String::from(if grid.dim == 1 {
        "s,y1,g\n"
    } else {
        "s,y1,y2,g\n"
    });
    let points: Vec<Vec<f64>> = (0..grid.n_nodes()).map(|j| grid.point(j)).collect();
    for n in (0..=grid.steps).filter(|n| n % stride == 0 || *n == grid.steps) {
        let s = grid.time(n);
        for (j, p) in points.iter().enumerate() {
            let _ = write!(out, "{s:.8e}");
            for c in p {
                let _ = write!(out, ",{c:.8e}");
            }
            let _ = writeln!(out, ",{:.10e}", slice.values[[n, j]]);
        }
    }
    out
}

fn stage_details<'a>(report: &'a RunReport, name: &str) -> Option<&'a Value> {
    report
        .stages
        .iter()
        .find(|s| {
            serde_json::to_value(s.stage)
                .ok()
                .and_then(|v| v.as_str().map(|v| v == name))
                == Some(true)
        })
        .map(|s| &s.details)
        .filter(|d| !d.is_null())
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .map(|a| a.iter().filter_map(Value::as_f64).collect())
        .unwrap_or_default()
}

fn zeta_csv(report: &RunReport) -> std::result::Result<String, String> {
    let d = stage_details(report, "moments").ok_or("moments stage has no output")?;
    let zetas = d["zeta"]
        .as_array()
        .filter(|z| !z.is_empty())
        .ok_or("no zeta profiles")?;
    let mut out = String::from("eps,alpha,s,zeta,ratio\n");
    for z in zetas {
        let p = &z["profile"];
        let (eps, alpha) = (
            p["eps"].as_f64().unwrap_or(f64::NAN),
            p["alpha"].as_f64().unwrap_or(f64::NAN),
        );
        let (times, values, ratios) = (
            floats(&p["times"]),
            floats(&p["values"]),
            floats(&z["report"]["ratios"]),
        );
        for i in 0..times.len().min(values.len()) {
            let ratio = ratios.get(i).copied().unwrap_or(f64::NAN);
            let _ = writeln!(
                out,
                "{eps},{alpha},{:.8e},{:.10e},{:.10e}",
                times[i], values[i], ratio
            );
        }
    }
    Ok(out)
}

fn margin_csv(report: &RunReport, slice: &KernelSlice) -> std::result::Result<String, String> {
    let cfg = &report.config;
    let spec = cfg.bound.as_ref().ok_or("no bound section configured")?;
    stage_details(report, "bounds").ok_or("bounds stage has no output")?;
    let sel = cfg
        .regime()
        .ok_or("no operator exponents")?
        .map_err(|e| e.to_string())?;
    let rows = bound_margins(
        slice,
        &sel,
        spec.alpha,
        spec.eps,
        cfg.bound_k(),
        &cfg.window,
    )
    .map_err(|e| e.to_string())?;
    let mut out = String::from(if slice.grid.dim == 1 {
        "s,y1,margin\n"
    } else {
        "s,y1,y2,margin\n"
    });
    for (s, y, m) in rows {
        let _ = write!(out, "{s:.16e}");
        for c in y {
            let _ = write!(out, ",{c:.16e}");
        }
        let _ = writeln!(out, ",{m:.16e}");
    }
    Ok(out)
}

fn cutoff_csv(report: &RunReport) -> std::result::Result<String, String> {
    let spec = report
        .config
        .approximation
        .as_ref()
        .ok_or("no approximation section configured")?;
    let profile = build_cutoff_profile(spec.mu).map_err(|e| e.to_string())?;
    Ok(profile.to_csv(501))
}
