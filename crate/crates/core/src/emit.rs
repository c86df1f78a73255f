//! Result files.
//!
//! CSV files open with `#` comment lines that carry the effective
//! configuration (as TOML) and the seed; JSON files carry the same under
//! `config` and `seed`. Numbers are written with 9 decimals so identical
//! inputs give byte-identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flate2::write::GzEncoder;
use flate2::Compression;
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::{ConfigError, EmitError};
use crate::events::{write_json_lines, Event};
use crate::experiment::{RunKey, StylizedFacts, SweepTable, ValidationReport};
use crate::metrics::MetricsRow;
use crate::num::fixed9;
use crate::params::Mechanism;
use crate::scheduler::RunOutput;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(ConfigError::invalid("format", format!("expected `csv` or `json`, got `{other}`"))),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Provenance written into every file.
#[derive(Debug, Clone, Copy)]
pub struct Header<'a> {
    pub config: &'a Config,
    pub seed: u64,
}

const CONFIG_MARK: &str = "# config:";

impl Header<'_> {
    fn csv(&self) -> String {
        let mut s = format!("# crisis-abm {}\n# seed = {}\n{CONFIG_MARK}\n", env!("CARGO_PKG_VERSION"), self.seed);
        for line in self.config.to_toml_string().lines() {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
        s
    }

    fn json(&self) -> Value {
        json!({
            "generator": format!("crisis-abm {}", env!("CARGO_PKG_VERSION")),
            "seed": self.seed,
            "config": self.config.to_toml_string(),
        })
    }
}

/// Recovers the configuration embedded in a CSV file's comment header.
pub fn read_csv_header(text: &str) -> Result<Config, ConfigError> {
    let mut lines = text.lines().skip_while(|l| *l != CONFIG_MARK);
    if lines.next().is_none() {
        return Err(ConfigError::Parse("no embedded configuration".into()));
    }
    let toml: String = lines
        .take_while(|l| l.starts_with('#'))
        .map(|l| format!("{}\n", l.strip_prefix("# ").unwrap_or(l.trim_start_matches('#'))))
        .collect();
    Config::from_toml_str(&toml)
}

/// Recovers the configuration embedded in a JSON result file.
pub fn read_json_header(text: &str) -> Result<Config, ConfigError> {
    let v: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let toml = v["meta"]["config"].as_str().ok_or_else(|| ConfigError::Parse("no embedded configuration".into()))?;
    Config::from_toml_str(toml)
}

/// Rounds to the 9 decimals used in every file.
fn r9(x: f64) -> f64 {
    let y = (x * 1e9).round() / 1e9;
    if y == 0.0 {
        0.0
    } else {
        y
    }
}

fn f9(x: f64) -> String {
    fixed9(x)
}

fn opt9(x: Option<f64>) -> String {
    x.map(f9).unwrap_or_default()
}

fn write_file(path: &Path, contents: &[u8]) -> Result<PathBuf, EmitError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| EmitError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, contents).map_err(|source| EmitError::Io { path: path.to_path_buf(), source })?;
    Ok(path.to_path_buf())
}

fn json_bytes(v: &Value) -> Result<Vec<u8>, EmitError> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

fn row_json(r: &MetricsRow<f64>) -> Value {
    json!({
        "t": r.t,
        "Y": r9(r.output),
        "U": r9(r.unemployment),
        "pi": r9(r.inflation),
        "CV": r9(r.credit_volume),
        "i_n": r9(r.nominal_rate),
        "n_banks": r.n_banks,
        "n_insolvencies": r.insolvencies.len(),
        "M_b": r.insolvencies.iter().map(|m| r9(*m)).collect::<Vec<_>>(),
        "p_bar": r9(r.avg_price),
    })
}

/// Time series of one run as CSV text, header included.
pub fn run_csv(header: &Header, output: &RunOutput<f64>) -> String {
    let mut s = header.csv();
    s.push_str(MetricsRow::<f64>::CSV_HEADER);
    s.push('\n');
    for r in &output.rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

fn run_json(header: &Header, mechanism: Mechanism, r0: f64, output: &RunOutput<f64>) -> Value {
    json!({
        "meta": header.json(),
        "mechanism": mechanism,
        "r0": r9(r0),
        "termination": output.termination,
        "t_f": output.t_f,
        "rows": output.rows.iter().map(row_json).collect::<Vec<_>>(),
    })
}

/// Writes `<stem>.csv` or `<stem>.json` for one run.
pub fn write_run(
    dir: &Path,
    stem: &str,
    header: &Header,
    mechanism: Mechanism,
    r0: f64,
    output: &RunOutput<f64>,
    format: Format,
) -> Result<PathBuf, EmitError> {
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        Format::Csv => write_file(&path, run_csv(header, output).as_bytes()),
        Format::Json => write_file(&path, &json_bytes(&run_json(header, mechanism, r0, output))?),
    }
}

/// Writes the event log as JSON lines; the first line holds the header.
pub fn write_events(path: &Path, header: &Header, events: &[Event]) -> Result<PathBuf, EmitError> {
    let mut buf = serde_json::to_vec(&json!({ "meta": header.json() }))?;
    buf.push(b'\n');
    write_json_lines(&mut buf, events).map_err(|source| EmitError::Io { path: path.to_path_buf(), source })?;
    write_file(path, &buf)
}

pub const SWEEP_CSV_HEADER: &str = "r0,mechanism,U,Y,CV,i_n,M,dU,dY,dCV,di_n,dM,se_U,se_Y,se_CV,se_i_n,se_M,n_runs,n_flagged";

pub fn sweep_csv(header: &Header, table: &SweepTable) -> String {
    let mut s = header.csv();
    s.push_str(SWEEP_CSV_HEADER);
    s.push('\n');
    for c in &table.cells {
        let d = &c.delta;
        let fields = [
            f9(c.r0),
            c.mechanism.to_string(),
            f9(c.u.mean),
            f9(c.y.mean),
            f9(c.cv.mean),
            f9(c.i_n.mean),
            f9(c.m.mean),
            f9(d.u),
            f9(d.y),
            f9(d.cv),
            f9(d.i_n),
            f9(d.m),
            opt9(c.u.stderr),
            opt9(c.y.stderr),
            opt9(c.cv.stderr),
            opt9(c.i_n.stderr),
            opt9(c.m.stderr),
            c.n_runs.to_string(),
            c.n_flagged.to_string(),
        ];
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

fn sweep_json(header: &Header, table: &SweepTable) -> Value {
    let est = |e: crate::experiment::Estimate| json!({ "mean": r9(e.mean), "stderr": e.stderr.map(r9) });
    let cells: Vec<Value> = table
        .cells
        .iter()
        .map(|c| {
            json!({
                "r0": r9(c.r0),
                "mechanism": c.mechanism,
                "n_runs": c.n_runs,
                "n_flagged": c.n_flagged,
                "U": est(c.u),
                "Y": est(c.y),
                "CV": est(c.cv),
                "i_n": est(c.i_n),
                "M": est(c.m),
                "delta": {
                    "U": r9(c.delta.u), "Y": r9(c.delta.y), "CV": r9(c.delta.cv),
                    "i_n": r9(c.delta.i_n), "M": r9(c.delta.m),
                },
            })
        })
        .collect();
    let runs: Vec<Value> = table
        .runs
        .iter()
        .map(|r| {
            json!({
                "r0": r9(r.key.r0),
                "mechanism": r.key.mechanism,
                "seed": r.key.seed,
                "first_crisis": r.first_crisis,
                "last_step": r.last_step,
                "termination": r.termination,
                "paired_t_f": r.paired_t_f,
                "n_insolvencies": r.n_insolvencies,
                "window": r.window,
                "observables": r.observables.map(|o| json!({
                    "U": r9(o.u), "Y": r9(o.y), "CV": r9(o.cv), "i_n": r9(o.i_n), "M": r9(o.m),
                })),
            })
        })
        .collect();
    json!({ "meta": header.json(), "cells": cells, "runs": runs })
}

pub fn write_sweep(dir: &Path, header: &Header, table: &SweepTable, format: Format) -> Result<PathBuf, EmitError> {
    let path = dir.join(format!("sweep.{}", format.extension()));
    match format {
        Format::Csv => write_file(&path, sweep_csv(header, table).as_bytes()),
        Format::Json => write_file(&path, &json_bytes(&sweep_json(header, table))?),
    }
}

/// A two- or three-column plot panel.
struct Panel {
    name: String,
    columns: &'static str,
    lines: Vec<String>,
}

fn write_panels(dir: &Path, header: &Header, panels: Vec<Panel>) -> Result<Vec<PathBuf>, EmitError> {
    panels
        .into_iter()
        .map(|p| {
            let mut s = header.csv();
            s.push_str(p.columns);
            s.push('\n');
            for l in p.lines {
                s.push_str(&l);
                s.push('\n');
            }
            write_file(&dir.join(format!("{}.csv", p.name)), s.as_bytes())
        })
        .collect()
}

/// One panel per observable: `x = r0`, `y` = ensemble mean, one series per
/// mechanism, with the standard error as a fourth column.
pub fn write_sweep_plot_data(dir: &Path, header: &Header, table: &SweepTable) -> Result<Vec<PathBuf>, EmitError> {
    use crate::experiment::Observable;
    let panels = Observable::ALL
        .iter()
        .map(|&o| Panel {
            name: format!("plot_sweep_{}", o.name()),
            columns: "x,y,series,stderr",
            lines: table
                .cells
                .iter()
                .map(|c| {
                    let e = c.estimate(o);
                    format!("{},{},{},{}", f9(c.r0), f9(e.mean), c.mechanism, opt9(e.stderr))
                })
                .collect(),
        })
        .collect();
    write_panels(dir, header, panels)
}

/// Output over time for several runs sharing a seed.
pub fn write_compare_plot_data(
    dir: &Path,
    header: &Header,
    runs: &[(Mechanism, &RunOutput<f64>)],
) -> Result<Vec<PathBuf>, EmitError> {
    let mut lines = Vec::new();
    let mut crises = Vec::new();
    for (m, out) in runs {
        for r in &out.rows {
            lines.push(format!("{},{},{}", r.t, f9(r.output), m));
            if !r.insolvencies.is_empty() {
                crises.push(format!("{},{},{}", r.t, r.insolvencies.len(), m));
            }
        }
    }
    let panels = vec![
        Panel { name: "plot_output".into(), columns: "x,y,series", lines },
        Panel { name: "plot_crises".into(), columns: "x,y,series", lines: crises },
    ];
    write_panels(dir, header, panels)
}

/// Rank-size, Okun and Phillips panels of one seed's pre-crisis window.
pub fn write_validation_plot_data(dir: &Path, header: &Header, facts: &StylizedFacts) -> Result<Vec<PathBuf>, EmitError> {
    let mut sorted: Vec<f64> = facts.sizes.iter().copied().filter(|s| *s > 0.0).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let zipf = sorted.iter().enumerate().map(|(i, s)| format!("{},{}", f9(s.ln()), f9(((i + 1) as f64).ln()))).collect();
    let okun = facts.series.windows(2).map(|w| format!("{},{}", f9(w[1].0 - w[0].0), f9(w[1].1 - w[0].1))).collect();
    let phillips = facts.series.iter().map(|r| format!("{},{}", f9(r.0), f9(r.2))).collect();
    let panels = vec![
        Panel { name: "plot_zipf".into(), columns: "x,y", lines: zipf },
        Panel { name: "plot_okun".into(), columns: "x,y", lines: okun },
        Panel { name: "plot_phillips".into(), columns: "x,y", lines: phillips },
    ];
    write_panels(dir, header, panels)
}

fn fit_fields(f: &Result<crate::stats::OlsFit, crate::error::StatsError>) -> [String; 2] {
    match f {
        Ok(f) => [f9(f.slope), f9(f.p_value)],
        Err(_) => [String::new(), String::new()],
    }
}

fn fact_line(f: &StylizedFacts) -> String {
    let [os, op] = fit_fields(&f.okun);
    let [ps, pp] = fit_fields(&f.phillips);
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        f.seed,
        f.first_crisis.map(|t| t.to_string()).unwrap_or_default(),
        f.window_len,
        f.zipf.as_ref().map(|z| f9(*z)).unwrap_or_default(),
        os,
        op,
        ps,
        pp,
        u8::from(f.zipf_holds()),
        u8::from(f.okun_holds()),
        u8::from(f.phillips_holds()),
    )
}

pub const VALIDATION_CSV_HEADER: &str =
    "seed,first_crisis,window,zipf,okun_slope,okun_p,phillips_slope,phillips_p,zipf_ok,okun_ok,phillips_ok";

pub fn write_validation(dir: &Path, header: &Header, report: &ValidationReport) -> Result<PathBuf, EmitError> {
    let mut s = header.csv();
    s.push_str(VALIDATION_CSV_HEADER);
    s.push('\n');
    for f in &report.facts {
        s.push_str(&fact_line(f));
        s.push('\n');
    }
    write_file(&dir.join("validate.csv"), s.as_bytes())
}

/// File name of an archived run.
pub fn archive_name(key: &RunKey) -> String {
    format!("r0-{:.6}_{}_seed-{}.csv.gz", key.r0, key.mechanism, key.seed)
}

/// Writes one run's series as gzip-compressed CSV under `dir`.
pub fn archive_run(dir: &Path, header: &Header, key: &RunKey, output: &RunOutput<f64>) -> Result<PathBuf, EmitError> {
    let path = dir.join(archive_name(key));
    let io = |source| EmitError::Io { path: path.clone(), source };
    let mut gz = GzEncoder::new(Vec::new(), Compression::default());
    let header = Header { config: header.config, seed: key.seed };
    gz.write_all(run_csv(&header, output).as_bytes()).map_err(io)?;
    let bytes = gz.finish().map_err(io)?;
    write_file(&path, &bytes)
}
