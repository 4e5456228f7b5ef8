//! CSV and JSON artifacts for error tables, rate fits, moment probes and
//! terminal-state dumps.
//!
//! CSV files start with `#`-prefixed metadata lines followed by a header and
//! one row per record; floats are written with 17 significant digits. All
//! writers are pure functions of their inputs, so identical runs produce
//! identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{ErrorTable, MomentTable, RateFit};
use crate::schemes::PathOutcome;

pub const ERROR_TABLE_HEADER: &str = "N,rms_error,std_error,explosions";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::parameter(
                "format",
                format!("unknown format `{other}` (expected csv or json)"),
            )),
        }
    }
}

/// Float formatting shared by every CSV writer.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `# key: value` lines.
pub fn metadata_lines(meta: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}: {v}");
    }
    out
}

/// Error table plus the optional rate fit, as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Resolved run configuration, echoed for reproducibility.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<serde_json::Value>,
    #[serde(flatten)]
    pub table: ErrorTable,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rate_fit: Option<RateFit>,
}

impl RateReport {
    pub fn new(table: ErrorTable) -> Self {
        Self {
            config: None,
            table,
            rate_fit: None,
        }
    }

    pub fn with_fit(mut self, fit: RateFit) -> Self {
        self.rate_fit = Some(fit);
        self
    }

    pub fn with_config(mut self, config: serde_json::Value) -> Self {
        self.config = Some(config);
        self
    }
}

fn table_metadata(table: &ErrorTable) -> Vec<(String, String)> {
    vec![
        ("problem".into(), table.problem.clone()),
        ("scheme".into(), table.scheme.to_string()),
        ("taming".into(), table.taming.to_string()),
        ("seed".into(), table.master_seed.to_string()),
        ("N_ref".into(), table.n_ref.to_string()),
        ("paths".into(), table.paths.to_string()),
    ]
}

/// Error table as CSV; `extra` metadata lines follow the table's own.
pub fn error_table_csv(
    table: &ErrorTable,
    fit: Option<&RateFit>,
    extra: &[(String, String)],
) -> String {
    let mut meta = table_metadata(table);
    if let Some(fit) = fit {
        meta.push(("rate_fit.slope".into(), fmt_f64(fit.slope)));
        meta.push(("rate_fit.intercept".into(), fmt_f64(fit.intercept)));
        meta.push(("rate_fit.r_squared".into(), fmt_f64(fit.r_squared)));
        meta.push(("rate_fit.points".into(), fit.points.to_string()));
    }
    meta.extend_from_slice(extra);
    let mut out = metadata_lines(&meta);
    out.push_str(ERROR_TABLE_HEADER);
    out.push('\n');
    for row in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.n,
            fmt_f64(row.rms_error),
            fmt_f64(row.std_error),
            row.explosions
        );
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Parses the `#` metadata and data rows of an error-table CSV.
pub fn parse_error_table_csv(text: &str) -> Result<Vec<(usize, f64, f64, usize)>> {
    let bad = |line: &str| Error::parameter("csv", format!("malformed row `{line}`"));
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    match lines.next() {
        Some(ERROR_TABLE_HEADER) => {}
        other => {
            return Err(Error::parameter(
                "csv",
                format!("unexpected header {other:?}"),
            ));
        }
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad(line));
            }
            Ok((
                f[0].parse().map_err(|_| bad(line))?,
                f[1].parse().map_err(|_| bad(line))?,
                f[2].parse().map_err(|_| bad(line))?,
                f[3].parse().map_err(|_| bad(line))?,
            ))
        })
        .collect()
}

/// Two-column `log₂ N, log₂ rms_error` file for plotting.
pub fn log2_dat(table: &ErrorTable, extra: &[(String, String)]) -> String {
    let mut meta = table_metadata(table);
    meta.extend_from_slice(extra);
    let mut out = metadata_lines(&meta);
    out.push_str("# log2(N) log2(rms_error)\n");
    for row in table.rows.iter().filter(|r| r.rms_error > 0.0) {
        let _ = writeln!(
            out,
            "{} {}",
            fmt_f64((row.n as f64).log2()),
            fmt_f64(row.rms_error.log2())
        );
    }
    out
}

pub fn moment_table_csv(table: &MomentTable, extra: &[(String, String)]) -> String {
    let mut meta = vec![
        ("problem".into(), table.problem.clone()),
        ("scheme".into(), table.scheme.to_string()),
        ("taming".into(), table.taming.to_string()),
        ("p".into(), table.p.to_string()),
        ("seed".into(), table.master_seed.to_string()),
        ("paths".into(), table.paths.to_string()),
    ];
    meta.extend_from_slice(extra);
    let mut out = metadata_lines(&meta);
    out.push_str("N,moment,explosions\n");
    for row in &table.rows {
        let _ = writeln!(out, "{},{},{}", row.n, fmt_f64(row.moment), row.explosions);
    }
    out
}

/// One row per path: index, explosion step (empty if completed), then the
/// terminal state components (empty if exploded).
pub fn terminal_states_csv(
    outcomes: &[PathOutcome],
    dim: usize,
    meta: &[(String, String)],
) -> String {
    let explosions = outcomes.iter().filter(|o| o.exploded()).count();
    let mut out = metadata_lines(meta);
    let _ = writeln!(out, "# explosions: {explosions}");
    out.push_str("path,exploded_at");
    for i in 0..dim {
        let _ = write!(out, ",x{i}");
    }
    out.push('\n');
    for (p, outcome) in outcomes.iter().enumerate() {
        match outcome {
            PathOutcome::Completed { terminal, .. } => {
                let _ = write!(out, "{p},");
                for v in terminal {
                    let _ = write!(out, ",{}", fmt_f64(*v));
                }
            }
            PathOutcome::Exploded { step } => {
                let _ = write!(out, "{p},{step}");
                for _ in 0..dim {
                    out.push(',');
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Long-format trajectories: `path,step,x0,…` for every completed path that
/// recorded one.
pub fn trajectories_csv(outcomes: &[PathOutcome], dim: usize, meta: &[(String, String)]) -> String {
    let mut out = metadata_lines(meta);
    out.push_str("path,step");
    for i in 0..dim {
        let _ = write!(out, ",x{i}");
    }
    out.push('\n');
    for (p, outcome) in outcomes.iter().enumerate() {
        if let PathOutcome::Completed {
            trajectory: Some(states),
            ..
        } = outcome
        {
            for (k, state) in states.iter().enumerate() {
                let _ = write!(out, "{p},{k}");
                for v in state {
                    let _ = write!(out, ",{}", fmt_f64(*v));
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a rate report in the requested format.
pub fn write_results(
    report: &RateReport,
    format: Format,
    destination: &Path,
    extra: &[(String, String)],
) -> Result<()> {
    let contents = match format {
        Format::Csv => error_table_csv(&report.table, report.rate_fit.as_ref(), extra),
        Format::Json => to_json(report)?,
    };
    write_text(destination, &contents)
}

pub fn read_rate_report(path: &Path) -> Result<RateReport> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}
