//! Cross-seed aggregation of per-round CSV logs into a long-format plot
//! file: one `(metric, t, mean, lo, hi)` row per metric per round, with the
//! band at two sample standard deviations — ready for any plotting tool.

use std::path::{Path, PathBuf};

use crate::harness::runner::CSV_SCHEMA_LINE;
use crate::harness::stats::mean_sd;
use crate::harness::HarnessError;

pub const PLOT_CSV_SCHEMA_LINE: &str = "# slate-glm plot csv schema v1";

/// Metrics aggregated for every round.
const ALWAYS_METRICS: [&str; 4] =
    ["regret_increment", "cumulative_regret", "pull_ns", "update_ns"];

struct ParsedCsv {
    path: PathBuf,
    header: Vec<String>,
    /// Cell text per row, `rows[r][c]`; empty string for unsampled cells.
    rows: Vec<Vec<String>>,
}

fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.to_path_buf(), source }
}

fn schema_err(msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::Runtime(format!("schema mismatch: {msg}"))
}

fn parse_csv(path: &Path) -> Result<ParsedCsv, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    let schema = lines.next().unwrap_or_default();
    if schema != CSV_SCHEMA_LINE {
        return Err(schema_err(format!(
            "{}: expected schema line `{CSV_SCHEMA_LINE}`, found `{schema}`",
            path.display()
        )));
    }
    let header_line = lines
        .next()
        .ok_or_else(|| schema_err(format!("{}: missing header row", path.display())))?;
    let header: Vec<String> = header_line.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(str::to_string).collect();
        if cells.len() != header.len() {
            return Err(schema_err(format!(
                "{}: row {} has {} fields, header has {}",
                path.display(),
                i + 1,
                cells.len(),
                header.len()
            )));
        }
        rows.push(cells);
    }
    Ok(ParsedCsv { path: path.to_path_buf(), header, rows })
}

fn column_index(csv: &ParsedCsv, name: &str) -> Result<usize, HarnessError> {
    csv.header.iter().position(|h| h == name).ok_or_else(|| {
        schema_err(format!("{}: missing column `{name}`", csv.path.display()))
    })
}

fn parse_cell(csv: &ParsedCsv, row: usize, col: usize) -> Result<f64, HarnessError> {
    let cell = &csv.rows[row][col];
    cell.parse::<f64>().map_err(|_| {
        schema_err(format!(
            "{}: column `{}` row {} is not numeric: `{cell}`",
            csv.path.display(),
            csv.header[col],
            row + 1
        ))
    })
}

/// Merge per-seed CSVs into the long-format plot CSV at `out`.
pub fn emit_plot_data(paths: &[PathBuf], out: &Path) -> Result<(), HarnessError> {
    let text = render_plot_data(paths)?;
    std::fs::write(out, text).map_err(|e| io_err(out, e))
}

pub fn render_plot_data(paths: &[PathBuf]) -> Result<String, HarnessError> {
    if paths.is_empty() {
        return Err(HarnessError::Config(vec![
            "aggregate: need at least one input CSV".to_string(),
        ]));
    }
    let csvs: Vec<ParsedCsv> = paths.iter().map(|p| parse_csv(p)).collect::<Result<_, _>>()?;

    let first = &csvs[0];
    for other in &csvs[1..] {
        if other.header != first.header {
            let col = first
                .header
                .iter()
                .zip(&other.header)
                .find(|(a, b)| a != b)
                .map(|(a, b)| format!("`{a}` vs `{b}`"))
                .unwrap_or_else(|| "column counts differ".to_string());
            return Err(schema_err(format!(
                "{} and {} disagree on columns: {col}",
                first.path.display(),
                other.path.display()
            )));
        }
        if other.rows.len() != first.rows.len() {
            return Err(schema_err(format!(
                "{} has {} rounds, {} has {}",
                first.path.display(),
                first.rows.len(),
                other.path.display(),
                other.rows.len()
            )));
        }
    }

    let t_col = column_index(first, "t")?;
    for csv in &csvs {
        for row in 0..csv.rows.len() {
            if csv.rows[row][t_col] != first.rows[row][t_col] {
                return Err(schema_err(format!(
                    "{}: column `t` row {} is `{}`, expected `{}` as in {}",
                    csv.path.display(),
                    row + 1,
                    csv.rows[row][t_col],
                    first.rows[row][t_col],
                    first.path.display()
                )));
            }
        }
    }

    let mut metrics: Vec<(String, usize)> = Vec::new();
    for name in ALWAYS_METRICS {
        metrics.push((name.to_string(), column_index(first, name)?));
    }
    for (i, name) in first.header.iter().enumerate() {
        if name.starts_with("min_eig_slot_") {
            metrics.push((name.clone(), i));
        }
    }

    let mut out = String::new();
    out.push_str(PLOT_CSV_SCHEMA_LINE);
    out.push('\n');
    out.push_str("metric,t,mean,lo,hi\n");
    let mut vals = Vec::with_capacity(csvs.len());
    for (name, col) in &metrics {
        let optional = name.starts_with("min_eig_slot_");
        for row in 0..first.rows.len() {
            if optional && csvs.iter().any(|c| c.rows[row][*col].is_empty()) {
                continue;
            }
            vals.clear();
            for csv in &csvs {
                vals.push(parse_cell(csv, row, *col)?);
            }
            let (mean, sd) = mean_sd(&vals);
            let t = &first.rows[row][t_col];
            out.push_str(&format!(
                "{name},{t},{mean},{lo},{hi}\n",
                lo = mean - 2.0 * sd,
                hi = mean + 2.0 * sd
            ));
        }
    }
    Ok(out)
}
