use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{DegradationReport, DmRow, DsRow, StatsError};

const DS_HEADER: [&str; 6] = ["metric", "group", "subcategory", "mild", "moderate", "severe"];
const DM_HEADER: [&str; 6] = ["metric", "model", "group", "mild", "moderate", "severe"];

fn csv_err(e: csv::Error) -> StatsError {
    StatsError::Io(std::io::Error::other(e))
}

fn write_rows<'a>(
    path: &Path,
    header: [&str; 6],
    rows: impl Iterator<Item = [String; 6]> + 'a,
) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Table with a left-aligned label column block and right-aligned numbers.
fn aligned(title: &str, head: [&str; 2], rows: &[(String, String, [f64; 3])]) -> String {
    let w0 = rows.iter().map(|r| r.0.len()).chain([head[0].len()]).max().unwrap_or(0);
    let w1 = rows.iter().map(|r| r.1.len()).chain([head[1].len()]).max().unwrap_or(0);
    let cells: Vec<[String; 3]> = rows
        .iter()
        .map(|r| r.2.map(|v| format!("{v:.2}%")))
        .collect();
    let wn = cells
        .iter()
        .flatten()
        .map(String::len)
        .chain(["moderate".len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "{:<w0$}  {:<w1$}  {:>wn$}  {:>wn$}  {:>wn$}",
        head[0], head[1], "mild", "moderate", "severe"
    );
    let _ = writeln!(out, "{}", "-".repeat(w0 + w1 + 3 * wn + 8));
    let mut last = "";
    for ((a, b, _), c) in rows.iter().zip(&cells) {
        let shown = if a == last { "" } else { a.as_str() };
        last = a;
        let _ = writeln!(
            out,
            "{shown:<w0$}  {b:<w1$}  {:>wn$}  {:>wn$}  {:>wn$}",
            c[0], c[1], c[2]
        );
    }
    out
}

pub fn render_ds_text(reports: &[DegradationReport]) -> String {
    reports
        .iter()
        .map(|r| {
            let rows: Vec<_> = r
                .ds
                .iter()
                .map(|d| (d.group.clone(), d.subcategory.clone(), d.percent))
                .collect();
            aligned(&format!("D_S, {}", r.metric), ["group", "subcategory"], &rows)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_dm_text(reports: &[DegradationReport]) -> String {
    reports
        .iter()
        .map(|r| {
            let rows: Vec<_> = r
                .dm
                .iter()
                .map(|d| (d.model.clone(), d.group.clone(), d.percent))
                .collect();
            aligned(&format!("D_M, {}", r.metric), ["model", "group"], &rows)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Writes `ds_report.csv`, `dm_report.csv` (shortest round-trip float
/// formatting) and their `.txt` renderings into `dir`. Returns the paths
/// written.
pub fn emit_report(reports: &[DegradationReport], dir: &Path) -> Result<Vec<PathBuf>, StatsError> {
    fs::create_dir_all(dir)?;
    let ds_csv = dir.join("ds_report.csv");
    let dm_csv = dir.join("dm_report.csv");
    write_rows(
        &ds_csv,
        DS_HEADER,
        reports.iter().flat_map(|r| r.ds.iter()).map(|d| {
            [
                d.metric.to_string(),
                d.group.clone(),
                d.subcategory.clone(),
                d.percent[0].to_string(),
                d.percent[1].to_string(),
                d.percent[2].to_string(),
            ]
        }),
    )?;
    write_rows(
        &dm_csv,
        DM_HEADER,
        reports.iter().flat_map(|r| r.dm.iter()).map(|d| {
            [
                d.metric.to_string(),
                d.model.clone(),
                d.group.clone(),
                d.percent[0].to_string(),
                d.percent[1].to_string(),
                d.percent[2].to_string(),
            ]
        }),
    )?;
    let ds_txt = dir.join("ds_report.txt");
    let dm_txt = dir.join("dm_report.txt");
    fs::write(&ds_txt, render_ds_text(reports))?;
    fs::write(&dm_txt, render_dm_text(reports))?;
    Ok(vec![ds_csv, dm_csv, ds_txt, dm_txt])
}

/// Line number, the three label fields and the three percentages.
type RawRow = (u64, Vec<String>, [f64; 3]);

fn read_rows(path: &Path, header: [&str; 6]) -> Result<Vec<RawRow>, StatsError> {
    let origin = path.display().to_string();
    let perr = |line: u64, message: String| StatsError::Parse {
        path: origin.clone(),
        line,
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let got = r.headers().map_err(csv_err)?.clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(perr(1, format!("header must be `{}`", header.join(","))));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| perr(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut nums = [0.0; 3];
        for (k, n) in nums.iter_mut().enumerate() {
            *n = rec[3 + k]
                .parse()
                .map_err(|_| perr(line, format!("{} is not a number", header[3 + k])))?;
        }
        out.push((line, rec.iter().take(3).map(str::to_owned).collect(), nums));
    }
    Ok(out)
}

pub fn read_ds_csv(path: &Path) -> Result<Vec<DsRow>, StatsError> {
    read_rows(path, DS_HEADER)?
        .into_iter()
        .map(|(line, f, percent)| {
            Ok(DsRow {
                metric: f[0].parse().map_err(|message| StatsError::Parse {
                    path: path.display().to_string(),
                    line,
                    message,
                })?,
                group: f[1].clone(),
                subcategory: f[2].clone(),
                percent,
            })
        })
        .collect()
}

pub fn read_dm_csv(path: &Path) -> Result<Vec<DmRow>, StatsError> {
    read_rows(path, DM_HEADER)?
        .into_iter()
        .map(|(line, f, percent)| {
            Ok(DmRow {
                metric: f[0].parse().map_err(|message| StatsError::Parse {
                    path: path.display().to_string(),
                    line,
                    message,
                })?,
                model: f[1].clone(),
                group: f[2].clone(),
                percent,
            })
        })
        .collect()
}
