//! Degradation analytics over per-model, per-condition metric tables.
//!
//! Degradation is the signed percentage change of a metric against its
//! no-attack value. `D_S` averages it over models within one subcategory;
//! `D_M` averages it over the subcategories of one environmental group for
//! one model.

mod report;
mod table;
mod ttest;

pub use report::{emit_report, read_dm_csv, read_ds_csv, render_dm_text, render_ds_text};
pub use table::{load_metrics_csv, parse_metrics_csv, MetricKind, MetricRow, MetricsTable};
pub use ttest::{load_sample_csv, ttest_two_sample, ttest_with, TTestKind, TTestResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::SeverityLevel;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no-attack baseline is {0}; degradation needs a positive baseline")]
    ZeroBaseline(f64),
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("duplicate row for ({group}, {subcategory}, {model}, {metric}) at line {line}")]
    DuplicateKey {
        group: String,
        subcategory: String,
        model: String,
        metric: MetricKind,
        line: u64,
    },
    #[error("{group}/{subcategory} has no {metric} row for model {model}")]
    MissingModel {
        group: String,
        subcategory: String,
        model: String,
        metric: MetricKind,
    },
    #[error("no {0} rows in the metrics table")]
    EmptyMetric(MetricKind),
    #[error("each t-test sample needs at least 2 values (got {0} and {1})")]
    InsufficientData(usize, usize),
    #[error("paired t-test needs equal-length samples (got {0} and {1})")]
    UnpairedLengths(usize, usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// The three attacked conditions, in table order.
pub const ATTACKED: [SeverityLevel; 3] = [
    SeverityLevel::Mild,
    SeverityLevel::Moderate,
    SeverityLevel::Severe,
];

/// `100 * (attacked - no_attack) / no_attack`; negative means a loss.
pub fn degradation(no_attack: f64, attacked: f64) -> Result<f64, StatsError> {
    if no_attack <= 0.0 || !no_attack.is_finite() {
        return Err(StatsError::ZeroBaseline(no_attack));
    }
    Ok(100.0 * (attacked - no_attack) / no_attack)
}

/// Per-row degradation for mild, moderate, severe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationCell {
    pub group: String,
    pub subcategory: String,
    pub model: String,
    pub metric: MetricKind,
    pub percent: [f64; 3],
}

/// `D_S` for one subcategory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DsRow {
    pub metric: MetricKind,
    pub group: String,
    pub subcategory: String,
    pub percent: [f64; 3],
}

/// `D_M` for one (model, group).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmRow {
    pub metric: MetricKind,
    pub model: String,
    pub group: String,
    pub percent: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationReport {
    pub metric: MetricKind,
    pub cells: Vec<DegradationCell>,
    pub ds: Vec<DsRow>,
    pub dm: Vec<DmRow>,
}

impl DegradationReport {
    pub fn build(table: &MetricsTable, metric: MetricKind) -> Result<Self, StatsError> {
        Ok(Self {
            metric,
            cells: degradation_cells(table, metric)?,
            ds: compute_ds(table, metric)?,
            dm: compute_dm(table, metric)?,
        })
    }
}

pub fn degradation_cells(
    table: &MetricsTable,
    metric: MetricKind,
) -> Result<Vec<DegradationCell>, StatsError> {
    table
        .rows_for(metric)
        .map(|row| {
            let mut percent = [0.0; 3];
            for (p, attacked) in percent.iter_mut().zip(row.attacked()) {
                *p = degradation(row.no_attack, attacked)?;
            }
            Ok(DegradationCell {
                group: row.group.clone(),
                subcategory: row.subcategory.clone(),
                model: row.model.clone(),
                metric,
                percent,
            })
        })
        .collect()
}

fn mean3<'a>(cells: impl Iterator<Item = &'a DegradationCell>) -> [f64; 3] {
    let mut sum = [0.0; 3];
    let mut n = 0usize;
    for c in cells {
        for (s, p) in sum.iter_mut().zip(c.percent) {
            *s += p;
        }
        n += 1;
    }
    sum.map(|s| s / n as f64)
}

/// Checks that every subcategory carries every model seen for `metric`.
fn check_models(table: &MetricsTable, metric: MetricKind) -> Result<(), StatsError> {
    let models = table.models(metric);
    if models.is_empty() {
        return Err(StatsError::EmptyMetric(metric));
    }
    for (group, sub) in table.subcategories(metric) {
        for model in &models {
            if table.get(&group, &sub, model, metric).is_none() {
                return Err(StatsError::MissingModel {
                    group,
                    subcategory: sub,
                    model: model.clone(),
                    metric,
                });
            }
        }
    }
    Ok(())
}

/// Mean degradation over models, per subcategory, in table order.
pub fn compute_ds(table: &MetricsTable, metric: MetricKind) -> Result<Vec<DsRow>, StatsError> {
    check_models(table, metric)?;
    let cells = degradation_cells(table, metric)?;
    Ok(table
        .subcategories(metric)
        .into_iter()
        .map(|(group, subcategory)| {
            let percent = mean3(
                cells
                    .iter()
                    .filter(|c| c.group == group && c.subcategory == subcategory),
            );
            DsRow {
                metric,
                group,
                subcategory,
                percent,
            }
        })
        .collect())
}

/// Mean degradation over a group's subcategories, per model, in table order.
pub fn compute_dm(table: &MetricsTable, metric: MetricKind) -> Result<Vec<DmRow>, StatsError> {
    check_models(table, metric)?;
    let cells = degradation_cells(table, metric)?;
    let mut out = Vec::new();
    for model in table.models(metric) {
        for group in table.groups(metric) {
            let percent = mean3(cells.iter().filter(|c| c.model == model && c.group == group));
            out.push(DmRow {
                metric,
                model: model.clone(),
                group,
                percent,
            });
        }
    }
    Ok(out)
}
