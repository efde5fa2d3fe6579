use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::StatsError;

pub const HEADER: [&str; 8] = [
    "group",
    "subcategory",
    "model",
    "metric",
    "no_attack",
    "mild",
    "moderate",
    "severe",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "mAP50")]
    MAp50,
    #[serde(rename = "mAP75")]
    MAp75,
    #[serde(rename = "mAP50_95")]
    MAp50_95,
    #[serde(rename = "mIoU")]
    MIoU,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [Self::MAp50, Self::MAp75, Self::MAp50_95, Self::MIoU];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MAp50 => "mAP50",
            Self::MAp75 => "mAP75",
            Self::MAp50_95 => "mAP50_95",
            Self::MIoU => "mIoU",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown metric {s:?} (expected mAP50, mAP75, mAP50_95 or mIoU)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub group: String,
    pub subcategory: String,
    pub model: String,
    pub metric: MetricKind,
    pub no_attack: f64,
    pub mild: f64,
    pub moderate: f64,
    pub severe: f64,
}

impl MetricRow {
    pub fn attacked(&self) -> [f64; 3] {
        [self.mild, self.moderate, self.severe]
    }

    fn key(&self) -> (String, String, String, MetricKind) {
        (
            self.group.clone(),
            self.subcategory.clone(),
            self.model.clone(),
            self.metric,
        )
    }
}

type Key = (String, String, String, MetricKind);

/// Metric rows in file order, unique on (group, subcategory, model, metric).
#[derive(Clone, Debug, Default)]
pub struct MetricsTable {
    rows: Vec<MetricRow>,
    index: HashMap<Key, usize>,
}

impl PartialEq for MetricsTable {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
    }
}

impl MetricsTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a row; `line` is only used for the error message.
    pub fn push(&mut self, row: MetricRow, line: u64) -> Result<(), StatsError> {
        let key = row.key();
        if self.index.contains_key(&key) {
            return Err(StatsError::DuplicateKey {
                group: key.0,
                subcategory: key.1,
                model: key.2,
                metric: key.3,
                line,
            });
        }
        self.index.insert(key, self.rows.len());
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows_for(&self, metric: MetricKind) -> impl Iterator<Item = &MetricRow> {
        self.rows.iter().filter(move |r| r.metric == metric)
    }

    pub fn get(&self, group: &str, subcategory: &str, model: &str, metric: MetricKind) -> Option<&MetricRow> {
        self.index
            .get(&(group.to_owned(), subcategory.to_owned(), model.to_owned(), metric))
            .map(|&i| &self.rows[i])
    }

    fn distinct<T: PartialEq>(&self, metric: MetricKind, f: impl Fn(&MetricRow) -> T) -> Vec<T> {
        let mut out = Vec::new();
        for row in self.rows_for(metric) {
            let v = f(row);
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    /// Models in first-appearance order.
    pub fn models(&self, metric: MetricKind) -> Vec<String> {
        self.distinct(metric, |r| r.model.clone())
    }

    pub fn groups(&self, metric: MetricKind) -> Vec<String> {
        self.distinct(metric, |r| r.group.clone())
    }

    /// (group, subcategory) pairs in first-appearance order.
    pub fn subcategories(&self, metric: MetricKind) -> Vec<(String, String)> {
        self.distinct(metric, |r| (r.group.clone(), r.subcategory.clone()))
    }

    pub fn metrics(&self) -> Vec<MetricKind> {
        let mut out: Vec<MetricKind> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.metric) {
                out.push(r.metric);
            }
        }
        out
    }

    /// Every value multiplied by `c`. The result may leave `[0, 1]`.
    pub fn scaled(&self, c: f64) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| MetricRow {
                no_attack: r.no_attack * c,
                mild: r.mild * c,
                moderate: r.moderate * c,
                severe: r.severe * c,
                ..r.clone()
            })
            .collect();
        Self {
            rows,
            index: self.index.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), StatsError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| StatsError::Io(std::io::Error::other(e));
        w.write_record(HEADER).map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.group.clone(),
                r.subcategory.clone(),
                r.model.clone(),
                r.metric.to_string(),
                r.no_attack.to_string(),
                r.mild.to_string(),
                r.moderate.to_string(),
                r.severe.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_metrics_csv(path: &Path) -> Result<MetricsTable, StatsError> {
    let file = std::fs::File::open(path)?;
    parse_metrics_csv(file, &path.display().to_string())
}

/// Parses the metrics CSV. `origin` names the source in error messages.
pub fn parse_metrics_csv<R: Read>(input: R, origin: &str) -> Result<MetricsTable, StatsError> {
    let parse_err = |line: u64, message: String| StatsError::Parse {
        path: origin.to_owned(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();

    match records.next() {
        None => return Err(parse_err(1, "empty file; header row required".into())),
        Some(Err(e)) => return Err(parse_err(1, e.to_string())),
        Some(Ok(header)) => {
            let got: Vec<&str> = header.iter().map(|f| f.trim_start_matches('\u{feff}').trim()).collect();
            if got != HEADER {
                return Err(parse_err(
                    1,
                    format!("header must be `{}`, got `{}`", HEADER.join(","), got.join(",")),
                ));
            }
        }
    }

    let mut table = MetricsTable::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if rec.len() != HEADER.len() {
            return Err(parse_err(line, format!("expected 8 fields, got {}", rec.len())));
        }
        let text = |i: usize| -> Result<String, StatsError> {
            let v = rec[i].trim();
            if v.is_empty() {
                return Err(parse_err(line, format!("empty {}", HEADER[i])));
            }
            Ok(v.to_owned())
        };
        let value = |i: usize| -> Result<f64, StatsError> {
            let raw = rec[i].trim();
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(line, format!("{} is not a number: {raw:?}", HEADER[i])))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(parse_err(line, format!("{} = {v} is outside [0, 1]", HEADER[i])));
            }
            Ok(v)
        };
        let metric = rec[3].parse().map_err(|e: String| parse_err(line, e))?;
        let row = MetricRow {
            group: text(0)?,
            subcategory: text(1)?,
            model: text(2)?,
            metric,
            no_attack: value(4)?,
            mild: value(5)?,
            moderate: value(6)?,
            severe: value(7)?,
        };
        table.push(row, line)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "group,subcategory,model,metric,no_attack,mild,moderate,severe\n";

    fn parse(body: &str) -> Result<MetricsTable, StatsError> {
        parse_metrics_csv(format!("{HEAD}{body}").as_bytes(), "t.csv")
    }

    fn line_of(e: StatsError) -> u64 {
        match e {
            StatsError::Parse { line, .. } | StatsError::DuplicateKey { line, .. } => line,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn metric_names_round_trip() {
        for m in MetricKind::ALL {
            assert_eq!(m.as_str().parse::<MetricKind>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{m}\""));
        }
        assert!("mAP90".parse::<MetricKind>().is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let ok = "weather,clear,YOLOP,mAP50,0.7,0.6,0.5,0.4\n";
        assert_eq!(parse(ok).unwrap().len(), 1);
        assert_eq!(line_of(parse(&format!("{ok}weather,clear,YOLOP,mAP50,0.7,x,0.5,0.4\n")).unwrap_err()), 3);
        assert_eq!(line_of(parse(&format!("{ok}{ok}")).unwrap_err()), 3);
        assert_eq!(line_of(parse("a,b,c,mAP50,1.2,0.5,0.5,0.5\n").unwrap_err()), 2);
        assert_eq!(line_of(parse("a,b,c,mAP50,0.5,0.5\n").unwrap_err()), 2);
        assert_eq!(line_of(parse("a,b,c,AP,0.5,0.5,0.5,0.5\n").unwrap_err()), 2);
        assert_eq!(line_of(parse(",b,c,mIoU,0.5,0.5,0.5,0.5\n").unwrap_err()), 2);
        let bad_header = parse_metrics_csv("group,sub,model\n".as_bytes(), "h").unwrap_err();
        assert_eq!(line_of(bad_header), 1);
        assert!(parse_metrics_csv("".as_bytes(), "e").is_err());
    }

    #[test]
    fn same_key_different_metric_is_fine() {
        let t = parse("a,b,c,mAP50,0.5,0.5,0.5,0.5\na,b,c,mIoU,0.5,0.5,0.5,0.5\n").unwrap();
        assert_eq!(t.metrics(), vec![MetricKind::MAp50, MetricKind::MIoU]);
        assert!(t.get("a", "b", "c", MetricKind::MIoU).is_some());
        assert!(t.get("a", "b", "c", MetricKind::MAp75).is_none());
    }

    #[test]
    fn write_then_parse_is_identity() {
        let t = parse("w,clear,M1,mAP50,0.755,0.647,0.439,0.25\nw,clear,M1,mIoU,0.1,0.30000000000000004,0,1\n").unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(parse_metrics_csv(buf.as_slice(), "rt").unwrap(), t);
    }
}
