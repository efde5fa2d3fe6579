use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::StatsError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestKind {
    /// Unequal variances, Welch-Satterthwaite degrees of freedom.
    #[default]
    Welch,
    /// Equal variances, pooled estimate.
    Pooled,
    /// One-sample test on the element-wise differences.
    Paired,
}

impl fmt::Display for TTestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Welch => "welch",
            Self::Pooled => "pooled",
            Self::Paired => "paired",
        })
    }
}

impl FromStr for TTestKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "welch" => Ok(Self::Welch),
            "pooled" | "student" => Ok(Self::Pooled),
            "paired" => Ok(Self::Paired),
            _ => Err(format!("unknown t-test kind {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub kind: TTestKind,
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub significant_at_5pct: bool,
    /// Both samples have zero spread but different means; `p` is set to 0.
    pub degenerate: bool,
}

impl TTestResult {
    fn new(kind: TTestKind, t: f64, df: f64, p: f64, degenerate: bool) -> Self {
        Self {
            kind,
            t_statistic: t,
            degrees_of_freedom: df,
            p_value: p,
            significant_at_5pct: p < 0.05,
            degenerate,
        }
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Two-sided tail probability `P(|T| >= |t|)` for Student's t with `df`
/// degrees of freedom.
pub(crate) fn two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let t2 = t * t;
    // pick whichever incomplete-beta argument can be formed without cancellation
    let p = if t2 < df {
        1.0 - beta_reg(0.5, df / 2.0, t2 / (df + t2))
    } else {
        beta_reg(df / 2.0, 0.5, df / (df + t2))
    };
    p.clamp(0.0, 1.0)
}

/// Welch's two-sided two-sample t-test.
pub fn ttest_two_sample(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    ttest_with(a, b, TTestKind::Welch)
}

pub fn ttest_with(a: &[f64], b: &[f64], kind: TTestKind) -> Result<TTestResult, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::InsufficientData(a.len(), b.len()));
    }
    let (diff, se2, df) = match kind {
        TTestKind::Welch => {
            let (ma, va) = mean_var(a);
            let (mb, vb) = mean_var(b);
            let (na, nb) = (a.len() as f64, b.len() as f64);
            let (qa, qb) = (va / na, vb / nb);
            let se2 = qa + qb;
            let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
            (ma - mb, se2, if df.is_finite() { df } else { na + nb - 2.0 })
        }
        TTestKind::Pooled => {
            let (ma, va) = mean_var(a);
            let (mb, vb) = mean_var(b);
            let (na, nb) = (a.len() as f64, b.len() as f64);
            let df = na + nb - 2.0;
            let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            (ma - mb, sp2 * (1.0 / na + 1.0 / nb), df)
        }
        TTestKind::Paired => {
            if a.len() != b.len() {
                return Err(StatsError::UnpairedLengths(a.len(), b.len()));
            }
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            let (md, vd) = mean_var(&d);
            let n = d.len() as f64;
            (md, vd / n, n - 1.0)
        }
    };
    if se2 == 0.0 {
        return Ok(if diff == 0.0 {
            TTestResult::new(kind, 0.0, df, 1.0, false)
        } else {
            TTestResult::new(kind, diff.signum() * f64::INFINITY, df, 0.0, true)
        });
    }
    let t = diff / se2.sqrt();
    Ok(TTestResult::new(kind, t, df, two_sided_p(t, df), false))
}

/// Reads every numeric field of a CSV-ish file as one sample. A first line
/// that does not parse is taken as a header.
pub fn load_sample_csv(path: &Path) -> Result<Vec<f64>, StatsError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line
            .split([',', ';', '\t', ' '])
            .map(str::trim)
            .filter(|f| !f.is_empty())
            .collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                if let Some(bad) = vals.iter().find(|v| !v.is_finite()) {
                    return Err(StatsError::Parse {
                        path: path.display().to_string(),
                        line: i as u64 + 1,
                        message: format!("non-finite value {bad}"),
                    });
                }
                out.extend(vals);
            }
            Err(_) if i == 0 => {}
            Err(e) => {
                return Err(StatsError::Parse {
                    path: path.display().to_string(),
                    line: i as u64 + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}
