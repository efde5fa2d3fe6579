//! Checking that attacked images contain the strips their plans claim.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{AttackPlan, StripSpec};
use crate::bayer::{mosaic, BayerPattern, CfaImage};
use crate::image::{Channel, RgbImage};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error("images differ in size: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

/// Rows of slack allowed at each strip edge (demosaic bleed).
pub const MATCH_SLACK_ROWS: usize = 1;

/// Default `detect_heuristic` threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Heuristic scores below this never seed or extend a detected strip.
pub const CLUSTER_FLOOR: f64 = 0.25;

/// Softens the flip score on rows with little diagonal contrast.
const SCORE_SOFTENING: f64 = 4.0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub detected_strips: Vec<StripSpec>,
    pub per_row_score: Vec<f64>,
    /// `None` when no reference plan was supplied.
    pub matched: Option<bool>,
    pub missed: Vec<StripSpec>,
    pub spurious: Vec<StripSpec>,
}

/// Maximal runs of `true`, as half-open row ranges.
fn runs(flags: impl IntoIterator<Item = bool>) -> Vec<StripSpec> {
    let mut out = Vec::new();
    let mut start = None;
    let mut n = 0;
    for (i, f) in flags.into_iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(StripSpec::new(s, i));
                start = None;
            }
            _ => {}
        }
        n = i + 1;
    }
    if let Some(s) = start {
        out.push(StripSpec::new(s, n));
    }
    out
}

fn within_slack(a: usize, b: usize) -> bool {
    a.abs_diff(b) <= MATCH_SLACK_ROWS
}

/// Compares an attacked image with its source.
///
/// Rows with any differing sample are grouped into maximal runs; a run
/// matches a plan strip when both of its edges are within one row of the
/// strip's edges. The report matches iff every run and every strip pair up.
pub fn verify_against_original(
    original: &RgbImage,
    attacked: &RgbImage,
    plan: &AttackPlan,
) -> Result<DetectionReport, VerifyError> {
    if (original.width(), original.height()) != (attacked.width(), attacked.height()) {
        return Err(VerifyError::DimensionMismatch(
            original.width(),
            original.height(),
            attacked.width(),
            attacked.height(),
        ));
    }
    let w = original.width();
    let per_row_score: Vec<f64> = (0..original.height())
        .map(|r| {
            let (a, b) = (original.row(r), attacked.row(r));
            let differing = (0..w).filter(|&c| a[c * 3..c * 3 + 3] != b[c * 3..c * 3 + 3]).count();
            differing as f64 / w as f64
        })
        .collect();
    let detected = runs(per_row_score.iter().map(|&s| s > 0.0));

    let mut missed = Vec::new();
    let mut used = vec![false; detected.len()];
    for strip in &plan.strips {
        let hit = detected.iter().enumerate().find(|(i, run)| {
            !used[*i]
                && within_slack(run.start_row, strip.start_row)
                && within_slack(run.end_row, strip.end_row)
        });
        match hit {
            Some((i, _)) => used[i] = true,
            None => missed.push(*strip),
        }
    }
    let spurious: Vec<StripSpec> = detected
        .iter()
        .zip(&used)
        .filter(|(_, &u)| !u)
        .map(|(s, _)| *s)
        .collect();
    Ok(DetectionReport {
        matched: Some(missed.is_empty() && spurious.is_empty()),
        detected_strips: detected,
        per_row_score,
        missed,
        spurious,
    })
}

fn is_green(pattern: BayerPattern, row: usize, col: usize) -> bool {
    pattern.site(row, col) == Channel::Green
}

/// Evidence in `[0, 1]` that rows `row` and `row + 1` are both decoded with
/// flipped parity.
///
/// In a correctly decoded CFA the green sites form a quincunx, so diagonal
/// neighbours of a green sample across the two rows are green too (G-G
/// pairs, small differences) while the other diagonals pair red with blue.
/// After a one-row slip the red channel of row `i` holds the green of row
/// `i + 1`, and the roles of the two diagonal families swap.
fn flip_score(cfa: &CfaImage, row: usize) -> f64 {
    let pattern = cfa.pattern();
    let (mut green_pairs, mut other_pairs) = (0u64, 0u64);
    let (mut n_green, mut n_other) = (0u64, 0u64);
    for col in 0..cfa.width() {
        let here = cfa.get(row, col) as i32;
        let mut diffs = 0u64;
        let mut n = 0u64;
        for nc in [col.wrapping_sub(1), col + 1] {
            if nc < cfa.width() {
                diffs += (here - cfa.get(row + 1, nc) as i32).unsigned_abs() as u64;
                n += 1;
            }
        }
        if is_green(pattern, row, col) {
            green_pairs += diffs;
            n_green += n;
        } else {
            other_pairs += diffs;
            n_other += n;
        }
    }
    if n_green == 0 || n_other == 0 {
        return 0.0;
    }
    let g = green_pairs as f64 / n_green as f64;
    let o = other_pairs as f64 / n_other as f64;
    ((g - o) / (g + o + SCORE_SOFTENING)).max(0.0)
}

/// No-reference strip detector for inspection. Uses the RGGB layout; see
/// [`detect_heuristic_with_pattern`].
pub fn detect_heuristic(attacked: &RgbImage, threshold: f64) -> DetectionReport {
    detect_heuristic_with_pattern(attacked, threshold, BayerPattern::default())
}

/// Scores every adjacent row pair for the slip signature, groups rows whose
/// score exceeds [`CLUSTER_FLOOR`] into runs, and reports the runs whose
/// peak score exceeds `threshold`. Since the runs do not depend on the
/// threshold, a higher threshold can only drop strips.
pub fn detect_heuristic_with_pattern(
    attacked: &RgbImage,
    threshold: f64,
    pattern: BayerPattern,
) -> DetectionReport {
    let cfa = mosaic(attacked, pattern);
    let h = cfa.height();
    let mut per_row_score: Vec<f64> = (0..h - 1).map(|r| flip_score(&cfa, r)).collect();
    per_row_score.push(0.0);

    let detected_strips = runs(per_row_score.iter().map(|&s| s > CLUSTER_FLOOR))
        .into_iter()
        .filter(|run| {
            per_row_score[run.rows()]
                .iter()
                .any(|&s| s > threshold)
        })
        // a flagged pair (i, i+1) covers both rows
        .map(|run| StripSpec::new(run.start_row, (run.end_row + 1).min(h)))
        .collect();
    DetectionReport {
        detected_strips,
        per_row_score,
        matched: None,
        missed: Vec::new(),
        spurious: Vec::new(),
    }
}
