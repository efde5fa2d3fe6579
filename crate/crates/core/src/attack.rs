//! Fast color-strip simulation directly on RGB images.
//!
//! Inside an impacted row every Bayer site takes the value that the site
//! directly below it would have sampled, which is what a receiver sees when
//! the row packets slip by one. The affected band is then re-demosaiced and
//! spliced back into the untouched image.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayer::{demosaic_rows, mosaic, BayerPattern};
use crate::image::RgbImage;
use crate::rng::Xoshiro256;

/// Clean rows the sampler leaves between strips. Each strip bleeds one row
/// on either side after demosaicing, so four keeps two rows between the
/// bleed bands and strips stay countable.
pub const SAMPLER_GAP_ROWS: usize = 4;

/// Minimum number of rows between two strips of any plan.
pub const MIN_GAP_ROWS: usize = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("image of {height} rows cannot host {count} strips of at least {min_height} rows")]
    ImageTooSmall {
        height: usize,
        count: usize,
        min_height: usize,
    },
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("invalid strip {start}-{end}: {reason}")]
    InvalidStrip {
        start: usize,
        end: usize,
        reason: String,
    },
    #[error("{severity} plans need a strip count in {range:?}, got {count}")]
    CountOutOfRange {
        severity: SeverityLevel,
        range: Option<(usize, usize)>,
        count: usize,
    },
    #[error("plan is for a {plan_w}x{plan_h} image, got {img_w}x{img_h}")]
    DimensionMismatch {
        plan_w: usize,
        plan_h: usize,
        img_w: usize,
        img_h: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeverityLevel {
    Unattacked,
    Mild,
    Moderate,
    Severe,
}

impl SeverityLevel {
    pub const ALL: [SeverityLevel; 4] = [
        SeverityLevel::Unattacked,
        SeverityLevel::Mild,
        SeverityLevel::Moderate,
        SeverityLevel::Severe,
    ];

    /// Inclusive strip-count range, `None` for unattacked images.
    pub fn strip_range(self) -> Option<(usize, usize)> {
        match self {
            SeverityLevel::Unattacked => None,
            SeverityLevel::Mild => Some((1, 6)),
            SeverityLevel::Moderate => Some((7, 12)),
            SeverityLevel::Severe => Some((13, 20)),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SeverityLevel::Unattacked => "unattacked",
            SeverityLevel::Mild => "mild",
            SeverityLevel::Moderate => "moderate",
            SeverityLevel::Severe => "severe",
        }
    }
}

impl fmt::Display for SeverityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SeverityLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SeverityLevel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown severity '{s}'"))
    }
}

/// Half-open row range `[start_row, end_row)` of one color strip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StripSpec {
    pub start_row: usize,
    pub end_row: usize,
}

impl StripSpec {
    pub fn new(start_row: usize, end_row: usize) -> Self {
        Self { start_row, end_row }
    }

    pub fn height(&self) -> usize {
        self.end_row.saturating_sub(self.start_row)
    }

    pub fn rows(&self) -> std::ops::Range<usize> {
        self.start_row..self.end_row
    }

    /// Rows whose pixels may change once the strip is reconstructed.
    pub fn band(&self, image_height: usize) -> std::ops::Range<usize> {
        self.start_row.saturating_sub(1)..(self.end_row + 1).min(image_height)
    }

    fn check(&self, image_height: usize) -> Result<(), PlanError> {
        let fail = |reason: &str| {
            Err(PlanError::InvalidStrip {
                start: self.start_row,
                end: self.end_row,
                reason: reason.to_string(),
            })
        };
        if self.end_row > image_height {
            return fail("extends past the last row");
        }
        if self.height() < 2 {
            return fail("strips are at least 2 rows tall");
        }
        if !self.start_row.is_multiple_of(2) {
            return fail("strips start on an even row");
        }
        Ok(())
    }
}

impl fmt::Display for StripSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start_row, self.end_row)
    }
}

impl FromStr for StripSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .trim()
            .split_once('-')
            .ok_or_else(|| format!("strip '{s}' is not of the form START-END"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("strip '{s}': '{v}' is not a row index"))
        };
        Ok(StripSpec::new(parse(a)?, parse(b)?))
    }
}

/// Parses a comma-separated list such as `"10-14,40-48"`.
pub fn parse_strip_list(s: &str) -> Result<Vec<StripSpec>, String> {
    s.split(',')
        .filter(|part| !part.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Everything needed to reproduce one attacked image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackPlan {
    pub severity: SeverityLevel,
    pub seed: u64,
    pub strips: Vec<StripSpec>,
    pub image_height: usize,
    pub image_width: usize,
}

impl AttackPlan {
    pub fn unattacked(seed: u64, width: usize, height: usize) -> Self {
        Self {
            severity: SeverityLevel::Unattacked,
            seed,
            strips: Vec::new(),
            image_height: height,
            image_width: width,
        }
    }

    /// Validates geometry and that the strip count matches the severity.
    pub fn new(
        severity: SeverityLevel,
        seed: u64,
        width: usize,
        height: usize,
        strips: Vec<StripSpec>,
    ) -> Result<Self, PlanError> {
        let plan = Self::explicit(severity, seed, width, height, strips)?;
        let count = plan.strips.len();
        let in_range = match severity.strip_range() {
            None => count == 0,
            Some((lo, hi)) => (lo..=hi).contains(&count),
        };
        if !in_range {
            return Err(PlanError::CountOutOfRange {
                severity,
                range: severity.strip_range(),
                count,
            });
        }
        Ok(plan)
    }

    /// Hand-specified strips: geometry is validated, the severity's count
    /// range is not. Strips are sorted by start row.
    pub fn explicit(
        severity: SeverityLevel,
        seed: u64,
        width: usize,
        height: usize,
        mut strips: Vec<StripSpec>,
    ) -> Result<Self, PlanError> {
        strips.sort();
        for s in &strips {
            s.check(height)?;
        }
        for pair in strips.windows(2) {
            if pair[1].start_row < pair[0].end_row + MIN_GAP_ROWS {
                return Err(PlanError::InvalidStrip {
                    start: pair[1].start_row,
                    end: pair[1].end_row,
                    reason: format!(
                        "needs {MIN_GAP_ROWS} clean rows after strip {}",
                        pair[0]
                    ),
                });
            }
        }
        if (severity == SeverityLevel::Unattacked) != strips.is_empty() {
            return Err(PlanError::CountOutOfRange {
                severity,
                range: severity.strip_range(),
                count: strips.len(),
            });
        }
        Ok(Self {
            severity,
            seed,
            strips,
            image_height: height,
            image_width: width,
        })
    }

    pub fn impacted_rows(&self) -> usize {
        self.strips.iter().map(StripSpec::height).sum()
    }

    pub(crate) fn check_image(&self, img: &RgbImage) -> Result<(), PlanError> {
        if img.width() != self.image_width || img.height() != self.image_height {
            return Err(PlanError::DimensionMismatch {
                plan_w: self.image_width,
                plan_h: self.image_height,
                img_w: img.width(),
                img_h: img.height(),
            });
        }
        Ok(())
    }
}

/// Strip heights are not controlled by severity; these bound them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub min_strip_height: usize,
    pub max_strip_height: usize,
    pub max_placement_attempts: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            min_strip_height: 4,
            max_strip_height: 32,
            max_placement_attempts: 1000,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let (lo, hi) = (self.min_strip_height, self.max_strip_height);
        if lo < 2 || lo > hi {
            return Err(PlanError::InvalidConfig(format!(
                "strip heights need 2 <= min <= max, got {lo}..{hi}"
            )));
        }
        if lo % 2 != 0 || hi % 2 != 0 {
            return Err(PlanError::InvalidConfig(format!(
                "strip heights must be even, got {lo}..{hi}"
            )));
        }
        if self.max_placement_attempts == 0 {
            return Err(PlanError::InvalidConfig(
                "max_placement_attempts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Draws a random plan for `severity`.
///
/// The strip count is uniform over the severity range. Heights are uniform
/// over the even values in `[min, max]`; a height draw whose strips cannot
/// fit is rejected and redrawn, up to `max_placement_attempts` times. Given
/// fitting heights, the even start rows are uniform over all non-overlapping
/// arrangements (stars and bars over 2-row units), so placement itself never
/// fails. The count is never reduced: an image that cannot host it is an
/// error.
pub fn sample_plan(
    severity: SeverityLevel,
    width: usize,
    height: usize,
    seed: u64,
    config: &SamplerConfig,
) -> Result<AttackPlan, PlanError> {
    config.validate()?;
    let Some((lo, hi)) = severity.strip_range() else {
        return Ok(AttackPlan::unattacked(seed, width, height));
    };
    let mut rng = Xoshiro256::seed_from_u64(seed);
    let count = rng.inclusive(lo as u64, hi as u64) as usize;

    let units = height / 2;
    let gap_units = SAMPLER_GAP_ROWS / 2;
    let (min_u, max_u) = (config.min_strip_height / 2, config.max_strip_height / 2);
    let needed = |strip_units: usize| strip_units + (count - 1) * gap_units;
    let too_small = PlanError::ImageTooSmall {
        height,
        count,
        min_height: config.min_strip_height,
    };
    if needed(count * min_u) > units {
        return Err(too_small);
    }

    for _ in 0..config.max_placement_attempts {
        let heights: Vec<usize> = (0..count)
            .map(|_| rng.inclusive(min_u as u64, max_u as u64) as usize)
            .collect();
        let used = needed(heights.iter().sum());
        if used > units {
            continue;
        }
        let free = units - used;
        let bars = floyd_sample(&mut rng, free + count, count);
        let mut strips = Vec::with_capacity(count);
        let mut offset = 0;
        for (j, (&bar, &h)) in bars.iter().zip(&heights).enumerate() {
            let start_u = bar - j + offset;
            strips.push(StripSpec::new(2 * start_u, 2 * (start_u + h)));
            offset += h + gap_units;
        }
        return AttackPlan::new(severity, seed, width, height, strips);
    }
    Err(too_small)
}

/// `k` distinct values from `[0, n)`, ascending (Floyd's algorithm).
fn floyd_sample(rng: &mut Xoshiro256, n: usize, k: usize) -> Vec<usize> {
    let mut chosen = BTreeSet::new();
    for j in n - k..n {
        let t = rng.below(j as u64 + 1) as usize;
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    chosen.into_iter().collect()
}

/// Applies the row-slip channel swap to every strip of `plan`.
///
/// For each impacted row `i` and column `c`, the channel that `pattern`
/// samples at `(i, c)` is overwritten with the channel it samples at
/// `(i + 1, c)`, read from the unmodified input (row `i + 1` is clamped to
/// the last row). Under RGGB this is: even rows, R <- G and G <- B of the
/// next row; odd rows, G <- R and B <- G of the next row. Rows within one
/// row of a strip are then re-demosaiced; all other rows are copied.
pub fn apply_swap(
    img: &RgbImage,
    plan: &AttackPlan,
    pattern: BayerPattern,
) -> Result<RgbImage, PlanError> {
    plan.check_image(img)?;
    if plan.strips.is_empty() {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let mut swapped = img.clone();
    for strip in &plan.strips {
        for row in strip.rows() {
            let next = (row + 1).min(h - 1);
            for col in 0..w {
                let here = img.coord(row, col).expect("in bounds");
                let below = img.coord(next, col).expect("in bounds");
                let value = img.channel(below, pattern.site(next, col));
                swapped.set_channel(here, pattern.site(row, col), value);
            }
        }
    }
    let cfa = mosaic(&swapped, pattern);
    let mut out = img.clone();
    for strip in &plan.strips {
        let band = strip.band(h);
        let rows = demosaic_rows(&cfa, band.clone());
        for (k, row) in band.enumerate() {
            out.row_mut(row).copy_from_slice(&rows[k * w * 3..(k + 1) * w * 3]);
        }
    }
    Ok(out)
}

const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET_BASIS, |h, &b| {
        (h ^ b as u64).wrapping_mul(FNV_PRIME)
    })
}

/// Per-image seed: `master_seed ^ fnv1a64(relative_path)`.
pub fn derive_seed(master_seed: u64, relative_path: &str) -> u64 {
    master_seed ^ fnv1a64(relative_path.as_bytes())
}
