//! Bayer color filter arrays: sampling an RGB image down to one channel per
//! site, and bilinear reconstruction back to RGB.
//!
//! Border pixels are interpolated as if the CFA were padded by repeating the
//! nearest sample of the same color, i.e. an out-of-range index `-1` reads
//! index `1` and index `n` reads `n - 2`. This keeps the Bayer parity of the
//! padding intact, so constant-color mosaics reconstruct exactly at the
//! frame edges as well.

use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::image::{Channel, RgbImage};

/// Quad layout, named by the sites at (0,0), (0,1), (1,0), (1,1).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BayerPattern {
    #[default]
    Rggb,
    Grbg,
    Gbrg,
    Bggr,
}

impl BayerPattern {
    pub const ALL: [BayerPattern; 4] = [
        BayerPattern::Rggb,
        BayerPattern::Grbg,
        BayerPattern::Gbrg,
        BayerPattern::Bggr,
    ];

    fn quad(self) -> [Channel; 4] {
        use Channel::*;
        match self {
            BayerPattern::Rggb => [Red, Green, Green, Blue],
            BayerPattern::Grbg => [Green, Red, Blue, Green],
            BayerPattern::Gbrg => [Green, Blue, Red, Green],
            BayerPattern::Bggr => [Blue, Green, Green, Red],
        }
    }

    /// Color sampled at absolute coordinate (row, col).
    pub fn site(self, row: usize, col: usize) -> Channel {
        self.quad()[(row % 2) * 2 + col % 2]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BayerPattern::Rggb => "rggb",
            BayerPattern::Grbg => "grbg",
            BayerPattern::Gbrg => "gbrg",
            BayerPattern::Bggr => "bggr",
        }
    }
}

impl FromStr for BayerPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BayerPattern::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown Bayer pattern '{s}'"))
    }
}

impl std::fmt::Display for BayerPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Single-channel raster tagged with the pattern that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CfaImage {
    width: usize,
    height: usize,
    pattern: BayerPattern,
    data: Vec<u8>,
}

impl CfaImage {
    /// Returns `None` unless `data.len() == width * height` and both
    /// dimensions are at least 2.
    pub fn from_raw(
        width: usize,
        height: usize,
        pattern: BayerPattern,
        data: Vec<u8>,
    ) -> Option<Self> {
        (width >= 2 && height >= 2 && data.len() == width * height).then_some(Self {
            width,
            height,
            pattern,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pattern(&self) -> BayerPattern {
        self.pattern
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.data[row * self.width + col] = value;
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    /// Sample at a possibly out-of-range coordinate, resolved through the
    /// parity-preserving padding.
    fn padded(&self, row: isize, col: isize) -> u8 {
        let r = pad_index(row, self.height);
        let c = pad_index(col, self.width);
        self.data[r * self.width + c]
    }
}

fn pad_index(i: isize, n: usize) -> usize {
    if i < 0 {
        (i + 2) as usize
    } else if i as usize >= n {
        i as usize - 2
    } else {
        i as usize
    }
}

pub fn mosaic(img: &RgbImage, pattern: BayerPattern) -> CfaImage {
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(w * h);
    for row in 0..h {
        let src = img.row(row);
        data.extend((0..w).map(|col| src[col * 3 + pattern.site(row, col).index()]));
    }
    CfaImage {
        width: w,
        height: h,
        pattern,
        data,
    }
}

const CROSS: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
const DIAGONAL: [(isize, isize); 4] = [(-1, -1), (-1, 1), (1, -1), (1, 1)];

/// Neighbor offsets to average for each (site class, channel). An empty list
/// means the channel is sampled at the site itself.
struct Kernel {
    taps: [[Vec<(isize, isize)>; 3]; 4],
}

impl Kernel {
    fn new(pattern: BayerPattern) -> Self {
        let taps = std::array::from_fn(|class| {
            let (pr, pc) = (class / 2, class % 2);
            let site = pattern.site(pr, pc);
            std::array::from_fn(|ch| {
                if site.index() == ch {
                    return Vec::new();
                }
                // offsets evaluated at a representative interior position so
                // that (pr + 2 + dr) never underflows
                let holds = |&(dr, dc): &(isize, isize)| {
                    let r = (pr as isize + 2 + dr) as usize;
                    let c = (pc as isize + 2 + dc) as usize;
                    pattern.site(r, c).index() == ch
                };
                let cross: Vec<_> = CROSS.iter().copied().filter(holds).collect();
                if cross.is_empty() {
                    DIAGONAL.iter().copied().filter(holds).collect()
                } else {
                    cross
                }
            })
        });
        Self { taps }
    }
}

/// Rounded mean of non-negative samples; halves round away from zero.
fn rounded_mean(sum: u32, n: u32) -> u8 {
    ((sum + n / 2) / n) as u8
}

fn demosaic_row_into(cfa: &CfaImage, kernel: &Kernel, row: usize, out: &mut [u8]) {
    let class_row = (row % 2) * 2;
    for col in 0..cfa.width {
        let taps = &kernel.taps[class_row + col % 2];
        let px = &mut out[col * 3..col * 3 + 3];
        for (ch, offsets) in taps.iter().enumerate() {
            px[ch] = if offsets.is_empty() {
                cfa.get(row, col)
            } else {
                let sum: u32 = offsets
                    .iter()
                    .map(|&(dr, dc)| cfa.padded(row as isize + dr, col as isize + dc) as u32)
                    .sum();
                rounded_mean(sum, offsets.len() as u32)
            };
        }
    }
}

/// Bilinear reconstruction of a subset of rows, returned as interleaved RGB
/// rows. Identical to the corresponding rows of [`demosaic`].
pub fn demosaic_rows(cfa: &CfaImage, rows: Range<usize>) -> Vec<u8> {
    assert!(rows.end <= cfa.height, "row range out of bounds");
    let kernel = Kernel::new(cfa.pattern);
    let stride = cfa.width * 3;
    let mut out = vec![0; rows.len() * stride];
    for (chunk, row) in out.chunks_mut(stride).zip(rows) {
        demosaic_row_into(cfa, &kernel, row, chunk);
    }
    out
}

/// Bilinear demosaic: each missing channel is the rounded mean of the
/// nearest 2 or 4 same-color samples.
pub fn demosaic(cfa: &CfaImage) -> RgbImage {
    let kernel = Kernel::new(cfa.pattern);
    let stride = cfa.width * 3;
    let mut out = vec![0; cfa.height * stride];
    out.par_chunks_mut(stride)
        .enumerate()
        .for_each(|(row, chunk)| demosaic_row_into(cfa, &kernel, row, chunk));
    RgbImage::from_raw(cfa.width, cfa.height, out).expect("CFA dimensions are valid")
}
