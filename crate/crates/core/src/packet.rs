//! Row-packet transport model of a camera link.
//!
//! Each CFA row travels as one packet. A loss event drops the first packet
//! of a strip: every row slot in the strip then shows the packet of the row
//! below it, while the receiver still decodes each slot with that slot's own
//! Bayer parity. The link resynchronises at the end of the strip, so the
//! packet that follows the strip is shown twice (once shifted, once in its
//! own slot) and the frame keeps its height.

use thiserror::Error;

use crate::attack::{AttackPlan, PlanError, StripSpec};
use crate::bayer::{demosaic, mosaic, BayerPattern, CfaImage};
use crate::image::RgbImage;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PacketError {
    #[error("loss events {0} and {1} overlap")]
    OverlappingEvents(StripSpec, StripSpec),
    #[error("loss event {strip} is outside a stream of {packets} packets")]
    OutOfRange { strip: StripSpec, packets: usize },
    #[error("expected {expected} packets of {width} samples, got {actual}")]
    PacketCountMismatch {
        expected: usize,
        actual: usize,
        width: usize,
    },
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PacketStream {
    packets: Vec<Vec<u8>>,
    width: usize,
    pattern: BayerPattern,
}

impl PacketStream {
    pub fn packets(&self) -> &[Vec<u8>] {
        &self.packets
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pattern(&self) -> BayerPattern {
        self.pattern
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }
}

/// Rows whose displayed content is misaligned by one packet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LossEvent {
    pub strip: StripSpec,
}

pub fn to_packets(cfa: &CfaImage) -> PacketStream {
    PacketStream {
        packets: (0..cfa.height()).map(|r| cfa.row(r).to_vec()).collect(),
        width: cfa.width(),
        pattern: cfa.pattern(),
    }
}

/// Applies all events at once, each reading from the undamaged input.
pub fn inject_loss(stream: &PacketStream, events: &[LossEvent]) -> Result<PacketStream, PacketError> {
    let n = stream.packets.len();
    let mut sorted: Vec<StripSpec> = events.iter().map(|e| e.strip).collect();
    sorted.sort();
    for s in &sorted {
        if s.start_row >= s.end_row || s.end_row > n {
            return Err(PacketError::OutOfRange {
                strip: *s,
                packets: n,
            });
        }
    }
    for w in sorted.windows(2) {
        if w[1].start_row < w[0].end_row {
            return Err(PacketError::OverlappingEvents(w[0], w[1]));
        }
    }
    let mut out = stream.clone();
    for s in &sorted {
        for k in s.rows() {
            out.packets[k].clone_from(&stream.packets[(k + 1).min(n - 1)]);
        }
    }
    Ok(out)
}

/// Lays packets back out as CFA rows, keeping the stream's pattern: slot `k`
/// is always decoded with row `k`'s parity, whatever it carries.
pub fn reassemble(stream: &PacketStream, expected_height: usize) -> Result<CfaImage, PacketError> {
    let mismatch = PacketError::PacketCountMismatch {
        expected: expected_height,
        actual: stream.packets.len(),
        width: stream.width,
    };
    if stream.packets.len() != expected_height
        || stream.packets.iter().any(|p| p.len() != stream.width)
    {
        return Err(mismatch);
    }
    CfaImage::from_raw(
        stream.width,
        expected_height,
        stream.pattern,
        stream.packets.concat(),
    )
    .ok_or(mismatch)
}

/// Full mosaic -> packet loss -> reassembly -> demosaic path. Rows farther
/// than one row from every strip are copied from the input, as in
/// [`crate::attack::apply_swap`].
pub fn simulate_packet_loss(
    img: &RgbImage,
    plan: &AttackPlan,
    pattern: BayerPattern,
) -> Result<RgbImage, PacketError> {
    plan.check_image(img)?;
    if plan.strips.is_empty() {
        return Ok(img.clone());
    }
    let events: Vec<LossEvent> = plan.strips.iter().map(|&strip| LossEvent { strip }).collect();
    let stream = inject_loss(&to_packets(&mosaic(img, pattern)), &events)?;
    let received = demosaic(&reassemble(&stream, img.height())?);
    let mut out = img.clone();
    for strip in &plan.strips {
        for row in strip.band(img.height()) {
            out.row_mut(row).copy_from_slice(received.row(row));
        }
    }
    Ok(out)
}
