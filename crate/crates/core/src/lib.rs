//! Deterministic simulation of electromagnetic-injection color strips on RGB
//! camera images.
//!
//! * [`bayer`] samples and reconstructs Bayer mosaics.
//! * [`attack`] samples strip plans and applies the fast channel-swap model.
//! * [`packet`] is the row-packet loss model, used as an independent oracle.
//! * [`verify`] checks attacked images against their plans.
//! * [`dataset`] builds severity-split attacked datasets with JSONL manifests.
//! * [`stats`] aggregates degradation tables and runs Welch's t-test.

pub mod attack;
pub mod bayer;
pub mod cli;
pub mod dataset;
pub mod image;
pub mod packet;
pub mod rng;
pub mod stats;
pub mod verify;

pub use attack::{
    apply_swap, derive_seed, sample_plan, AttackPlan, PlanError, SamplerConfig, SeverityLevel,
    StripSpec,
};
pub use bayer::{demosaic, mosaic, BayerPattern, CfaImage};
pub use image::{load_image, save_image, Channel, ImageError, PixelCoord, RgbImage};
pub use packet::simulate_packet_loss;
