//! Full-reference quality assessment for compressed grayscale images.
//!
//! A two-stage Saak transform is learned from each (low-pass filtered)
//! reference image. Reference and distorted images are mapped to the same
//! 496 spectral components, compared per component, and pooled with
//! energy-driven weights into a single score in `[-lambda, 1]`.
//!
//! ```no_run
//! use saak_iqa::{assess, read_pgm, QualityConfig};
//!
//! let reference = read_pgm("ref.pgm")?;
//! let distorted = read_pgm("dist.pgm")?;
//! let result = assess(&reference, &distorted, &QualityConfig::default())?;
//! println!("{:.6}", result.score);
//! # Ok::<(), saak_iqa::Error>(())
//! ```

pub mod config;
pub mod error;
pub mod harness;
pub mod image;
mod linalg;
pub mod metric;
pub mod saak;
pub mod stats;

pub use config::{Codec, QualityConfig};
pub use error::{Error, Result};
pub use image::{crop_to_multiple, gaussian_filter, read_pgm, write_pgm, FilterSpec, GrayImage};
pub use metric::{
    assess, channel_stats, quality_from_stats, Assessment, ChannelStats, PreparedReference,
};
pub use saak::{FeatureTensor, SaakModel, SaakStage};
