use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::FilterSpec;

/// Compression family of a distorted image; selects the default blend factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Codec {
    Jpeg,
    Jpeg2000,
    Other,
}

impl Codec {
    /// Case-insensitive; anything unrecognized is `Other`.
    pub fn parse(s: &str) -> Codec {
        match s.trim().to_ascii_lowercase().as_str() {
            "jpeg" => Codec::Jpeg,
            "jpeg2000" => Codec::Jpeg2000,
            _ => Codec::Other,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Codec::Jpeg => "jpeg",
            Codec::Jpeg2000 => "jpeg2000",
            Codec::Other => "other",
        }
    }

    /// Default weight of the correlation term; `None` for `Other`.
    pub fn default_lambda(&self) -> Option<f64> {
        match self {
            Codec::Jpeg => Some(0.7),
            Codec::Jpeg2000 => Some(0.2),
            Codec::Other => None,
        }
    }

    /// Explicit override first, then the codec default.
    pub fn resolve_lambda(&self, explicit: Option<f64>) -> Result<f64> {
        explicit
            .or_else(|| self.default_lambda())
            .ok_or_else(|| Error::MissingLambda(self.as_str().to_string()))
    }
}

impl std::fmt::Display for Codec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parameters of the quality pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityConfig {
    /// Weight of the correlation term, in `[0, 1]`.
    pub lambda: f64,
    /// Scale of the MSE term.
    pub c: f64,
    /// Energy scale of the channel weights.
    pub h: f64,
    pub filter: FilterSpec,
    pub block_size: usize,
    pub num_stages: usize,
    /// Sampling stride for first-stage training patches.
    pub train_stride: usize,
    /// Pixel patches with population std at or below this are not used for training.
    pub std_threshold: f64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig::for_codec(Codec::Jpeg).expect("jpeg has a default lambda")
    }
}

impl QualityConfig {
    pub fn for_codec(codec: Codec) -> Result<Self> {
        Ok(QualityConfig {
            lambda: codec.resolve_lambda(None)?,
            c: 400.0,
            h: 100.0,
            filter: FilterSpec::default(),
            block_size: 4,
            num_stages: 2,
            train_stride: 2,
            std_threshold: 2.0,
        })
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    /// Side length that both image dimensions must be a multiple of.
    pub fn tile_size(&self) -> usize {
        self.block_size.pow(self.num_stages as u32)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::GeometryMismatch(msg));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.c > 0.0 && self.h > 0.0) {
            return bad(format!(
                "c and h must be positive, got c={} h={}",
                self.c, self.h
            ));
        }
        if self.block_size == 0 || self.num_stages == 0 || self.train_stride == 0 {
            return bad("block_size, num_stages and train_stride must be positive".into());
        }
        if !(self.std_threshold >= 0.0) {
            return bad(format!(
                "std_threshold must be non-negative, got {}",
                self.std_threshold
            ));
        }
        Ok(())
    }
}
