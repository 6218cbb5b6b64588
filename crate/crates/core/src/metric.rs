//! Saak-feature quality score.
//!
//! Both images are low-pass filtered, a transform is learned from the
//! filtered reference, and the two coefficient tensors are compared channel
//! by channel. The per-channel MSE and correlation are pooled with weights
//! that grow with the channel's mean-square energy:
//!
//! ```text
//! w_k = (1 - exp(-E_k / h^2)) / Z
//! s   = (1 - lambda) * exp(-sum w_k D_k / c) + lambda * sum w_k C_k
//! ```

use serde::Serialize;

use crate::config::QualityConfig;
use crate::error::{Error, Result};
use crate::image::{crop_to_multiple, gaussian_filter, GrayImage};
use crate::saak::{FeatureTensor, SaakModel};

const FLAT_VARIANCE: f64 = 1e-12;
const FLAT_MEAN_DIFF: f64 = 1e-9;
const MIN_WEIGHT_MASS: f64 = 1e-12;

/// Per-channel comparison statistics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelStats {
    /// MSE between the reference and distorted maps.
    pub mse: Vec<f64>,
    /// Pearson correlation of the two maps.
    pub correlation: Vec<f64>,
    /// Mean of the two maps' mean squares.
    pub energy: Vec<f64>,
    /// Normalized pooling weights.
    pub weights: Vec<f64>,
}

impl ChannelStats {
    pub fn len(&self) -> usize {
        self.mse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mse.is_empty()
    }

    pub fn weighted_mse(&self) -> f64 {
        self.weights.iter().zip(&self.mse).map(|(w, d)| w * d).sum()
    }

    pub fn weighted_correlation(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.correlation)
            .map(|(w, c)| w * c)
            .sum()
    }
}

/// Weight before normalization; strictly increasing in `energy`.
pub fn raw_weight(energy: f64, h: f64) -> f64 {
    -(-energy / (h * h)).exp_m1()
}

fn map_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let (va, vb) = (saa / n, sbb / n);
    match (va < FLAT_VARIANCE, vb < FLAT_VARIANCE) {
        (true, true) => {
            if (ma - mb).abs() <= FLAT_MEAN_DIFF {
                1.0
            } else {
                0.0
            }
        }
        (true, false) | (false, true) => 0.0,
        (false, false) => (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0),
    }
}

pub fn channel_stats(
    f_ref: &FeatureTensor,
    f_dist: &FeatureTensor,
    h: f64,
) -> Result<ChannelStats> {
    if !f_ref.same_geometry(f_dist) {
        return Err(Error::GeometryMismatch(format!(
            "feature tensors differ: {}x{}x{} vs {}x{}x{}",
            f_ref.rows(),
            f_ref.cols(),
            f_ref.channels(),
            f_dist.rows(),
            f_dist.cols(),
            f_dist.channels()
        )));
    }
    let k = f_ref.channels();
    let n = f_ref.positions() as f64;
    let mut stats = ChannelStats {
        mse: Vec::with_capacity(k),
        correlation: Vec::with_capacity(k),
        energy: Vec::with_capacity(k),
        weights: Vec::with_capacity(k),
    };
    for ch in 0..k {
        let a: Vec<f64> = f_ref.channel(ch).collect();
        let b: Vec<f64> = f_dist.channel(ch).collect();
        let mse = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n;
        let ea = a.iter().map(|x| x * x).sum::<f64>() / n;
        let eb = b.iter().map(|x| x * x).sum::<f64>() / n;
        stats.mse.push(mse);
        stats.correlation.push(map_correlation(&a, &b));
        stats.energy.push(0.5 * (ea + eb));
    }
    stats.weights = stats.energy.iter().map(|&e| raw_weight(e, h)).collect();
    let z: f64 = stats.weights.iter().sum();
    if !(z >= MIN_WEIGHT_MASS) {
        return Err(Error::DegenerateInput);
    }
    stats.weights.iter_mut().for_each(|w| *w /= z);
    Ok(stats)
}

/// Blends the pooled MSE and correlation terms.
pub fn quality_from_stats(stats: &ChannelStats, lambda: f64, c: f64) -> f64 {
    (1.0 - lambda) * (-stats.weighted_mse() / c).exp() + lambda * stats.weighted_correlation()
}

/// Score together with the diagnostics it was computed from.
#[derive(Clone, Debug, Serialize)]
pub struct Assessment {
    pub score: f64,
    pub stats: ChannelStats,
}

/// A reference image prepared once (cropped, filtered, transform learned,
/// features extracted) so several distorted versions can be scored against it.
#[derive(Clone, Debug)]
pub struct PreparedReference {
    config: QualityConfig,
    width: usize,
    height: usize,
    model: SaakModel,
    features: FeatureTensor,
}

impl PreparedReference {
    pub fn new(reference: &GrayImage, config: &QualityConfig) -> Result<Self> {
        config.validate()?;
        let cropped = crop_to_multiple(reference, config.tile_size())?;
        let filtered = gaussian_filter(&cropped, &config.filter);
        let model = SaakModel::train(&filtered, config)?;
        let features = model.forward(&filtered)?;
        Ok(PreparedReference {
            config: *config,
            width: reference.width(),
            height: reference.height(),
            model,
            features,
        })
    }

    pub fn model(&self) -> &SaakModel {
        &self.model
    }

    pub fn features(&self) -> &FeatureTensor {
        &self.features
    }

    pub fn config(&self) -> &QualityConfig {
        &self.config
    }

    /// Scores `dist` using this reference's training-time config with the
    /// given blend factor.
    pub fn assess_with_lambda(&self, dist: &GrayImage, lambda: f64) -> Result<Assessment> {
        if dist.width() != self.width || dist.height() != self.height {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.width, self.height),
                got: format!("{}x{}", dist.width(), dist.height()),
            });
        }
        self.config.with_lambda(lambda).validate()?;
        let cropped = crop_to_multiple(dist, self.config.tile_size())?;
        let filtered = gaussian_filter(&cropped, &self.config.filter);
        let features = self.model.forward(&filtered)?;
        let stats = channel_stats(&self.features, &features, self.config.h)?;
        let score = quality_from_stats(&stats, lambda, self.config.c);
        Ok(Assessment { score, stats })
    }

    pub fn assess(&self, dist: &GrayImage) -> Result<Assessment> {
        self.assess_with_lambda(dist, self.config.lambda)
    }
}

/// Full-reference quality of `dist` against `reference`.
pub fn assess(
    reference: &GrayImage,
    dist: &GrayImage,
    config: &QualityConfig,
) -> Result<Assessment> {
    if !reference.same_dims(dist) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", reference.width(), reference.height()),
            got: format!("{}x{}", dist.width(), dist.height()),
        });
    }
    PreparedReference::new(reference, config)?.assess(dist)
}
