//! Data-driven Saak transform: KLT kernels learned per image, cascaded with
//! sign-to-position (S/P) conversion between stages.
//!
//! Each stage splits its input into non-overlapping `b x b` spatial blocks and
//! projects every block vector onto a fixed DC kernel followed by `d - 1`
//! covariance eigenvectors (the AC kernels). Before the next stage every AC
//! channel is split into a positive and a negative part, which is the
//! ReLU-with-augmented-kernels formulation in position form and loses nothing.
//!
//! Block vectors are laid out channel-major, then row-major inside the block:
//! index `ch * b * b + dy * b + dx`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::config::QualityConfig;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::linalg::{dot, normalize_sign, sorted_symmetric_eigen, ConstantComplement};

/// Tolerance used when deciding whether both halves of an S/P pair are set.
pub const PAIR_TOLERANCE: f64 = 1e-12;

/// Spatial grid of coefficient vectors, stored `(row, col, channel)` with the
/// channel index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTensor {
    rows: usize,
    cols: usize,
    channels: usize,
    values: Vec<f64>,
}

impl FeatureTensor {
    pub fn new(rows: usize, cols: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || channels == 0 {
            return Err(Error::GeometryMismatch(format!(
                "tensor dimensions must be positive, got {rows}x{cols}x{channels}"
            )));
        }
        if values.len() != rows * cols * channels {
            return Err(Error::dims(rows * cols * channels, values.len()));
        }
        Ok(FeatureTensor {
            rows,
            cols,
            channels,
            values,
        })
    }

    pub fn zeros(rows: usize, cols: usize, channels: usize) -> Self {
        FeatureTensor {
            rows,
            cols,
            channels,
            values: vec![0.0; rows * cols * channels],
        }
    }

    pub fn from_image(img: &GrayImage) -> Self {
        FeatureTensor {
            rows: img.height(),
            cols: img.width(),
            channels: 1,
            values: img.data().to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn positions(&self) -> usize {
        self.rows * self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, k: usize) -> f64 {
        self.values[(row * self.cols + col) * self.channels + k]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, k: usize, v: f64) {
        self.values[(row * self.cols + col) * self.channels + k] = v;
    }

    /// Coefficient vector at one spatial position.
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.cols + col) * self.channels;
        &self.values[start..start + self.channels]
    }

    #[inline]
    fn at_mut(&mut self, row: usize, col: usize) -> &mut [f64] {
        let start = (row * self.cols + col) * self.channels;
        &mut self.values[start..start + self.channels]
    }

    /// Spatial map of channel `k` in row-major position order.
    pub fn channel(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(k).step_by(self.channels).copied()
    }

    pub fn same_geometry(&self, other: &FeatureTensor) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.channels == other.channels
    }

    /// Single-channel tensor back to an image.
    pub fn to_image(&self) -> Result<GrayImage> {
        if self.channels != 1 {
            return Err(Error::GeometryMismatch(format!(
                "expected 1 channel, got {}",
                self.channels
            )));
        }
        GrayImage::new(self.cols, self.rows, self.values.clone())
    }

    /// Channel-major block vector of the `block x block` window at `(top, left)`.
    fn window_into(&self, top: usize, left: usize, block: usize, out: &mut [f64]) {
        for ch in 0..self.channels {
            for dy in 0..block {
                for dx in 0..block {
                    out[ch * block * block + dy * block + dx] = self.get(top + dy, left + dx, ch);
                }
            }
        }
    }

    /// All `block x block` windows at the given stride, vectorized.
    pub fn windows(&self, block: usize, stride: usize) -> Vec<Vec<f64>> {
        if block == 0 || stride == 0 || block > self.rows || block > self.cols {
            return Vec::new();
        }
        let d = block * block * self.channels;
        let mut out = Vec::new();
        for top in (0..=self.rows - block).step_by(stride) {
            for left in (0..=self.cols - block).step_by(stride) {
                let mut v = vec![0.0; d];
                self.window_into(top, left, block, &mut v);
                out.push(v);
            }
        }
        out
    }
}

/// One learned stage: DC kernel plus descending-energy AC kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct SaakStage {
    input_channels: usize,
    block_size: usize,
    dc_kernel: Vec<f64>,
    ac_kernels: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
}

impl SaakStage {
    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Block vector dimension `block_size^2 * input_channels`.
    pub fn dim(&self) -> usize {
        self.dc_kernel.len()
    }

    pub fn dc_kernel(&self) -> &[f64] {
        &self.dc_kernel
    }

    pub fn ac_kernels(&self) -> &[Vec<f64>] {
        &self.ac_kernels
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// All kernels, DC first.
    pub fn kernels(&self) -> impl Iterator<Item = &[f64]> {
        std::iter::once(self.dc_kernel.as_slice()).chain(self.ac_kernels.iter().map(Vec::as_slice))
    }

    /// Channel count after this stage's output goes through S/P conversion.
    pub fn augmented_channels(&self) -> usize {
        1 + 2 * (self.dim() - 1)
    }

    fn project(&self, block: &[f64], out: &mut [f64], residual: &mut [f64]) {
        let dc = dot(&self.dc_kernel, block);
        out[0] = dc;
        for ((r, &x), &k) in residual.iter_mut().zip(block).zip(&self.dc_kernel) {
            *r = x - dc * k;
        }
        for (o, kernel) in out[1..].iter_mut().zip(&self.ac_kernels) {
            *o = dot(kernel, residual);
        }
    }

    fn reconstruct(&self, coefs: &[f64], out: &mut [f64]) {
        for (o, &k) in out.iter_mut().zip(&self.dc_kernel) {
            *o = coefs[0] * k;
        }
        for (&c, kernel) in coefs[1..].iter().zip(&self.ac_kernels) {
            if c != 0.0 {
                for (o, &k) in out.iter_mut().zip(kernel) {
                    *o += c * k;
                }
            }
        }
    }
}

/// Vectorized pixel patches whose population standard deviation exceeds
/// `std_threshold`.
pub fn extract_training_patches(
    img: &GrayImage,
    block: usize,
    stride: usize,
    std_threshold: f64,
) -> Result<Vec<Vec<f64>>> {
    if block == 0 || img.width() < block || img.height() < block {
        return Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min: block,
        });
    }
    let patches: Vec<Vec<f64>> = FeatureTensor::from_image(img)
        .windows(block, stride)
        .into_iter()
        .filter(|p| population_std(p) > std_threshold)
        .collect();
    if patches.is_empty() {
        return Err(Error::NoTrainingSamples);
    }
    Ok(patches)
}

pub(crate) fn population_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Learns one stage from block vectors of a `block_size x block_size` window
/// over `input_channels` channels.
///
/// The AC kernels are the eigenvectors of the population covariance of the
/// DC-removed samples about their mean. The covariance is diagonalized in an
/// explicit basis of the DC kernel's orthogonal complement so the returned set
/// is orthonormal and complete even when the samples are rank deficient.
pub fn train_stage(
    samples: &[Vec<f64>],
    block_size: usize,
    input_channels: usize,
) -> Result<SaakStage> {
    let d = block_size * block_size * input_channels;
    if d == 0 {
        return Err(Error::GeometryMismatch("empty block".into()));
    }
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples(samples.len()));
    }
    if let Some(bad) = samples.iter().find(|s| s.len() != d) {
        return Err(Error::dims(d, bad.len()));
    }

    let n = samples.len();
    let dc_kernel = vec![1.0 / (d as f64).sqrt(); d];
    let complement = ConstantComplement::new(d);
    let m = d - 1;

    // coordinates in the complement basis are exactly the DC-removed residuals
    let mut coords = DMatrix::<f64>::zeros(n, m);
    let mut row = vec![0.0; m];
    for (i, s) in samples.iter().enumerate() {
        complement.project(s, &mut row);
        for (j, &v) in row.iter().enumerate() {
            coords[(i, j)] = v;
        }
    }
    for j in 0..m {
        let mut col = coords.column_mut(j);
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
    }
    let cov = (coords.transpose() * &coords) / n as f64;
    let cov = (&cov + cov.transpose()) * 0.5;

    let mut ac_kernels = Vec::with_capacity(m);
    let mut eigenvalues = Vec::with_capacity(m);
    for (value, vector) in sorted_symmetric_eigen(cov) {
        let mut kernel = complement.lift(&vector);
        let norm = dot(&kernel, &kernel).sqrt();
        kernel.iter_mut().for_each(|k| *k /= norm);
        normalize_sign(&mut kernel);
        ac_kernels.push(kernel);
        eigenvalues.push(value.max(0.0));
    }

    Ok(SaakStage {
        input_channels,
        block_size,
        dc_kernel,
        ac_kernels,
        eigenvalues,
    })
}

/// Signed stage output to non-negative S/P form: DC is copied, each AC channel
/// `k` becomes the pair `(max(g, 0), max(-g, 0))` at channels `2k - 1, 2k`.
pub fn sp_convert(signed: &FeatureTensor) -> FeatureTensor {
    let ac = signed.channels - 1;
    let channels = 1 + 2 * ac;
    let mut out = FeatureTensor::zeros(signed.rows, signed.cols, channels);
    for (src, dst) in signed
        .values
        .chunks_exact(signed.channels)
        .zip(out.values.chunks_exact_mut(channels))
    {
        dst[0] = src[0];
        for (k, &g) in src[1..].iter().enumerate() {
            if g > 0.0 {
                dst[1 + 2 * k] = g;
            } else if g < 0.0 {
                dst[2 + 2 * k] = -g;
            }
        }
    }
    out
}

fn pair_channels(nonneg: &FeatureTensor) -> Result<usize> {
    if nonneg.channels.is_multiple_of(2) {
        return Err(Error::GeometryMismatch(format!(
            "S/P tensor must have an odd channel count, got {}",
            nonneg.channels
        )));
    }
    Ok(1 + (nonneg.channels - 1) / 2)
}

fn merge_pairs(nonneg: &FeatureTensor, validate: bool) -> Result<FeatureTensor> {
    let channels = pair_channels(nonneg)?;
    let mut out = FeatureTensor::zeros(nonneg.rows, nonneg.cols, channels);
    for (pos, (src, dst)) in nonneg
        .values
        .chunks_exact(nonneg.channels)
        .zip(out.values.chunks_exact_mut(channels))
        .enumerate()
    {
        dst[0] = src[0];
        for (k, pair) in src[1..].chunks_exact(2).enumerate() {
            let (pos_part, neg_part) = (pair[0], pair[1]);
            if validate && pos_part > PAIR_TOLERANCE && neg_part > PAIR_TOLERANCE {
                return Err(Error::InvalidPair {
                    row: pos / nonneg.cols,
                    col: pos % nonneg.cols,
                    channel: k + 1,
                });
            }
            dst[1 + k] = pos_part - neg_part;
        }
    }
    Ok(out)
}

/// Merges S/P pairs back into signed channels, rejecting pairs where both
/// halves are positive.
pub fn ps_convert(nonneg: &FeatureTensor) -> Result<FeatureTensor> {
    merge_pairs(nonneg, true)
}

/// Applies one stage to non-overlapping blocks.
pub fn forward_stage(input: &FeatureTensor, stage: &SaakStage) -> Result<FeatureTensor> {
    let b = stage.block_size;
    if input.channels != stage.input_channels {
        return Err(Error::GeometryMismatch(format!(
            "stage expects {} input channels, got {}",
            stage.input_channels, input.channels
        )));
    }
    if !input.rows.is_multiple_of(b) || !input.cols.is_multiple_of(b) {
        return Err(Error::GeometryMismatch(format!(
            "{}x{} grid is not divisible by block size {b}",
            input.rows, input.cols
        )));
    }
    let d = stage.dim();
    let mut out = FeatureTensor::zeros(input.rows / b, input.cols / b, d);
    let mut block = vec![0.0; d];
    let mut residual = vec![0.0; d];
    for r in 0..out.rows {
        for c in 0..out.cols {
            input.window_into(r * b, c * b, b, &mut block);
            stage.project(&block, out.at_mut(r, c), &mut residual);
        }
    }
    Ok(out)
}

/// Exact inverse of [`forward_stage`]: each block is rebuilt from the
/// transposed kernel matrix.
pub fn inverse_stage(coefs: &FeatureTensor, stage: &SaakStage) -> Result<FeatureTensor> {
    let b = stage.block_size;
    let d = stage.dim();
    if coefs.channels != d {
        return Err(Error::GeometryMismatch(format!(
            "stage produces {d} channels, tensor has {}",
            coefs.channels
        )));
    }
    let ch = stage.input_channels;
    let mut out = FeatureTensor::zeros(coefs.rows * b, coefs.cols * b, ch);
    let mut block = vec![0.0; d];
    for r in 0..coefs.rows {
        for c in 0..coefs.cols {
            stage.reconstruct(coefs.at(r, c), &mut block);
            for k in 0..ch {
                for dy in 0..b {
                    for dx in 0..b {
                        out.set(r * b + dy, c * b + dx, k, block[k * b * b + dy * b + dx]);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Per-channel mean of squared coefficients.
pub fn energy_spectrum(f: &FeatureTensor) -> Vec<f64> {
    let mut energy = vec![0.0; f.channels];
    for pos in f.values.chunks_exact(f.channels) {
        for (e, &v) in energy.iter_mut().zip(pos) {
            *e += v * v;
        }
    }
    let n = f.positions() as f64;
    energy.iter_mut().for_each(|e| *e /= n);
    energy
}

/// A cascade of trained stages.
#[derive(Clone, Debug, PartialEq)]
pub struct SaakModel {
    stages: Vec<SaakStage>,
    block_size: usize,
}

impl SaakModel {
    pub fn from_stages(stages: Vec<SaakStage>) -> Result<Self> {
        let first = stages
            .first()
            .ok_or_else(|| Error::GeometryMismatch("model needs at least one stage".into()))?;
        let block_size = first.block_size;
        if first.input_channels != 1 {
            return Err(Error::GeometryMismatch(
                "first stage must take a single channel".into(),
            ));
        }
        for pair in stages.windows(2) {
            if pair[1].block_size != block_size
                || pair[1].input_channels != pair[0].augmented_channels()
            {
                return Err(Error::GeometryMismatch(format!(
                    "stage with {} input channels cannot follow a stage of dim {}",
                    pair[1].input_channels,
                    pair[0].dim()
                )));
            }
        }
        Ok(SaakModel { stages, block_size })
    }

    pub fn stages(&self) -> &[SaakStage] {
        &self.stages
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    /// Number of spectral components K in the final signed output.
    pub fn output_channels(&self) -> usize {
        self.stages.last().map_or(0, SaakStage::dim)
    }

    pub fn tile_size(&self) -> usize {
        self.block_size.pow(self.stages.len() as u32)
    }

    fn check_image(&self, img: &GrayImage) -> Result<()> {
        let t = self.tile_size();
        if !img.width().is_multiple_of(t) || !img.height().is_multiple_of(t) {
            return Err(Error::GeometryMismatch(format!(
                "{}x{} image is not divisible by {t}",
                img.width(),
                img.height()
            )));
        }
        Ok(())
    }

    /// Learns every stage from a (filtered, cropped) reference image.
    ///
    /// Stage 1 sees overlapped pixel patches at `train_stride` that pass the
    /// std filter; later stages see every stride-1 window of the previous
    /// stage's S/P output on the same image.
    pub fn train(reference: &GrayImage, config: &QualityConfig) -> Result<Self> {
        config.validate()?;
        let b = config.block_size;
        let t = config.tile_size();
        if !reference.width().is_multiple_of(t) || !reference.height().is_multiple_of(t) {
            return Err(Error::GeometryMismatch(format!(
                "{}x{} reference is not divisible by {t}",
                reference.width(),
                reference.height()
            )));
        }

        let patches =
            extract_training_patches(reference, b, config.train_stride, config.std_threshold)?;
        let mut stages = vec![train_stage(&patches, b, 1)?];
        let mut features = FeatureTensor::from_image(reference);
        for _ in 1..config.num_stages {
            let prev = stages.last().expect("at least one stage");
            features = sp_convert(&forward_stage(&features, prev)?);
            let windows = features.windows(b, 1);
            if windows.len() < 2 {
                return Err(Error::ImageTooSmall {
                    width: reference.width(),
                    height: reference.height(),
                    min: t,
                });
            }
            stages.push(train_stage(&windows, b, features.channels)?);
        }
        SaakModel::from_stages(stages)
    }

    /// Signed coefficients of the last stage, S/P conversion between stages.
    pub fn forward(&self, img: &GrayImage) -> Result<FeatureTensor> {
        self.check_image(img)?;
        let mut t = FeatureTensor::from_image(img);
        for (i, stage) in self.stages.iter().enumerate() {
            if i > 0 {
                t = sp_convert(&t);
            }
            t = forward_stage(&t, stage)?;
        }
        Ok(t)
    }

    /// Reconstructs the image from last-stage signed coefficients.
    ///
    /// Pairs are merged as `positive - negative` without the disjointness
    /// check of [`ps_convert`], so any coefficient tensor of the right shape
    /// has a well-defined (linear) reconstruction.
    pub fn inverse(&self, features: &FeatureTensor) -> Result<GrayImage> {
        let out_dim = self.output_channels();
        if features.channels != out_dim {
            return Err(Error::GeometryMismatch(format!(
                "model outputs {out_dim} channels, tensor has {}",
                features.channels
            )));
        }
        let mut t = features.clone();
        for (i, stage) in self.stages.iter().enumerate().rev() {
            t = inverse_stage(&t, stage)?;
            if i > 0 {
                t = merge_pairs(&t, false)?;
            }
        }
        t.to_image()
    }

    /// Plain-text dump: a header, then per stage its geometry, eigenvalues
    /// and the kernel matrix one row per kernel (DC first). Floats use the
    /// shortest round-trip representation.
    pub fn write_dump(&self, mut w: impl Write) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "saak-model 1");
        let _ = writeln!(s, "block_size {}", self.block_size);
        let _ = writeln!(s, "num_stages {}", self.stages.len());
        for stage in &self.stages {
            let _ = writeln!(s, "stage {} {}", stage.input_channels, stage.dim());
            write_row(&mut s, &stage.eigenvalues);
            for kernel in stage.kernels() {
                write_row(&mut s, kernel);
            }
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_dump(r: impl BufRead) -> Result<Self> {
        let bad = |msg: &str| Error::MalformedHeader(format!("model dump: {msg}"));
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| bad("unexpected end"))?
                .map_err(Error::from)
        };
        if next()?.trim() != "saak-model 1" {
            return Err(bad("unknown header"));
        }
        let field = |line: String, name: &str| -> Result<usize> {
            line.strip_prefix(name)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| bad(name))
        };
        let block_size = field(next()?, "block_size")?;
        let num_stages = field(next()?, "num_stages")?;
        let mut stages = Vec::with_capacity(num_stages);
        for _ in 0..num_stages {
            let head = next()?;
            let nums: Vec<usize> = head
                .strip_prefix("stage")
                .ok_or_else(|| bad("stage header"))?
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| bad("stage header")))
                .collect::<Result<_>>()?;
            let [input_channels, dim] = nums[..] else {
                return Err(bad("stage header"));
            };
            if dim != block_size * block_size * input_channels {
                return Err(bad("stage dimension"));
            }
            let eigenvalues = parse_row(&next()?, dim - 1).ok_or_else(|| bad("eigenvalues"))?;
            let dc_kernel = parse_row(&next()?, dim).ok_or_else(|| bad("kernel row"))?;
            let mut ac_kernels = Vec::with_capacity(dim - 1);
            for _ in 1..dim {
                ac_kernels.push(parse_row(&next()?, dim).ok_or_else(|| bad("kernel row"))?);
            }
            stages.push(SaakStage {
                input_channels,
                block_size,
                dc_kernel,
                ac_kernels,
                eigenvalues,
            });
        }
        SaakModel::from_stages(stages)
    }
}

fn write_row(s: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v:?}");
    }
    s.push('\n');
}

fn parse_row(line: &str, len: usize) -> Option<Vec<f64>> {
    let row: Vec<f64> = line
        .split_whitespace()
        .map(|v| v.parse().ok())
        .collect::<Option<_>>()?;
    (row.len() == len).then_some(row)
}
