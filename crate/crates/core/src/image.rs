//! Grayscale image container, PGM codec and the Gaussian pre-filter.
//!
//! Intensities stay on the raw 8-bit scale (0..=255 as `f64`) everywhere in
//! the crate; the metric constants are tuned for that scale.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major grayscale image with real-valued intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::GeometryMismatch(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::dims(width * height, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::GeometryMismatch("non-finite intensity".into()));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        GrayImage {
            width,
            height,
            data,
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn same_dims(&self, other: &GrayImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Reads a binary (P5) or ASCII (P2) PGM file.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    decode_pgm(&bytes)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            if self.bytes[self.pos] == b'#' {
                break;
            }
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        let tok = self
            .token()
            .ok_or_else(|| Error::MalformedHeader(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| {
                Error::MalformedHeader(format!("bad {what}: {:?}", String::from_utf8_lossy(tok)))
            })
    }
}

/// Decodes PGM bytes already in memory.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 {
        return Err(Error::MalformedHeader("file too short".into()));
    }
    let binary = match &bytes[..2] {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(Error::MalformedHeader(format!(
                "unsupported magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!(
            "nonpositive dimensions {width}x{height}"
        )));
    }
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    let expected = width * height;

    let data = if binary {
        // exactly one whitespace byte separates maxval from the raster
        let start = cur.pos + 1;
        let raster = bytes.get(start..).unwrap_or(&[]);
        if raster.len() < expected {
            return Err(Error::TruncatedData {
                expected,
                got: raster.len(),
            });
        }
        raster[..expected]
            .iter()
            .map(|&b| f64::from(b))
            .collect::<Vec<_>>()
    } else {
        let mut data = Vec::with_capacity(expected);
        while data.len() < expected {
            match cur.token() {
                Some(tok) => {
                    let v = std::str::from_utf8(tok)
                        .ok()
                        .and_then(|s| s.parse::<u32>().ok())
                        .ok_or_else(|| {
                            Error::MalformedHeader(format!(
                                "bad sample {:?}",
                                String::from_utf8_lossy(tok)
                            ))
                        })?;
                    data.push(f64::from(v));
                }
                None => {
                    return Err(Error::TruncatedData {
                        expected,
                        got: data.len(),
                    })
                }
            }
        }
        data
    };
    if let Some(v) = data.iter().find(|&&v| v > f64::from(maxval)) {
        return Err(Error::MalformedHeader(format!(
            "sample {v} exceeds maxval {maxval}"
        )));
    }
    GrayImage::new(width, height, data)
}

/// Encodes as binary P5 with maxval 255. Intensities are rounded and clamped.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8));
    out
}

pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode_pgm(img))?;
    Ok(())
}

/// Top-left crop to the largest multiple of `m` in each dimension.
pub fn crop_to_multiple(img: &GrayImage, m: usize) -> Result<GrayImage> {
    let too_small = || Error::ImageTooSmall {
        width: img.width,
        height: img.height,
        min: m,
    };
    if m == 0 {
        return Err(too_small());
    }
    let w = img.width / m * m;
    let h = img.height / m * m;
    if w < m || h < m {
        return Err(too_small());
    }
    if w == img.width && h == img.height {
        return Ok(img.clone());
    }
    let mut data = Vec::with_capacity(w * h);
    for r in 0..h {
        data.extend_from_slice(&img.row(r)[..w]);
    }
    Ok(GrayImage {
        width: w,
        height: h,
        data,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Border {
    /// Half-sample symmetric extension: `c b a | a b c | c b a`.
    Reflect,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FilterSpec {
    sigma: f64,
    radius: usize,
    border: Border,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            sigma: 1.0,
            radius: 3,
            border: Border::Reflect,
        }
    }
}

impl FilterSpec {
    pub fn new(sigma: f64, radius: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidFilter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        let min_radius = (3.0 * sigma).ceil() as usize;
        if radius < min_radius.max(1) {
            return Err(Error::InvalidFilter(format!(
                "radius {radius} below ceil(3*sigma) = {min_radius}"
            )));
        }
        Ok(FilterSpec {
            sigma,
            radius,
            border: Border::Reflect,
        })
    }

    /// Spec with the smallest admissible radius, `ceil(3 sigma)`.
    pub fn with_sigma(sigma: f64) -> Result<Self> {
        let radius = if sigma.is_finite() && sigma > 0.0 {
            ((3.0 * sigma).ceil() as usize).max(1)
        } else {
            1
        };
        Self::new(sigma, radius)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn border(&self) -> Border {
        self.border
    }

    /// Normalized 1-D taps of length `2 * radius + 1`.
    pub fn kernel(&self) -> Vec<f64> {
        let r = self.radius as isize;
        let denom = 2.0 * self.sigma * self.sigma;
        let mut taps: Vec<f64> = (-r..=r)
            .map(|i| (-((i * i) as f64) / denom).exp())
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= sum);
        taps
    }
}

/// Maps an out-of-range index onto `0..n` by half-sample reflection.
#[inline]
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

/// Separable Gaussian low-pass filter.
pub fn gaussian_filter(img: &GrayImage, spec: &FilterSpec) -> GrayImage {
    let taps = spec.kernel();
    let r = spec.radius as isize;
    let (w, h) = (img.width, img.height);

    let mut horiz = vec![0.0; w * h];
    for row in 0..h {
        let src = img.row(row);
        let dst = &mut horiz[row * w..(row + 1) * w];
        for (c, out) in dst.iter_mut().enumerate() {
            let c = c as isize;
            *out = taps
                .iter()
                .enumerate()
                .map(|(t, &k)| k * src[reflect_index(c + t as isize - r, w)])
                .sum();
        }
    }

    let mut data = vec![0.0; w * h];
    for row in 0..h {
        let row_i = row as isize;
        for (t, &k) in taps.iter().enumerate() {
            let src_row = reflect_index(row_i + t as isize - r, h);
            let src = &horiz[src_row * w..(src_row + 1) * w];
            for (out, &v) in data[row * w..(row + 1) * w].iter_mut().zip(src) {
                *out += k * v;
            }
        }
    }
    GrayImage {
        width: w,
        height: h,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |r, c| ((r * 7 + c * 3) % 256) as f64)
    }

    #[test]
    fn decodes_binary_pgm() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend([0u8, 255, 128, 64]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.data(), &[0.0, 255.0, 128.0, 64.0]);
    }

    #[test]
    fn decodes_ascii_pgm() {
        let img = decode_pgm(b"P2\n1 1\n255\n7").unwrap();
        assert_eq!(img.data(), &[7.0]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let img = decode_pgm(b"P2\n# made by hand\n2 1 # trailing\n15\n3 15\n").unwrap();
        assert_eq!(img.data(), &[3.0, 15.0]);
    }

    #[test]
    fn rejects_color_magic() {
        assert!(matches!(
            decode_pgm(b"P6\n1 1\n255\n\0\0\0"),
            Err(Error::MalformedHeader(_))
        ));
    }

    #[test]
    fn rejects_bad_headers() {
        assert!(matches!(
            decode_pgm(b"P5\n0 4\n255\n"),
            Err(Error::MalformedHeader(_))
        ));
        assert!(matches!(
            decode_pgm(b"P5\n1 1\n65535\n\0\0"),
            Err(Error::UnsupportedMaxval(65535))
        ));
        assert!(matches!(
            decode_pgm(b"P5\n2 2\n255\n\x01\x02"),
            Err(Error::TruncatedData {
                expected: 4,
                got: 2
            })
        ));
        assert!(matches!(
            decode_pgm(b"P2\n2 1\n255\n4"),
            Err(Error::TruncatedData { .. })
        ));
    }

    #[test]
    fn missing_file_is_reported() {
        assert!(matches!(
            read_pgm("/definitely/not/here.pgm"),
            Err(Error::FileNotFound(_))
        ));
    }

    #[test]
    fn crop_keeps_top_left() {
        let img = ramp(33, 17);
        let out = crop_to_multiple(&img, 16).unwrap();
        assert_eq!((out.width(), out.height()), (32, 16));
        for r in 0..16 {
            for c in 0..32 {
                assert_eq!(out.get(r, c), img.get(r, c));
            }
        }
    }

    #[test]
    fn crop_identity_and_too_small() {
        let img = ramp(64, 64);
        assert_eq!(crop_to_multiple(&img, 16).unwrap(), img);
        assert!(matches!(
            crop_to_multiple(&ramp(10, 10), 16),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn filter_spec_validation() {
        assert!(FilterSpec::new(1.0, 2).is_err());
        assert!(FilterSpec::new(0.0, 3).is_err());
        let spec = FilterSpec::with_sigma(1.5).unwrap();
        assert_eq!(spec.radius(), 5);
        let taps = spec.kernel();
        assert!((taps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(taps.iter().all(|&t| t >= 0.0));
    }

    #[test]
    fn reflect_index_folds() {
        let n = 4;
        let mapped: Vec<usize> = (-5..9).map(|i| reflect_index(i, n)).collect();
        assert_eq!(mapped, vec![3, 3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0, 0]);
        assert_eq!(reflect_index(-3, 1), 0);
    }

    #[test]
    fn constant_image_is_fixed_point() {
        let img = GrayImage::constant(9, 5, 100.0);
        let out = gaussian_filter(&img, &FilterSpec::default());
        assert!(out.data().iter().all(|&v| (v - 100.0).abs() < 1e-12));
    }

    #[test]
    fn impulse_response_matches_2d_gaussian() {
        let n = 15;
        let img = GrayImage::from_fn(n, n, |r, c| if r == 7 && c == 7 { 1.0 } else { 0.0 });
        let out = gaussian_filter(&img, &FilterSpec::default());

        let mut window = [[0.0f64; 7]; 7];
        let mut sum = 0.0;
        for (dy, row) in window.iter_mut().enumerate() {
            for (dx, v) in row.iter_mut().enumerate() {
                let (y, x) = (dy as f64 - 3.0, dx as f64 - 3.0);
                *v = (-(x * x + y * y) / 2.0).exp();
                sum += *v;
            }
        }
        for r in 0..n {
            for c in 0..n {
                let expected = if r.abs_diff(7) <= 3 && c.abs_diff(7) <= 3 {
                    window[r + 3 - 7][c + 3 - 7] / sum
                } else {
                    0.0
                };
                assert!((out.get(r, c) - expected).abs() < 1e-15, "({r},{c})");
            }
        }
    }
}
