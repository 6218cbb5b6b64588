//! JPEG-like blocking distortion: uniform quantization of 8x8 block DCT
//! coefficients.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::image::GrayImage;

const N: usize = 8;

/// Orthonormal DCT-II basis, `basis[u][x]`.
fn dct_basis() -> [[f64; N]; N] {
    let mut basis = [[0.0; N]; N];
    for (u, row) in basis.iter_mut().enumerate() {
        let scale = if u == 0 {
            (1.0 / N as f64).sqrt()
        } else {
            (2.0 / N as f64).sqrt()
        };
        for (x, v) in row.iter_mut().enumerate() {
            *v = scale * (PI * (2 * x + 1) as f64 * u as f64 / (2 * N) as f64).cos();
        }
    }
    basis
}

fn dct2(block: &[[f64; N]; N], basis: &[[f64; N]; N]) -> [[f64; N]; N] {
    let mut tmp = [[0.0; N]; N];
    for y in 0..N {
        for u in 0..N {
            tmp[y][u] = (0..N).map(|x| basis[u][x] * block[y][x]).sum();
        }
    }
    let mut out = [[0.0; N]; N];
    for v in 0..N {
        for u in 0..N {
            out[v][u] = (0..N).map(|y| basis[v][y] * tmp[y][u]).sum();
        }
    }
    out
}

fn idct2(coef: &[[f64; N]; N], basis: &[[f64; N]; N]) -> [[f64; N]; N] {
    let mut tmp = [[0.0; N]; N];
    for v in 0..N {
        for x in 0..N {
            tmp[v][x] = (0..N).map(|u| basis[u][x] * coef[v][u]).sum();
        }
    }
    let mut out = [[0.0; N]; N];
    for y in 0..N {
        for x in 0..N {
            out[y][x] = (0..N).map(|v| basis[v][y] * tmp[v][x]).sum();
        }
    }
    out
}

/// Quantizes every 8x8 block's DCT coefficients with step `qstep`, then
/// reconstructs and clamps to `[0, 255]`.
pub fn synth_distort(img: &GrayImage, qstep: f64) -> Result<GrayImage> {
    if !img.width().is_multiple_of(N) || !img.height().is_multiple_of(N) {
        return Err(Error::GeometryMismatch(format!(
            "{}x{} image is not divisible by {N}",
            img.width(),
            img.height()
        )));
    }
    if !(qstep.is_finite() && qstep > 0.0) {
        return Err(Error::GeometryMismatch(format!(
            "qstep must be positive, got {qstep}"
        )));
    }
    let basis = dct_basis();
    let w = img.width();
    let mut out = img.data().to_vec();
    for by in (0..img.height()).step_by(N) {
        for bx in (0..w).step_by(N) {
            let mut block = [[0.0; N]; N];
            for (y, row) in block.iter_mut().enumerate() {
                row.copy_from_slice(&img.row(by + y)[bx..bx + N]);
            }
            let mut coef = dct2(&block, &basis);
            for c in coef.iter_mut().flatten() {
                *c = (*c / qstep).round() * qstep;
            }
            let rec = idct2(&coef, &basis);
            for (y, row) in rec.iter().enumerate() {
                for (x, &v) in row.iter().enumerate() {
                    out[(by + y) * w + bx + x] = v.clamp(0.0, 255.0);
                }
            }
        }
    }
    GrayImage::new(w, img.height(), out)
}
