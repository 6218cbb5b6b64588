#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

use saak_iqa::GrayImage;

/// Deterministic synthetic "natural" image: oriented gratings, a few hard
/// edged shapes and mild noise, rounded to 8-bit levels.
pub fn textured_image(seed: u64, width: usize, height: usize) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gratings: Vec<(f64, f64, f64, f64)> = (0..5)
        .map(|_| {
            let theta = rng.gen_range(0.0..std::f64::consts::PI);
            let freq = rng.gen_range(0.03..0.6);
            let amp = rng.gen_range(8.0..35.0);
            let phase = rng.gen_range(0.0..6.3);
            (theta, freq, amp, phase)
        })
        .collect();
    let shapes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(0.0..width as f64),
                rng.gen_range(0.0..height as f64),
                rng.gen_range(4.0..(width.min(height) as f64 / 3.0).max(5.0)),
                rng.gen_range(-50.0..50.0),
            )
        })
        .collect();
    let base = rng.gen_range(90.0..160.0);
    let noise: Vec<f64> = (0..width * height)
        .map(|_| rng.gen_range(-4.0..4.0))
        .collect();
    GrayImage::from_fn(width, height, |r, c| {
        let (x, y) = (c as f64, r as f64);
        let mut v = base + 0.3 * (x - y);
        for &(theta, freq, amp, phase) in &gratings {
            v += amp * (freq * (x * theta.cos() + y * theta.sin()) + phase).sin();
        }
        for &(cx, cy, radius, delta) in &shapes {
            if ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() < radius {
                v += delta;
            }
        }
        (v + noise[r * width + c]).round().clamp(0.0, 255.0)
    })
}

/// Uniform random 0..255 image.
pub fn random_image(seed: u64, width: usize, height: usize) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::from_fn(width, height, |_, _| rng.gen_range(0.0..255.0))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub const QSTEPS: [f64; 6] = [2.0, 8.0, 16.0, 32.0, 64.0, 128.0];

/// Writes `images` textured references plus their block-DCT distortions at
/// every step in `QSTEPS`, and a manifest with `mos = -qstep`. Returns the
/// manifest path.
pub fn write_synthetic_batch(dir: &Path, images: u64, size: usize, codec: &str) -> PathBuf {
    let mut manifest = String::from("ref,dist,mos,codec\n");
    for i in 0..images {
        let reference = textured_image(100 + i, size, size);
        let ref_name = format!("ref{i}.pgm");
        saak_iqa::write_pgm(&reference, dir.join(&ref_name)).unwrap();
        for q in QSTEPS {
            let dist = saak_iqa::harness::synth_distort(&reference, q).unwrap();
            let dist_name = format!("ref{i}_q{q}.pgm");
            saak_iqa::write_pgm(&dist, dir.join(&dist_name)).unwrap();
            manifest.push_str(&format!("{ref_name},{dist_name},{},{codec}\n", -q));
        }
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).unwrap();
    path
}
