mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saak_iqa::saak::{
    energy_spectrum, extract_training_patches, forward_stage, inverse_stage, ps_convert,
    sp_convert, train_stage,
};
use saak_iqa::{FeatureTensor, QualityConfig, SaakModel, SaakStage};

use common::{max_abs_diff, random_image, textured_image};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gram_deviation(stage: &SaakStage) -> f64 {
    let kernels: Vec<&[f64]> = stage.kernels().collect();
    let mut worst = 0.0f64;
    for (i, a) in kernels.iter().enumerate() {
        for (j, b) in kernels.iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(a, b) - expect).abs());
        }
    }
    worst
}

fn model_for(seed: u64, size: usize) -> (saak_iqa::GrayImage, SaakModel) {
    let img = textured_image(seed, size, size);
    let model = SaakModel::train(&img, &QualityConfig::default()).unwrap();
    (img, model)
}

#[test]
fn single_block_matches_dense_matmul() {
    let (_, model) = model_for(3, 32);
    let stage = &model.stages()[0];
    let block = saak_iqa::crop_to_multiple(&textured_image(11, 20, 20), 16).unwrap();
    let block = saak_iqa::GrayImage::new(
        4,
        4,
        (0..16).map(|i| block.get(i / 4 + 3, i % 4 + 5)).collect(),
    )
    .unwrap();
    let out = forward_stage(&FeatureTensor::from_image(&block), stage).unwrap();
    assert_eq!(out.channels(), 16);
    for (k, kernel) in stage.kernels().enumerate() {
        let expected = dot(kernel, block.data());
        assert!((out.get(0, 0, k) - expected).abs() < 1e-10, "channel {k}");
    }
}

#[test]
fn trained_stages_are_orthonormal_and_dc_is_constant() {
    for seed in 0..3 {
        let (_, model) = model_for(seed, 64);
        for stage in model.stages() {
            assert!(gram_deviation(stage) <= 1e-9);
            let d = stage.dim() as f64;
            assert!(stage
                .dc_kernel()
                .iter()
                .all(|&v| (v - 1.0 / d.sqrt()).abs() < 1e-15));
            assert!(stage.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
            assert!(stage.eigenvalues().iter().all(|&e| e >= 0.0));
        }
    }
}

#[test]
fn kernels_are_covariance_eigenvectors() {
    let img = textured_image(5, 32, 32);
    let samples = extract_training_patches(&img, 4, 2, 2.0).unwrap();
    let stage = train_stage(&samples, 4, 1).unwrap();

    // independent covariance of DC-removed residuals about their mean
    let d = 16;
    let dc = stage.dc_kernel();
    let residuals: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            let p = dot(s, dc);
            s.iter().zip(dc).map(|(x, k)| x - p * k).collect()
        })
        .collect();
    let n = residuals.len() as f64;
    let mean: Vec<f64> = (0..d)
        .map(|j| residuals.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in &residuals {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / n;
            }
        }
    }
    let scale = cov.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    for (kernel, &lambda) in stage.ac_kernels().iter().zip(stage.eigenvalues()) {
        for i in 0..d {
            let av = dot(&cov[i], kernel);
            assert!((av - lambda * kernel[i]).abs() <= 1e-10 * scale);
        }
        // sign rule: the largest-magnitude entry is positive
        let max = kernel.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lead = kernel
            .iter()
            .find(|v| v.abs() >= max * (1.0 - 1e-12))
            .unwrap();
        assert!(*lead > 0.0);
    }
}

#[test]
fn projection_variances_follow_eigenvalue_order() {
    let img = textured_image(8, 64, 64);
    let samples = extract_training_patches(&img, 4, 2, 2.0).unwrap();
    let stage = train_stage(&samples, 4, 1).unwrap();
    let n = samples.len() as f64;
    let variances: Vec<f64> = stage
        .ac_kernels()
        .iter()
        .map(|k| {
            let proj: Vec<f64> = samples.iter().map(|s| dot(s, k)).collect();
            let m = proj.iter().sum::<f64>() / n;
            proj.iter().map(|p| (p - m).powi(2)).sum::<f64>() / n
        })
        .collect();
    let tol = 1e-9 * variances[0].max(1.0);
    for (v, &e) in variances.iter().zip(stage.eigenvalues()) {
        assert!((v - e).abs() <= tol);
    }
    assert!(variances.windows(2).all(|w| w[1] <= w[0] + tol));
}

#[test]
fn dc_only_tensor_reconstructs_constant() {
    let (_, model) = model_for(2, 32);
    let v = 37.5;
    let mut t = FeatureTensor::zeros(2, 2, model.output_channels());
    for r in 0..2 {
        for c in 0..2 {
            t.set(r, c, 0, v);
        }
    }
    let rec = model.inverse(&t).unwrap();

    // explicit transposes: stage 2 DC kernel, merge pairs, stage 1 DC kernel
    let s2 = &model.stages()[1];
    let stage2_block: Vec<f64> = s2.dc_kernel().iter().map(|k| v * k).collect();
    let stage1_dc = stage2_block[0]; // channel 0, position (0, 0)
    for ch in 1..31 {
        assert!((stage2_block[ch * 16] - stage1_dc).abs() < 1e-15);
    }
    let pixel = stage1_dc * model.stages()[0].dc_kernel()[0];
    assert!((pixel - v / (4.0 * 496f64.sqrt())).abs() < 1e-12);
    assert!(rec.data().iter().all(|&p| (p - pixel).abs() < 1e-12));
}

#[test]
fn energy_is_compacted_into_dc() {
    for seed in 0..3 {
        let (img, model) = model_for(seed, 64);
        let energy = energy_spectrum(&model.forward(&img).unwrap());
        let mut ac: Vec<f64> = energy[1..].to_vec();
        ac.sort_by(f64::total_cmp);
        let median = ac[ac.len() / 2];
        assert!(energy[0] > median);
        assert!(energy.iter().all(|&e| e >= 0.0));
    }
}

#[test]
fn stage_two_dc_is_nonnegative() {
    let (_, model) = model_for(4, 64);
    let f = model.forward(&random_image(77, 64, 64)).unwrap();
    assert!(f.channel(0).all(|v| v >= 0.0));
}

#[test]
fn training_and_forward_are_deterministic() {
    let img = textured_image(6, 64, 64);
    let a = SaakModel::train(&img, &QualityConfig::default()).unwrap();
    let b = SaakModel::train(&img, &QualityConfig::default()).unwrap();
    assert_eq!(a, b);
    let fa = a.forward(&img).unwrap();
    let fb = a.forward(&img).unwrap();
    assert_eq!(fa.values(), fb.values());
    assert_eq!((fa.rows(), fa.cols(), fa.channels()), (4, 4, 496));
}

#[test]
fn constant_reference_has_no_samples() {
    let flat = saak_iqa::GrayImage::constant(64, 64, 128.0);
    assert!(matches!(
        SaakModel::train(&flat, &QualityConfig::default()),
        Err(saak_iqa::Error::NoTrainingSamples)
    ));
}

#[test]
fn forward_stage_geometry_errors() {
    let (_, model) = model_for(1, 32);
    let wrong_channels = FeatureTensor::zeros(8, 8, 3);
    assert!(forward_stage(&wrong_channels, &model.stages()[0]).is_err());
    let ragged = FeatureTensor::zeros(6, 8, 1);
    assert!(forward_stage(&ragged, &model.stages()[0]).is_err());
    assert!(inverse_stage(&FeatureTensor::zeros(2, 2, 10), &model.stages()[0]).is_err());
}

fn tensor_strategy() -> impl Strategy<Value = FeatureTensor> {
    (1usize..5, 1usize..5, 1usize..6, any::<u64>()).prop_map(|(r, c, ch, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..r * c * ch)
            .map(|_| match rng.gen_range(0..4) {
                0 => 0.0,
                _ => rng.gen_range(-300.0..300.0),
            })
            .collect();
        FeatureTensor::new(r, c, ch, values).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sp_then_ps_is_identity(t in tensor_strategy()) {
        let sp = sp_convert(&t);
        prop_assert_eq!(sp.channels(), 1 + 2 * (t.channels() - 1));
        for pos in sp.values().chunks_exact(sp.channels()) {
            for pair in pos[1..].chunks_exact(2) {
                prop_assert!(pair[0] >= 0.0 && pair[1] >= 0.0);
                prop_assert_eq!(pair[0] * pair[1], 0.0);
            }
        }
        prop_assert_eq!(ps_convert(&sp).unwrap(), t);
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forward_inverse_round_trip(seed in any::<u64>()) {
        let img = random_image(seed, 32, 32);
        let model = SaakModel::train(&img, &QualityConfig::default()).unwrap();
        let back = model.inverse(&model.forward(&img).unwrap()).unwrap();
        prop_assert!(max_abs_diff(img.data(), back.data()) <= 1e-6);
    }

    #[test]
    fn forward_stage_preserves_energy(seed in any::<u64>(), channels in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 16 * channels;
        let samples: Vec<Vec<f64>> =
            (0..40).map(|_| (0..d).map(|_| rng.gen_range(0.0..255.0)).collect()).collect();
        let stage = train_stage(&samples, 4, channels).unwrap();
        let values: Vec<f64> = (0..8 * 8 * channels).map(|_| rng.gen_range(-100.0..255.0)).collect();
        let input = FeatureTensor::new(8, 8, channels, values).unwrap();
        let out = forward_stage(&input, &stage).unwrap();
        let e_in: f64 = input.values().iter().map(|v| v * v).sum();
        let e_out: f64 = out.values().iter().map(|v| v * v).sum();
        prop_assert!((e_in - e_out).abs() <= 1e-6 * e_in);
        let back = inverse_stage(&out, &stage).unwrap();
        prop_assert!(max_abs_diff(input.values(), back.values()) <= 1e-9);
    }
}
