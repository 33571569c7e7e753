//! Cross-module invariants, checked on randomised inputs.

use ndarray::{s, Array1, Array2, Array3, Array4};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seiswarp::augment::{augment_dataset, reflect_freq, reflect_time, translate, AugmentPolicy};
use seiswarp::cluster::linalg::min_eigenvalue;
use seiswarp::cluster::{assign_all, e_step, fit, m_step, prune, CovarianceMode, GmmModel, TrainConfig};
use seiswarp::features::ops::{conv2d, relu};
use seiswarp::features::{forward, init_cnn, residual_block, BlockSpec, CnnConfig};
use seiswarp::pipeline::SpectralSettings;
use seiswarp::signal::{
    generate_synthetic, load_waveform, save_waveform, EventKind, Segment, SyntheticEvent, SyntheticSpec, Waveform,
    WaveformFormat,
};
use seiswarp::spectral::{
    build_filterbank, hz_to_warped, warped_to_hz, FrequencyScale, Spectrogram, Stft, StftConfig, WindowKind,
};

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn random_spectrogram(seed: u64, frames: usize, channels: usize) -> Spectrogram<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // few distinct values, so repeated entries are common
    let values = Array2::from_shape_fn((frames, channels), |_| rng.random_range(-8i32..8) as f64 * 0.5);
    let times = (0..frames).map(|t| t as f64 * 0.1).collect();
    let centers = (0..channels).map(|c| 1.0 + c as f64).collect();
    Spectrogram::new(values, times, centers, FrequencyScale::Linear).unwrap()
}

fn sorted(s: &Spectrogram<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = s.values().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_waveform_round_trip(
        samples in prop::collection::vec(-1e6f64..1e6, 1..300),
        sr in 0.5f64..1e4,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.csv");
        let w = Waveform::new(samples.clone(), sr, "X").unwrap();
        save_waveform(&p, &w, WaveformFormat::Csv).unwrap();
        let back: Waveform<f64> = load_waveform(&p, WaveformFormat::Csv).unwrap();
        prop_assert_eq!(back.sample_rate(), sr);
        prop_assert_eq!(back.len(), samples.len());
        for (a, b) in back.samples().iter().zip(&samples) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn wav_round_trip_within_quantisation(
        samples in prop::collection::vec(-0.99f64..0.99, 1..300),
        sr in 1u32..48_000,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.wav");
        let w = Waveform::new(samples.clone(), sr as f64, "X").unwrap();
        save_waveform(&p, &w, WaveformFormat::Wav).unwrap();
        let back: Waveform<f64> = load_waveform(&p, WaveformFormat::Wav).unwrap();
        prop_assert_eq!(back.sample_rate(), sr as f64);
        for (a, b) in back.samples().iter().zip(&samples) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn synthetic_is_a_function_of_its_settings(seed in any::<u64>(), f in 0.5f64..10.0) {
        let spec = SyntheticSpec {
            duration_s: 4.0,
            sample_rate: 50.0,
            events: vec![SyntheticEvent {
                kind: EventKind::Tremor,
                onset_s: 1.0,
                duration_s: 2.0,
                center_freq_hz: f,
                bandwidth_hz: 0.5,
                amplitude: 1.0,
            }],
            noise_floor: 0.1,
            seed,
            channel_id: "P".into(),
        };
        let a = generate_synthetic::<f64>(&spec).unwrap();
        let b = generate_synthetic::<f64>(&spec).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn warp_inverse_round_trip(f in 0.0f64..1e5, c1 in 1.0f64..1e4, c2 in 0.01f64..1e4) {
        let back = warped_to_hz(hz_to_warped(f, c1, c2).unwrap(), c1, c2).unwrap();
        prop_assert!((back - f).abs() <= 1e-9 * f.max(1e-3), "{} -> {}", f, back);
    }

    #[test]
    fn mel_is_warp_2595_700(f in 0.0f64..2e4) {
        let textbook = 2595.0 * (1.0 + f / 700.0).log10();
        let mel = FrequencyScale::<f64>::mel().to_scale(f);
        let warped = FrequencyScale::warped(2595.0, 700.0).unwrap().to_scale(f);
        prop_assert_eq!(mel, warped);
        prop_assert!(rel_close(mel, textbook, 1e-12) || (mel == 0.0 && textbook == 0.0));
    }

    #[test]
    fn filterbank_geometry(c1 in 100.0f64..1e4, c2 in 0.5f64..1000.0, n_filters in 2usize..24) {
        let cfg = StftConfig { n_fft: 1024, hop: 256, window: WindowKind::Hann };
        let scale = FrequencyScale::warped(c1, c2).unwrap();
        let fb = build_filterbank(scale, n_filters, &cfg, 100.0, 0.0, 50.0);
        // very small c2 squeezes the lowest band below one bin
        prop_assume!(fb.is_ok());
        let fb = fb.unwrap();
        let w = fb.weights();
        prop_assert!(w.iter().all(|&v| v >= 0.0));
        for bin in w.columns() {
            let active: Vec<usize> = bin.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, _)| i).collect();
            prop_assert!(active.len() <= 2, "bin covered by {:?}", active);
            if active.len() == 2 {
                prop_assert_eq!(active[1], active[0] + 1);
            }
        }
        let peaks = fb.centers_hz();
        for i in 1..peaks.len() - 1 {
            prop_assert!(peaks[i - 1] < peaks[i] && peaks[i] < peaks[i + 1]);
        }
    }

    #[test]
    fn parseval_rectangular(x in prop::collection::vec(-1.0f64..1.0, 128)) {
        let stft = Stft::new(StftConfig { n_fft: 128, hop: 128, window: WindowKind::Rectangular }).unwrap();
        let p = stft.process(&x, 1.0).unwrap();
        let row = p.power.row(0);
        let two_sided = row[0] + row[64] + 2.0 * (1..64).map(|k| row[k]).sum::<f64>();
        let energy: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!(rel_close(two_sided, 128.0 * energy, 1e-6));
    }

    #[test]
    fn spectrogram_is_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seg = Segment {
            samples: (0..1280).map(|_| rng.random_range(-1.0..1.0)).collect(),
            sample_rate: 100.0,
            source_channel: "R".into(),
            offset_s: 0.0,
            label: None,
        };
        let b = SpectralSettings::default().builder(FrequencyScale::mel(), 100.0).unwrap();
        prop_assert_eq!(b.compute(&seg).unwrap(), b.compute(&seg).unwrap());
    }

    #[test]
    fn augmentation_algebra(seed in any::<u64>(), frames in 1usize..24, channels in 1usize..12, k in 0usize..24) {
        let s = random_spectrogram(seed, frames, channels);
        let k = (k % (frames + 1)) as isize;
        prop_assert_eq!(&reflect_time(&reflect_time(&s)), &s);
        prop_assert_eq!(&reflect_freq(&reflect_freq(&s)), &s);
        let moved = translate(&s, k).unwrap();
        prop_assert_eq!(&translate(&moved, -k).unwrap(), &s);
        let base = sorted(&s);
        for t in [reflect_time(&s), reflect_freq(&s), moved] {
            prop_assert_eq!(sorted(&t), base.clone());
        }
    }

    #[test]
    fn augmented_dataset_size(n in 1usize..6, copies in 0usize..4, seed in any::<u64>()) {
        let items: Vec<_> = (0..n).map(|i| random_spectrogram(seed ^ i as u64, 6, 4)).collect();
        let policy = AugmentPolicy { copies_per_item: copies, seed, ..Default::default() };
        let out = augment_dataset(&items, &policy).unwrap();
        prop_assert_eq!(out.len(), n * (1 + copies));
        prop_assert_eq!(&out[..n], &items[..]);
        for (i, extra) in out[n..].iter().enumerate() {
            prop_assert_eq!(sorted(extra), sorted(&items[i / copies.max(1) % n]).clone());
        }
    }
}

/// Zero-padded along time by `pad` frames on each side.
fn padded_input(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize, pad: usize) -> Array3<f64> {
    let mut x = Array3::zeros((h + 2 * pad, w, c));
    x.slice_mut(s![pad..pad + h, .., ..])
        .mapv_inplace(|_| rng.random_range(-1.0..1.0));
    x
}

fn roll_time(x: &Array3<f64>, t: usize) -> Array3<f64> {
    let n = x.dim().0;
    Array3::from_shape_fn(x.dim(), |(i, j, k)| x[[(i + n - t) % n, j, k]])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conv_commutes_with_translation(seed in any::<u64>(), h in 2usize..10, w in 1usize..8, c in 1usize..3, f in 1usize..3, t in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pad = 4;
        let x = padded_input(&mut rng, h, w, c, pad);
        let kernel = Array4::from_shape_fn((3, 3, c, f), |_| rng.random_range(-1.0..1.0));
        let bias = Array1::from_shape_fn(f, |_| rng.random_range(-1.0..1.0));
        let y = conv2d(x.view(), kernel.view(), Some(bias.view()), 1).unwrap();
        let y_moved = conv2d(roll_time(&x, t).view(), kernel.view(), Some(bias.view()), 1).unwrap();
        for i in pad..pad + h {
            for j in 0..w {
                for k in 0..f {
                    prop_assert!((y_moved[[i + t, j, k]] - y[[i, j, k]]).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn network_contracts(seed in any::<u64>(), alpha in 0.05f64..20.0, n_blocks in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks: Vec<BlockSpec> = (0..n_blocks)
            .map(|i| BlockSpec { filters: 4 + 2 * (i % 2), stride: 1 + (i % 2) })
            .collect();
        let cfg = CnnConfig { input_shape: (20, 12), stem_filters: 4, blocks, kernel_size: 3, feature_dim: 5, seed };
        let mut model = init_cnn::<f64>(&cfg).unwrap();

        let specs: Vec<_> = (0..3).map(|i| random_spectrogram(seed.wrapping_add(i), 20, 12)).collect();
        for sp in &specs {
            let a = forward(&model, sp).unwrap();
            prop_assert_eq!(a.len(), 5);
            prop_assert_eq!(&a, &forward(&model, sp).unwrap());
        }

        // zeroing each residual branch leaves relu of the shortcut
        let x = Array3::from_shape_fn((10, 6, 4), |_| rng.random_range(-1.0..1.0));
        for b in &model.blocks {
            let mut z = b.clone();
            z.conv1.zeroed();
            z.conv2.zeroed();
            let shortcut = match &z.projection {
                Some(p) if p.weight.dim().2 == 4 => p.apply(x.view()).unwrap(),
                Some(_) => continue,
                None if b.conv1.weight.dim().2 == 4 => x.clone(),
                None => continue,
            };
            prop_assert_eq!(residual_block(x.view(), &z).unwrap(), relu(&shortcut));
        }

        model.zero_biases();
        let zero = Spectrogram::new(Array2::zeros((20, 12)), vec![0.0; 20], (0..12).map(|c| c as f64).collect(), FrequencyScale::Linear).unwrap();
        prop_assert!(forward(&model, &zero).unwrap().as_slice().iter().all(|&v| v == 0.0));
        let sp = &specs[0];
        let scaled = Spectrogram::new(sp.values().mapv(|v| v * alpha), sp.frame_times_s().to_vec(), sp.channel_centers_hz().to_vec(), FrequencyScale::Linear).unwrap();
        let base = forward(&model, sp).unwrap();
        let out = forward(&model, &scaled).unwrap();
        for (o, b) in out.as_slice().iter().zip(base.as_slice()) {
            prop_assert!((o - alpha * b).abs() <= 1e-9 * (alpha * b).abs().max(1e-9));
        }
    }
}

fn random_model(rng: &mut ChaCha8Rng, k: usize, d: usize, mode: CovarianceMode) -> GmmModel<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = Array1::from_iter(raw.iter().map(|w| w / total));
    let means = Array2::from_shape_fn((k, d), |_| rng.random_range(-3.0..3.0));
    let covs = (0..k)
        .map(|_| {
            let a = Array2::from_shape_fn((d, d), |_| rng.random_range(-1.0..1.0));
            let mut c = a.dot(&a.t()) + Array2::<f64>::eye(d) * 0.2;
            if mode == CovarianceMode::Diagonal {
                c = Array2::from_diag(&c.diag());
            }
            c
        })
        .collect();
    GmmModel::new(weights, means, covs, mode).unwrap()
}

fn two_blobs(seed: u64, n: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, 2), |(i, _)| {
        let centre = if i % 2 == 0 { -2.0 } else { 2.0 };
        centre + rng.random_range(-1.0..1.0)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn em_step_invariants(seed in any::<u64>(), k in 1usize..5, d in 1usize..4, n in 1usize..40, diag in any::<bool>(), floor in 1e-4f64..0.5) {
        let mode = if diag { CovarianceMode::Diagonal } else { CovarianceMode::Full };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, k, d, mode);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-4.0..4.0));
        let r = e_step(&model, x.view()).unwrap();
        for row in r.rows() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-9);
        }
        let next = m_step(&model, x.view(), r.view(), floor).unwrap();
        prop_assert!((next.weights.sum() - 1.0).abs() <= 1e-9);
        for c in &next.covariances {
            match mode {
                CovarianceMode::Full => prop_assert!(min_eigenvalue(c) >= floor * (1.0 - 1e-9)),
                CovarianceMode::Diagonal => prop_assert!(c.diag().iter().all(|&v| v >= floor)),
            }
        }
        let pruned = prune(&next, 0.2 / k as f64);
        prop_assert!((pruned.weights.sum() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn full_batch_em_never_increases_nll(seed in 0u64..1000, k in 1usize..5) {
        let x = two_blobs(seed, 60);
        let cfg = TrainConfig {
            k_init: k,
            max_epochs: 40,
            batch_size: 60,
            weight_sparsity: 0.0,
            reg_floor: 1e-6,
            seed,
            ..Default::default()
        };
        let out = fit(x.view(), &cfg).unwrap();
        let mut prev = out.initial_nll;
        for &l in &out.loss_history {
            prop_assert!(l <= prev + 1e-8 * prev.abs().max(1.0), "{} after {}", l, prev);
            prev = l;
        }
    }

    #[test]
    fn mini_batch_best_beats_initial(seed in 0u64..1000) {
        let x = two_blobs(seed, 80);
        let cfg = TrainConfig { k_init: 4, max_epochs: 60, batch_size: 16, seed, ..Default::default() };
        let out = fit(x.view(), &cfg).unwrap();
        prop_assert!(out.best_nll <= out.initial_nll);
    }
}

#[test]
fn overlapping_components_give_soft_decisions() {
    let model = GmmModel::new(
        Array1::from(vec![0.5, 0.5]),
        Array2::from_shape_vec((2, 1), vec![0.0, 1.5]).unwrap(),
        vec![Array2::eye(1), Array2::eye(1)],
        CovarianceMode::Full,
    )
    .unwrap();
    let grid = Array2::from_shape_fn((61, 1), |(i, _)| -1.5 + 0.075 * i as f64);
    let a = assign_all(&model, grid.view()).unwrap();
    assert!(a.iter().any(|a| a.max_posterior() < 0.9));
    // and far from the overlap the decision is confident
    assert!(a[0].max_posterior() > 0.9 && a[60].max_posterior() > 0.9);
}

#[test]
fn single_component_recovers_anisotropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let normal = rand_distr::StandardNormal;
    let x = Array2::from_shape_fn((4000, 2), |(_, j)| {
        let z: f64 = rand_distr::Distribution::sample(&normal, &mut rng);
        if j == 0 {
            2.0 * z
        } else {
            0.5 * z
        }
    });
    let cfg = TrainConfig {
        k_init: 1,
        max_epochs: 20,
        batch_size: 4000,
        reg_floor: 1e-6,
        ..Default::default()
    };
    let out = fit(x.view(), &cfg).unwrap();
    let c = &out.model.covariances[0];
    let ratio = c[[0, 0]] / c[[1, 1]];
    assert!((12.0..=20.0).contains(&ratio), "variance ratio {ratio}");
}
