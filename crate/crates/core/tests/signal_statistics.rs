use num_complex::Complex64;
use prachjam::channel::{superpose, ChannelConfig, FrameSpan};
use prachjam::jammer::{generate_jamming_frame, jamming_bins, JammerConfig, JammerKind};
use prachjam::prach::{occasions_in_frame, CellConfig, PrachConfig, PrachOccasion};
use prachjam::rng::{stream, tag};
use prachjam::waveform::{demap_prach, modulate_preamble, occasion_len, sequence_spectrum};
use prachjam::zc::generate_zc;

fn setup() -> (CellConfig, PrachOccasion) {
    let cell = CellConfig::desk_preset();
    let occ = occasions_in_frame(&PrachConfig::table_i(), &cell, 1)[0];
    (cell, occ)
}

fn jammer(kind: JammerKind) -> JammerConfig {
    JammerConfig {
        kind,
        ..Default::default()
    }
}

#[test]
fn s2_second_moment_and_components() {
    let (cell, occ) = setup();
    let mut r = stream(5, tag::JAMMER, 0);
    let mut bins = Vec::new();
    while bins.len() < 100_000 {
        bins.extend(jamming_bins(
            &jammer(JammerKind::S2),
            &occ,
            &cell,
            1.0,
            &mut r,
        ));
    }
    let n = bins.len() as f64;
    let power = bins.iter().map(|b| b.norm_sqr()).sum::<f64>() / n;
    assert!((power - 1.0).abs() < 0.02, "mean |bin|^2 = {power}");

    // Each component should be N(0, 1/2); the variance estimator has
    // standard deviation sqrt(2/n) * 1/2.
    let tol = 3.0 * (2.0 / n).sqrt() * 0.5;
    for part in [|z: &Complex64| z.re, |z: &Complex64| z.im] {
        let xs: Vec<f64> = bins.iter().map(part).collect();
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 0.5).abs() < tol, "component variance {var}");
        assert!(mean.abs() < 3.0 * (0.5 / n).sqrt());
        // Gaussian fourth moment: E[x^4] = 3 var^2
        let kurt = xs.iter().map(|x| x.powi(4)).sum::<f64>() / n / (var * var);
        assert!((kurt - 3.0).abs() < 0.1, "kurtosis {kurt}");
    }
}

#[test]
fn s1_and_s2_match_in_band_power() {
    let (cell, occ) = setup();
    let mean_power = |kind| {
        let mut r = stream(6, tag::JAMMER, kind as u64);
        let draws = 2000;
        let total: f64 = (0..draws)
            .map(|_| {
                jamming_bins(&jammer(kind), &occ, &cell, 1.7, &mut r)
                    .iter()
                    .map(|b| b.norm_sqr())
                    .sum::<f64>()
            })
            .sum();
        total / draws as f64
    };
    let s1 = mean_power(JammerKind::S1);
    let s2 = mean_power(JammerKind::S2);
    assert!((s1 / s2 - 1.0).abs() < 0.02, "{s1} vs {s2}");
}

#[test]
fn receiver_noise_power() {
    let span = FrameSpan {
        len: 1_000_000,
        sample_rate: 7.68e6,
    };
    let cfg = ChannelConfig {
        noise_sigma: 0.37,
        ..Default::default()
    };
    let out = superpose(None, None, span, &cfg, &mut stream(9, tag::CHANNEL, 0)).unwrap();
    let p = out.energy() / span.len as f64;
    let expected = 2.0 * 0.37 * 0.37;
    assert!((p / expected - 1.0).abs() < 0.02, "{p} vs {expected}");
}

#[test]
fn jammer_at_twice_the_amplitude_has_four_times_the_power() {
    let (cell, occ) = setup();
    let seq = generate_zc(1, 139).unwrap();
    let ue = modulate_preamble(&seq, &occ, &cell, 1.0).unwrap().frame;
    let span = FrameSpan {
        len: occasion_len(&cell),
        sample_rate: cell.sample_rate,
    };
    let cfg = ChannelConfig {
        noise_sigma: 0.0,
        ue_gain: 1.0,
        jammer_gain: 2.0,
        ue_delay_samples: 0,
    };
    let literal = JammerConfig {
        s1_literal: true,
        ..jammer(JammerKind::S1)
    };
    for (config, per_bin) in [(literal, true), (jammer(JammerKind::S1), false)] {
        let jam = generate_jamming_frame(&config, &occ, &cell, 1.0, &mut stream(1, 2, 3)).unwrap();
        let mut r = stream(0, 0, 0);
        let u = superpose(Some(&ue), None, span, &cfg, &mut r).unwrap();
        let j = superpose(None, Some(&jam), span, &cfg, &mut r).unwrap();
        let ub = demap_prach(&u, &occ, &cell).unwrap().average;
        let jb = demap_prach(&j, &occ, &cell).unwrap().average;
        if per_bin {
            for (a, b) in ub.iter().zip(&jb) {
                assert!((b.norm_sqr() / a.norm_sqr() - 4.0).abs() < 1e-9);
            }
        }
        let pu: f64 = ub.iter().map(|b| b.norm_sqr()).sum();
        let pj: f64 = jb.iter().map(|b| b.norm_sqr()).sum();
        assert!((pj / pu - 4.0).abs() < 1e-9);
    }
}

#[test]
fn delay_inside_cyclic_prefix_is_a_phase_ramp() {
    let (cell, occ) = setup();
    let seq = generate_zc(1, 139).unwrap().cyclic_shift(26).unwrap();
    let ue = modulate_preamble(&seq, &occ, &cell, 1.0).unwrap().frame;
    let reference = sequence_spectrum(&seq);
    let n = cell.dft_size as f64;
    for d in 0..cell.cp_len() {
        let cfg = ChannelConfig {
            noise_sigma: 0.0,
            ue_delay_samples: d,
            ..Default::default()
        };
        let span = FrameSpan {
            len: occasion_len(&cell),
            sample_rate: cell.sample_rate,
        };
        let rx = superpose(Some(&ue), None, span, &cfg, &mut stream(0, 0, 0)).unwrap();
        let bins = demap_prach(&rx, &occ, &cell).unwrap().average;
        for (k, (b, x)) in bins.iter().zip(&reference).enumerate() {
            // Brute-force phase of a d-sample delay on FFT bin k.
            let bin = (occ.first_subcarrier + k) as f64;
            let ramp = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * bin * d as f64 / n);
            assert!((b - x * ramp).norm() < 1e-9, "delay {d} bin {k}");
            assert!((b.norm() - 1.0).abs() < 1e-6);
        }
    }
}
