//! PRACH jamming spectra S1 and S2.
//!
//! Both spectra are confined to the `L_RA` PRACH bins of the occasion and are
//! emitted like a preamble: one transform-length symbol behind a cyclic
//! prefix, repeated four times, in every occasion of every PRACH slot.
//!
//! * S1 is white Gaussian noise in the time domain, band-limited to the PRACH
//!   bins and normalized per occasion so the in-band power per bin is exactly
//!   `a_f^2`.
//! * S2 draws every PRACH bin from the standard complex normal
//!   `n(z) = exp(-|z|^2) / pi` and scales it by `a_f`, so the expected power per
//!   bin is also `a_f^2`.
//!
//! With `s1_literal` set, S1 instead puts the constant real value `a_f` on
//! every PRACH bin. That spectrum is deterministic and its time form is a
//! chirp-like pulse rather than noise.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::fft;
use crate::prach::{CellConfig, PrachOccasion};
use crate::waveform::{a2_frame_from_symbol, check_span, IqFrame, WaveformError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JammerKind {
    S1,
    S2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JammerConfig {
    pub kind: JammerKind,
    /// Design SNR in dB; negative values put the jammer above the preamble.
    pub snr_db: f64,
    pub seed: u64,
    pub enabled: bool,
    #[serde(default)]
    pub s1_literal: bool,
}

impl Default for JammerConfig {
    fn default() -> Self {
        JammerConfig {
            kind: JammerKind::S1,
            snr_db: -6.0,
            seed: 0,
            enabled: true,
            s1_literal: false,
        }
    }
}

/// `A_f = A_N * 10^(-SNR/20)`.
pub fn amplitude_from_snr(a_n: f64, snr_db: f64) -> f64 {
    a_n * 10f64.powf(-snr_db / 20.0)
}

/// Standard complex normal sample, `E|z|^2 = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Occupied-bin values of one jamming symbol.
pub fn jamming_bins<R: Rng + ?Sized>(
    config: &JammerConfig,
    occasion: &PrachOccasion,
    cell: &CellConfig,
    a_f: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let l = occasion.num_subcarriers;
    match config.kind {
        JammerKind::S2 => (0..l).map(|_| complex_normal(rng) * a_f).collect(),
        JammerKind::S1 if config.s1_literal => vec![Complex64::new(a_f, 0.0); l],
        JammerKind::S1 => {
            let mut time: Vec<Complex64> =
                (0..cell.dft_size).map(|_| complex_normal(rng)).collect();
            fft::unitary_forward(&mut time);
            let first = occasion.first_subcarrier;
            let mut bins = time[first..first + l].to_vec();
            let power = bins.iter().map(|b| b.norm_sqr()).sum::<f64>() / l as f64;
            let gain = if power > 0.0 { a_f / power.sqrt() } else { 0.0 };
            fft::scale(&mut bins, gain);
            bins
        }
    }
}

pub fn generate_jamming_frame<R: Rng + ?Sized>(
    config: &JammerConfig,
    occasion: &PrachOccasion,
    cell: &CellConfig,
    a_f: f64,
    rng: &mut R,
) -> Result<IqFrame, WaveformError> {
    check_span(occasion, cell)?;
    let mut symbol = vec![Complex64::new(0.0, 0.0); cell.dft_size];
    if a_f > 0.0 {
        let bins = jamming_bins(config, occasion, cell, a_f, rng);
        symbol[occasion.first_subcarrier..occasion.first_subcarrier + bins.len()]
            .copy_from_slice(&bins);
        fft::unitary_inverse(&mut symbol);
    }
    IqFrame::new(
        a2_frame_from_symbol(&symbol, cell.cp_len()),
        cell.sample_rate,
        0,
    )
}
