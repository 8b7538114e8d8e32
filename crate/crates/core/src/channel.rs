//! Flat AWGN channel combining the UE preamble, the jammer and receiver noise.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::waveform::{IqFrame, WaveformError};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("sample rate mismatch: {expected} Hz expected, got {got} Hz")]
    RateMismatch { expected: f64, got: f64 },
    #[error("invalid channel `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Waveform(#[from] WaveformError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// Standard deviation of each noise component (I and Q).
    pub noise_sigma: f64,
    pub ue_gain: f64,
    pub jammer_gain: f64,
    pub ue_delay_samples: usize,
}

impl Default for ChannelConfig {
    /// Unit gains and noise at 0 dB per-bin SNR for a unit-amplitude preamble.
    fn default() -> Self {
        ChannelConfig {
            noise_sigma: std::f64::consts::FRAC_1_SQRT_2,
            ue_gain: 1.0,
            jammer_gain: 1.0,
            ue_delay_samples: 0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self, cp_len: usize) -> Result<(), ChannelError> {
        let check = |field: &'static str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ChannelError::Invalid {
                    field,
                    reason: format!("{v} is not a finite non-negative value"),
                })
            }
        };
        check("noise_sigma", self.noise_sigma)?;
        check("ue_gain", self.ue_gain)?;
        check("jammer_gain", self.jammer_gain)?;
        if self.ue_delay_samples >= cp_len {
            return Err(ChannelError::Invalid {
                field: "ue_delay_samples",
                reason: format!(
                    "{} must stay below the {cp_len}-sample cyclic prefix",
                    self.ue_delay_samples
                ),
            });
        }
        Ok(())
    }

    /// Per-bin SNR of a preamble of bin amplitude `a_n` after the UE gain.
    pub fn per_bin_snr_db(&self, a_n: f64) -> f64 {
        let signal = (a_n * self.ue_gain).powi(2);
        let noise = 2.0 * self.noise_sigma * self.noise_sigma;
        10.0 * (signal / noise).log10()
    }

    /// Noise deviation giving `snr_db` per bin for bin amplitude `a_n`.
    pub fn sigma_for_snr(a_n: f64, snr_db: f64) -> f64 {
        a_n / (2.0 * 10f64.powf(snr_db / 10.0)).sqrt()
    }
}

/// Length and rate of the received frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSpan {
    pub len: usize,
    pub sample_rate: f64,
}

/// `out[k] = ue_gain * ue[k - delay] + jammer_gain * jam[k] + noise[k]`.
///
/// Absent inputs contribute nothing; inputs shorter than the span are zero
/// extended. Noise draws are skipped entirely when `noise_sigma` is zero.
pub fn superpose<R: Rng + ?Sized>(
    ue: Option<&IqFrame>,
    jam: Option<&IqFrame>,
    span: FrameSpan,
    cfg: &ChannelConfig,
    rng: &mut R,
) -> Result<IqFrame, ChannelError> {
    for f in [ue, jam].into_iter().flatten() {
        if f.sample_rate() != span.sample_rate {
            return Err(ChannelError::RateMismatch {
                expected: span.sample_rate,
                got: f.sample_rate(),
            });
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); span.len];
    if let Some(ue) = ue {
        let d = cfg.ue_delay_samples;
        for (o, s) in out.iter_mut().skip(d).zip(ue.samples()) {
            *o += s * cfg.ue_gain;
        }
    }
    if let Some(jam) = jam {
        for (o, s) in out.iter_mut().zip(jam.samples()) {
            *o += s * cfg.jammer_gain;
        }
    }
    if cfg.noise_sigma > 0.0 {
        for o in out.iter_mut() {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *o += Complex64::new(re, im) * cfg.noise_sigma;
        }
    }
    Ok(IqFrame::new(out, span.sample_rate, 0)?)
}
