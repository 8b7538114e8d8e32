//! gNB preamble receiver: frequency-domain ZC correlation, delay profile,
//! per-signature windows and a peak-to-floor test.
//!
//! For root `u` the averaged PRACH bins are multiplied by the conjugate
//! unit-magnitude spectrum of `x_u` and inverse transformed. A preamble with
//! cyclic shift `v` peaks at tap `(L - v) mod L`; a propagation delay moves
//! the peak towards higher taps, so signature `w` owns the taps
//! `[(L - w * step) mod L, (L - w * step) mod L + step)`.
//!
//! The noise floor is the profile mean with the strongest tap removed. A
//! window fires when its peak exceeds `threshold_factor` times that floor.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft;
use crate::jammer::complex_normal;
use crate::par::{map_indexed, Execution};
use crate::prach::PrachOccasion;
use crate::rng::{stream, tag};
use crate::waveform::sequence_spectrum;
use crate::zc::{generate_zc, ZcError};

/// Peak-to-floor factor giving a noise-only false-alarm rate of 1e-3 per
/// occasion for one root, L = 139 and 13-tap windows. Obtained with
/// `calibrate_threshold(1e-3, 1_000_000, ..)` from seed 0.
pub const DEFAULT_THRESHOLD_FACTOR: f64 = 12.298_052_798_830_556;
pub const DEFAULT_SHIFT_STEP: usize = 13;
pub const DEFAULT_TARGET_FAR: f64 = 1e-3;

/// Floor guard relative to the mean tap power; keeps noiseless profiles from
/// firing on rounding residue.
const FLOOR_GUARD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("expected {expected} PRACH bins, got {got}")]
    WrongBinCount { expected: usize, got: usize },
    #[error("no root sequences configured")]
    NoRoots,
    #[error("threshold_factor must exceed 1, got {0}")]
    BadThreshold(f64),
    #[error("shift_step must lie in [1, {len}], got {step}")]
    BadShiftStep { step: usize, len: usize },
    #[error("root {root}: {source}")]
    Root { root: usize, source: ZcError },
    #[error("target false-alarm rate must lie in (0, 1), got {0}")]
    BadTarget(f64),
    #[error(
        "{trials} trials cannot resolve a false-alarm rate of {target}; need at least {needed}"
    )]
    InsufficientTrials {
        trials: u64,
        target: f64,
        needed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub threshold_factor: f64,
    pub shift_step: usize,
    pub roots: Vec<usize>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            threshold_factor: DEFAULT_THRESHOLD_FACTOR,
            shift_step: DEFAULT_SHIFT_STEP,
            roots: vec![1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub root: usize,
    pub signature: usize,
    pub peak_metric: f64,
    /// Tap of the window peak in the delay profile.
    pub tap: usize,
    /// Floor of this root's profile.
    pub noise_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub detected: Vec<Detection>,
    /// Smallest per-root floor; every detection clears `threshold * floor`.
    pub noise_floor: f64,
    pub occasion: PrachOccasion,
}

impl DetectionResult {
    pub fn contains(&self, root: usize, signature: usize) -> bool {
        self.detected
            .iter()
            .any(|d| d.root == root && d.signature == signature)
    }
}

/// One root's delay profile reduced to what the decision needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSummary {
    pub root: usize,
    pub powers: Vec<f64>,
    pub floor: f64,
}

/// Correlation receiver with precomputed reference spectra.
#[derive(Debug, Clone)]
pub struct Detector {
    config: DetectorConfig,
    len: usize,
    references: Vec<(usize, Vec<Complex64>)>,
}

impl Detector {
    pub fn new(config: DetectorConfig, len: usize) -> Result<Self, DetectorError> {
        if config.roots.is_empty() {
            return Err(DetectorError::NoRoots);
        }
        if !(config.threshold_factor > 1.0) {
            return Err(DetectorError::BadThreshold(config.threshold_factor));
        }
        if config.shift_step == 0 || config.shift_step > len {
            return Err(DetectorError::BadShiftStep {
                step: config.shift_step,
                len,
            });
        }
        let references = config
            .roots
            .iter()
            .map(|&root| {
                let seq = generate_zc(root, len)
                    .map_err(|source| DetectorError::Root { root, source })?;
                let spec = sequence_spectrum(&seq)
                    .into_iter()
                    .map(|v| v.conj())
                    .collect();
                Ok((root, spec))
            })
            .collect::<Result<Vec<_>, DetectorError>>()?;
        Ok(Detector {
            config,
            len,
            references,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn signatures_per_root(&self) -> usize {
        self.len / self.config.shift_step
    }

    /// First tap of signature window `w`.
    pub fn window_start(&self, w: usize) -> usize {
        (self.len - (w * self.config.shift_step) % self.len) % self.len
    }

    /// Signature window containing `tap`, if any.
    pub fn window_of_tap(&self, tap: usize) -> Option<usize> {
        (0..self.signatures_per_root())
            .find(|&w| (tap + self.len - self.window_start(w)) % self.len < self.config.shift_step)
    }

    pub fn profiles(&self, bins: &[Complex64]) -> Result<Vec<ProfileSummary>, DetectorError> {
        if bins.len() != self.len {
            return Err(DetectorError::WrongBinCount {
                expected: self.len,
                got: bins.len(),
            });
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        Ok(self
            .references
            .iter()
            .map(|(root, reference)| {
                for ((b, y), r) in buf.iter_mut().zip(bins).zip(reference) {
                    *b = y * r;
                }
                fft::unitary_inverse(&mut buf);
                let powers: Vec<f64> = buf.iter().map(|v| v.norm_sqr()).collect();
                let total: f64 = powers.iter().sum();
                let max = powers.iter().cloned().fold(0.0, f64::max);
                let mean_rest = (total - max) / (self.len - 1) as f64;
                let floor = mean_rest.max(FLOOR_GUARD * total / self.len as f64);
                ProfileSummary {
                    root: *root,
                    powers,
                    floor,
                }
            })
            .collect())
    }

    fn window_peak(&self, powers: &[f64], w: usize) -> (usize, f64) {
        let start = self.window_start(w);
        (0..self.config.shift_step)
            .map(|i| (start + i) % self.len)
            .map(|t| (t, powers[t]))
            .fold(
                (start, f64::MIN),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            )
    }

    pub fn detect(
        &self,
        bins: &[Complex64],
        occasion: &PrachOccasion,
    ) -> Result<DetectionResult, DetectorError> {
        let profiles = self.profiles(bins)?;
        let mut detected = Vec::new();
        let mut noise_floor = f64::INFINITY;
        for p in &profiles {
            noise_floor = noise_floor.min(p.floor);
            for w in 0..self.signatures_per_root() {
                let (tap, peak) = self.window_peak(&p.powers, w);
                if peak > self.config.threshold_factor * p.floor {
                    detected.push(Detection {
                        root: p.root,
                        signature: w,
                        peak_metric: peak,
                        tap,
                        noise_floor: p.floor,
                    });
                }
            }
        }
        Ok(DetectionResult {
            detected,
            noise_floor,
            occasion: *occasion,
        })
    }

    /// Largest window-peak-to-floor ratio over all roots; an occasion fires
    /// iff this exceeds the threshold factor.
    pub fn statistic(&self, bins: &[Complex64]) -> Result<f64, DetectorError> {
        let profiles = self.profiles(bins)?;
        let mut best = 0.0f64;
        for p in &profiles {
            if p.floor <= 0.0 {
                continue;
            }
            for w in 0..self.signatures_per_root() {
                best = best.max(self.window_peak(&p.powers, w).1 / p.floor);
            }
        }
        Ok(best)
    }
}

pub fn detect_preambles(
    bins: &[Complex64],
    cfg: &DetectorConfig,
    occasion: &PrachOccasion,
) -> Result<DetectionResult, DetectorError> {
    Detector::new(cfg.clone(), bins.len())?.detect(bins, occasion)
}

/// Smallest threshold factor whose noise-only false-alarm rate per occasion
/// is at most `target_far`, measured over `trials` occasions of white
/// Gaussian bins of length `len`.
///
/// The peak-to-floor statistic is scale invariant, so the noise power does
/// not matter. The result is the exact empirical quantile, which is tighter
/// than a bisection on the same samples.
pub fn calibrate_threshold<R: Rng + ?Sized>(
    target_far: f64,
    trials: u64,
    cfg: &DetectorConfig,
    len: usize,
    exec: Execution,
    rng: &mut R,
) -> Result<f64, DetectorError> {
    if !(target_far > 0.0 && target_far < 1.0) {
        return Err(DetectorError::BadTarget(target_far));
    }
    let needed = (10.0 / target_far).ceil() as u64;
    if trials < needed {
        return Err(DetectorError::InsufficientTrials {
            trials,
            target: target_far,
            needed,
        });
    }
    // Threshold is irrelevant to the statistic; any valid value builds the receiver.
    let probe = DetectorConfig {
        threshold_factor: 2.0,
        ..cfg.clone()
    };
    let detector = Detector::new(probe, len)?;
    let seed: u64 = rng.random();
    let mut stats = map_indexed(trials, exec, |i| {
        let mut r = stream(seed, tag::TRIAL, i);
        let bins: Vec<Complex64> = (0..len).map(|_| complex_normal(&mut r)).collect();
        detector.statistic(&bins).expect("bin count matches")
    });
    stats.sort_by(|a, b| b.partial_cmp(a).expect("finite statistics"));
    // At most `allowed` trials may lie strictly above the returned value.
    let allowed = (target_far * trials as f64).floor() as usize;
    let factor = stats[allowed.min(stats.len() - 1)];
    Ok(factor.max(1.0 + 1e-9))
}

/// Fraction of noise-only occasions that fire at the configured threshold.
pub fn measure_false_alarm_rate(
    cfg: &DetectorConfig,
    len: usize,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<f64, DetectorError> {
    let detector = Detector::new(cfg.clone(), len)?;
    let fired = map_indexed(trials, exec, |i| {
        let mut r = stream(seed, tag::TRIAL, i);
        let bins: Vec<Complex64> = (0..len).map(|_| complex_normal(&mut r)).collect();
        detector.statistic(&bins).expect("bin count matches") > cfg.threshold_factor
    });
    Ok(fired.iter().filter(|&&f| f).count() as f64 / trials as f64)
}
