//! One PRACH occasion end to end: preambles and jammer through the channel
//! into the detector.

use std::collections::HashMap;
use std::sync::Mutex;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{superpose, ChannelConfig, ChannelError, FrameSpan};
use crate::detector::{DetectionResult, Detector, DetectorConfig, DetectorError};
use crate::jammer::{amplitude_from_snr, generate_jamming_frame, JammerConfig};
use crate::par::{map_indexed, Execution};
use crate::prach::{CellConfig, PrachOccasion};
use crate::ra::{Signature, SignatureSpace};
use crate::rng::{stream, tag};
use crate::waveform::{demap_prach, modulate_preamble, occasion_len, IqFrame, WaveformError};
use crate::zc::{generate_zc, ZcError};

#[derive(Debug, Error)]
pub enum LinkError {
    #[error(transparent)]
    Zc(#[from] ZcError),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
}

/// Everything fixed for the lifetime of a receiver chain.
#[derive(Debug)]
pub struct Link {
    pub cell: CellConfig,
    pub channel: ChannelConfig,
    pub jammer: JammerConfig,
    /// Bin magnitude `A_N` of every transmitted preamble.
    pub ue_amplitude: f64,
    detector: Detector,
    space: SignatureSpace,
    preambles: Mutex<HashMap<(Signature, usize), IqFrame>>,
}

impl Link {
    pub fn new(
        cell: CellConfig,
        channel: ChannelConfig,
        jammer: JammerConfig,
        detector: DetectorConfig,
        ue_amplitude: f64,
        sequence_len: usize,
    ) -> Result<Self, LinkError> {
        channel.validate(cell.cp_len())?;
        let space = SignatureSpace::new(detector.roots.clone(), sequence_len, detector.shift_step);
        let detector = Detector::new(detector, sequence_len)?;
        Ok(Link {
            cell,
            channel,
            jammer,
            ue_amplitude,
            detector,
            space,
            preambles: Mutex::new(HashMap::new()),
        })
    }

    pub fn space(&self) -> &SignatureSpace {
        &self.space
    }

    pub fn detector(&self) -> &Detector {
        &self.detector
    }

    /// Jammer bin amplitude `A_f` for the configured design SNR.
    pub fn jammer_amplitude(&self) -> f64 {
        amplitude_from_snr(self.ue_amplitude, self.jammer.snr_db)
    }

    fn preamble(&self, sig: Signature, occ: &PrachOccasion) -> Result<IqFrame, LinkError> {
        let key = (sig, occ.first_subcarrier);
        if let Some(f) = self.preambles.lock().expect("cache lock").get(&key) {
            return Ok(f.clone());
        }
        let seq =
            generate_zc(sig.root, occ.num_subcarriers)?.cyclic_shift(self.space.shift_of(sig))?;
        let frame = modulate_preamble(&seq, occ, &self.cell, self.ue_amplitude)?.frame;
        self.preambles
            .lock()
            .expect("cache lock")
            .insert(key, frame.clone());
        Ok(frame)
    }

    /// Receives one occasion. `jam` selects whether the jammer transmits;
    /// `seed` keys the jammer and noise streams.
    pub fn receive(
        &self,
        occ: &PrachOccasion,
        transmissions: &[Signature],
        jam: bool,
        seed: u64,
    ) -> Result<DetectionResult, LinkError> {
        let len = occasion_len(&self.cell);
        let rate = self.cell.sample_rate;
        let ue = match transmissions {
            [] => None,
            [one] => Some(self.preamble(*one, occ)?),
            many => {
                let mut sum = vec![Complex64::new(0.0, 0.0); len];
                for sig in many {
                    for (s, x) in sum.iter_mut().zip(self.preamble(*sig, occ)?.samples()) {
                        *s += x;
                    }
                }
                Some(IqFrame::new(sum, rate, 0)?)
            }
        };
        let jam_frame = if jam && self.jammer.enabled {
            let mut r = stream(seed, tag::JAMMER, self.jammer.seed);
            Some(generate_jamming_frame(
                &self.jammer,
                occ,
                &self.cell,
                self.jammer_amplitude(),
                &mut r,
            )?)
        } else {
            None
        };
        let span = FrameSpan {
            len,
            sample_rate: rate,
        };
        let mut r = stream(seed, tag::CHANNEL, 0);
        let rx = superpose(ue.as_ref(), jam_frame.as_ref(), span, &self.channel, &mut r)?;
        let bins = demap_prach(&rx, occ, &self.cell)?;
        Ok(self.detector.detect(&bins.average, occ)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: u64,
    /// Trials whose transmitted signature was not detected.
    pub missed: u64,
    /// Trials with at least one detection of a signature that was not sent.
    pub false_alarms: u64,
}

impl TrialStats {
    pub fn missed_rate(&self) -> f64 {
        self.missed as f64 / self.trials as f64
    }
}

/// Single-UE preamble trials on `occ`, each with a uniformly drawn signature
/// and independent jammer and noise realizations.
pub fn run_preamble_trials(
    link: &Link,
    occ: &PrachOccasion,
    jam: bool,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<TrialStats, LinkError> {
    let outcomes = map_indexed(trials, exec, |i| -> Result<(bool, bool), LinkError> {
        let trial_seed = crate::rng::derive_seed(seed, tag::TRIAL, i);
        let mut r = stream(trial_seed, tag::UE, 0);
        let sig = link.space.get(r.random_range(0..link.space.len()));
        let result = link.receive(occ, &[sig], jam, trial_seed)?;
        let hit = result.contains(sig.root, sig.index);
        let spurious = result
            .detected
            .iter()
            .any(|d| d.root != sig.root || d.signature != sig.index);
        Ok((hit, spurious))
    });
    let mut stats = TrialStats {
        trials,
        missed: 0,
        false_alarms: 0,
    };
    for o in outcomes {
        let (hit, spurious) = o?;
        stats.missed += u64::from(!hit);
        stats.false_alarms += u64::from(spurious);
    }
    Ok(stats)
}
