//! Format A2 preamble synthesis and the matching receiver front end.
//!
//! Grid subcarrier `s` maps to transform bin `s`; only the PRACH region is
//! synthesized. Transforms are unitary (`1/sqrt(N)` both ways), so a bin
//! magnitude measured by [`demap_prach`] is directly the amplitude placed on
//! that subcarrier and white time-domain noise with per-component deviation
//! `sigma` shows up with per-bin power `2 sigma^2`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft;
use crate::prach::{CellConfig, PrachOccasion, A2_REPETITIONS};
use crate::zc::{self, ZcSequence};

#[derive(Debug, Error)]
pub enum WaveformError {
    #[error("sequence length {sequence} does not match the occasion's {occasion} subcarriers")]
    SizeMismatch { sequence: usize, occasion: usize },
    #[error("PRACH bins [{first}, {end}) exceed the {dft_size}-point transform")]
    TooWide {
        first: usize,
        end: usize,
        dft_size: usize,
    },
    #[error("frame of {len} samples is shorter than the {needed} needed")]
    FrameTooShort { len: usize, needed: usize },
    #[error("start offset {offset} exceeds the cyclic prefix of {cp} samples")]
    Misaligned { offset: i64, cp: usize },
    #[error("frame needs a positive sample rate and at least one sample")]
    InvalidFrame,
    #[error("raw IQ file has {0} bytes, not a multiple of 8")]
    TruncatedIq(usize),
    #[error("I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("sidecar {path}: {source}")]
    Sidecar {
        path: PathBuf,
        source: serde_json::Error,
    },
}

/// Complex baseband samples with their rate and placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqFrame {
    samples: Vec<Complex64>,
    sample_rate: f64,
    /// Index of sample 0 relative to the occasion origin.
    start_offset: i64,
}

impl IqFrame {
    pub fn new(
        samples: Vec<Complex64>,
        sample_rate: f64,
        start_offset: i64,
    ) -> Result<Self, WaveformError> {
        if samples.is_empty() || !(sample_rate > 0.0) {
            return Err(WaveformError::InvalidFrame);
        }
        Ok(IqFrame {
            samples,
            sample_rate,
            start_offset,
        })
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Result<Self, WaveformError> {
        Self::new(vec![Complex64::new(0.0, 0.0); len], sample_rate, 0)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn start_offset(&self) -> i64 {
        self.start_offset
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }
}

/// Samples spanned by one format A2 occasion: CP plus four symbols.
pub fn occasion_len(cell: &CellConfig) -> usize {
    cell.cp_len() + A2_REPETITIONS * cell.dft_size
}

/// Prefixes one transform-length symbol with its cyclic prefix and repeats it
/// across the occasion.
pub(crate) fn a2_frame_from_symbol(symbol: &[Complex64], cp: usize) -> Vec<Complex64> {
    let n = symbol.len();
    let mut out = Vec::with_capacity(cp + A2_REPETITIONS * n);
    out.extend_from_slice(&symbol[n - cp..]);
    for _ in 0..A2_REPETITIONS {
        out.extend_from_slice(symbol);
    }
    out
}

pub(crate) fn check_span(occasion: &PrachOccasion, cell: &CellConfig) -> Result<(), WaveformError> {
    let end = occasion.first_subcarrier + occasion.num_subcarriers;
    if end > cell.dft_size {
        return Err(WaveformError::TooWide {
            first: occasion.first_subcarrier,
            end,
            dft_size: cell.dft_size,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreambleWaveform {
    pub frame: IqFrame,
    pub sequence: ZcSequence,
    pub occasion: PrachOccasion,
    /// Magnitude of every occupied bin.
    pub amplitude: f64,
}

/// Unit-magnitude frequency-domain image of a ZC sequence, `DFT(seq)/sqrt(L)`.
pub fn sequence_spectrum(seq: &ZcSequence) -> Vec<Complex64> {
    let mut spec = seq.samples().to_vec();
    fft::unitary_forward(&mut spec);
    spec
}

pub fn modulate_preamble(
    seq: &ZcSequence,
    occasion: &PrachOccasion,
    cell: &CellConfig,
    amplitude: f64,
) -> Result<PreambleWaveform, WaveformError> {
    if seq.length() != occasion.num_subcarriers {
        return Err(WaveformError::SizeMismatch {
            sequence: seq.length(),
            occasion: occasion.num_subcarriers,
        });
    }
    check_span(occasion, cell)?;

    let n = cell.dft_size;
    let mut symbol = vec![Complex64::new(0.0, 0.0); n];
    for (k, v) in sequence_spectrum(seq).into_iter().enumerate() {
        symbol[occasion.first_subcarrier + k] = v * amplitude;
    }
    fft::unitary_inverse(&mut symbol);

    let frame = IqFrame::new(
        a2_frame_from_symbol(&symbol, cell.cp_len()),
        cell.sample_rate,
        0,
    )?;
    Ok(PreambleWaveform {
        frame,
        sequence: seq.clone(),
        occasion: *occasion,
        amplitude,
    })
}

/// Occupied bins of each repetition and their coherent average.
#[derive(Debug, Clone, PartialEq)]
pub struct DemappedBins {
    pub repetitions: Vec<Vec<Complex64>>,
    pub average: Vec<Complex64>,
}

/// Full transform of repetition `rep`, taken at the nominal symbol boundary.
pub fn repetition_spectrum(
    frame: &IqFrame,
    cell: &CellConfig,
    rep: usize,
) -> Result<Vec<Complex64>, WaveformError> {
    let cp = cell.cp_len();
    let n = cell.dft_size;
    if frame.start_offset.unsigned_abs() as usize > cp {
        return Err(WaveformError::Misaligned {
            offset: frame.start_offset,
            cp,
        });
    }
    let start = (cp + rep * n) as i64 - frame.start_offset;
    let end = start as usize + n;
    let needed = (cp + A2_REPETITIONS * n) as i64 - frame.start_offset;
    if frame.len() < needed as usize {
        return Err(WaveformError::FrameTooShort {
            len: frame.len(),
            needed: needed as usize,
        });
    }
    let mut buf = frame.samples[start as usize..end].to_vec();
    fft::unitary_forward(&mut buf);
    Ok(buf)
}

pub fn demap_prach(
    frame: &IqFrame,
    occasion: &PrachOccasion,
    cell: &CellConfig,
) -> Result<DemappedBins, WaveformError> {
    check_span(occasion, cell)?;
    let first = occasion.first_subcarrier;
    let l = occasion.num_subcarriers;
    let mut repetitions = Vec::with_capacity(A2_REPETITIONS);
    let mut average = vec![Complex64::new(0.0, 0.0); l];
    for rep in 0..A2_REPETITIONS {
        let spec = repetition_spectrum(frame, cell, rep)?;
        let bins = spec[first..first + l].to_vec();
        for (a, b) in average.iter_mut().zip(&bins) {
            *a += b;
        }
        repetitions.push(bins);
    }
    fft::scale(&mut average, 1.0 / A2_REPETITIONS as f64);
    Ok(DemappedBins {
        repetitions,
        average,
    })
}

/// Sidecar written next to a raw `cf32` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqSidecar {
    pub sample_rate: f64,
    pub start_offset: i64,
    pub num_samples: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes interleaved little-endian `f32` I/Q pairs plus a JSON sidecar at
/// `<path>.json`.
pub fn write_iq(path: &Path, frame: &IqFrame) -> Result<(), WaveformError> {
    let io = |source| WaveformError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for s in frame.samples() {
        w.write_all(&(s.re as f32).to_le_bytes()).map_err(io)?;
        w.write_all(&(s.im as f32).to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)?;

    let side = sidecar_path(path);
    let meta = IqSidecar {
        sample_rate: frame.sample_rate,
        start_offset: frame.start_offset,
        num_samples: frame.len(),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|source| WaveformError::Sidecar {
        path: side.clone(),
        source,
    })?;
    std::fs::write(&side, text).map_err(|source| WaveformError::Io { path: side, source })
}

pub fn read_iq(path: &Path) -> Result<IqFrame, WaveformError> {
    let io = |source| WaveformError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(io)?)
        .read_to_end(&mut bytes)
        .map_err(io)?;
    if bytes.len() % 8 != 0 {
        return Err(WaveformError::TruncatedIq(bytes.len()));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect();

    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|source| WaveformError::Io {
        path: side.clone(),
        source,
    })?;
    let meta: IqSidecar = serde_json::from_str(&text)
        .map_err(|source| WaveformError::Sidecar { path: side, source })?;
    IqFrame::new(samples, meta.sample_rate, meta.start_offset)
}

/// Plain `DFT(seq)` without the `1/sqrt(L)` factor.
pub fn unnormalized_sequence_dft(seq: &ZcSequence) -> Vec<Complex64> {
    zc::dft(seq.samples()).expect("ZC sequences are never empty")
}
