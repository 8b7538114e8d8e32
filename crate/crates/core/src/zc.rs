//! Zadoff-Chu sequences and their correlation / transform properties.
//!
//! A root-`u` sequence of odd length `N` is
//!
//! ```text
//! x_u(k) = exp(j * pi * u * k * (k + 1) / N),   k = 0 .. N-1
//! ```
//!
//! For prime `N` the family is CAZAC: unit magnitude, zero periodic
//! autocorrelation off the zero lag, cross-correlation magnitude `1/sqrt(N)`
//! between roots whose difference is coprime with `N`, and the DFT of a
//! sequence is again a (scaled) ZC sequence.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZcError {
    #[error("sequence length {0} is even; Zadoff-Chu generation needs an odd length")]
    EvenLength(usize),
    #[error("sequence length {0} is too short (minimum 3)")]
    LengthTooShort(usize),
    #[error("root {root} outside [1, {length})")]
    RootOutOfRange { root: usize, length: usize },
    #[error("root {root} shares the factor {gcd} with length {length}")]
    RootNotCoprime {
        root: usize,
        length: usize,
        gcd: usize,
    },
    #[error("cyclic shift {shift} outside [0, {length})")]
    ShiftOutOfRange { shift: usize, length: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
}

pub fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZcSequence {
    root: usize,
    length: usize,
    shift: usize,
    samples: Vec<Complex64>,
}

impl ZcSequence {
    pub fn root(&self) -> usize {
        self.root
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn shift(&self) -> usize {
        self.shift
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// Cyclic shift relative to the current samples; the stored shift
    /// accumulates modulo the length.
    pub fn cyclic_shift(&self, shift: usize) -> Result<ZcSequence, ZcError> {
        cyclic_shift(self, shift)
    }
}

/// Builds the root-`root` sequence of length `length`, unshifted.
pub fn generate_zc(root: usize, length: usize) -> Result<ZcSequence, ZcError> {
    if length < 3 {
        return Err(ZcError::LengthTooShort(length));
    }
    if length.is_multiple_of(2) {
        return Err(ZcError::EvenLength(length));
    }
    if root == 0 || root >= length {
        return Err(ZcError::RootOutOfRange { root, length });
    }
    let g = gcd(root, length);
    if g != 1 {
        return Err(ZcError::RootNotCoprime {
            root,
            length,
            gcd: g,
        });
    }

    // Reduce u*k*(k+1) modulo 2N in integers so the phase stays exact for
    // long sequences.
    let two_n = 2 * length as u128;
    let samples = (0..length as u128)
        .map(|k| {
            let m = (root as u128 * ((k * (k + 1)) % two_n)) % two_n;
            Complex64::from_polar(1.0, PI * m as f64 / length as f64)
        })
        .collect();
    Ok(ZcSequence {
        root,
        length,
        shift: 0,
        samples,
    })
}

/// `result[k] = seq[(k + shift) mod N]`.
pub fn cyclic_shift(seq: &ZcSequence, shift: usize) -> Result<ZcSequence, ZcError> {
    let n = seq.length;
    if shift >= n {
        return Err(ZcError::ShiftOutOfRange { shift, length: n });
    }
    let mut samples = seq.samples.clone();
    samples.rotate_left(shift);
    Ok(ZcSequence {
        root: seq.root,
        length: n,
        shift: (seq.shift + shift) % n,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationProfile {
    pub values: Vec<Complex64>,
    /// Divisor applied to the raw lag sums (1 when unnormalized).
    pub normalization: f64,
}

impl CorrelationProfile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|v| v.norm())
    }
}

/// Periodic cross-correlation
/// `values[l] = sum_k a[k] * conj(b[(k + l) mod N])`, optionally divided by `N`.
pub fn periodic_xcorr(
    a: &[Complex64],
    b: &[Complex64],
    normalize: bool,
) -> Result<CorrelationProfile, ZcError> {
    if a.len() != b.len() {
        return Err(ZcError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    let values = (0..n)
        .map(|lag| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &ak) in a.iter().enumerate() {
                acc += ak * b[(k + lag) % n].conj();
            }
            acc
        })
        .collect::<Vec<_>>();
    let normalization = if normalize && n > 0 { n as f64 } else { 1.0 };
    let values = values.into_iter().map(|v| v / normalization).collect();
    Ok(CorrelationProfile {
        values,
        normalization,
    })
}

/// Unnormalized forward DFT, `X[m] = sum_k x[k] exp(-j 2 pi k m / N)`.
pub fn dft(samples: &[Complex64]) -> Result<Vec<Complex64>, ZcError> {
    if samples.is_empty() {
        return Err(ZcError::Empty);
    }
    let mut out = samples.to_vec();
    fft::forward_in_place(&mut out);
    Ok(out)
}

/// Inverse of [`dft`], including the `1/N` factor.
pub fn idft(spectrum: &[Complex64]) -> Result<Vec<Complex64>, ZcError> {
    if spectrum.is_empty() {
        return Err(ZcError::Empty);
    }
    let mut out = spectrum.to_vec();
    fft::inverse_in_place(&mut out);
    let n = out.len() as f64;
    fft::scale(&mut out, 1.0 / n);
    Ok(out)
}
