//! Link-level simulator of smart jamming against the 5G NR PRACH.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod channel;
pub mod detector;
pub mod fft;
pub mod jammer;
pub mod link;
pub mod metrics;
pub mod par;
pub mod prach;
pub mod ra;
pub mod rng;
pub mod waveform;
pub mod zc;
