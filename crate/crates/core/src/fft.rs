//! Thin wrappers over `rustfft` with a per-thread plan cache.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn forward_plan(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

fn inverse_plan(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Unnormalized forward transform, in place.
pub fn forward_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    forward_plan(buf.len()).process(buf);
}

/// Unnormalized inverse transform (no `1/N`), in place.
pub fn inverse_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    inverse_plan(buf.len()).process(buf);
}

/// Forward transform scaled by `1/sqrt(N)`.
pub fn unitary_forward(buf: &mut [Complex64]) {
    forward_in_place(buf);
    scale(buf, 1.0 / (buf.len() as f64).sqrt());
}

/// Inverse transform scaled by `1/sqrt(N)`.
pub fn unitary_inverse(buf: &mut [Complex64]) {
    inverse_in_place(buf);
    scale(buf, 1.0 / (buf.len() as f64).sqrt());
}

pub(crate) fn scale(buf: &mut [Complex64], factor: f64) {
    for v in buf.iter_mut() {
        *v *= factor;
    }
}
