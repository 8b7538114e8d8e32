//! Interval-level jamming metrics, evaluated with exact rationals.
//!
//! With `N_i` intervals, `N_e` of them invalid, `N_RA,s` successful and
//! `N_P,j` jammed (sent but undetected) preambles:
//!
//! ```text
//! mean preambles per interval  = (N_P,j + N_RA,s) / (N_i - N_e)
//! per-preamble survival E_P,j  = N_RA,s / (N_P,j + N_RA,s)
//! interval success E_s         = N_RA,s / (N_i - N_e)
//! ```
//!
//! The first form assumes every success cost exactly one detected preamble.
//! The summary also carries the count form, total preambles actually sent
//! over valid intervals, which is what an unjammed run should be judged by.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::campaign::IntervalRecord;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no interval records")]
    Empty,
    #[error("all {0} intervals are invalid")]
    AllInvalid(u64),
    #[error("inconsistent counts: {0}")]
    Inconsistent(String),
}

/// Tallied counts from which every metric follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub n_intervals: u64,
    pub n_e: u64,
    pub n_ra_s: u64,
    pub n_p_j: u64,
    /// Preambles sent over valid intervals, when known.
    pub n_p_sent: Option<u64>,
}

/// An exact ratio together with its floating-point value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    fn of(r: Ratio<u64>) -> Self {
        Fraction {
            num: *r.numer(),
            den: *r.denom(),
        }
    }

    pub fn ratio(&self) -> Ratio<u64> {
        Ratio::new(self.num, self.den)
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub n_intervals: u64,
    pub n_ra_s: u64,
    pub n_ra_u: u64,
    pub n_e: u64,
    pub n_p_j: u64,
    pub mean_preambles_per_interval: Fraction,
    pub mean_preambles_per_interval_value: f64,
    /// Count form; absent when the sent totals are unknown.
    pub mean_preambles_sent_per_interval: Option<Fraction>,
    pub mean_preambles_sent_per_interval_value: Option<f64>,
    /// Absent when no preamble was sent at all.
    pub e_p_j: Option<Fraction>,
    pub e_p_j_ppm: Option<f64>,
    pub e_s: Fraction,
    pub e_s_value: f64,
}

pub fn metrics_from_counts(c: Counts) -> Result<MetricsSummary, MetricsError> {
    if c.n_intervals == 0 {
        return Err(MetricsError::Empty);
    }
    if c.n_e > c.n_intervals {
        return Err(MetricsError::Inconsistent(format!(
            "n_e {} exceeds n_intervals {}",
            c.n_e, c.n_intervals
        )));
    }
    let valid = c.n_intervals - c.n_e;
    if valid == 0 {
        return Err(MetricsError::AllInvalid(c.n_intervals));
    }
    if c.n_ra_s > valid {
        return Err(MetricsError::Inconsistent(format!(
            "n_ra_s {} exceeds {valid} valid intervals",
            c.n_ra_s
        )));
    }
    let attempts = c.n_p_j + c.n_ra_s;
    let mean = Ratio::new(attempts, valid);
    let sent = c.n_p_sent.map(|s| Ratio::new(s, valid));
    let e_p_j = (attempts > 0).then(|| Ratio::new(c.n_ra_s, attempts));
    let e_s = Ratio::new(c.n_ra_s, valid);
    Ok(MetricsSummary {
        n_intervals: c.n_intervals,
        n_ra_s: c.n_ra_s,
        n_ra_u: valid - c.n_ra_s,
        n_e: c.n_e,
        n_p_j: c.n_p_j,
        mean_preambles_per_interval: Fraction::of(mean),
        mean_preambles_per_interval_value: Fraction::of(mean).value(),
        mean_preambles_sent_per_interval: sent.map(Fraction::of),
        mean_preambles_sent_per_interval_value: sent.map(|r| Fraction::of(r).value()),
        e_p_j: e_p_j.map(Fraction::of),
        e_p_j_ppm: e_p_j.map(|r| Fraction::of(r).value() * 1e6),
        e_s: Fraction::of(e_s),
        e_s_value: Fraction::of(e_s).value(),
    })
}

pub fn counts_of(records: &[IntervalRecord]) -> Counts {
    let mut c = Counts {
        n_intervals: records.len() as u64,
        n_e: 0,
        n_ra_s: 0,
        n_p_j: 0,
        n_p_sent: Some(0),
    };
    for r in records {
        if !r.valid {
            c.n_e += 1;
            continue;
        }
        c.n_ra_s += u64::from(r.ra_succeeded);
        c.n_p_j += r.preambles_sent.saturating_sub(r.preambles_detected);
        c.n_p_sent = c.n_p_sent.map(|s| s + r.preambles_sent);
    }
    c
}

pub fn compute_metrics(records: &[IntervalRecord]) -> Result<MetricsSummary, MetricsError> {
    metrics_from_counts(counts_of(records))
}
