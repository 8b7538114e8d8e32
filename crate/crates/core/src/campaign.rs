//! Measurement campaign: repeated intervals of a jammer and one or more UEs
//! on a virtual clock.
//!
//! In each interval the jammer runs from `t = 0` for
//! `jammer_lead + interval_duration + jammer_lag` seconds. The UE is powered
//! during `[jammer_lead, jammer_lead + interval_duration)` and starts its
//! first access attempt `ue_startup_delay` seconds after power-on. Only PRACH
//! occasions are synthesized; everything between them is skipped, and an
//! occasion in which no UE transmits is not synthesized either unless the
//! detection log is requested. Every random stream is keyed by interval and
//! occasion number, so skipping never changes a result.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelConfig;
use crate::detector::{Detection, DetectorConfig};
use crate::jammer::JammerConfig;
use crate::link::{Link, LinkError};
use crate::metrics::{compute_metrics, MetricsError, MetricsSummary};
use crate::par::{map_indexed, Execution};
use crate::prach::{
    is_prach_frame, jammer_resource_budget, occasions_in_frame, occupancy_breakdown, CellConfig,
    OccupancyBreakdown, PrachConfig, ResourceBudget, FRAME_MS,
};
use crate::ra::{RaSession, RaTiming, TraceEvent, UeRaState, Uniform};
use crate::rng::{derive_seed, interval_seed, stream, tag, SEED_RULE};
use crate::waveform::occasion_len;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
}

impl CampaignError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CampaignError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    pub schema_version: u32,
    pub n_intervals: u64,
    /// Seconds the UE is powered in each interval.
    pub interval_duration: f64,
    pub jammer_lead: f64,
    pub jammer_lag: f64,
    /// Seconds from UE power-on to its first access attempt.
    pub ue_startup_delay: f64,
    pub spectrum: JammerConfig,
    pub channel: ChannelConfig,
    pub detector: DetectorConfig,
    pub prach: PrachConfig,
    pub cell: CellConfig,
    pub base_seed: u64,
    /// Bin magnitude `A_N` of the UE preamble.
    pub ue_amplitude: f64,
    pub n_ues: u32,
    /// Probability that an interval is marked invalid.
    pub invalid_probability: f64,
    pub rar_window_ms: f64,
    pub retry_period_ms: f64,
    /// Synthesize every occasion in the UE window and log its detections.
    pub detection_log: bool,
    /// Keep the random-access state transitions of every interval.
    pub ra_trace: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        let timing = RaTiming::default();
        CampaignConfig {
            schema_version: SCHEMA_VERSION,
            n_intervals: 100,
            interval_duration: 60.0,
            jammer_lead: 10.0,
            jammer_lag: 10.0,
            ue_startup_delay: 0.5,
            spectrum: JammerConfig::default(),
            channel: ChannelConfig::default(),
            detector: DetectorConfig::default(),
            prach: PrachConfig::table_i(),
            cell: CellConfig::desk_preset(),
            base_seed: 0,
            ue_amplitude: 1.0,
            n_ues: 1,
            invalid_probability: 0.0,
            rar_window_ms: timing.rar_window_ms,
            retry_period_ms: timing.retry_period_ms,
            detection_log: false,
            ra_trace: false,
        }
    }
}

fn config_error(msg: impl Into<String>) -> CampaignError {
    CampaignError::Config(msg.into())
}

impl CampaignConfig {
    pub fn timing(&self) -> RaTiming {
        RaTiming {
            retry_period_ms: self.retry_period_ms,
            rar_window_ms: self.rar_window_ms,
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_error(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n_intervals < 1 {
            return Err(config_error("n_intervals must be ≥ 1"));
        }
        if !(self.interval_duration > 0.0 && self.interval_duration.is_finite()) {
            return Err(config_error("interval_duration must be > 0"));
        }
        for (name, v) in [
            ("jammer_lead", self.jammer_lead),
            ("jammer_lag", self.jammer_lag),
            ("ue_startup_delay", self.ue_startup_delay),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_error(format!("{name} must be ≥ 0")));
            }
        }
        if !(self.retry_period_ms > 0.0 && self.retry_period_ms.is_finite()) {
            return Err(config_error("retry_period_ms must be > 0"));
        }
        if !(self.rar_window_ms > 0.0 && self.rar_window_ms < self.retry_period_ms) {
            return Err(config_error(
                "rar_window_ms must be > 0 and shorter than retry_period_ms",
            ));
        }
        if !(0.0..=1.0).contains(&self.invalid_probability) {
            return Err(config_error("invalid_probability must lie in [0, 1]"));
        }
        if !(self.ue_amplitude > 0.0 && self.ue_amplitude.is_finite()) {
            return Err(config_error("ue_amplitude must be > 0"));
        }
        if self.n_ues < 1 {
            return Err(config_error("n_ues must be ≥ 1"));
        }
        if !self.spectrum.snr_db.is_finite() {
            return Err(config_error("spectrum.snr_db must be finite"));
        }
        self.cell
            .validate()
            .and_then(|_| self.prach.validate_with(&self.cell))
            .map_err(|e| config_error(e.to_string()))?;
        if self.detector.roots != self.cell.prach_root_indices {
            return Err(config_error(
                "detector.roots must equal cell.prach_root_indices",
            ));
        }
        if self.detector.shift_step != self.cell.shift_step {
            return Err(config_error(
                "detector.shift_step must equal cell.shift_step",
            ));
        }
        self.channel
            .validate(self.cell.cp_len())
            .map_err(|e| config_error(e.to_string()))?;
        self.link().map_err(|e| config_error(e.to_string()))?;
        Ok(())
    }

    pub fn link(&self) -> Result<Link, LinkError> {
        Link::new(
            self.cell.clone(),
            self.channel.clone(),
            self.spectrum.clone(),
            self.detector.clone(),
            self.ue_amplitude,
            self.prach.preamble_length,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalRecord {
    pub index: u64,
    pub valid: bool,
    pub preambles_sent: u64,
    /// UE preambles whose signature the gNB detected.
    pub preambles_detected: u64,
    /// Every UE of the interval reached the connected state.
    pub ra_succeeded: bool,
    /// Seconds from the first possible attempt to the last connection.
    pub time_to_success: Option<f64>,
    pub seed: u64,
}

/// One synthesized occasion as seen by the gNB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionLogEntry {
    pub interval: u64,
    pub sfn: u32,
    pub occasion_index: u32,
    pub freq_index: u32,
    pub time_ms: f64,
    pub transmitted: usize,
    pub detections: Vec<Detection>,
    pub noise_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalTraceEvent {
    pub interval: u64,
    #[serde(flatten)]
    pub event: TraceEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalOutcome {
    pub record: IntervalRecord,
    pub detections: Vec<DetectionLogEntry>,
    pub trace: Vec<TraceEvent>,
}

/// Simulates interval `index` with a receiver chain built from `cfg`.
pub fn run_interval_with(
    cfg: &CampaignConfig,
    link: &Link,
    index: u64,
) -> Result<IntervalOutcome, CampaignError> {
    let seed = interval_seed(cfg.base_seed, index);
    let valid = stream(seed, tag::VALIDITY, 0).random::<f64>() >= cfg.invalid_probability;

    let ue_on_ms = cfg.jammer_lead * 1e3;
    let ue_off_ms = (cfg.jammer_lead + cfg.interval_duration) * 1e3;
    let jam_off_ms = (cfg.jammer_lead + cfg.interval_duration + cfg.jammer_lag) * 1e3;
    let first_attempt_ms = ue_on_ms + cfg.ue_startup_delay * 1e3;

    let ues = (0..cfg.n_ues)
        .map(|u| {
            UeRaState::new(
                derive_seed(seed, tag::UE, u as u64 + 1_000_000),
                first_attempt_ms,
            )
        })
        .collect();
    let mut session = RaSession::new(ues, cfg.timing(), link.space().clone());
    if cfg.ra_trace {
        session = session.with_trace();
    }
    let mut pickers: Vec<_> = (0..cfg.n_ues)
        .map(|u| Uniform(stream(seed, tag::UE, u as u64)))
        .collect();

    let mut sent = 0u64;
    let mut detected = 0u64;
    let mut detections = Vec::new();
    let mut connected_at: Option<f64> = None;

    let first_frame = (ue_on_ms / FRAME_MS).floor() as u32;
    let last_frame = (ue_off_ms / FRAME_MS).ceil() as u32;
    'frames: for sfn in first_frame..=last_frame {
        if !is_prach_frame(&cfg.prach, sfn) {
            continue;
        }
        for occ in occasions_in_frame(&cfg.prach, &cfg.cell, sfn) {
            let now = occ.start_ms(&cfg.cell);
            if now < ue_on_ms || now >= ue_off_ms {
                continue;
            }
            let key =
                ((sfn as u64) << 16) | ((occ.occasion_index as u64) << 8) | occ.freq_index as u64;
            let occ_seed = derive_seed(seed, tag::OCCASION, key);
            let jam = now < jam_off_ms;
            let report = session.occasion(now, occ, &mut pickers, |tx| {
                if tx.is_empty() && !cfg.detection_log {
                    return Ok::<_, LinkError>(None);
                }
                let sigs: Vec<_> = tx.iter().map(|(_, s)| *s).collect();
                link.receive(&occ, &sigs, jam, occ_seed).map(Some)
            })?;
            sent += report.transmissions.len() as u64;
            detected += report.heard.len() as u64;
            if cfg.detection_log {
                if let Some(d) = &report.detection {
                    detections.push(DetectionLogEntry {
                        interval: index,
                        sfn,
                        occasion_index: occ.occasion_index,
                        freq_index: occ.freq_index,
                        time_ms: now,
                        transmitted: report.transmissions.len(),
                        detections: d.detected.clone(),
                        noise_floor: d.noise_floor,
                    });
                }
            }
            if !report.newly_connected.is_empty() && session.all_connected() {
                connected_at = Some(now);
                if !cfg.detection_log {
                    break 'frames;
                }
            }
        }
    }

    let ra_succeeded = session.all_connected();
    Ok(IntervalOutcome {
        record: IntervalRecord {
            index,
            valid,
            preambles_sent: sent,
            preambles_detected: detected,
            ra_succeeded,
            time_to_success: connected_at.map(|t| (t - first_attempt_ms) / 1e3),
            seed,
        },
        detections,
        trace: session.take_trace(),
    })
}

pub fn run_interval(cfg: &CampaignConfig, index: u64) -> Result<IntervalRecord, CampaignError> {
    cfg.validate()?;
    Ok(run_interval_with(cfg, &cfg.link()?, index)?.record)
}

/// Metadata written at the top of `records.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordsHeader {
    pub schema_version: u32,
    pub seed_rule: String,
    pub base_seed: u64,
    pub n_intervals: u64,
    pub occupancy: OccupancyBreakdown,
    pub budget: ResourceBudget,
    /// Samples synthesized per occasion.
    pub occasion_samples: usize,
}

impl RecordsHeader {
    pub fn for_config(cfg: &CampaignConfig) -> Result<Self, CampaignError> {
        Ok(RecordsHeader {
            schema_version: SCHEMA_VERSION,
            seed_rule: SEED_RULE.to_string(),
            base_seed: cfg.base_seed,
            n_intervals: cfg.n_intervals,
            occupancy: occupancy_breakdown(&cfg.prach, &cfg.cell)
                .map_err(|e| config_error(e.to_string()))?,
            budget: jammer_resource_budget(&cfg.prach, &cfg.cell),
            occasion_samples: occasion_len(&cfg.cell),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub seed_rule: Option<String>,
    pub base_seed: Option<u64>,
    pub occupancy: Option<OccupancyBreakdown>,
    pub budget: Option<ResourceBudget>,
    pub metrics: MetricsSummary,
}

pub fn summarize(
    header: Option<&RecordsHeader>,
    records: &[IntervalRecord],
) -> Result<Summary, CampaignError> {
    Ok(Summary {
        schema_version: SCHEMA_VERSION,
        seed_rule: header.map(|h| h.seed_rule.clone()),
        base_seed: header.map(|h| h.base_seed),
        occupancy: header.map(|h| h.occupancy),
        budget: header.map(|h| h.budget),
        metrics: compute_metrics(records)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutput {
    pub header: RecordsHeader,
    pub records: Vec<IntervalRecord>,
    pub summary: Summary,
    pub detections: Vec<DetectionLogEntry>,
    pub trace: Vec<IntervalTraceEvent>,
}

pub fn run_campaign(
    cfg: &CampaignConfig,
    exec: Execution,
) -> Result<CampaignOutput, CampaignError> {
    cfg.validate()?;
    let header = RecordsHeader::for_config(cfg)?;
    let link = cfg.link()?;
    let outcomes = map_indexed(cfg.n_intervals, exec, |i| run_interval_with(cfg, &link, i));
    let mut records = Vec::with_capacity(outcomes.len());
    let mut detections = Vec::new();
    let mut trace = Vec::new();
    for o in outcomes {
        let o = o?;
        detections.extend(o.detections);
        trace.extend(o.trace.into_iter().map(|event| IntervalTraceEvent {
            interval: o.record.index,
            event,
        }));
        records.push(o.record);
    }
    let summary = summarize(Some(&header), &records)?;
    Ok(CampaignOutput {
        header,
        records,
        summary,
        detections,
        trace,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CampaignError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CampaignError::io(path, e))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CampaignError> {
    let mut w = create(path)?;
    for item in items {
        let line = serde_json::to_string(item).expect("serializable");
        writeln!(w, "{line}").map_err(|e| CampaignError::io(path, e))?;
    }
    w.flush().map_err(|e| CampaignError::io(path, e))
}

pub fn write_records(
    path: &Path,
    header: &RecordsHeader,
    records: &[IntervalRecord],
) -> Result<(), CampaignError> {
    let mut w = create(path)?;
    let mut put = |s: String| writeln!(w, "{s}").map_err(|e| CampaignError::io(path, e));
    put(serde_json::to_string(header).expect("serializable"))?;
    for r in records {
        put(serde_json::to_string(r).expect("serializable"))?;
    }
    w.flush().map_err(|e| CampaignError::io(path, e))
}

/// Reads `records.jsonl`. The header line is optional so that hand-made
/// record files can be summarized too.
pub fn read_records(
    path: &Path,
) -> Result<(Option<RecordsHeader>, Vec<IntervalRecord>), CampaignError> {
    let file = File::open(path).map_err(|e| CampaignError::io(path, e))?;
    let mut header = None;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CampaignError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Ok(h) = serde_json::from_str::<RecordsHeader>(&line) {
                header = Some(h);
                continue;
            }
        }
        let r = serde_json::from_str(&line).map_err(|source| CampaignError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        records.push(r);
    }
    Ok((header, records))
}

pub fn summary_json(summary: &Summary) -> String {
    serde_json::to_string_pretty(summary).expect("serializable") + "\n"
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<(), CampaignError> {
    std::fs::write(path, summary_json(summary)).map_err(|e| CampaignError::io(path, e))
}

/// Per-interval counts for plotting.
pub fn write_preambles_csv(path: &Path, records: &[IntervalRecord]) -> Result<(), CampaignError> {
    let mut w = create(path)?;
    let mut put = |s: String| writeln!(w, "{s}").map_err(|e| CampaignError::io(path, e));
    put("index,valid,preambles_sent,preambles_detected,ra_succeeded,time_to_success".into())?;
    for r in records {
        put(format!(
            "{},{},{},{},{},{}",
            r.index,
            r.valid,
            r.preambles_sent,
            r.preambles_detected,
            r.ra_succeeded,
            r.time_to_success.map(|t| t.to_string()).unwrap_or_default()
        ))?;
    }
    w.flush().map_err(|e| CampaignError::io(path, e))
}

/// Writes every artifact of a campaign into `dir`.
pub fn write_outputs(dir: &Path, out: &CampaignOutput) -> Result<(), CampaignError> {
    std::fs::create_dir_all(dir).map_err(|e| CampaignError::io(dir, e))?;
    write_records(&dir.join("records.jsonl"), &out.header, &out.records)?;
    write_summary(&dir.join("summary.json"), &out.summary)?;
    write_preambles_csv(&dir.join("preambles.csv"), &out.records)?;
    if !out.detections.is_empty() {
        write_jsonl(&dir.join("detections.jsonl"), &out.detections)?;
    }
    if !out.trace.is_empty() {
        write_jsonl(&dir.join("ra_trace.jsonl"), &out.trace)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(enabled: bool) -> CampaignConfig {
        let mut c = CampaignConfig {
            n_intervals: 4,
            interval_duration: 2.0,
            ..Default::default()
        };
        c.spectrum.enabled = enabled;
        c
    }

    #[test]
    fn defaults_validate() {
        CampaignConfig::default().validate().unwrap();
    }

    #[test]
    fn zero_intervals_rejected() {
        let c = CampaignConfig {
            n_intervals: 0,
            ..Default::default()
        };
        let e = c.validate().unwrap_err();
        assert!(e.to_string().contains("n_intervals must be ≥ 1"));
    }

    #[test]
    fn mismatched_roots_rejected() {
        let mut c = CampaignConfig::default();
        c.detector.roots = vec![2];
        assert!(matches!(c.validate(), Err(CampaignError::Config(_))));
    }

    #[test]
    fn unjammed_interval_connects_first_try() {
        let r = run_interval(&short(false), 0).unwrap();
        assert!(r.ra_succeeded);
        assert_eq!((r.preambles_sent, r.preambles_detected), (1, 1));
        assert!(r.time_to_success.unwrap() < 0.03);
    }

    #[test]
    fn silent_ue_sends_at_retry_cadence() {
        let mut c = short(true);
        c.ue_amplitude = 1e-6;
        c.ue_startup_delay = 0.0;
        let r = run_interval(&c, 0).unwrap();
        assert!(!r.ra_succeeded);
        assert_eq!(r.preambles_sent, 20);
    }

    #[test]
    fn detection_log_does_not_change_records() {
        let mut c = short(true);
        c.spectrum.snr_db = -14.0;
        let a = run_campaign(&c, Execution::Sequential).unwrap();
        c.detection_log = true;
        let b = run_campaign(&c, Execution::Parallel).unwrap();
        assert_eq!(a.records, b.records);
        assert!(b.detections.len() > a.detections.len());
    }

    #[test]
    fn records_round_trip() {
        let out = run_campaign(&short(false), Execution::Sequential).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("records.jsonl");
        write_records(&p, &out.header, &out.records).unwrap();
        let (h, r) = read_records(&p).unwrap();
        assert_eq!(h.as_ref(), Some(&out.header));
        assert_eq!(r, out.records);
        assert_eq!(summarize(h.as_ref(), &r).unwrap(), out.summary);
    }
}
