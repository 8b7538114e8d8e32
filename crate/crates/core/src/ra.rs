//! Four-step contention-based random access: preamble, RAR, Msg3, Msg4.
//!
//! Only Msg1 crosses the simulated air interface. RAR, Msg3 and Msg4 are
//! delivered reliably within the same occasion once the gNB has detected a
//! signature. A UE that hears nothing within the RAR window, or loses
//! contention resolution, backs off and retries one retry period after its
//! previous attempt; it keeps its transmit amplitude across attempts.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detector::DetectionResult;
use crate::prach::PrachOccasion;

pub type UniqueId = u64;
pub type TempId = u32;

/// Slack for comparing virtual times built from sums of fractional slots.
const TIME_EPS_MS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature {
    pub root: usize,
    pub index: usize,
}

/// `roots x floor(L / shift_step)` signatures.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureSpace {
    roots: Vec<usize>,
    per_root: usize,
    shift_step: usize,
}

impl SignatureSpace {
    pub fn new(roots: Vec<usize>, sequence_len: usize, shift_step: usize) -> Self {
        assert!(!roots.is_empty() && shift_step >= 1 && shift_step <= sequence_len);
        SignatureSpace {
            roots,
            per_root: sequence_len / shift_step,
            shift_step,
        }
    }

    pub fn len(&self) -> usize {
        self.roots.len() * self.per_root
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Signature {
        Signature {
            root: self.roots[i / self.per_root],
            index: i % self.per_root,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Signature> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    /// Cyclic shift carried by `sig`.
    pub fn shift_of(&self, sig: Signature) -> usize {
        sig.index * self.shift_step
    }
}

/// Chooses the signature of the next preamble.
pub trait SignaturePicker {
    fn pick(&mut self, space: &SignatureSpace) -> Signature;
}

/// Uniform choice, the contention-based rule.
pub struct Uniform<R>(pub R);

impl<R: Rng> SignaturePicker for Uniform<R> {
    fn pick(&mut self, space: &SignatureSpace) -> Signature {
        space.get(self.0.random_range(0..space.len()))
    }
}

/// Always the same signature; used to enumerate contention cases.
pub struct Fixed(pub Signature);

impl SignaturePicker for Fixed {
    fn pick(&mut self, _: &SignatureSpace) -> Signature {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaTiming {
    pub retry_period_ms: f64,
    pub rar_window_ms: f64,
}

impl Default for RaTiming {
    fn default() -> Self {
        RaTiming {
            retry_period_ms: 100.0,
            rar_window_ms: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RaState {
    /// Ready to send at the next occasion once the retry timer has run out.
    Idle,
    WaitRar,
    WaitMsg4,
    Connected,
    /// Failed attempt; waiting for the retry timer.
    Backoff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeRaState {
    pub state: RaState,
    pub chosen_signature: Option<Signature>,
    /// Earliest time of the next preamble.
    pub retry_timer_ms: f64,
    pub preambles_sent: u64,
    pub unique_id: UniqueId,
    pub temp_id: Option<TempId>,
    pub last_attempt_ms: Option<f64>,
    pub connected_at_ms: Option<f64>,
    /// Downlink events that did not fit the current state.
    pub ignored_events: u64,
}

impl UeRaState {
    pub fn new(unique_id: UniqueId, start_ms: f64) -> Self {
        UeRaState {
            state: RaState::Idle,
            chosen_signature: None,
            retry_timer_ms: start_ms,
            preambles_sent: 0,
            unique_id,
            temp_id: None,
            last_attempt_ms: None,
            connected_at_ms: None,
            ignored_events: 0,
        }
    }

    pub fn is_connected(&self) -> bool {
        self.state == RaState::Connected
    }

    fn back_off(&mut self) {
        self.state = RaState::Backoff;
        self.chosen_signature = None;
        self.temp_id = None;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DownlinkEvent {
    /// A PRACH occasion starts; the only point where a preamble can go out.
    Occasion(PrachOccasion),
    Rar {
        signature: Signature,
        temp_id: TempId,
    },
    Msg4 {
        temp_id: TempId,
        unique_id: UniqueId,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UplinkAction {
    Preamble {
        signature: Signature,
    },
    Msg3 {
        temp_id: TempId,
        unique_id: UniqueId,
    },
}

pub fn ue_step<P: SignaturePicker + ?Sized>(
    mut ue: UeRaState,
    now: f64,
    events: &[DownlinkEvent],
    timing: &RaTiming,
    space: &SignatureSpace,
    picker: &mut P,
) -> (UeRaState, Option<UplinkAction>) {
    if ue.state == RaState::Connected {
        ue.ignored_events += events
            .iter()
            .filter(|e| !matches!(e, DownlinkEvent::Occasion(_)))
            .count() as u64;
        return (ue, None);
    }

    // Response windows
    if matches!(ue.state, RaState::WaitRar | RaState::WaitMsg4) {
        let sent = ue.last_attempt_ms.unwrap_or(now);
        if now > sent + timing.rar_window_ms + TIME_EPS_MS {
            ue.back_off();
        }
    }
    if ue.state == RaState::Backoff && now + TIME_EPS_MS >= ue.retry_timer_ms {
        ue.state = RaState::Idle;
    }

    let mut action = None;
    for event in events {
        match (ue.state, event) {
            (RaState::Idle, DownlinkEvent::Occasion(_))
                if action.is_none() && now + TIME_EPS_MS >= ue.retry_timer_ms =>
            {
                let signature = picker.pick(space);
                ue.state = RaState::WaitRar;
                ue.chosen_signature = Some(signature);
                ue.preambles_sent += 1;
                ue.last_attempt_ms = Some(now);
                ue.retry_timer_ms = now + timing.retry_period_ms;
                action = Some(UplinkAction::Preamble { signature });
            }
            (_, DownlinkEvent::Occasion(_)) => {}
            (RaState::WaitRar, DownlinkEvent::Rar { signature, temp_id })
                if Some(*signature) == ue.chosen_signature && action.is_none() =>
            {
                ue.state = RaState::WaitMsg4;
                ue.temp_id = Some(*temp_id);
                action = Some(UplinkAction::Msg3 {
                    temp_id: *temp_id,
                    unique_id: ue.unique_id,
                });
            }
            // RARs for other signatures are normal traffic
            (_, DownlinkEvent::Rar { .. }) => {}
            (RaState::WaitMsg4, DownlinkEvent::Msg4 { temp_id, unique_id })
                if Some(*temp_id) == ue.temp_id =>
            {
                if *unique_id == ue.unique_id {
                    ue.state = RaState::Connected;
                    ue.chosen_signature = None;
                    ue.connected_at_ms = Some(now);
                } else {
                    ue.back_off();
                }
            }
            (_, DownlinkEvent::Msg4 { .. }) => ue.ignored_events += 1,
        }
    }
    (ue, action)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Msg3 {
    pub temp_id: TempId,
    pub unique_id: UniqueId,
    pub received_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GnbRaContext {
    /// RARs granted in the current occasion.
    pub pending_rar: BTreeMap<Signature, TempId>,
    pub msg3_received: BTreeMap<TempId, Vec<(f64, UniqueId)>>,
    pub next_temp_id: TempId,
}

/// With detections: starts a new occasion and grants one RAR per detected
/// signature. With Msg3s: resolves each contended temporary identifier to
/// the earliest Msg3, ties going to the lowest unique identifier.
pub fn gnb_step(
    mut ctx: GnbRaContext,
    detections: Option<&DetectionResult>,
    msg3s: &[Msg3],
) -> (GnbRaContext, Vec<DownlinkEvent>) {
    let mut events = Vec::new();
    if let Some(result) = detections {
        ctx.pending_rar.clear();
        ctx.msg3_received.clear();
        for d in &result.detected {
            let signature = Signature {
                root: d.root,
                index: d.signature,
            };
            if ctx.pending_rar.contains_key(&signature) {
                continue;
            }
            let temp_id = ctx.next_temp_id;
            ctx.next_temp_id = ctx.next_temp_id.wrapping_add(1);
            ctx.pending_rar.insert(signature, temp_id);
            events.push(DownlinkEvent::Rar { signature, temp_id });
        }
    }
    if !msg3s.is_empty() {
        for m in msg3s {
            if ctx.pending_rar.values().any(|&t| t == m.temp_id) {
                ctx.msg3_received
                    .entry(m.temp_id)
                    .or_default()
                    .push((m.received_ms, m.unique_id));
            }
        }
        let resolved = std::mem::take(&mut ctx.msg3_received);
        for (temp_id, candidates) in resolved {
            let winner = candidates
                .iter()
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|c| c.1)
                .expect("non-empty candidate list");
            ctx.pending_rar.retain(|_, t| *t != temp_id);
            events.push(DownlinkEvent::Msg4 {
                temp_id,
                unique_id: winner,
            });
        }
    }
    (ctx, events)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time_ms: f64,
    pub entity: String,
    pub transition: String,
}

/// What happened in one occasion.
#[derive(Debug, Clone, PartialEq)]
pub struct OccasionReport {
    /// `(ue index, signature)` of every preamble sent.
    pub transmissions: Vec<(usize, Signature)>,
    pub detection: Option<DetectionResult>,
    /// UEs whose preamble signature was among the detections.
    pub heard: Vec<usize>,
    pub newly_connected: Vec<usize>,
}

/// One gNB and a set of UEs advanced together on a shared clock.
#[derive(Debug, Clone)]
pub struct RaSession {
    pub ues: Vec<UeRaState>,
    pub gnb: GnbRaContext,
    pub timing: RaTiming,
    pub space: SignatureSpace,
    trace: Option<Vec<TraceEvent>>,
}

impl RaSession {
    pub fn new(ues: Vec<UeRaState>, timing: RaTiming, space: SignatureSpace) -> Self {
        RaSession {
            ues,
            gnb: GnbRaContext::default(),
            timing,
            space,
            trace: None,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn all_connected(&self) -> bool {
        self.ues.iter().all(|u| u.is_connected())
    }

    fn log(&mut self, time_ms: f64, entity: String, transition: String) {
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent {
                time_ms,
                entity,
                transition,
            });
        }
    }

    fn step_ue<P: SignaturePicker + ?Sized>(
        &mut self,
        i: usize,
        now: f64,
        events: &[DownlinkEvent],
        picker: &mut P,
    ) -> Option<UplinkAction> {
        let before = self.ues[i].state;
        let ue = self.ues[i].clone();
        let (ue, action) = ue_step(ue, now, events, &self.timing, &self.space, picker);
        let after = ue.state;
        self.ues[i] = ue;
        if before != after {
            self.log(now, format!("ue{i}"), format!("{before:?} -> {after:?}"));
        }
        action
    }

    /// Runs the occasion starting at `now`. `pickers[i]` chooses UE `i`'s
    /// signature; `receive` turns the transmitted signatures into the gNB's
    /// detection result, or `None` when the occasion is not simulated.
    pub fn occasion<P, F, E>(
        &mut self,
        now: f64,
        occasion: PrachOccasion,
        pickers: &mut [P],
        receive: F,
    ) -> Result<OccasionReport, E>
    where
        P: SignaturePicker,
        F: FnOnce(&[(usize, Signature)]) -> Result<Option<DetectionResult>, E>,
    {
        assert_eq!(pickers.len(), self.ues.len(), "one picker per UE");
        let tick = [DownlinkEvent::Occasion(occasion)];
        let mut transmissions = Vec::new();
        for (i, picker) in pickers.iter_mut().enumerate() {
            if let Some(UplinkAction::Preamble { signature }) = self.step_ue(i, now, &tick, picker)
            {
                transmissions.push((i, signature));
            }
        }

        let detection = receive(&transmissions)?;
        let mut report = OccasionReport {
            transmissions,
            detection: None,
            heard: Vec::new(),
            newly_connected: Vec::new(),
        };
        let Some(detection) = detection else {
            return Ok(report);
        };
        report.heard = report
            .transmissions
            .iter()
            .filter(|(_, s)| detection.contains(s.root, s.index))
            .map(|(i, _)| *i)
            .collect();

        let gnb = std::mem::take(&mut self.gnb);
        let (gnb, rars) = gnb_step(gnb, Some(&detection), &[]);
        self.gnb = gnb;
        if !rars.is_empty() {
            self.log(now, "gnb".into(), format!("{} RAR", rars.len()));
        }

        let mut msg3s = Vec::new();
        for (i, picker) in pickers.iter_mut().enumerate() {
            if let Some(UplinkAction::Msg3 { temp_id, unique_id }) =
                self.step_ue(i, now, &rars, picker)
            {
                msg3s.push(Msg3 {
                    temp_id,
                    unique_id,
                    received_ms: now,
                });
            }
        }

        let gnb = std::mem::take(&mut self.gnb);
        let (gnb, msg4s) = gnb_step(gnb, None, &msg3s);
        self.gnb = gnb;
        for (i, picker) in pickers.iter_mut().enumerate() {
            let was = self.ues[i].is_connected();
            self.step_ue(i, now, &msg4s, picker);
            if !was && self.ues[i].is_connected() {
                report.newly_connected.push(i);
            }
        }
        report.detection = Some(detection);
        Ok(report)
    }
}
