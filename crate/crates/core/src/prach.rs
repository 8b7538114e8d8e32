//! PRACH configuration, occasion placement and resource occupancy.
//!
//! The configuration is the already-expanded parameter record (what a UE
//! derives from SIB1 plus the configuration-index table), not the raw index.
//! [`PrachConfig::table_i`] ships the index-98 / format A2 expansion used for
//! the n78 campus cell.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SYMBOLS_PER_SLOT: u32 = 14;
pub const SUBFRAMES_PER_FRAME: u32 = 10;
pub const SUBCARRIERS_PER_PRB: usize = 12;
pub const FRAME_MS: f64 = 10.0;
pub const BASE_SCS_HZ: f64 = 15_000.0;

/// Number of symbol repetitions of format A2.
pub const A2_REPETITIONS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrachError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("cell bandwidth must be positive")]
    ZeroBandwidth,
}

fn invalid(field: &'static str, reason: impl Into<String>) -> PrachError {
    PrachError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PreambleFormat {
    A2,
}

impl PreambleFormat {
    pub fn duration_symbols(self) -> u32 {
        match self {
            PreambleFormat::A2 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrachConfig {
    /// L_RA, also the preamble bandwidth M in subcarriers.
    pub preamble_length: usize,
    pub prach_prbs: usize,
    /// K, number of frequency-multiplexed occasions.
    pub freq_occasions: usize,
    /// Offset of the first occasion from point A, in PRBs.
    pub freq_offset: usize,
    pub preamble_format: PreambleFormat,
    pub sfn_modulus: u32,
    pub sfn_remainder: u32,
    pub subframe_number: u32,
    pub slot_in_subframe: u32,
    pub start_symbol: u32,
    pub slots_per_subframe_with_prach: u32,
    pub occasions_per_slot: u32,
    pub duration_symbols: u32,
    pub prach_subframes_per_frame: u32,
}

impl PrachConfig {
    /// Configuration index 98 expanded for the 30 kHz n78 cell: short
    /// preamble, format A2, odd SFNs, subframe 9, second slot, three
    /// occasions of four symbols starting at symbol 0.
    pub fn table_i() -> Self {
        PrachConfig {
            preamble_length: 139,
            prach_prbs: 12,
            freq_occasions: 1,
            freq_offset: 0,
            preamble_format: PreambleFormat::A2,
            sfn_modulus: 2,
            sfn_remainder: 1,
            subframe_number: 9,
            slot_in_subframe: 1,
            start_symbol: 0,
            slots_per_subframe_with_prach: 1,
            occasions_per_slot: 3,
            duration_symbols: 4,
            prach_subframes_per_frame: 1,
        }
    }

    /// N_sy: PRACH symbols per PRACH slot.
    pub fn symbols_per_slot(&self) -> u32 {
        self.occasions_per_slot * self.duration_symbols
    }

    /// T_ra in milliseconds.
    pub fn period_ms(&self) -> f64 {
        self.sfn_modulus as f64 * FRAME_MS
    }

    pub fn validate(&self) -> Result<(), PrachError> {
        if !matches!(self.preamble_length, 139 | 839) {
            return Err(invalid(
                "preamble_length",
                format!("{} is neither 139 nor 839", self.preamble_length),
            ));
        }
        if self.preamble_format == PreambleFormat::A2 && self.preamble_length != 139 {
            return Err(invalid(
                "preamble_length",
                "format A2 is a short-preamble format and needs L_RA = 139",
            ));
        }
        if self.prach_prbs * SUBCARRIERS_PER_PRB < self.preamble_length {
            return Err(invalid(
                "prach_prbs",
                format!(
                    "{} PRBs cannot hold {} subcarriers",
                    self.prach_prbs, self.preamble_length
                ),
            ));
        }
        if self.freq_occasions == 0 {
            return Err(invalid("freq_occasions", "must be at least 1"));
        }
        if self.sfn_modulus == 0 {
            return Err(invalid("sfn_modulus", "must be at least 1"));
        }
        if self.sfn_remainder >= self.sfn_modulus {
            return Err(invalid(
                "sfn_remainder",
                format!(
                    "{} not below sfn_modulus {}",
                    self.sfn_remainder, self.sfn_modulus
                ),
            ));
        }
        if self.subframe_number >= SUBFRAMES_PER_FRAME {
            return Err(invalid("subframe_number", "must lie in [0, 10)"));
        }
        if self.start_symbol >= SYMBOLS_PER_SLOT {
            return Err(invalid("start_symbol", "must lie in [0, 14)"));
        }
        if self.duration_symbols != self.preamble_format.duration_symbols() {
            return Err(invalid(
                "duration_symbols",
                format!(
                    "format {:?} spans {} symbols, got {}",
                    self.preamble_format,
                    self.preamble_format.duration_symbols(),
                    self.duration_symbols
                ),
            ));
        }
        if self.occasions_per_slot == 0 {
            return Err(invalid("occasions_per_slot", "must be at least 1"));
        }
        if self.symbols_per_slot() > SYMBOLS_PER_SLOT - self.start_symbol {
            return Err(invalid(
                "occasions_per_slot",
                format!(
                    "{} occasions of {} symbols do not fit after start symbol {}",
                    self.occasions_per_slot, self.duration_symbols, self.start_symbol
                ),
            ));
        }
        if self.slots_per_subframe_with_prach == 0 {
            return Err(invalid(
                "slots_per_subframe_with_prach",
                "must be at least 1",
            ));
        }
        if self.prach_subframes_per_frame == 0
            || self.prach_subframes_per_frame > SUBFRAMES_PER_FRAME
        {
            return Err(invalid("prach_subframes_per_frame", "must lie in [1, 10]"));
        }
        Ok(())
    }

    /// Checks that also depend on the cell (numerology and grid size).
    pub fn validate_with(&self, cell: &CellConfig) -> Result<(), PrachError> {
        self.validate()?;
        cell.validate()?;
        let slots = cell.slots_per_subframe();
        if self.slot_in_subframe >= slots {
            return Err(invalid(
                "slot_in_subframe",
                format!(
                    "{} not below {} slots per subframe",
                    self.slot_in_subframe, slots
                ),
            ));
        }
        if self.slots_per_subframe_with_prach > slots {
            return Err(invalid(
                "slots_per_subframe_with_prach",
                format!(
                    "{} exceeds {} slots per subframe",
                    self.slots_per_subframe_with_prach, slots
                ),
            ));
        }
        let last = self.subcarrier_of(self.freq_occasions - 1) + self.preamble_length;
        let grid = cell.n_prb * SUBCARRIERS_PER_PRB;
        if last > grid {
            return Err(invalid(
                "freq_offset",
                format!("PRACH ends at subcarrier {last} beyond the {grid}-subcarrier grid"),
            ));
        }
        Ok(())
    }

    fn subcarrier_of(&self, freq_index: usize) -> usize {
        (self.freq_offset + freq_index * self.prach_prbs) * SUBCARRIERS_PER_PRB
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    /// mu; subcarrier spacing is 2^mu * 15 kHz.
    pub numerology: u32,
    /// B_cell in hertz.
    pub cell_bandwidth: f64,
    pub n_prb: usize,
    pub dft_size: usize,
    pub sample_rate: f64,
    pub prach_root_indices: Vec<usize>,
    pub shift_step: usize,
    /// Cyclic prefix in samples; defaults to 144 scaled from a 2048-point
    /// transform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cp_length: Option<usize>,
}

impl CellConfig {
    /// 40 MHz / 106 PRB n78 cell at 30 kHz with a 2048-point transform.
    pub fn full_preset() -> Self {
        CellConfig {
            numerology: 1,
            cell_bandwidth: 40e6,
            n_prb: 106,
            dft_size: 2048,
            sample_rate: 2048.0 * 30_000.0,
            prach_root_indices: vec![1],
            shift_step: 13,
            cp_length: None,
        }
    }

    /// Same cell, but only the 12-PRB PRACH subband is synthesized on a
    /// 256-point transform. `cell_bandwidth` still describes the real cell.
    pub fn desk_preset() -> Self {
        CellConfig {
            numerology: 1,
            cell_bandwidth: 40e6,
            n_prb: 12,
            dft_size: 256,
            sample_rate: 256.0 * 30_000.0,
            prach_root_indices: vec![1],
            shift_step: 13,
            cp_length: None,
        }
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        (1u64 << self.numerology) as f64 * BASE_SCS_HZ
    }

    pub fn slots_per_subframe(&self) -> u32 {
        1 << self.numerology
    }

    pub fn slots_per_frame(&self) -> u32 {
        SUBFRAMES_PER_FRAME * self.slots_per_subframe()
    }

    pub fn slot_ms(&self) -> f64 {
        1.0 / self.slots_per_subframe() as f64
    }

    pub fn symbol_ms(&self) -> f64 {
        self.slot_ms() / SYMBOLS_PER_SLOT as f64
    }

    pub fn cp_len(&self) -> usize {
        self.cp_length
            .unwrap_or_else(|| ((144 * self.dft_size) / 2048).max(1))
    }

    pub fn validate(&self) -> Result<(), PrachError> {
        if self.numerology > 2 {
            return Err(invalid("numerology", "only mu in 0..=2 is supported"));
        }
        if !(self.cell_bandwidth > 0.0) {
            return Err(PrachError::ZeroBandwidth);
        }
        if !self.dft_size.is_power_of_two() {
            return Err(invalid(
                "dft_size",
                format!("{} is not a power of two", self.dft_size),
            ));
        }
        if self.dft_size < self.n_prb * SUBCARRIERS_PER_PRB {
            return Err(invalid(
                "dft_size",
                format!("{} bins cannot hold {} PRBs", self.dft_size, self.n_prb),
            ));
        }
        let expected = self.dft_size as f64 * self.subcarrier_spacing_hz();
        if (self.sample_rate - expected).abs() > 1e-6 * expected {
            return Err(invalid(
                "sample_rate",
                format!(
                    "expected dft_size * SCS = {expected} Hz, got {}",
                    self.sample_rate
                ),
            ));
        }
        if self.prach_root_indices.is_empty() {
            return Err(invalid(
                "prach_root_indices",
                "at least one root is required",
            ));
        }
        if self.shift_step == 0 {
            return Err(invalid("shift_step", "must be at least 1"));
        }
        if let Some(cp) = self.cp_length {
            if cp == 0 || cp >= self.dft_size {
                return Err(invalid("cp_length", "must lie in [1, dft_size)"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrachOccasion {
    pub sfn: u32,
    pub subframe: u32,
    /// Slot index within the frame.
    pub slot: u32,
    pub start_symbol: u32,
    /// Time-domain occasion within the slot.
    pub occasion_index: u32,
    /// Frequency-domain occasion, `0..K`.
    pub freq_index: u32,
    pub first_subcarrier: usize,
    pub num_subcarriers: usize,
}

impl PrachOccasion {
    /// Start time relative to SFN 0, ignoring cyclic prefix length
    /// differences between symbols.
    pub fn start_ms(&self, cell: &CellConfig) -> f64 {
        self.sfn as f64 * FRAME_MS
            + self.slot as f64 * cell.slot_ms()
            + self.start_symbol as f64 * cell.symbol_ms()
    }
}

pub fn is_prach_frame(config: &PrachConfig, sfn: u32) -> bool {
    sfn % config.sfn_modulus == config.sfn_remainder
}

/// All occasions of frame `sfn`, ordered by time then frequency.
///
/// With `N_sf > 1` the PRACH subframes are spaced `10 / N_sf` apart starting
/// at `subframe_number`; with `N_sl > 1` consecutive slots follow
/// `slot_in_subframe`.
pub fn occasions_in_frame(config: &PrachConfig, cell: &CellConfig, sfn: u32) -> Vec<PrachOccasion> {
    if !is_prach_frame(config, sfn) {
        return Vec::new();
    }
    let slots_per_sf = cell.slots_per_subframe();
    let sf_step = SUBFRAMES_PER_FRAME / config.prach_subframes_per_frame;
    let mut out = Vec::with_capacity(
        (config.prach_subframes_per_frame
            * config.slots_per_subframe_with_prach
            * config.occasions_per_slot) as usize
            * config.freq_occasions,
    );
    for i in 0..config.prach_subframes_per_frame {
        let subframe = (config.subframe_number + i * sf_step) % SUBFRAMES_PER_FRAME;
        for j in 0..config.slots_per_subframe_with_prach {
            let slot = subframe * slots_per_sf + (config.slot_in_subframe + j) % slots_per_sf;
            for occasion_index in 0..config.occasions_per_slot {
                let start_symbol = config.start_symbol + occasion_index * config.duration_symbols;
                for f in 0..config.freq_occasions {
                    out.push(PrachOccasion {
                        sfn,
                        subframe,
                        slot,
                        start_symbol,
                        occasion_index,
                        freq_index: f as u32,
                        first_subcarrier: config.subcarrier_of(f),
                        num_subcarriers: config.preamble_length,
                    });
                }
            }
        }
    }
    out.sort_by_key(|o| (o.slot, o.start_symbol, o.freq_index));
    out
}

/// The three factors of the occupancy ratio and their product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupancyBreakdown {
    pub period_factor: f64,
    pub temporal_factor: f64,
    pub bandwidth_factor: f64,
    pub ratio: f64,
}

pub fn occupancy_breakdown(
    config: &PrachConfig,
    cell: &CellConfig,
) -> Result<OccupancyBreakdown, PrachError> {
    if !(cell.cell_bandwidth > 0.0) {
        return Err(PrachError::ZeroBandwidth);
    }
    let period_factor = FRAME_MS / config.period_ms();
    let temporal_factor = (config.prach_subframes_per_frame
        * config.slots_per_subframe_with_prach
        * config.symbols_per_slot()) as f64
        / (SUBFRAMES_PER_FRAME * cell.slots_per_subframe() * SYMBOLS_PER_SLOT) as f64;
    let bandwidth_factor =
        cell.subcarrier_spacing_hz() * config.preamble_length as f64 * config.freq_occasions as f64
            / cell.cell_bandwidth;
    Ok(OccupancyBreakdown {
        period_factor,
        temporal_factor,
        bandwidth_factor,
        ratio: period_factor * temporal_factor * bandwidth_factor,
    })
}

/// Share of all resource elements that carry PRACH.
pub fn occupancy_ratio(config: &PrachConfig, cell: &CellConfig) -> Result<f64, PrachError> {
    occupancy_breakdown(config, cell).map(|b| b.ratio)
}

/// What a PRACH-only jammer must cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceBudget {
    pub bandwidth_hz: f64,
    pub duty_period_ms: f64,
    pub active_span_per_period_ms: f64,
}

pub fn jammer_resource_budget(config: &PrachConfig, cell: &CellConfig) -> ResourceBudget {
    let active_symbols = config.prach_subframes_per_frame
        * config.slots_per_subframe_with_prach
        * config.symbols_per_slot();
    ResourceBudget {
        bandwidth_hz: config.preamble_length as f64
            * config.freq_occasions as f64
            * cell.subcarrier_spacing_hz(),
        duty_period_ms: config.period_ms(),
        active_span_per_period_ms: active_symbols as f64 * cell.symbol_ms(),
    }
}
