//! Interval-based LED modulation: encoder, waveform generator and decoder.
//!
//! Every symbol is an ON pulse followed by one base period `T_b` of OFF:
//!
//! | symbol | ON      | rising-edge interval |
//! |--------|---------|----------------------|
//! | bit 0  | `T_b`   | `2 T_b`              |
//! | bit 1  | `2 T_b` | `3 T_b`              |
//! | start  | `3 T_b` | `4 T_b`              |
//!
//! A frame is one start symbol followed by `bit_width` bits, most significant
//! bit first. There is no parity or error correction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::Micros;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("invalid protocol config: {0}")]
    InvalidConfig(String),
    #[error("id {id} does not fit in {bit_width} bits")]
    IdOutOfRange { id: u64, bit_width: u32 },
    #[error("malformed symbol sequence: {0}")]
    MalformedSequence(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    /// Fundamental blink frequency in Hz.
    pub f_b_hz: f64,
    pub bit_width: u32,
    /// Time-map debounce tolerance (µs).
    pub tau_us: Micros,
    /// Half-width of the interval classification window (µs).
    pub class_tol_us: Micros,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            f_b_hz: 5000.0,
            bit_width: 8,
            tau_us: 50,
            class_tol_us: 60,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |m: String| Err(ProtocolError::InvalidConfig(m));
        if !(self.f_b_hz.is_finite() && self.f_b_hz > 0.0) {
            return bad(format!("f_b must be positive, got {}", self.f_b_hz));
        }
        let tb = self.base_period_us();
        if tb == 0 {
            return bad(format!("f_b = {} Hz gives a sub-microsecond period", self.f_b_hz));
        }
        if self.tau_us >= tb {
            return bad(format!("tau ({}) must be below T_b ({tb})", self.tau_us));
        }
        if self.class_tol_us == 0 || 2 * self.class_tol_us > tb {
            return bad(format!(
                "class_tol ({}) must lie in (0, T_b/2 = {}]",
                self.class_tol_us,
                tb / 2
            ));
        }
        if !(1..=32).contains(&self.bit_width) {
            return bad(format!("bit_width must be in 1..=32, got {}", self.bit_width));
        }
        Ok(())
    }

    /// `T_b = 1 / f_b`, rounded to whole microseconds.
    pub fn base_period_us(&self) -> Micros {
        (1e6 / self.f_b_hz).round() as Micros
    }

    pub fn max_id(&self) -> u64 {
        (1u64 << self.bit_width) - 1
    }

    /// Longest possible frame (start plus all-ones payload), in µs.
    pub fn max_frame_period_us(&self) -> Micros {
        self.base_period_us() * (4 + 3 * Micros::from(self.bit_width))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    Start,
    Zero,
    One,
}

impl Symbol {
    /// ON duration in base periods.
    pub fn on_periods(self) -> u64 {
        match self {
            Symbol::Zero => 1,
            Symbol::One => 2,
            Symbol::Start => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSequence {
    symbols: Vec<Symbol>,
}

impl SymbolSequence {
    /// Checks one leading start followed by exactly `bit_width` bits.
    pub fn new(symbols: Vec<Symbol>, bit_width: u32) -> Result<Self, ProtocolError> {
        match symbols.split_first() {
            Some((Symbol::Start, bits)) => {
                if bits.iter().any(|s| *s == Symbol::Start) {
                    return Err(ProtocolError::MalformedSequence("start inside payload".into()));
                }
                if bits.len() != bit_width as usize {
                    return Err(ProtocolError::MalformedSequence(format!(
                        "expected {bit_width} bits, got {}",
                        bits.len()
                    )));
                }
                Ok(Self { symbols })
            }
            _ => Err(ProtocolError::MalformedSequence("must begin with start".into())),
        }
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LedState {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub t: Micros,
    pub state: LedState,
}

/// ON/OFF transitions of one pattern, relative to the pattern start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlinkWaveform {
    pub transitions: Vec<Transition>,
    pub period: Micros,
}

impl BlinkWaveform {
    /// Rising-edge times of `repetitions` back-to-back patterns, plus the
    /// rising edge that opens the next repetition. The pattern repeats
    /// indefinitely, and the last bit of a frame is only measurable once the
    /// following start edge arrives.
    pub fn rising_edges(&self, repetitions: u64) -> Vec<Micros> {
        let mut out = Vec::new();
        for r in 0..repetitions {
            let base = r * self.period;
            out.extend(
                self.transitions
                    .iter()
                    .filter(|tr| tr.state == LedState::On)
                    .map(|tr| base + tr.t),
            );
        }
        out.push(repetitions * self.period);
        out
    }

    pub fn on_count(&self) -> usize {
        self.transitions.iter().filter(|t| t.state == LedState::On).count()
    }
}

/// Decoded frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecodedId {
    pub id: u64,
    /// Rising edge of the start symbol.
    pub t_start: Micros,
    /// Rising edge of the last payload bit.
    pub t_end: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalClass {
    Zero,
    One,
    Start,
    Invalid,
}

/// Counters for frames rejected by [`decode_intervals_with_stats`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeStats {
    pub decoded: usize,
    pub invalid_intervals: usize,
    /// Frames that had started but were broken by an invalid interval.
    pub aborted_invalid: usize,
    /// Frames interrupted by a premature start.
    pub aborted_restart: usize,
}

pub fn encode_id(id: u64, cfg: &ProtocolConfig) -> Result<SymbolSequence, ProtocolError> {
    if id > cfg.max_id() {
        return Err(ProtocolError::IdOutOfRange {
            id,
            bit_width: cfg.bit_width,
        });
    }
    let mut symbols = Vec::with_capacity(cfg.bit_width as usize + 1);
    symbols.push(Symbol::Start);
    for bit in (0..cfg.bit_width).rev() {
        symbols.push(if (id >> bit) & 1 == 1 {
            Symbol::One
        } else {
            Symbol::Zero
        });
    }
    Ok(SymbolSequence { symbols })
}

pub fn symbols_to_waveform(seq: &SymbolSequence, cfg: &ProtocolConfig) -> BlinkWaveform {
    let tb = cfg.base_period_us();
    let mut t = 0;
    let mut transitions = Vec::with_capacity(2 * seq.symbols.len());
    for s in &seq.symbols {
        transitions.push(Transition {
            t,
            state: LedState::On,
        });
        t += s.on_periods() * tb;
        transitions.push(Transition {
            t,
            state: LedState::Off,
        });
        t += tb;
    }
    BlinkWaveform {
        transitions,
        period: t,
    }
}

/// Maps a rising-edge interval to the nearest of `{2, 3, 4} T_b`. Exact
/// midpoints go to the shorter symbol.
pub fn classify_interval(dt: Micros, cfg: &ProtocolConfig) -> IntervalClass {
    let tb = cfg.base_period_us();
    let classes = [
        (2 * tb, IntervalClass::Zero),
        (3 * tb, IntervalClass::One),
        (4 * tb, IntervalClass::Start),
    ];
    // strict `<` keeps the first (shorter) class on ties
    let mut best = classes[0];
    for c in &classes[1..] {
        if c.0.abs_diff(dt) < best.0.abs_diff(dt) {
            best = *c;
        }
    }
    if best.0.abs_diff(dt) > cfg.class_tol_us {
        IntervalClass::Invalid
    } else {
        best.1
    }
}

pub fn decode_intervals(rising_edges: &[Micros], cfg: &ProtocolConfig) -> Vec<DecodedId> {
    decode_intervals_with_stats(rising_edges, cfg).0
}

/// Scans consecutive rising-edge intervals for start-plus-payload frames.
///
/// The interval beginning at an edge classifies the symbol of that edge. An
/// invalid interval drops the current frame; a start inside a frame drops it
/// and opens a new one.
pub fn decode_intervals_with_stats(
    rising_edges: &[Micros],
    cfg: &ProtocolConfig,
) -> (Vec<DecodedId>, DecodeStats) {
    let mut out = Vec::new();
    let mut stats = DecodeStats::default();
    // (start edge, value so far, bits so far)
    let mut frame: Option<(Micros, u64, u32)> = None;
    for w in rising_edges.windows(2) {
        let (edge, next) = (w[0], w[1]);
        let class = if next > edge {
            classify_interval(next - edge, cfg)
        } else {
            IntervalClass::Invalid
        };
        frame = match (class, frame) {
            (IntervalClass::Invalid, f) => {
                stats.invalid_intervals += 1;
                if f.is_some() {
                    stats.aborted_invalid += 1;
                }
                None
            }
            (IntervalClass::Start, f) => {
                if f.is_some() {
                    stats.aborted_restart += 1;
                }
                Some((edge, 0, 0))
            }
            (_, None) => None,
            (bit, Some((start, value, n))) => {
                let value = (value << 1) | u64::from(bit == IntervalClass::One);
                if n + 1 == cfg.bit_width {
                    out.push(DecodedId {
                        id: value,
                        t_start: start,
                        t_end: edge,
                    });
                    stats.decoded += 1;
                    None
                } else {
                    Some((start, value, n + 1))
                }
            }
        };
    }
    (out, stats)
}
