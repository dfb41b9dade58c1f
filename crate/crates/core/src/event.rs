//! Event and event-stream value types.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Timestamps are integer microseconds everywhere in the crate.
pub type Micros = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EventError {
    #[error("event {index} at ({x}, {y}) lies outside the {width}x{height} sensor")]
    OutOfBounds {
        index: usize,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },
    #[error("event {index} has timestamp {t} earlier than its predecessor {prev}")]
    Unsorted { index: usize, t: Micros, prev: Micros },
    #[error("polarity must be +1 or -1, got {0}")]
    BadPolarity(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }

    pub fn from_sign(p: i64) -> Result<Self, EventError> {
        match p {
            1 => Ok(Polarity::Positive),
            -1 => Ok(Polarity::Negative),
            other => Err(EventError::BadPolarity(other)),
        }
    }

    pub fn is_positive(self) -> bool {
        self == Polarity::Positive
    }
}

/// One polarity change at pixel `(x, y)` and time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: Micros,
    pub p: Polarity,
}

impl Event {
    pub fn new(x: u16, y: u16, t: Micros, p: Polarity) -> Self {
        Self { x, y, t, p }
    }
}

/// Time-sorted, in-bounds sequence of events from a `width x height` sensor.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventStream {
    width: u16,
    height: u16,
    events: Vec<Event>,
}

impl EventStream {
    /// Validates ordering and bounds.
    pub fn new(width: u16, height: u16, events: Vec<Event>) -> Result<Self, EventError> {
        let mut prev = 0;
        for (index, e) in events.iter().enumerate() {
            if e.x >= width || e.y >= height {
                return Err(EventError::OutOfBounds {
                    index,
                    x: e.x,
                    y: e.y,
                    width,
                    height,
                });
            }
            if e.t < prev {
                return Err(EventError::Unsorted {
                    index,
                    t: e.t,
                    prev,
                });
            }
            prev = e.t;
        }
        Ok(Self {
            width,
            height,
            events,
        })
    }

    /// Sorts by time (stable, so equal timestamps keep their order) and then
    /// validates bounds.
    pub fn from_unsorted(
        width: u16,
        height: u16,
        mut events: Vec<Event>,
    ) -> Result<Self, EventError> {
        events.sort_by_key(|e| e.t);
        Self::new(width, height, events)
    }

    pub fn empty(width: u16, height: u16) -> Self {
        Self {
            width,
            height,
            events: Vec::new(),
        }
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events with `t_begin <= t <= t_end`, found by binary search.
    pub fn window(&self, t_begin: Micros, t_end: Micros) -> &[Event] {
        let lo = self.events.partition_point(|e| e.t < t_begin);
        let hi = self.events.partition_point(|e| e.t <= t_end);
        &self.events[lo..hi.max(lo)]
    }

    /// Merges two streams of the same sensor, keeping time order. Ties put
    /// `self`'s events first.
    pub fn merge(self, other: EventStream) -> EventStream {
        debug_assert_eq!((self.width, self.height), (other.width, other.height));
        let mut out = Vec::with_capacity(self.events.len() + other.events.len());
        let (mut a, mut b) = (self.events.into_iter().peekable(), other.events.into_iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(ea), Some(eb)) => {
                    if eb.t < ea.t {
                        out.push(b.next().unwrap());
                    } else {
                        out.push(a.next().unwrap());
                    }
                }
                (Some(_), None) => out.extend(a.by_ref()),
                (None, Some(_)) => out.extend(b.by_ref()),
                (None, None) => break,
            }
        }
        EventStream {
            width: self.width,
            height: self.height,
            events: out,
        }
    }

    pub fn positive_count(&self) -> usize {
        self.events.iter().filter(|e| e.p.is_positive()).count()
    }
}
