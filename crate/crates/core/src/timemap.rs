//! Per-pixel time map used to debounce LED rising edges.

use thiserror::Error;

use crate::event::Micros;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TimeMapError {
    #[error("pixel ({x}, {y}) outside the {width}x{height} time map")]
    OutOfBounds { x: u16, y: u16, width: u16, height: u16 },
}

/// Last accepted timestamp per pixel. Untouched pixels hold `None`, so an
/// event at `t = 0` is representable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeMap {
    width: u16,
    height: u16,
    last: Vec<Option<Micros>>,
}

impl TimeMap {
    pub fn new(width: u16, height: u16) -> Self {
        Self {
            width,
            height,
            last: vec![None; usize::from(width) * usize::from(height)],
        }
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    fn index(&self, x: u16, y: u16) -> Result<usize, TimeMapError> {
        if x >= self.width || y >= self.height {
            return Err(TimeMapError::OutOfBounds {
                x,
                y,
                width: self.width,
                height: self.height,
            });
        }
        Ok(usize::from(y) * usize::from(self.width) + usize::from(x))
    }

    pub fn get(&self, x: u16, y: u16) -> Result<Option<Micros>, TimeMapError> {
        Ok(self.last[self.index(x, y)?])
    }

    /// Offers a rising edge at `t`. The first event at a pixel is always
    /// accepted; afterwards `t` is accepted iff `t > last + base_period - tau`.
    /// Accepted timestamps replace the stored one.
    ///
    /// Callers guarantee `base_period > tau`, so the threshold never falls
    /// below `last`.
    pub fn update(
        &mut self,
        x: u16,
        y: u16,
        t: Micros,
        base_period: Micros,
        tau: Micros,
    ) -> Result<bool, TimeMapError> {
        debug_assert!(base_period > tau);
        let i = self.index(x, y)?;
        let accept = match self.last[i] {
            None => true,
            Some(last) => t > last + (base_period - tau),
        };
        if accept {
            self.last[i] = Some(t);
        }
        Ok(accept)
    }

    pub fn clear(&mut self) {
        self.last.fill(None);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accepts_after_debounce_window() {
        let mut m = TimeMap::new(2, 2);
        m.update(1, 1, 1000, 200, 50).unwrap();
        assert!(m.update(1, 1, 1160, 200, 50).unwrap());
        assert_eq!(m.get(1, 1).unwrap(), Some(1160));
    }

    #[test]
    fn rejects_inside_debounce_window() {
        let mut m = TimeMap::new(2, 2);
        m.update(0, 0, 1000, 200, 50).unwrap();
        assert!(!m.update(0, 0, 1140, 200, 50).unwrap());
        assert!(!m.update(0, 0, 1150, 200, 50).unwrap());
        assert_eq!(m.get(0, 0).unwrap(), Some(1000));
    }

    #[test]
    fn first_event_always_accepted() {
        let mut m = TimeMap::new(1, 1);
        assert_eq!(m.get(0, 0).unwrap(), None);
        assert!(m.update(0, 0, 37, 200, 50).unwrap());
        assert_eq!(m.get(0, 0).unwrap(), Some(37));
        let mut z = TimeMap::new(1, 1);
        assert!(z.update(0, 0, 0, 200, 50).unwrap());
        assert_eq!(z.get(0, 0).unwrap(), Some(0));
    }

    #[test]
    fn out_of_bounds_is_an_error() {
        let mut m = TimeMap::new(3, 2);
        assert!(matches!(
            m.update(3, 0, 1, 200, 50),
            Err(TimeMapError::OutOfBounds { .. })
        ));
        assert!(m.update(0, 2, 1, 200, 50).is_err());
    }

    proptest! {
        #[test]
        fn stored_timestamps_never_decrease(
            evs in proptest::collection::vec((0u16..3, 0u16..3, 0u64..5000), 1..200),
            tau in 0u64..199,
        ) {
            let mut m = TimeMap::new(3, 3);
            let mut evs = evs;
            evs.sort_by_key(|e| e.2);
            let mut accepted: Vec<Vec<u64>> = vec![Vec::new(); 9];
            for (x, y, t) in evs {
                let before = m.get(x, y).unwrap();
                if m.update(x, y, t, 200, tau).unwrap() {
                    accepted[usize::from(y) * 3 + usize::from(x)].push(t);
                }
                let after = m.get(x, y).unwrap();
                prop_assert!(after >= before);
            }
            for list in accepted {
                for w in list.windows(2) {
                    prop_assert!(w[1] - w[0] >= 200 - tau);
                }
            }
        }
    }
}
