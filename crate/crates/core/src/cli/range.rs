//! `start:stop:step` parameter ranges.

use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl ParamRange {
    /// Values from `start` up to and including `stop` (within a small
    /// fraction of `step`).
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl FromStr for ParamRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::param("range", format!("expected start:stop:step, got `{s}`"));
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad());
        let range = match parts.as_slice() {
            [single] => {
                let v = num(single)?;
                Self {
                    start: v,
                    stop: v,
                    step: 1.0,
                }
            }
            [a, b, c] => Self {
                start: num(a)?,
                stop: num(b)?,
                step: num(c)?,
            },
            _ => return Err(bad()),
        };
        if ![range.start, range.stop, range.step].iter().all(|v| v.is_finite()) {
            return Err(bad());
        }
        if !(range.step > 0.0) {
            return Err(Error::param("range", "step must be positive"));
        }
        if range.stop < range.start {
            return Err(Error::param("range", "stop must not precede start"));
        }
        Ok(range)
    }
}
