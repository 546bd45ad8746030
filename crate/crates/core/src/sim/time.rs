use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

/// Simulation time in integer microseconds. Integer time keeps event
/// ordering exact over long runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_secs(s: f64) -> Self {
        SimTime((s * 1e6).round() as u64)
    }

    pub fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn micros(self) -> u64 {
        self.0
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

impl FromStr for SimTime {
    type Err = String;

    /// Parses the `secs.micros` form written by `Display`. Plain decimal
    /// seconds with fewer fractional digits are accepted too.
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("bad time `{s}`");
        let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 6 || whole.is_empty() {
            return Err(bad());
        }
        let secs: u64 = whole.parse().map_err(|_| bad())?;
        let mut micros = 0u64;
        for (i, c) in frac.chars().enumerate() {
            let d = c.to_digit(10).ok_or_else(bad)? as u64;
            micros += d * 10u64.pow(5 - i as u32);
        }
        Ok(SimTime(secs * 1_000_000 + micros))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_parse_round_trip() {
        for us in [0u64, 1, 999_999, 1_000_000, 12_345_678_901] {
            let t = SimTime(us);
            assert_eq!(t.to_string().parse::<SimTime>().unwrap(), t);
        }
        assert_eq!("2.5".parse::<SimTime>().unwrap(), SimTime::from_millis(2500));
        assert!("x.1".parse::<SimTime>().is_err());
        assert!("1.1234567".parse::<SimTime>().is_err());
    }

    #[test]
    fn subtraction_saturates() {
        assert_eq!(SimTime(3) - SimTime(5), SimTime::ZERO);
    }
}
