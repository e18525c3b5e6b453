//! Parallelism strategy strings: `RC-<kp1>-<kp2>-d<dp>-p<lp>` and `CR-<kp1>-d<dp>-p<lp>`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    /// Inner-product sharding: rows of A by kp1, columns of B by kp2.
    RC,
    /// Outer-product sharding along the reduction dimension.
    CR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParallelismStrategy {
    pub kind: KernelKind,
    pub kp1: u64,
    /// Always 1 for CR.
    pub kp2: u64,
    pub dp: u64,
    pub lp: u64,
}

impl ParallelismStrategy {
    pub fn rc(kp1: u64, kp2: u64, dp: u64, lp: u64) -> Self {
        Self { kind: KernelKind::RC, kp1, kp2, dp, lp }
    }

    pub fn cr(kp1: u64, dp: u64, lp: u64) -> Self {
        Self { kind: KernelKind::CR, kp1, kp2: 1, dp, lp }
    }

    pub fn identity() -> Self {
        Self::rc(1, 1, 1, 1)
    }

    pub fn total_devices(&self) -> u64 {
        self.kp1 * self.kp2 * self.dp * self.lp
    }

    pub fn kernel_ways(&self) -> u64 {
        self.kp1 * self.kp2
    }
}

impl fmt::Display for ParallelismStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            KernelKind::RC => write!(f, "RC-{}-{}-d{}-p{}", self.kp1, self.kp2, self.dp, self.lp),
            KernelKind::CR => write!(f, "CR-{}-d{}-p{}", self.kp1, self.dp, self.lp),
        }
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl Cursor<'_> {
    fn err(&self, reason: impl Into<String>) -> ConfigError {
        ConfigError::Strategy {
            input: self.src.to_string(),
            position: self.pos,
            reason: reason.into(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ConfigError> {
        if self.src[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn count(&mut self) -> Result<u64, ConfigError> {
        let rest = &self.src[self.pos..];
        let len = rest.bytes().take_while(u8::is_ascii_digit).count();
        if len == 0 {
            return Err(self.err("expected a positive integer"));
        }
        let v: u64 = rest[..len]
            .parse()
            .map_err(|_| self.err("integer out of range"))?;
        if v == 0 {
            return Err(self.err("factor must be at least 1"));
        }
        self.pos += len;
        Ok(v)
    }
}

/// Parse a strategy string. The `RC`/`CR` token is case-insensitive; `d`/`p` are not.
pub fn parse_strategy(s: &str) -> Result<ParallelismStrategy, ConfigError> {
    let mut c = Cursor { src: s, pos: 0 };
    let kind = match s.get(..2).map(str::to_ascii_uppercase).as_deref() {
        Some("RC") => KernelKind::RC,
        Some("CR") => KernelKind::CR,
        _ => return Err(c.err("expected `RC` or `CR`")),
    };
    c.pos = 2;
    c.expect('-')?;
    let kp1 = c.count()?;
    c.expect('-')?;
    let kp2 = if kind == KernelKind::RC {
        if c.peek() == Some('d') {
            return Err(c.err("RC requires two kernel factors"));
        }
        let v = c.count()?;
        c.expect('-')?;
        v
    } else {
        1
    };
    c.expect('d')?;
    let dp = c.count()?;
    c.expect('-')?;
    c.expect('p')?;
    let lp = c.count()?;
    if c.pos != s.len() {
        return Err(c.err("trailing characters"));
    }
    Ok(ParallelismStrategy { kind, kp1, kp2, dp, lp })
}

impl FromStr for ParallelismStrategy {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        parse_strategy(s)
    }
}

impl Serialize for ParallelismStrategy {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ParallelismStrategy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_strategy(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn figure_strategy() {
        let s = parse_strategy("RC-4-2-d3-p2").unwrap();
        assert_eq!(s, ParallelismStrategy::rc(4, 2, 3, 2));
        assert_eq!(s.total_devices(), 48);
    }

    #[test]
    fn cr_strategy() {
        let s = parse_strategy("CR-8-d8-p1").unwrap();
        assert_eq!(s, ParallelismStrategy::cr(8, 8, 1));
        assert_eq!(s.total_devices(), 64);
    }

    #[test]
    fn rc_needs_two_factors() {
        match parse_strategy("RC-4-d3-p2") {
            Err(ConfigError::Strategy { position, .. }) => assert_eq!(position, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn case_rules() {
        assert!(parse_strategy("rc-2-2-d1-p1").is_ok());
        assert!(parse_strategy("Cr-2-d1-p1").is_ok());
        assert!(parse_strategy("RC-2-2-D1-p1").is_err());
        assert!(parse_strategy("RC-2-2-d1-P1").is_err());
    }

    #[test]
    fn malformed() {
        for s in ["", "RC", "RC-0-1-d1-p1", "RC-1-1-d1-p1x", "XY-1-d1-p1", "CR-2-2-d1-p1"] {
            assert!(parse_strategy(s).is_err(), "{s}");
        }
    }

    proptest! {
        #[test]
        fn display_round_trips(rc in any::<bool>(), a in 1u64..100, b in 1u64..100, d in 1u64..100, p in 1u64..100) {
            let s = if rc { ParallelismStrategy::rc(a, b, d, p) } else { ParallelismStrategy::cr(a, d, p) };
            prop_assert_eq!(parse_strategy(&s.to_string()).unwrap(), s);
        }
    }
}
