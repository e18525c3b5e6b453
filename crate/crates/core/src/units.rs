//! Engineering-suffix quantities for config files.
//!
//! Values may be written as plain numbers or as strings with an SI suffix:
//! `1.2G`, `300m`, `4 n`. Suffixes are case-sensitive (`m` is milli, `M` is mega).

use serde::{Deserialize, Deserializer};

const SUFFIXES: [(&str, f64); 10] = [
    ("T", 1e12),
    ("G", 1e9),
    ("M", 1e6),
    ("k", 1e3),
    ("m", 1e-3),
    ("u", 1e-6),
    ("µ", 1e-6),
    ("n", 1e-9),
    ("p", 1e-12),
    ("f", 1e-15),
];

/// Parse a number with an optional SI suffix.
pub fn parse_quantity(text: &str) -> Result<f64, String> {
    let t = text.trim();
    if t.is_empty() {
        return Err("empty quantity".into());
    }
    for (suffix, scale) in SUFFIXES {
        if let Some(num) = t.strip_suffix(suffix) {
            let num = num.trim_end();
            // A bare suffix or an exponent like "1e" must not slip through.
            return num
                .parse::<f64>()
                .map(|v| v * scale)
                .map_err(|_| format!("cannot parse `{text}` as a quantity"));
        }
    }
    t.parse::<f64>()
        .map_err(|_| format!("cannot parse `{text}` as a quantity"))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Raw {
    Num(f64),
    Text(String),
}

fn finite(v: f64) -> Result<f64, String> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("quantity {v} is not finite"))
    }
}

pub fn de_f64<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let v = match Raw::deserialize(d)? {
        Raw::Num(v) => v,
        Raw::Text(s) => parse_quantity(&s).map_err(serde::de::Error::custom)?,
    };
    finite(v).map_err(serde::de::Error::custom)
}

pub fn de_opt_f64<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    de_f64(d).map(Some)
}

/// Integer counts may also carry suffixes (`16k`), but must come out whole.
pub fn de_u64<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    let v = de_f64(d)?;
    to_count(v).map_err(serde::de::Error::custom)
}

pub fn de_opt_u64<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
    de_u64(d).map(Some)
}

fn to_count(v: f64) -> Result<u64, String> {
    if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(format!("{v} is not a non-negative integer"));
    }
    Ok(v as u64)
}

/// Binary-suffix counts used in model specs: `16K` = 16384.
pub fn parse_count(text: &str) -> Result<u64, String> {
    let t = text.trim();
    let (num, scale) = if let Some(n) = t.strip_suffix('K') {
        (n, 1u64 << 10)
    } else if let Some(n) = t.strip_suffix('M') {
        (n, 1 << 20)
    } else if let Some(n) = t.strip_suffix('G') {
        (n, 1 << 30)
    } else {
        (t, 1)
    };
    let base: u64 = num
        .trim_end()
        .parse()
        .map_err(|_| format!("cannot parse `{text}` as a count"))?;
    base.checked_mul(scale)
        .ok_or_else(|| format!("count `{text}` overflows"))
}

/// Model dimensions accept plain integers or binary-suffix strings (`16K`).
pub fn de_dim<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum RawDim {
        Int(u64),
        Text(String),
    }
    match RawDim::deserialize(d)? {
        RawDim::Int(v) => Ok(v),
        RawDim::Text(s) => parse_count(&s).map_err(serde::de::Error::custom),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes_are_case_sensitive() {
        assert_eq!(parse_quantity("1.2G").unwrap(), 1.2e9);
        assert_eq!(parse_quantity("300m").unwrap(), 0.3);
        assert_eq!(parse_quantity("2M").unwrap(), 2e6);
        assert_eq!(parse_quantity("4 n").unwrap(), 4e-9);
        assert_eq!(parse_quantity("1e-3").unwrap(), 1e-3);
        assert!(parse_quantity("G").is_err());
        assert!(parse_quantity("3g").is_err());
    }

    #[test]
    fn binary_counts() {
        assert_eq!(parse_count("16K").unwrap(), 16384);
        assert_eq!(parse_count("800K").unwrap(), 819200);
        assert_eq!(parse_count("20").unwrap(), 20);
        assert!(parse_count("1.5K").is_err());
    }
}
