//! Parsers for the comma-separated command-line values.

use crate::error::{Error, Result};

/// `"60,120"` into frequencies; every entry must be a finite positive number.
pub fn parse_freq_list(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|part| {
            let part = part.trim();
            let v: f64 = part
                .parse()
                .map_err(|_| Error::Config(format!("{part:?} is not a number")))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("frequency {part} must be finite and positive")));
            }
            Ok(v)
        })
        .collect()
}

/// `"lo,hi"` with `0 < lo < hi`.
pub fn parse_band(s: &str) -> Result<[f64; 2]> {
    match parse_freq_list(s)?.as_slice() {
        &[lo, hi] if lo < hi => Ok([lo, hi]),
        &[lo, hi] => Err(Error::Config(format!("band {lo},{hi}: low edge must be below high edge"))),
        other => Err(Error::Config(format!("band needs exactly two edges, got {}", other.len()))),
    }
}

/// `"0,1,2"` into seeds.
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{:?} is not a seed", p.trim())))
        })
        .collect()
}
