//! Measure files: a versioned columnar text format with hexadecimal floats.
//!
//! ```text
//! supmeas-measure 1
//! space sigma
//! n 2
//! count 2
//! replicates 8
//! 0x0p+0 0x1p+0 0x0p+0 0x1p+0 0x1p-2 0
//! ...
//! ```
//!
//! Each row is the atom's coordinates, then its weight, then (when
//! `replicates` is present) its replicate label. Lines starting with `#` are
//! comments.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::discrete::{DiscreteMeasure, SpaceTag};

const MAGIC: &str = "supmeas-measure";
const VERSION: u32 = 1;

/// C99 `%a` rendering of `x`; parses back bit-exactly.
pub fn hex_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let mut mant = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_bits == 0 { (0, -1022) } else { (1, exp_bits - 1023) };
    let mut digits = 13;
    while digits > 0 && mant & 0xf == 0 {
        mant >>= 4;
        digits -= 1;
    }
    let frac = if digits == 0 {
        String::new()
    } else {
        format!(".{mant:0digits$x}")
    };
    format!("{sign}0x{lead}{frac}p{exp:+}")
}

/// Parses a C99 hexadecimal float, or a decimal float as a fallback.
pub fn parse_hex_float(s: &str) -> Option<f64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) else {
        return s.parse().ok();
    };
    let (mant, exp) = hex.split_once(['p', 'P'])?;
    let exp: i64 = exp.parse().ok()?;
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    // accumulate up to 64 significant bits, track the binary exponent
    let mut m: u64 = 0;
    let mut e2 = exp;
    let mut sticky = false;
    let mut push = |d: u32, frac_digit: bool, m: &mut u64, e2: &mut i64| {
        if *m >> 60 == 0 {
            *m = (*m << 4) | d as u64;
            if frac_digit {
                *e2 -= 4;
            }
        } else {
            sticky |= d != 0;
            if !frac_digit {
                *e2 += 4;
            }
        }
    };
    for c in int.chars() {
        push(c.to_digit(16)?, false, &mut m, &mut e2);
    }
    for c in frac.chars() {
        push(c.to_digit(16)?, true, &mut m, &mut e2);
    }
    let v = compose(m, e2, sticky);
    Some(if neg { -v } else { v })
}

/// `m · 2^e2` correctly rounded to f64 (ties to even).
fn compose(m: u64, e2: i64, sticky: bool) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let lz = m.leading_zeros() as i64;
    let top = 63 - lz + e2; // exponent of the leading bit
    // number of low bits to drop so the result has 53 bits, or fewer for
    // subnormals
    let keep = if top >= -1022 { 53 } else { 53 - (-1022 - top) };
    if keep <= 0 {
        // below half the smallest subnormal, or exactly at it
        let half = keep == 0 && (m << lz) == 1 << 63 && !sticky;
        return if keep == 0 && !half { f64::from_bits(1) } else { 0.0 };
    }
    let width = 64 - lz;
    let drop = width - keep;
    let mut q;
    if drop > 0 {
        q = m >> drop;
        let rem = m & ((1u64 << drop) - 1);
        let halfway = 1u64 << (drop - 1);
        if rem > halfway || (rem == halfway && (sticky || q & 1 == 1)) {
            q += 1;
        }
    } else {
        q = m << (-drop);
    }
    // q < 2^54 and q · 2^(e2 + drop) is representable, so both
    // multiplications below are exact
    let scale = e2 + drop;
    let split = scale.clamp(-600, 600);
    q as f64 * 2f64.powi((scale - split) as i32) * 2f64.powi(split as i32)
}

pub fn write_measure(m: &DiscreteMeasure) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC} {VERSION}").unwrap();
    writeln!(out, "space {}", m.tag().name()).unwrap();
    writeln!(out, "n {}", m.dim()).unwrap();
    writeln!(out, "count {}", m.len()).unwrap();
    let labels = m.labels();
    if labels.is_some() {
        writeln!(out, "replicates {}", m.replicates()).unwrap();
    }
    for k in 0..m.len() {
        for c in m.point(k) {
            out.push_str(&hex_float(*c));
            out.push(' ');
        }
        out.push_str(&hex_float(m.weight(k)));
        if let Some(l) = labels {
            write!(out, " {}", l[k]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_measure(text: &str) -> Result<DiscreteMeasure> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let err = |line: usize, msg: String| Error::Parse { line, msg };
    let mut header = |key: &str| -> Result<(usize, String)> {
        let (no, l) = lines
            .next()
            .ok_or_else(|| err(0, format!("missing `{key}`")))?;
        let (k, v) = l.split_once(' ').unwrap_or((l, ""));
        if k != key {
            return Err(err(no, format!("expected `{key}`, found `{k}`")));
        }
        Ok((no, v.trim().to_string()))
    };
    let (no, v) = header(MAGIC)?;
    if v != VERSION.to_string() {
        return Err(err(no, format!("unsupported version {v}")));
    }
    let (no, v) = header("space")?;
    let tag = SpaceTag::from_name(&v).ok_or_else(|| err(no, format!("unknown space `{v}`")))?;
    let (no, v) = header("n")?;
    let n: usize = v.parse().map_err(|_| err(no, format!("bad dimension `{v}`")))?;
    let (no, v) = header("count")?;
    let count: usize = v.parse().map_err(|_| err(no, format!("bad count `{v}`")))?;
    let stride = tag.stride(n);
    let mut coords = Vec::with_capacity(count * stride);
    let mut weights = Vec::with_capacity(count);
    let mut labels: Option<Vec<u16>> = None;
    let mut replicates = 0;
    let mut rows = 0;
    for (no, l) in lines {
        if rows == 0 && labels.is_none() {
            if let Some(v) = l.strip_prefix("replicates ") {
                replicates = v
                    .trim()
                    .parse()
                    .map_err(|_| err(no, format!("bad replicate count `{v}`")))?;
                labels = Some(Vec::with_capacity(count));
                continue;
            }
        }
        let fields: Vec<&str> = l.split_whitespace().collect();
        let want = stride + 1 + usize::from(labels.is_some());
        if fields.len() != want {
            return Err(err(no, format!("expected {want} fields, found {}", fields.len())));
        }
        for f in &fields[..=stride] {
            let x = parse_hex_float(f).ok_or_else(|| err(no, format!("bad number `{f}`")))?;
            coords.push(x);
        }
        weights.push(coords.pop().expect("weight"));
        if let Some(ls) = labels.as_mut() {
            let f = fields[stride + 1];
            ls.push(f.parse().map_err(|_| err(no, format!("bad label `{f}`")))?);
        }
        rows += 1;
    }
    if rows != count {
        return Err(err(0, format!("header says {count} atoms, found {rows}")));
    }
    let m = DiscreteMeasure::new(tag, n, coords, weights)?;
    match labels {
        Some(l) => m.with_replicates(Arc::new(l), replicates),
        None => Ok(m),
    }
}

pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    parse_measure(&std::fs::read_to_string(path)?)
}

pub fn save_measure(m: &DiscreteMeasure, path: &Path) -> Result<()> {
    std::fs::write(path, write_measure(m))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hex_examples() {
        assert_eq!(hex_float(1.0), "0x1p+0");
        assert_eq!(hex_float(-0.5), "-0x1p-1");
        assert_eq!(hex_float(0.0), "0x0p+0");
        assert_eq!(hex_float(-0.0), "-0x0p+0");
        assert_eq!(hex_float(3.0), "0x1.8p+1");
        assert_eq!(hex_float(f64::from_bits(1)), "0x0.0000000000001p-1022");
        assert_eq!(parse_hex_float("0x1.8p+1"), Some(3.0));
        assert_eq!(parse_hex_float("0X10p-4"), Some(1.0));
        assert_eq!(parse_hex_float("0.25"), Some(0.25));
        assert_eq!(parse_hex_float("0xp1"), None);
        assert_eq!(parse_hex_float("0x1.g"), None);
    }

    #[test]
    fn long_mantissas_round_to_nearest_even() {
        // 1 + 2^-53 is a tie: rounds to 1
        assert_eq!(parse_hex_float("0x1.00000000000008p+0"), Some(1.0));
        // just above the tie
        assert_eq!(
            parse_hex_float("0x1.000000000000081p+0"),
            Some(1.0 + f64::EPSILON)
        );
        assert_eq!(parse_hex_float("0x1p-1075"), Some(0.0));
        assert_eq!(parse_hex_float("0x1.1p-1075"), Some(f64::from_bits(1)));
        assert_eq!(parse_hex_float("0x1p+1023"), Some(2f64.powi(1023)));
    }

    proptest! {
        #[test]
        fn hex_round_trip(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            prop_assert_eq!(parse_hex_float(&hex_float(x)).unwrap().to_bits(), bits);
        }
    }

    #[test]
    fn measure_round_trip_is_bit_exact() {
        let coords = vec![0.1, -0.0, 1.0 / 3.0, 1.0, 5e-310, 0.7, 0.6, 0.8];
        let m = DiscreteMeasure::new(SpaceTag::SigmaN, 2, coords, vec![1e-300, -2.5])
            .unwrap()
            .with_replicates(Arc::new(vec![0, 3]), 4)
            .unwrap();
        let back = parse_measure(&write_measure(&m)).unwrap();
        assert_eq!(back.replicates(), 4);
        assert_eq!(back.labels(), m.labels());
        for (a, b) in back.coords().iter().zip(m.coords()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in back.weights().iter().zip(m.weights()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(parse_measure("").is_err());
        assert!(parse_measure("supmeas-measure 2\n").is_err());
        let bad_count = "supmeas-measure 1\nspace sphere\nn 2\ncount 2\n0x1p+0 0x0p+0 0x1p+0\n";
        assert!(matches!(parse_measure(bad_count), Err(Error::Parse { .. })));
        let bad_field = "supmeas-measure 1\nspace sphere\nn 2\ncount 1\n0x1p+0 zz 0x1p+0\n";
        assert!(matches!(parse_measure(bad_field), Err(Error::Parse { line: 5, .. })));
        let ok = "# comment\nsupmeas-measure 1\nspace sphere\nn 2\ncount 1\n0x1p+0 0x0p+0 0x1p-1\n";
        assert_eq!(parse_measure(ok).unwrap().total_mass(), 0.5);
    }
}
