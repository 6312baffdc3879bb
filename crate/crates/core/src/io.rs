//! Plain-text field files (`CFLD1` header followed by `re im` lines) and the
//! boundary-data CSV format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, GridSpec};

const MAGIC: &str = "CFLD1";

/// Serializes a field as CFLD-1 text.
pub fn format_cfld(field: &ComplexField) -> String {
    let spec = field.spec();
    let mut out = String::with_capacity(48 * field.values().len() + 64);
    let c = spec.center();
    let _ = writeln!(out, "{MAGIC} {} {:e} {:e} {:e}", spec.n(), spec.half_width(), c.re, c.im);
    for v in field.values() {
        let _ = writeln!(out, "{:e} {:e}", v.re, v.im);
    }
    out
}

/// Parses CFLD-1 text.
pub fn parse_cfld(text: &str) -> Result<ComplexField> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5 || parts[0] != MAGIC {
        return Err(Error::Parse(format!("bad header line: {header:?}")));
    }
    let n: usize = parts[1]
        .parse()
        .map_err(|_| Error::Parse(format!("bad resolution {:?}", parts[1])))?;
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad number {s:?}")))
    };
    let spec = GridSpec::new(C64::new(num(parts[3])?, num(parts[4])?), num(parts[2])?, n)?;
    let mut values = Vec::with_capacity(spec.len());
    for (k, line) in lines.enumerate() {
        let mut it = line.split_whitespace();
        let (re, im) = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => (num(a)?, num(b)?),
            _ => return Err(Error::Parse(format!("bad sample line {}: {line:?}", k + 2))),
        };
        values.push(C64::new(re, im));
    }
    ComplexField::new(spec, values)
}

pub fn read_cfld(path: impl AsRef<Path>) -> Result<ComplexField> {
    parse_cfld(&fs::read_to_string(path)?)
}

pub fn write_cfld(path: impl AsRef<Path>, field: &ComplexField) -> Result<()> {
    fs::write(path, format_cfld(field))?;
    Ok(())
}

/// Parses a `theta,phi` CSV with strictly increasing angles in `[0, 2pi)`.
pub fn parse_boundary_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty boundary file".into()))?;
    if header.replace(' ', "") != "theta,phi" {
        return Err(Error::Parse(format!("expected header 'theta,phi', got {header:?}")));
    }
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for line in lines {
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("bad boundary row {line:?}")))?;
        let theta: f64 = a.trim().parse().map_err(|_| Error::Parse(format!("bad angle {a:?}")))?;
        let phi: f64 = b.trim().parse().map_err(|_| Error::Parse(format!("bad value {b:?}")))?;
        if !(0.0..std::f64::consts::TAU).contains(&theta) {
            return Err(Error::Parse(format!("angle {theta} outside [0, 2pi)")));
        }
        if let Some(&(prev, _)) = rows.last() {
            if theta <= prev {
                return Err(Error::Parse("angles must be strictly increasing".into()));
            }
        }
        rows.push((theta, phi));
    }
    Ok(rows)
}

pub fn format_boundary_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("theta,phi\n");
    for (t, p) in rows {
        let _ = writeln!(out, "{t:e},{p:e}");
    }
    out
}

/// Writes a CSV table with a header row.
pub fn write_table(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let spec = GridSpec::new(C64::new(0.5, -1.0), 2.0, 16).unwrap();
        let f = ComplexField::from_fn(spec, |z| z * 0.1).unwrap();
        let text = format_cfld(&f);
        let first = text.lines().next().unwrap();
        assert_eq!(first, "CFLD1 16 2e0 5e-1 -1e0");
        assert_eq!(text.lines().count(), 1 + 256);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(parse_cfld("").is_err());
        assert!(parse_cfld("CFLD2 16 1 0 0\n").is_err());
        assert!(parse_cfld("CFLD1 16 1 0 0\n1 2\n").is_err());
        assert!(parse_cfld("CFLD1 16 1 0 0\n1,0 2\n").is_err());
    }

    #[test]
    fn boundary_csv_validation() {
        assert!(parse_boundary_csv("theta,phi\n0,1\n1,2\n").is_ok());
        assert!(parse_boundary_csv("theta,phi\n1,1\n0.5,2\n").is_err());
        assert!(parse_boundary_csv("theta,phi\n7,1\n").is_err());
        assert!(parse_boundary_csv("x,y\n0,1\n").is_err());
    }

    proptest! {
        #[test]
        fn cfld_round_trip_is_exact(seed in proptest::collection::vec((-1e6..1e6f64, -1e-6..1e-6f64), 256)) {
            let spec = GridSpec::centered(1.0, 16).unwrap();
            let f = ComplexField::new(spec, seed.iter().map(|&(a, b)| C64::new(a, b)).collect()).unwrap();
            let back = parse_cfld(&format_cfld(&f)).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
