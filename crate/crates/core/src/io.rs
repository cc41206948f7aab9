//! Flat key-value configs, field CSV files and content fingerprints.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Field, Grid2D};

/// Parses `key = value` lines. Blank lines and text after `#` are ignored;
/// repeated keys are an error.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Parse(format!("line {}: empty key", n + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Parse(format!("line {}: duplicate key `{k}`", n + 1)));
        }
    }
    Ok(out)
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn fingerprint<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("serialisable value");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

pub const FIELD_HEADER: &str = "sigma,x,value";

/// Writes `# key=value` metadata lines, the column header, then one row per
/// node ordered by σ then x.
pub fn write_field_csv<W: Write>(mut w: W, field: &Field, meta: &BTreeMap<String, String>) -> Result<()> {
    for (k, v) in meta {
        if k.contains('=') || k.contains('\n') || v.contains('\n') {
            return Err(Error::InvalidArgument(format!("metadata entry `{k}` is not writable")));
        }
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "{FIELD_HEADER}")?;
    let g = field.grid();
    for (i, s) in g.sigma().iter().enumerate() {
        for (j, x) in g.x().iter().enumerate() {
            writeln!(w, "{},{},{}", fmt_f64(*s), fmt_f64(*x), fmt_f64(field.get(i, j)))?;
        }
    }
    Ok(())
}

/// Reads a file produced by [`write_field_csv`].
pub fn read_field_csv<R: BufRead>(r: R) -> Result<(Field, BTreeMap<String, String>)> {
    let mut meta = BTreeMap::new();
    let mut header_seen = false;
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(m) = line.strip_prefix('#') {
            if let Some((k, v)) = m.trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if !header_seen {
            if line != FIELD_HEADER {
                return Err(Error::Parse(format!("line {}: expected header `{FIELD_HEADER}`", n + 1)));
            }
            header_seen = true;
            continue;
        }
        let mut it = line.split(',');
        let mut num = || -> Result<f64> {
            it.next()
                .ok_or_else(|| Error::Parse(format!("line {}: missing column", n + 1)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))
        };
        let row = (num()?, num()?, num()?);
        if it.next().is_some() {
            return Err(Error::Parse(format!("line {}: too many columns", n + 1)));
        }
        rows.push(row);
    }
    if !header_seen {
        return Err(Error::Parse("missing header".into()));
    }
    // x nodes are those of the first σ row
    let s0 = rows.first().ok_or_else(|| Error::Parse("no data rows".into()))?.0;
    let nx = rows.iter().take_while(|r| r.0 == s0).count();
    if nx == 0 || rows.len() % nx != 0 {
        return Err(Error::Parse("rows do not form a tensor grid".into()));
    }
    let x: Vec<f64> = rows[..nx].iter().map(|r| r.1).collect();
    let sigma: Vec<f64> = rows.iter().step_by(nx).map(|r| r.0).collect();
    for (k, r) in rows.iter().enumerate() {
        if r.0 != sigma[k / nx] || r.1 != x[k % nx] {
            return Err(Error::Parse(format!("data row {} is out of grid order", k + 1)));
        }
    }
    let grid = Arc::new(Grid2D::new(sigma, x)?);
    let field = Field::new(grid, rows.iter().map(|r| r.2).collect())?;
    Ok((field, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::linspace;

    #[test]
    fn key_values() {
        let m = parse_key_values("# comment\nkappa = 1.5  # trailing\n\n theta=0.2\n").unwrap();
        assert_eq!(m["kappa"], "1.5");
        assert_eq!(m["theta"], "0.2");
        assert!(parse_key_values("a = 1\na = 2").is_err());
        assert!(parse_key_values("novalue").is_err());
        assert!(parse_key_values(" = 3").is_err());
    }

    #[test]
    fn field_round_trip_is_exact() {
        let g = Arc::new(Grid2D::new(linspace(0.05, 0.6, 7), linspace(-1.0, 1.0, 5)).unwrap());
        let f = Field::from_fn(g, |s, x| (s * 3.1).sin() / 7.0 + x.exp() * 1e-9);
        let mut meta = BTreeMap::new();
        meta.insert("t".to_string(), fmt_f64(0.1));
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &f, &meta).unwrap();
        let (g2, meta2) = read_field_csv(buf.as_slice()).unwrap();
        assert_eq!(g2, f);
        assert_eq!(meta2, meta);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(read_field_csv("a,b,c\n1,2,3\n".as_bytes()).is_err());
        assert!(read_field_csv("sigma,x,value\n1,2\n".as_bytes()).is_err());
        assert!(read_field_csv("sigma,x,value\n".as_bytes()).is_err());
    }

    #[test]
    fn fingerprint_is_stable_and_sensitive() {
        let a = fingerprint(&[1.0, 2.0]);
        assert_eq!(a, fingerprint(&[1.0, 2.0]));
        assert_ne!(a, fingerprint(&[1.0, 2.0000000000000004]));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn shortest_round_trip_text() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.1), "0.1");
    }
}
