//! `.ten` tensor text files and small CSV writers.
//!
//! A `.ten` file holds the order `K` on the first line, the `K` dimensions on
//! the second, then every value in mode-1-fastest order. Values are written
//! with 17 significant digits so a write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{HoseError, Result};
use crate::tensor::DenseTensor;

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_ten_string(t: &DenseTensor) -> String {
    let mut s = String::with_capacity(26 * t.len() + 32);
    let _ = writeln!(s, "{}", t.order());
    let dims: Vec<String> = t.dims().iter().map(|d| d.to_string()).collect();
    let _ = writeln!(s, "{}", dims.join(" "));
    for &v in t.values() {
        s.push_str(&format_value(v));
        s.push('\n');
    }
    s
}

pub fn parse_ten(text: &str) -> Result<DenseTensor> {
    let mut tokens = text.split_whitespace();
    let order: usize = tokens
        .next()
        .ok_or_else(|| HoseError::Parse("empty tensor file".into()))?
        .parse()
        .map_err(|e| HoseError::Parse(format!("bad order: {e}")))?;
    if order == 0 {
        return Err(HoseError::Parse("order must be at least 1".into()));
    }
    let dims = (0..order)
        .map(|k| {
            tokens
                .next()
                .ok_or_else(|| HoseError::Parse(format!("missing dimension {}", k + 1)))?
                .parse::<usize>()
                .map_err(|e| HoseError::Parse(format!("bad dimension {}: {e}", k + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let values = tokens
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|e| HoseError::Parse(format!("bad value {tok:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    DenseTensor::new(dims, values)
}

pub fn read_ten(path: impl AsRef<Path>) -> Result<DenseTensor> {
    parse_ten(&fs::read_to_string(path)?)
}

pub fn write_ten(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    fs::write(path, to_ten_string(t))?;
    Ok(())
}

/// Writes a header row followed by data rows, comma separated.
pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::test_util::gaussian_tensor;
    use proptest::prelude::*;

    #[test]
    fn layout() {
        let t = DenseTensor::new(vec![2, 1], vec![0.5, -3.0]).unwrap();
        let s = to_ten_string(&t);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "2");
        assert_eq!(lines[1], "2 1");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_ten("").is_err());
        assert!(parse_ten("2\n2 2\n1 2 3").is_err());
        assert!(parse_ten("1\n2\n1 x").is_err());
        assert!(parse_ten("0\n").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ten");
        let t = gaussian_tensor(&[3, 4, 2], 5);
        write_ten(&path, &t).unwrap();
        assert_eq!(read_ten(&path).unwrap(), t);
    }

    proptest! {
        #[test]
        fn bit_exact(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..40)) {
            let n = values.len();
            let t = DenseTensor::new(vec![n], values).unwrap();
            let back = parse_ten(&to_ten_string(&t)).unwrap();
            for (a, b) in t.values().iter().zip(back.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
