//! Plain-text complex matrix format.
//!
//! ```text
//! 2 2
//! 1e0+0e0i -2.5e-1+1e0i
//! 0e0-0e0i 3e0+0e0i
//! ```
//!
//! Entries are written with shortest round-trip exponent notation, so a
//! write/read cycle is exact.

use std::io::{BufRead, Write};

use crate::linalg::CMat;
use crate::{Error, Result, C64};

pub fn format_entry(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:e}{}{:e}i", z.re, sign, z.im.abs())
}

/// Parses `a+bi`, `a-bi`, a bare real `a`, or a bare imaginary `bi`.
pub fn parse_entry(tok: &str) -> std::result::Result<C64, String> {
    let bad = || format!("malformed entry '{tok}'");
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    let z = match tok.strip_suffix('i') {
        None => C64::new(num(tok)?, 0.0),
        Some(body) => {
            let bytes = body.as_bytes();
            let split = (1..bytes.len())
                .rev()
                .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
            match split {
                Some(i) => C64::new(num(&body[..i])?, num(&body[i..])?),
                None => C64::new(0.0, num(body)?),
            }
        }
    };
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(format!("non-finite entry '{tok}'"));
    }
    Ok(z)
}

pub fn write_matrix<W: Write>(mut w: W, m: &CMat) -> Result<()> {
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|&z| format_entry(z)).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn to_string(m: &CMat) -> String {
    let mut buf = Vec::new();
    write_matrix(&mut buf, m).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("matrix text is ASCII")
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<CMat> {
    let parse = |line: usize, msg: String| Error::Parse { line, msg };
    let mut lines = r
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty() && !s.trim_start().starts_with('#')));
    let (hline, header) = lines.next().ok_or_else(|| parse(1, "missing 'rows cols' header".into()))?;
    let header = header?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse(hline, format!("bad header '{header}'")))?;
    let [rows, cols] = dims[..] else {
        return Err(parse(hline, format!("header must be 'rows cols', found '{header}'")));
    };
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows {
        let (ln, text) =
            lines.next().ok_or_else(|| parse(hline + i + 1, format!("expected {rows} rows, found {i}")))?;
        let text = text?;
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != cols {
            return Err(parse(ln, format!("expected {cols} entries, found {}", toks.len())));
        }
        for (j, t) in toks.iter().enumerate() {
            m[(i, j)] = parse_entry(t).map_err(|msg| parse(ln, msg))?;
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse(ln, "trailing content after matrix".into()));
    }
    Ok(m)
}

pub fn from_str(s: &str) -> Result<CMat> {
    read_matrix(s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn entry_forms() {
        assert_eq!(parse_entry("1.5e-3-2e1i").unwrap(), C64::new(1.5e-3, -20.0));
        assert_eq!(parse_entry("-3").unwrap(), C64::new(-3.0, 0.0));
        assert_eq!(parse_entry("-2.5i").unwrap(), C64::new(0.0, -2.5));
        assert_eq!(parse_entry("1E+2+1E-2i").unwrap(), C64::new(100.0, 0.01));
        assert!(parse_entry("1+i").is_err());
        assert!(parse_entry("nan").is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = from_str("2 2\n1 2\n3 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = from_str("2 2\n1 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = from_str("2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(
            rows in 1usize..6,
            cols in 1usize..6,
            seed in proptest::collection::vec(-1e6f64..1e6, 72),
            scale in -300i32..300,
        ) {
            let f = 10f64.powi(scale / 10);
            let m = CMat::from_fn(rows, cols, |i, j| {
                let k = 2 * (i * cols + j);
                C64::new(seed[k] * f, seed[k + 1] / f)
            });
            let back = from_str(&to_string(&m)).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
