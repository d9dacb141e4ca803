//! `.cube` 3D LUT text files.
//!
//! ```text
//! LUT_3D_SIZE 2
//! 0.000000 0.000000 0.000000
//! 1.000000 0.000000 0.000000
//! ...
//! ```
//!
//! Entries follow the header with the red index varying fastest. `TITLE`,
//! `DOMAIN_MIN`/`DOMAIN_MAX` lines and `#` comments are accepted and ignored
//! on read.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::MediaError;
use crate::lut::Lut3D;

pub fn parse_cube(text: &str) -> Result<Lut3D, MediaError> {
    let mut size: Option<usize> = None;
    let mut entries: Vec<[f64; 3]> = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let first = line.split_whitespace().next().unwrap_or("");
        match first {
            "LUT_3D_SIZE" => {
                let n = line
                    .split_whitespace()
                    .nth(1)
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| MediaError::Cube(format!("line {}: bad LUT_3D_SIZE", line_no + 1)))?;
                if n < 2 {
                    return Err(MediaError::Cube(format!("LUT_3D_SIZE must be at least 2, got {n}")));
                }
                size = Some(n);
            }
            "TITLE" | "DOMAIN_MIN" | "DOMAIN_MAX" => {}
            "LUT_1D_SIZE" => return Err(MediaError::Cube("1D LUTs are not supported".into())),
            _ => {
                if size.is_none() {
                    return Err(MediaError::Cube(format!(
                        "line {}: entry before LUT_3D_SIZE header",
                        line_no + 1
                    )));
                }
                let mut rgb = [0.0; 3];
                let mut tokens = line.split_whitespace();
                for slot in rgb.iter_mut() {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| MediaError::Cube(format!("line {}: expected 3 values", line_no + 1)))?;
                    *slot = tok.parse::<f64>().map_err(|_| {
                        MediaError::Cube(format!("line {}: non-numeric token {tok:?}", line_no + 1))
                    })?;
                    if !slot.is_finite() {
                        return Err(MediaError::Cube(format!("line {}: non-finite value", line_no + 1)));
                    }
                }
                if tokens.next().is_some() {
                    return Err(MediaError::Cube(format!("line {}: expected 3 values", line_no + 1)));
                }
                entries.push(rgb);
            }
        }
    }
    let n = size.ok_or_else(|| MediaError::Cube("missing LUT_3D_SIZE header".into()))?;
    let expected = n * n * n;
    if entries.len() != expected {
        return Err(MediaError::Cube(format!(
            "expected {expected} entries, found {}",
            entries.len()
        )));
    }
    Lut3D::from_lattice(n, entries).map_err(|e| MediaError::Cube(e.to_string()))
}

pub fn format_cube(lut: &Lut3D) -> String {
    let n = lut.size();
    let mut out = String::with_capacity(n * n * n * 28 + 32);
    let _ = writeln!(out, "LUT_3D_SIZE {n}");
    for e in lut.lattice() {
        let _ = writeln!(out, "{:.6} {:.6} {:.6}", e[0], e[1], e[2]);
    }
    out
}

pub fn read_lut_cube(path: &Path) -> Result<Lut3D, MediaError> {
    let text = fs::read_to_string(path).map_err(|e| MediaError::io(path, e))?;
    parse_cube(&text).map_err(|e| e.context(path))
}

pub fn write_lut_cube(lut: &Lut3D, path: &Path) -> Result<(), MediaError> {
    fs::write(path, format_cube(lut)).map_err(|e| MediaError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_two_point_file() {
        let text = "LUT_3D_SIZE 2\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n0 0 1\n1 0 1\n0 1 1\n1 1 1\n";
        let lut = parse_cube(text).unwrap();
        assert_eq!(lut.size(), 2);
        assert_eq!(lut.entry(1, 0, 0), [1.0, 0.0, 0.0]);
        assert_eq!(lut.entry(0, 1, 1), [0.0, 1.0, 1.0]);
        assert_eq!(lut, Lut3D::identity(2));
    }

    #[test]
    fn entry_count_mismatch() {
        let mut text = String::from("LUT_3D_SIZE 33\n");
        for _ in 0..35936 {
            text.push_str("0 0 0\n");
        }
        let err = parse_cube(&text).unwrap_err().to_string();
        assert!(err.contains("expected 35937 entries"), "{err}");
    }

    #[test]
    fn rejects_bad_tokens_and_sizes() {
        assert!(parse_cube("LUT_3D_SIZE 1\n0 0 0\n").is_err());
        assert!(parse_cube("LUT_3D_SIZE 2\n0 0 x\n").unwrap_err().to_string().contains("non-numeric"));
        assert!(parse_cube("0 0 0\n").is_err());
    }

    #[test]
    fn ignores_title_and_comments() {
        let mut text = String::from("# comment\nTITLE \"t\"\nDOMAIN_MIN 0 0 0\nDOMAIN_MAX 1 1 1\n");
        text.push_str(&format_cube(&Lut3D::identity(3)));
        assert_eq!(parse_cube(&text).unwrap(), Lut3D::identity(3));
    }
}
