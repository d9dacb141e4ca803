//! Binary portable pixmap (P6, maxval 255) frames and frame-sequence clips.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{Clip, Frame, MediaError};

/// `frame_%06d.ppm`
pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.ppm")
}

/// Store quantization: `round(v * 255)` with halves rounded away from zero.
pub fn quantize(v: f64) -> Result<u8, MediaError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(MediaError::OutOfRange(v));
    }
    Ok((v * 255.0).round().clamp(0.0, 255.0) as u8)
}

pub fn encode_ppm(frame: &Frame) -> Result<Vec<u8>, MediaError> {
    let header = format!("P6\n{} {}\n255\n", frame.width(), frame.height());
    let mut out = Vec::with_capacity(header.len() + frame.data().len());
    out.extend_from_slice(header.as_bytes());
    for &v in frame.data() {
        out.push(quantize(v)?);
    }
    Ok(out)
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok()
    }

    fn number(&mut self, what: &str) -> Result<usize, MediaError> {
        self.token()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| MediaError::MalformedHeader(format!("bad {what}")))
    }
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Frame, MediaError> {
    let mut r = HeaderReader { bytes, pos: 0 };
    match r.token() {
        Some("P6") => {}
        other => {
            return Err(MediaError::MalformedHeader(format!(
                "expected magic P6, found {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let width = r.number("width")?;
    let height = r.number("height")?;
    let maxval = r.number("maxval")?;
    if maxval != 255 {
        return Err(MediaError::MalformedHeader(format!(
            "only 8-bit pixmaps are supported (maxval {maxval})"
        )));
    }
    if width == 0 || height == 0 {
        return Err(MediaError::MalformedHeader("zero dimension".into()));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let start = r.pos + 1;
    let expected = width * height * 3;
    let raster = bytes
        .get(start..start + expected)
        .ok_or_else(|| MediaError::MalformedHeader(format!("raster truncated, expected {expected} bytes")))?;
    let data = raster.iter().map(|&b| b as f64 / 255.0).collect();
    Frame::new(width, height, data)
}

pub fn write_frame(frame: &Frame, path: &Path) -> Result<(), MediaError> {
    let bytes = encode_ppm(frame)?;
    let mut file = fs::File::create(path).map_err(|e| MediaError::io(path, e))?;
    file.write_all(&bytes).map_err(|e| MediaError::io(path, e))
}

pub fn read_frame(path: &Path) -> Result<Frame, MediaError> {
    let bytes = fs::read(path).map_err(|e| MediaError::io(path, e))?;
    decode_ppm(&bytes).map_err(|e| e.context(path))
}

fn parse_frame_index(name: &str) -> Option<usize> {
    let stem = name.strip_prefix("frame_")?.strip_suffix(".ppm")?;
    if stem.len() != 6 || !stem.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    stem.parse().ok()
}

/// Sorted frame files of a clip directory, verifying the numbering is contiguous from zero.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>, MediaError> {
    if !dir.is_dir() {
        return Err(MediaError::MissingDirectory(dir.to_path_buf()));
    }
    let mut indexed = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| MediaError::io(dir, e))? {
        let entry = entry.map_err(|e| MediaError::io(dir, e))?;
        let name = entry.file_name();
        if let Some(idx) = name.to_str().and_then(parse_frame_index) {
            indexed.push((idx, entry.path()));
        }
    }
    if indexed.is_empty() {
        return Err(MediaError::InvalidClip(format!("no frame files in {}", dir.display())));
    }
    indexed.sort_by_key(|(i, _)| *i);
    for (expected, (idx, _)) in indexed.iter().enumerate() {
        if *idx != expected {
            return Err(MediaError::IndexGap(expected));
        }
    }
    Ok(indexed.into_iter().map(|(_, p)| p).collect())
}

/// Reads `frame_000000.ppm`, `frame_000001.ppm`, ... from `dir`. The clip id is
/// the directory name.
pub fn read_clip(dir: &Path, fps: f64) -> Result<Clip, MediaError> {
    let frames = list_frames(dir)?
        .iter()
        .map(|p| read_frame(p))
        .collect::<Result<Vec<_>, _>>()?;
    let id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Clip::new(id, fps, frames)
}

pub fn write_clip(clip: &Clip, dir: &Path) -> Result<(), MediaError> {
    fs::create_dir_all(dir).map_err(|e| MediaError::io(dir, e))?;
    for (i, frame) in clip.frames().iter().enumerate() {
        write_frame(frame, &dir.join(frame_file_name(i)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_examples() {
        assert_eq!(quantize(0.5).unwrap(), 128);
        assert_eq!(quantize(1.0).unwrap(), 255);
        assert_eq!(quantize(0.0).unwrap(), 0);
        assert!(matches!(quantize(-0.2), Err(MediaError::OutOfRange(_))));
    }

    #[test]
    fn every_byte_round_trips() {
        for b in 0..=255u8 {
            assert_eq!(quantize(b as f64 / 255.0).unwrap(), b);
        }
    }

    #[test]
    fn header_with_comment() {
        let mut bytes = b"P6\n# made by hand\n1 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 51]);
        let f = decode_ppm(&bytes).unwrap();
        assert_eq!(f.pixel(0, 0), [1.0, 0.0, 0.2]);
    }

    #[test]
    fn malformed_headers() {
        assert!(matches!(decode_ppm(b"P3\n1 1\n255\n"), Err(MediaError::MalformedHeader(_))));
        assert!(matches!(decode_ppm(b"P6\n1 1\n65535\n"), Err(MediaError::MalformedHeader(_))));
        assert!(matches!(decode_ppm(b"P6\n2 2\n255\n\x00"), Err(MediaError::MalformedHeader(_))));
        assert!(matches!(decode_ppm(b"P6\nx 2\n255\n"), Err(MediaError::MalformedHeader(_))));
    }

    #[test]
    fn frame_names() {
        assert_eq!(frame_file_name(7), "frame_000007.ppm");
        assert_eq!(parse_frame_index("frame_000123.ppm"), Some(123));
        assert_eq!(parse_frame_index("frame_123.ppm"), None);
        assert_eq!(parse_frame_index("frame_000001.png"), None);
    }
}
