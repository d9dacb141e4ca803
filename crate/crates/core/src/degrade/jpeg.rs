//! Blockwise DCT quantization: the lossy half of baseline JPEG, without
//! chroma subsampling or entropy coding.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::media::Frame;

use super::DegradeError;

const LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

const CHROMA_TABLE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, //
    18, 21, 26, 66, 99, 99, 99, 99, //
    24, 26, 56, 99, 99, 99, 99, 99, //
    47, 66, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99,
];

// Rec.601 luma weights; the chroma scale factors make the transform exactly invertible.
const KR: f64 = 0.299;
const KB: f64 = 0.114;
const KG: f64 = 1.0 - KR - KB;
const CB_SCALE: f64 = 2.0 * (1.0 - KB);
const CR_SCALE: f64 = 2.0 * (1.0 - KR);

/// Baseline table scaled by the IJG quality rule, entries clamped to `[1, 255]`.
pub fn quant_table(base: &[u16; 64], quality: u8) -> [f64; 64] {
    let q = quality.clamp(1, 100) as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut out = [0.0; 64];
    for (o, &b) in out.iter_mut().zip(base) {
        *o = ((b as u32 * scale + 50) / 100).clamp(1, 255) as f64;
    }
    out
}

pub fn luma_table(quality: u8) -> [f64; 64] {
    quant_table(&LUMA_TABLE, quality)
}

pub fn chroma_table(quality: u8) -> [f64; 64] {
    quant_table(&CHROMA_TABLE, quality)
}

/// `basis[u][x] = C(u)/2 · cos((2x+1)uπ/16)`, the orthonormal 8-point DCT-II.
fn dct_basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut b = [[0.0; 8]; 8];
        for (u, row) in b.iter_mut().enumerate() {
            let cu = if u == 0 { 1.0 / 2f64.sqrt() } else { 1.0 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = 0.5 * cu * (((2 * x + 1) as f64 * u as f64 * PI) / 16.0).cos();
            }
        }
        b
    })
}

pub fn dct8x8(block: &[f64; 64]) -> [f64; 64] {
    let b = dct_basis();
    let mut tmp = [0.0; 64];
    // Rows, then columns.
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| b[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| b[v][y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

pub fn idct8x8(coef: &[f64; 64]) -> [f64; 64] {
    let b = dct_basis();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| b[u][x] * coef[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| b[v][y] * tmp[v * 8 + x]).sum();
        }
    }
    out
}

fn rgb_to_ycbcr(p: [f64; 3]) -> [f64; 3] {
    let y = KR * p[0] + KG * p[1] + KB * p[2];
    [y, (p[2] - y) / CB_SCALE, (p[0] - y) / CR_SCALE]
}

fn ycbcr_to_rgb(p: [f64; 3]) -> [f64; 3] {
    let r = p[0] + CR_SCALE * p[2];
    let b = p[0] + CB_SCALE * p[1];
    let g = (p[0] - KR * r - KB * b) / KG;
    [r, g, b]
}

/// Round-trips every 8×8 block (edge blocks replicate-padded) through DCT,
/// quantization at `quality` and the inverse DCT, in YCbCr on the 0–255 scale.
pub fn jpeg_simulate(frame: &Frame, quality: u8) -> Result<Frame, DegradeError> {
    if !(1..=100).contains(&quality) {
        return Err(DegradeError::InvalidParameter(format!("JPEG quality {quality} outside [1, 100]")));
    }
    let tables = [luma_table(quality), chroma_table(quality), chroma_table(quality)];
    let (w, h) = frame.dims();
    // Level-shifted YCbCr planes.
    let mut planes = vec![vec![0.0; w * h]; 3];
    for (i, p) in frame.pixels().enumerate() {
        let ycc = rgb_to_ycbcr([p[0] * 255.0, p[1] * 255.0, p[2] * 255.0]);
        planes[0][i] = ycc[0] - 128.0;
        planes[1][i] = ycc[1];
        planes[2][i] = ycc[2];
    }
    let mut out_planes = vec![vec![0.0; w * h]; 3];
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            for c in 0..3 {
                let mut block = [0.0; 64];
                for y in 0..8 {
                    let sy = (by + y).min(h - 1);
                    for x in 0..8 {
                        let sx = (bx + x).min(w - 1);
                        block[y * 8 + x] = planes[c][sy * w + sx];
                    }
                }
                let mut coef = dct8x8(&block);
                for (v, q) in coef.iter_mut().zip(&tables[c]) {
                    *v = (*v / q).round() * q;
                }
                let rec = idct8x8(&coef);
                for y in 0..8.min(h - by) {
                    for x in 0..8.min(w - bx) {
                        out_planes[c][(by + y) * w + bx + x] = rec[y * 8 + x];
                    }
                }
            }
        }
    }
    let mut data = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        let rgb = ycbcr_to_rgb([out_planes[0][i] + 128.0, out_planes[1][i], out_planes[2][i]]);
        data.extend(rgb.iter().map(|v| v / 255.0));
    }
    Ok(Frame::new(w, h, data).expect("same dims"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn quality_scaling_rule() {
        assert_eq!(luma_table(50)[0], 16.0);
        assert_eq!(luma_table(100).iter().copied().fold(0.0, f64::max), 1.0);
        assert_eq!(luma_table(75)[0], 8.0);
        assert_eq!(luma_table(1)[63], 255.0);
        assert_eq!(chroma_table(95)[0], 2.0);
    }

    #[test]
    fn dct_round_trip() {
        let mut rng = SeededRng::new(1);
        let mut block = [0.0; 64];
        block.iter_mut().for_each(|v| *v = rng.uniform_range(-128.0, 127.0));
        let back = idct8x8(&dct8x8(&block));
        for (a, b) in block.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_block_is_dc_only() {
        let coef = dct8x8(&[10.0; 64]);
        assert!((coef[0] - 80.0).abs() < 1e-12);
        assert!(coef[1..].iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn color_transform_round_trip() {
        let p = [12.0, 200.0, 97.0];
        let back = ycbcr_to_rgb(rgb_to_ycbcr(p));
        for c in 0..3 {
            assert!((p[c] - back[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_quality_zero() {
        assert!(jpeg_simulate(&Frame::filled(8, 8, [0.5; 3]), 0).is_err());
    }
}
