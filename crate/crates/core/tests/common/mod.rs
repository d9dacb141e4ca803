//! Synthetic data shared by the integration tests.
#![allow(dead_code)]

use vqe_core::enhance::TrainPair;
use vqe_core::media::Frame;
use vqe_core::rng::SeededRng;

/// Row-stochastic color mix, so in-gamut inputs stay in gamut.
pub const COLOR_MIX: [[f64; 3]; 3] = [[0.8, 0.15, 0.05], [0.1, 0.8, 0.1], [0.05, 0.15, 0.8]];

pub fn mix(p: [f64; 3]) -> [f64; 3] {
    let m = COLOR_MIX;
    [
        m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
        m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
        m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
    ]
}

pub fn random_frame(rng: &mut SeededRng, w: usize, h: usize) -> Frame {
    Frame::from_fn(w, h, |_, _| [rng.uniform(), rng.uniform(), rng.uniform()])
}

/// Smooth content: a few low-frequency cosines per channel around mid-gray.
pub fn smooth_frame(rng: &mut SeededRng, w: usize, h: usize) -> Frame {
    let mut waves = Vec::new();
    for _ in 0..3 {
        let mut ch = Vec::new();
        for _ in 0..3 {
            ch.push((
                rng.uniform_range(0.05, 0.2),
                rng.uniform_range(-0.4, 0.4),
                rng.uniform_range(-0.4, 0.4),
                rng.uniform_range(0.0, 6.3),
            ));
        }
        waves.push(ch);
    }
    Frame::from_fn(w, h, |x, y| {
        let mut o = [0.5; 3];
        for (c, ch) in waves.iter().enumerate() {
            for &(a, fx, fy, ph) in ch {
                o[c] += a * (fx * x as f64 + fy * y as f64 + ph).cos();
            }
            o[c] = o[c].clamp(0.0, 1.0);
        }
        o
    })
}

pub fn color_pairs(seed: u64, count: usize, side: usize) -> Vec<TrainPair> {
    let mut rng = SeededRng::new(seed);
    (0..count)
        .map(|_| {
            let f = random_frame(&mut rng, side, side);
            let t = f.map_pixels(mix);
            TrainPair::new(f, t).unwrap()
        })
        .collect()
}

pub fn noisy_pairs(seed: u64, count: usize, side: usize, sigma: f64) -> Vec<TrainPair> {
    let mut rng = SeededRng::new(seed);
    (0..count)
        .map(|_| {
            let clean = smooth_frame(&mut rng, side, side);
            let noisy = clean.map_pixels(|p| {
                [p[0] + sigma * rng.normal(), p[1] + sigma * rng.normal(), p[2] + sigma * rng.normal()]
            });
            TrainPair::new(noisy, clean).unwrap()
        })
        .collect()
}

pub fn rmse(a: &Frame, b: &Frame) -> f64 {
    let n = a.data().len() as f64;
    (a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n).sqrt()
}

/// Central-difference relative error `|a − n| / max(|a|, |n|, floor)`.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}
