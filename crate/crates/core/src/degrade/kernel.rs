use crate::media::Frame;

use super::DegradeError;

/// Square kernel, row-major, odd side.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub size: usize,
    pub weights: Vec<f64>,
}

impl Kernel {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.weights[y * self.size + x]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Isotropic generalized Gaussian, `k(r) ∝ exp(−(r/σ)^β)` with `r` the distance
/// from the kernel center, normalized to unit sum. `β = 2` is an ordinary
/// Gaussian of standard deviation `σ/√2`; large `β` gives a flat top with ramp
/// edges, small `β` heavy tails.
pub fn gg_blur_kernel(sigma: f64, beta: f64, ksize: usize) -> Result<Kernel, DegradeError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(DegradeError::InvalidParameter(format!("blur sigma {sigma} must be positive")));
    }
    if !(0.5..=8.0).contains(&beta) {
        return Err(DegradeError::InvalidParameter(format!("blur beta {beta} outside [0.5, 8]")));
    }
    if ksize < 3 || ksize % 2 == 0 {
        return Err(DegradeError::InvalidParameter(format!("kernel size {ksize} must be odd and >= 3")));
    }
    let half = (ksize / 2) as f64;
    let mut weights = Vec::with_capacity(ksize * ksize);
    for y in 0..ksize {
        for x in 0..ksize {
            let (dx, dy) = (x as f64 - half, y as f64 - half);
            let r = (dx * dx + dy * dy).sqrt();
            weights.push((-(r / sigma).powf(beta)).exp());
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(Kernel { size: ksize, weights })
}

/// Per-channel convolution with replicate padding.
///
/// Accumulates `Σ k · (neighbour − center)` onto the center value; with a
/// unit-sum kernel this equals the plain weighted sum, and a constant region
/// passes through unchanged bit for bit.
pub fn convolve(frame: &Frame, kernel: &Kernel) -> Frame {
    let (w, h) = frame.dims();
    let half = (kernel.size / 2) as isize;
    let src = frame.data();
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let center = (y * w + x) * 3;
            let mut acc = [0.0; 3];
            for ky in 0..kernel.size {
                let sy = (y as isize + ky as isize - half).clamp(0, h as isize - 1) as usize;
                for kx in 0..kernel.size {
                    let sx = (x as isize + kx as isize - half).clamp(0, w as isize - 1) as usize;
                    let kv = kernel.weights[ky * kernel.size + kx];
                    let i = (sy * w + sx) * 3;
                    for c in 0..3 {
                        acc[c] += kv * (src[i + c] - src[center + c]);
                    }
                }
            }
            for c in 0..3 {
                out[center + c] = src[center + c] + acc[c];
            }
        }
    }
    Frame::new(w, h, out).expect("same dims")
}

pub fn gg_blur(frame: &Frame, sigma: f64, beta: f64, ksize: usize) -> Result<Frame, DegradeError> {
    Ok(convolve(frame, &gg_blur_kernel(sigma, beta, ksize)?))
}
