use serde::{Deserialize, Serialize};

use crate::media::Clip;

use super::DegradeError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Equal-width bins over `[0, 255]`.
    pub counts: Vec<u64>,
    pub total: u64,
    pub mean: f64,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Index of the fullest bin (first on ties).
    pub fn mode_bin(&self) -> usize {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        self.counts.iter().position(|&c| c == max).unwrap_or(0)
    }

    /// Lower edge of bin `i` on the 0–255 scale.
    pub fn bin_start(&self, i: usize) -> f64 {
        i as f64 * 255.0 / self.bins() as f64
    }
}

pub fn luma(p: [f64; 3]) -> f64 {
    0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
}

/// Histogram of per-pixel Rec.601 luma scaled to `[0, 255]`, over all frames.
/// Values outside the range land in the end bins.
pub fn intensity_histogram(clip: &Clip, bins: usize) -> Result<Histogram, DegradeError> {
    if bins < 2 {
        return Err(DegradeError::InvalidParameter(format!("histogram needs >= 2 bins, got {bins}")));
    }
    let mut counts = vec![0u64; bins];
    let mut sum = 0.0;
    let mut total = 0u64;
    for frame in clip.frames() {
        for p in frame.pixels() {
            let v = luma(p) * 255.0;
            let b = ((v * bins as f64 / 255.0).floor().max(0.0) as usize).min(bins - 1);
            counts[b] += 1;
            sum += v;
            total += 1;
        }
    }
    let mean = if total == 0 { 0.0 } else { sum / total as f64 };
    Ok(Histogram { counts, total, mean })
}
