use crate::media::Frame;
use crate::rng::SeededRng;

use super::DegradeError;

/// Additive Gaussian noise. Color mode draws every channel independently;
/// gray mode draws one value per pixel and adds it to all three channels.
/// No clamping.
pub fn add_gauss_noise(frame: &Frame, sigma: f64, gray: bool, rng: &mut SeededRng) -> Result<Frame, DegradeError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(DegradeError::InvalidParameter(format!("noise sigma {sigma} must be >= 0")));
    }
    if sigma == 0.0 {
        return Ok(frame.clone());
    }
    let out = if gray {
        frame.map_pixels(|p| {
            let n = sigma * rng.normal();
            [p[0] + n, p[1] + n, p[2] + n]
        })
    } else {
        frame.map_pixels(|p| {
            [
                p[0] + sigma * rng.normal(),
                p[1] + sigma * rng.normal(),
                p[2] + sigma * rng.normal(),
            ]
        })
    };
    Ok(out)
}

/// Shot noise: `Poisson(v · scale) / scale` per pixel and channel. Negative
/// inputs count as zero signal.
pub fn add_poisson_noise(frame: &Frame, scale: f64, rng: &mut SeededRng) -> Result<Frame, DegradeError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(DegradeError::InvalidParameter(format!("poisson scale {scale} must be positive")));
    }
    Ok(frame.map_pixels(|p| {
        let mut o = [0.0; 3];
        for c in 0..3 {
            o[c] = rng.poisson(p[c].max(0.0) * scale) / scale;
        }
        o
    }))
}
