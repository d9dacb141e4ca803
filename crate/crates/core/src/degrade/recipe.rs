use serde::{Deserialize, Serialize};

use crate::media::{Clip, Frame};
use crate::rng::SeededRng;

use super::{add_gauss_noise, add_poisson_noise, gg_blur, jpeg_simulate, resize_by, DegradeError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Step {
    Blur { sigma: f64, beta: f64, ksize: usize },
    GaussNoise { sigma: f64, gray: bool },
    Poisson { scale: f64 },
    Resize { factor: f64, back: bool },
    Jpeg { quality: u8 },
}

impl Step {
    pub fn validate(&self) -> Result<(), DegradeError> {
        let bad = |m: String| Err(DegradeError::InvalidParameter(m));
        match *self {
            Step::Blur { sigma, beta, ksize } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return bad(format!("blur sigma {sigma} must be positive"));
                }
                if !(0.5..=8.0).contains(&beta) {
                    return bad(format!("blur beta {beta} outside [0.5, 8]"));
                }
                if ksize < 3 || ksize % 2 == 0 {
                    return bad(format!("kernel size {ksize} must be odd and >= 3"));
                }
            }
            Step::GaussNoise { sigma, .. } => {
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return bad(format!("noise sigma {sigma} must be >= 0"));
                }
            }
            Step::Poisson { scale } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return bad(format!("poisson scale {scale} must be positive"));
                }
            }
            Step::Resize { factor, .. } => {
                if !(factor > 0.0 && factor <= 2.0) {
                    return bad(format!("resize factor {factor} outside (0, 2]"));
                }
            }
            Step::Jpeg { quality } => {
                if !(1..=100).contains(&quality) {
                    return bad(format!("JPEG quality {quality} outside [1, 100]"));
                }
            }
        }
        Ok(())
    }

    /// Applies the step without clamping.
    pub fn apply(&self, frame: &Frame, rng: &mut SeededRng) -> Result<Frame, DegradeError> {
        match *self {
            Step::Blur { sigma, beta, ksize } => gg_blur(frame, sigma, beta, ksize),
            Step::GaussNoise { sigma, gray } => add_gauss_noise(frame, sigma, gray, rng),
            Step::Poisson { scale } => add_poisson_noise(frame, scale, rng),
            Step::Resize { factor, back } => {
                self.validate()?;
                Ok(resize_by(frame, factor, back))
            }
            Step::Jpeg { quality } => jpeg_simulate(frame, quality),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationRecipe {
    pub seed: u64,
    pub steps: Vec<Step>,
}

impl DegradationRecipe {
    pub fn new(seed: u64, steps: Vec<Step>) -> Self {
        Self { seed, steps }
    }

    pub fn validate(&self) -> Result<(), DegradeError> {
        self.steps.iter().try_for_each(Step::validate)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("recipe serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, DegradeError> {
        let r: Self = serde_json::from_str(s).map_err(|e| DegradeError::Recipe(e.to_string()))?;
        r.validate()?;
        Ok(r)
    }

    /// One frame with the stream derived from `(seed, index)`; clamped to `[0, 1]`.
    pub fn apply_frame(&self, frame: &Frame, index: usize) -> Result<Frame, DegradeError> {
        let mut rng = SeededRng::derive(self.seed, index as u64);
        let mut cur = frame.clone();
        for step in &self.steps {
            cur = step.apply(&cur, &mut rng)?;
        }
        Ok(cur.clamped())
    }
}

/// Degrades every frame. Each frame gets its own random stream keyed by
/// `(seed, frame_index)`, so frames are processed in parallel with the same
/// result as a serial run.
pub fn run_recipe(clip: &Clip, recipe: &DegradationRecipe) -> Result<Clip, DegradeError> {
    recipe.validate()?;
    let frames = clip.frames();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(frames.len().max(1));
    if threads <= 1 {
        let out = frames.iter().enumerate().map(|(i, f)| recipe.apply_frame(f, i)).collect::<Result<Vec<_>, _>>()?;
        return Ok(clip.with_frames(out)?);
    }
    let chunk = frames.len().div_ceil(threads).max(1);
    let mut out: Vec<Frame> = Vec::with_capacity(frames.len());
    std::thread::scope(|s| -> Result<(), DegradeError> {
        let handles: Vec<_> = frames
            .chunks(chunk)
            .enumerate()
            .map(|(ci, part)| {
                s.spawn(move || {
                    part.iter()
                        .enumerate()
                        .map(|(i, f)| recipe.apply_frame(f, ci * chunk + i))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        for h in handles {
            out.extend(h.join().expect("degrade worker panicked")?);
        }
        Ok(())
    })?;
    Ok(clip.with_frames(out)?)
}

/// Closed interval `[lo, hi]` for uniform sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn sample(&self, name: &str, rng: &mut SeededRng) -> Result<f64, DegradeError> {
        if !(self.lo <= self.hi) {
            return Err(DegradeError::EmptyRange { name: name.to_string(), lo: self.lo, hi: self.hi });
        }
        if self.lo == self.hi {
            return Ok(self.lo);
        }
        Ok(rng.uniform_range(self.lo, self.hi))
    }
}

/// Parameter ranges for [`sample_recipe`]. The chain is always
/// blur, noise, Poisson, resize (back to original size), JPEG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationProfile {
    pub sigma: Range,
    pub beta: Range,
    pub noise_sigma: Range,
    pub poisson_scale: Range,
    pub resize_factor: Range,
    pub jpeg_quality: Range,
    pub ksize: usize,
    /// Probability that the Gaussian noise is gray rather than per channel.
    pub gray_probability: f64,
}

impl Default for DegradationProfile {
    fn default() -> Self {
        Self {
            sigma: Range::new(0.2, 3.0),
            beta: Range::new(0.5, 4.0),
            noise_sigma: Range::new(0.0, 0.06),
            poisson_scale: Range::new(50.0, 500.0),
            resize_factor: Range::new(0.5, 1.0),
            jpeg_quality: Range::new(30.0, 95.0),
            ksize: 21,
            gray_probability: 0.4,
        }
    }
}

impl DegradationProfile {
    /// A gentler profile for quick experiments.
    pub fn mild() -> Self {
        Self {
            sigma: Range::new(0.2, 1.2),
            beta: Range::new(1.0, 3.0),
            noise_sigma: Range::new(0.0, 0.02),
            poisson_scale: Range::new(200.0, 500.0),
            resize_factor: Range::new(0.75, 1.0),
            jpeg_quality: Range::new(60.0, 95.0),
            ksize: 9,
            gray_probability: 0.4,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::default()),
            "mild" => Some(Self::mild()),
            _ => None,
        }
    }
}

/// Draws every parameter uniformly from its range; the recipe seed is the
/// next value of `rng`.
pub fn sample_recipe(rng: &mut SeededRng, profile: &DegradationProfile) -> Result<DegradationRecipe, DegradeError> {
    let sigma = profile.sigma.sample("sigma", rng)?;
    let beta = profile.beta.sample("beta", rng)?;
    let noise = profile.noise_sigma.sample("noise_sigma", rng)?;
    let gray = rng.uniform() < profile.gray_probability;
    let scale = profile.poisson_scale.sample("poisson_scale", rng)?;
    let factor = profile.resize_factor.sample("resize_factor", rng)?;
    let quality = profile.jpeg_quality.sample("jpeg_quality", rng)?.round() as u8;
    let seed = rng.next_u64();
    let recipe = DegradationRecipe::new(
        seed,
        vec![
            Step::Blur { sigma, beta, ksize: profile.ksize },
            Step::GaussNoise { sigma: noise, gray },
            Step::Poisson { scale },
            Step::Resize { factor, back: true },
            Step::Jpeg { quality },
        ],
    );
    recipe.validate()?;
    Ok(recipe)
}
