//! Seeded synthetic degradations: generalized Gaussian blur, Gaussian and
//! Poisson noise, resampling and JPEG-style quantization, chained by a
//! serializable recipe.

mod jpeg;
mod kernel;
mod noise;
mod recipe;
mod resize;
mod stats;

use thiserror::Error;

use crate::media::MediaError;

pub use jpeg::{chroma_table, dct8x8, idct8x8, jpeg_simulate, luma_table, quant_table};
pub use kernel::{convolve, gg_blur, gg_blur_kernel, Kernel};
pub use noise::{add_gauss_noise, add_poisson_noise};
pub use recipe::{run_recipe, sample_recipe, DegradationProfile, DegradationRecipe, Range, Step};
pub use resize::{resize_bilinear, resize_by};
pub use stats::{intensity_histogram, luma, Histogram};

#[derive(Debug, Error)]
pub enum DegradeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty range for {name}: [{lo}, {hi}]")]
    EmptyRange { name: String, lo: f64, hi: f64 },
    #[error("recipe: {0}")]
    Recipe(String),
    #[error(transparent)]
    Media(#[from] MediaError),
}
