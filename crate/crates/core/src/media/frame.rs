use super::MediaError;

/// RGB raster with row-major interleaved scalars.
///
/// Values are nominally in `[0, 1]`; intermediate pipeline stages may leave
/// the range, but anything written to disk must be back inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, MediaError> {
        if width == 0 || height == 0 {
            return Err(MediaError::InvalidFrame("zero-sized frame".into()));
        }
        if data.len() != width * height * 3 {
            return Err(MediaError::InvalidFrame(format!(
                "data length {} does not match {width}x{height}x3",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(MediaError::InvalidFrame(format!("non-finite value {v}")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    pub fn map_pixels(&self, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> Frame {
        let mut data = Vec::with_capacity(self.data.len());
        for p in self.pixels() {
            data.extend_from_slice(&f(p));
        }
        Frame {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn clamped(&self) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn is_in_gamut(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// Copy of the `w`×`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Frame {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop out of bounds");
        let mut data = Vec::with_capacity(w * h * 3);
        for y in y0..y0 + h {
            let start = (y * self.width + x0) * 3;
            data.extend_from_slice(&self.data[start..start + w * 3]);
        }
        Frame {
            width: w,
            height: h,
            data,
        }
    }

    /// Planar (channel-major) copy: R plane, then G, then B.
    pub fn to_planar(&self) -> Vec<f64> {
        let n = self.pixel_count();
        let mut out = vec![0.0; n * 3];
        for (i, p) in self.pixels().enumerate() {
            out[i] = p[0];
            out[n + i] = p[1];
            out[2 * n + i] = p[2];
        }
        out
    }

    pub fn from_planar(width: usize, height: usize, planar: &[f64]) -> Frame {
        let n = width * height;
        assert_eq!(planar.len(), n * 3, "planar length");
        let mut data = Vec::with_capacity(n * 3);
        for i in 0..n {
            data.extend_from_slice(&[planar[i], planar[n + i], planar[2 * n + i]]);
        }
        Frame {
            width,
            height,
            data,
        }
    }
}

/// An ordered sequence of equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    id: String,
    fps: f64,
    frames: Vec<Frame>,
}

impl Clip {
    pub fn new(id: impl Into<String>, fps: f64, frames: Vec<Frame>) -> Result<Self, MediaError> {
        if frames.is_empty() {
            return Err(MediaError::InvalidClip("clip has no frames".into()));
        }
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(MediaError::InvalidClip(format!("fps must be positive, got {fps}")));
        }
        let dims = frames[0].dims();
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.dims() != dims) {
            return Err(MediaError::InvalidClip(format!(
                "frame {i} is {}x{}, expected {}x{}",
                f.width(),
                f.height(),
                dims.0,
                dims.1
            )));
        }
        Ok(Self {
            id: id.into(),
            fps,
            frames,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    /// Same id and fps, new frames.
    pub fn with_frames(&self, frames: Vec<Frame>) -> Result<Clip, MediaError> {
        Clip::new(self.id.clone(), self.fps, frames)
    }
}
