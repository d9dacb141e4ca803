//! Stage-one (predicted LUT blend) and stage-two (restorer) models, frame
//! and clip inference, and on-disk persistence.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::degrade::resize_bilinear;
use crate::lut::{apply_lut, blend_bank, Lut3D, LutBank};
use crate::media::{read_lut_cube, write_lut_cube, Clip, Frame};
use crate::nn::{audit_macs, count_macs, forward, load_checkpoint, save_checkpoint, MacReport, ModelSpec, Params, Tensor4};
use crate::rng::SeededRng;

use super::arch::predictor_spec;
use super::EnhanceError;

/// The per-frame MAC budget of the challenge.
pub const MAC_BUDGET: f64 = 20.0e9;

pub fn frame_to_tensor(frame: &Frame) -> Tensor4 {
    let (w, h) = frame.dims();
    Tensor4::from_vec(1, 3, h, w, frame.to_planar())
}

/// Item `b` of a 3-channel tensor as a frame, unclamped.
pub fn tensor_to_frame(t: &Tensor4, b: usize) -> Frame {
    Frame::from_planar(t.w, t.h, t.item(b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOneModel {
    pub bank: LutBank,
    pub predictor: ModelSpec,
    pub params: Params,
    /// Side of the square the predictor sees.
    pub input_size: usize,
}

impl StageOneModel {
    pub fn new(bank: LutBank, predictor: ModelSpec, params: Params, input_size: usize) -> Result<Self, EnhanceError> {
        let model = Self {
            bank,
            predictor,
            params,
            input_size,
        };
        model.validate()?;
        Ok(model)
    }

    /// Default predictor with Kaiming weights and a bank whose basis 0 is the
    /// identity and the others carry a small perturbation.
    pub fn init(k: usize, lut_size: usize, input_size: usize, perturbation: f64, seed: u64) -> Result<Self, EnhanceError> {
        let predictor = predictor_spec(k);
        let params = Params::kaiming(&predictor, &mut SeededRng::derive(seed, 1));
        let bank = LutBank::initialized(k, lut_size, perturbation, crate::rng::mix_seed(seed, 2));
        Self::new(bank, predictor, params, input_size)
    }

    pub fn validate(&self) -> Result<(), EnhanceError> {
        let s = self.predictor.output_shape(self.input_size, self.input_size)?;
        if (s.c, s.h, s.w) != (self.bank.k(), 1, 1) {
            return Err(EnhanceError::Dimension(format!(
                "predictor yields {}x{}x{}, bank has {} LUTs",
                s.c,
                s.h,
                s.w,
                self.bank.k()
            )));
        }
        if self.params.convs.len() != self.predictor.conv_count() {
            return Err(EnhanceError::Dimension("predictor parameters do not match spec".into()));
        }
        Ok(())
    }

    /// The frame bilinearly resampled to `input_size²`, as a 1-item tensor.
    pub fn predictor_input(&self, frame: &Frame) -> Tensor4 {
        frame_to_tensor(&resize_bilinear(frame, self.input_size, self.input_size))
    }

    pub fn weights(&self, frame: &Frame) -> Result<Vec<f64>, EnhanceError> {
        let (y, _) = forward(&self.predictor, &self.params, &self.predictor_input(frame))?;
        Ok(y.data)
    }

    pub fn fused_lut(&self, frame: &Frame) -> Result<Lut3D, EnhanceError> {
        Ok(blend_bank(&self.bank, &self.weights(frame)?)?)
    }

    pub fn macs(&self) -> Result<u64, EnhanceError> {
        Ok(count_macs(&self.predictor, self.input_size, self.input_size)?)
    }

    /// SHA-256 over predictor parameters and bank lattices.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.params.digest().as_bytes());
        for lut in self.bank.luts() {
            for v in lut.as_flat() {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Writes `stage1.json`, `predictor.ckpt`, `bank.bin` (exact) and one
    /// `bank_<i>.cube` per basis.
    pub fn save(&self, dir: &Path) -> Result<(), EnhanceError> {
        fs::create_dir_all(dir).map_err(|e| EnhanceError::io(dir, e))?;
        let meta = StageOneMeta {
            predictor: self.predictor.clone(),
            input_size: self.input_size,
            k: self.bank.k(),
            lut_size: self.bank.lut_size(),
        };
        write_json(&dir.join("stage1.json"), &meta)?;
        save_checkpoint(&self.predictor, &self.params, &dir.join("predictor.ckpt"))?;
        let mut bin = Vec::new();
        for lut in self.bank.luts() {
            for v in lut.as_flat() {
                bin.extend_from_slice(&v.to_le_bytes());
            }
        }
        let path = dir.join("bank.bin");
        fs::write(&path, bin).map_err(|e| EnhanceError::io(&path, e))?;
        for (i, lut) in self.bank.luts().iter().enumerate() {
            write_lut_cube(lut, &dir.join(format!("bank_{i}.cube")))?;
        }
        Ok(())
    }

    /// Loads what [`save`](Self::save) wrote. Without `bank.bin` the `.cube`
    /// files are used.
    pub fn load(dir: &Path) -> Result<Self, EnhanceError> {
        let meta: StageOneMeta = read_json(&dir.join("stage1.json"))?;
        let params = load_checkpoint(&meta.predictor, &dir.join("predictor.ckpt"))?;
        let bin_path = dir.join("bank.bin");
        let luts = if bin_path.exists() {
            let bytes = fs::read(&bin_path).map_err(|e| EnhanceError::io(&bin_path, e))?;
            let per = meta.lut_size.pow(3) * 3;
            if bytes.len() != per * meta.k * 8 {
                return Err(EnhanceError::Config(format!("{} has {} bytes, expected {}", bin_path.display(), bytes.len(), per * meta.k * 8)));
            }
            let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            vals.chunks_exact(per)
                .map(|c| {
                    let lattice = c.chunks_exact(3).map(|e| [e[0], e[1], e[2]]).collect();
                    Lut3D::from_lattice(meta.lut_size, lattice)
                })
                .collect::<Result<Vec<_>, _>>()?
        } else {
            (0..meta.k)
                .map(|i| read_lut_cube(&dir.join(format!("bank_{i}.cube"))))
                .collect::<Result<Vec<_>, _>>()?
        };
        Self::new(LutBank::new(luts)?, meta.predictor, params, meta.input_size)
    }
}

#[derive(Serialize, Deserialize)]
struct StageOneMeta {
    predictor: ModelSpec,
    input_size: usize,
    k: usize,
    lut_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTwoModel {
    pub spec: ModelSpec,
    pub params: Params,
}

impl StageTwoModel {
    pub fn new(spec: ModelSpec, params: Params) -> Result<Self, EnhanceError> {
        if spec.input_channels != 3 {
            return Err(EnhanceError::Dimension("restorer must take 3 channels".into()));
        }
        if params.convs.len() != spec.conv_count() {
            return Err(EnhanceError::Dimension("restorer parameters do not match spec".into()));
        }
        Ok(Self { spec, params })
    }

    /// Kaiming weights; with `zero_output` the last conv starts at zero so
    /// a residual restorer begins as the identity.
    pub fn init(spec: ModelSpec, seed: u64, zero_output: bool) -> Result<Self, EnhanceError> {
        let mut params = Params::kaiming(&spec, &mut SeededRng::derive(seed, 3));
        if zero_output {
            if let Some(last) = params.convs.last_mut() {
                last.weight.iter_mut().for_each(|w| *w = 0.0);
                last.bias.iter_mut().for_each(|b| *b = 0.0);
            }
        }
        Self::new(spec, params)
    }

    /// Restorer output, unclamped.
    pub fn run(&self, frame: &Frame) -> Result<Frame, EnhanceError> {
        let (y, _) = forward(&self.spec, &self.params, &frame_to_tensor(frame))?;
        if (y.c, y.h, y.w) != (3, frame.height(), frame.width()) {
            return Err(EnhanceError::Dimension(format!("restorer output {:?} for input {:?}", y.dims(), frame.dims())));
        }
        Ok(tensor_to_frame(&y, 0))
    }

    pub fn macs(&self, height: usize, width: usize) -> Result<u64, EnhanceError> {
        Ok(count_macs(&self.spec, height, width)?)
    }

    pub fn digest(&self) -> String {
        self.params.digest()
    }

    /// Writes `restorer.json` and `restorer.ckpt`.
    pub fn save(&self, dir: &Path) -> Result<(), EnhanceError> {
        fs::create_dir_all(dir).map_err(|e| EnhanceError::io(dir, e))?;
        write_json(&dir.join("restorer.json"), &self.spec)?;
        save_checkpoint(&self.spec, &self.params, &dir.join("restorer.ckpt"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, EnhanceError> {
        let spec: ModelSpec = read_json(&dir.join("restorer.json"))?;
        spec.validate()?;
        let params = load_checkpoint(&spec, &dir.join("restorer.ckpt"))?;
        Self::new(spec, params)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), EnhanceError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text).map_err(|e| EnhanceError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, EnhanceError> {
    let text = fs::read_to_string(path).map_err(|e| EnhanceError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| EnhanceError::Config(format!("{}: {e}", path.display())))
}

/// Downsample, predict blend weights, fuse the bank, apply the LUT (clamped),
/// then optionally add the restorer's residual and clamp again.
pub fn enhance_frame(s1: &StageOneModel, s2: Option<&StageTwoModel>, frame: &Frame) -> Result<Frame, EnhanceError> {
    let graded = apply_lut(&s1.fused_lut(frame)?, frame);
    match s2 {
        None => Ok(graded),
        Some(r) => Ok(r.run(&graded)?.clamped()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhanceReport {
    pub frames: usize,
    pub latency_ms_mean: f64,
    pub latency_ms_median: f64,
    pub macs_predictor: u64,
    pub macs_restorer: u64,
    pub macs_total: u64,
    pub audit: MacReport,
}

/// Enhances every frame in order and reports per-frame wall-clock latency
/// and MACs (predictor at `d×d` plus restorer at full resolution).
pub fn enhance_clip(s1: &StageOneModel, s2: Option<&StageTwoModel>, clip: &Clip) -> Result<(Clip, EnhanceReport), EnhanceError> {
    let (w, h) = clip.dims();
    let macs_predictor = s1.macs()?;
    let macs_restorer = match s2 {
        Some(r) => r.macs(h, w)?,
        None => 0,
    };
    let mut frames = Vec::with_capacity(clip.len());
    let mut latencies = Vec::with_capacity(clip.len());
    for f in clip.frames() {
        let t0 = Instant::now();
        frames.push(enhance_frame(s1, s2, f)?);
        latencies.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    let mean = latencies.iter().sum::<f64>() / latencies.len().max(1) as f64;
    let mut sorted = latencies.clone();
    sorted.sort_by(f64::total_cmp);
    let median = match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    };
    let macs_total = macs_predictor + macs_restorer;
    let report = EnhanceReport {
        frames: frames.len(),
        latency_ms_mean: mean,
        latency_ms_median: median,
        macs_predictor,
        macs_restorer,
        macs_total,
        audit: audit_macs(macs_total, Some(MAC_BUDGET)),
    };
    Ok((clip.with_frames(frames)?, report))
}
