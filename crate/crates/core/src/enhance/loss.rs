//! Training losses with their gradients, and the score-based quality loss.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::media::{quantize, Clip, ClipScores, Frame, ScoreFile, AUX_SCORES};
use crate::nn::{backward, forward, LayerKind, LayerSpec, ModelSpec, Params, Tensor4};
use crate::rng::SeededRng;

use super::EnhanceError;

/// Guard on the norm product in the cosine term.
pub const COSINE_EPS: f64 = 1e-8;

/// A scalar loss and its gradient with respect to the prediction, laid out
/// like the prediction.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage1Terms {
    pub l1: f64,
    pub cosine_color: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage2Terms {
    pub l2: f64,
    pub edge: f64,
    pub proxy_perceptual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_quality: f64,
    pub stage1: Stage1Terms,
    pub stage2: Stage2Terms,
    /// Lattice regularizers, summed over the bank.
    pub smoothness: f64,
    pub monotonicity: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_quality: 0.75,
            stage1: Stage1Terms { l1: 1.0, cosine_color: 1.0 },
            stage2: Stage2Terms { l2: 1.0, edge: 0.05, proxy_perceptual: 0.0 },
            smoothness: 1e-4,
            monotonicity: 10.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), EnhanceError> {
        let all = [
            ("lambda_quality", self.lambda_quality),
            ("l1", self.stage1.l1),
            ("cosine_color", self.stage1.cosine_color),
            ("l2", self.stage2.l2),
            ("edge", self.stage2.edge),
            ("proxy_perceptual", self.stage2.proxy_perceptual),
            ("smoothness", self.smoothness),
            ("monotonicity", self.monotonicity),
        ];
        for (name, v) in all {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(EnhanceError::Config(format!("loss weight {name} = {v} must be >= 0")));
            }
        }
        Ok(())
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_dims(a: &Frame, b: &Frame) -> Result<(), EnhanceError> {
    if a.dims() != b.dims() {
        return Err(EnhanceError::Dimension(format!("prediction {:?} vs target {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

/// `l1 · mean|p − t| + cosine_color · mean_pixels(1 − cos(p, t))` over RGB
/// vectors, with `cos = p·t / max(|p||t|, ε)`.
pub fn stage1_loss(pred: &Frame, target: &Frame, terms: Stage1Terms) -> Result<LossGrad, EnhanceError> {
    check_dims(pred, target)?;
    let p = pred.data();
    let t = target.data();
    let n = p.len() as f64;
    let pixels = pred.pixel_count() as f64;
    let mut grad = vec![0.0; p.len()];
    let mut l1 = 0.0;
    for i in 0..p.len() {
        let d = p[i] - t[i];
        l1 += d.abs();
        grad[i] = terms.l1 * sign(d) / n;
    }
    let mut cos_sum = 0.0;
    for (i, (pp, tt)) in p.chunks_exact(3).zip(t.chunks_exact(3)).enumerate() {
        let dot = pp[0] * tt[0] + pp[1] * tt[1] + pp[2] * tt[2];
        let np = (pp[0] * pp[0] + pp[1] * pp[1] + pp[2] * pp[2]).sqrt();
        let nt = (tt[0] * tt[0] + tt[1] * tt[1] + tt[2] * tt[2]).sqrt();
        let denom = np * nt;
        let g = &mut grad[i * 3..i * 3 + 3];
        if denom > COSINE_EPS {
            let cos = dot / denom;
            cos_sum += 1.0 - cos;
            for c in 0..3 {
                let dcos = tt[c] / denom - cos * pp[c] / (np * np);
                g[c] -= terms.cosine_color * dcos / pixels;
            }
        } else {
            cos_sum += 1.0 - dot / COSINE_EPS;
            for c in 0..3 {
                g[c] -= terms.cosine_color * tt[c] / COSINE_EPS / pixels;
            }
        }
    }
    let value = terms.l1 * l1 / n + terms.cosine_color * cos_sum / pixels;
    Ok(LossGrad { value, grad })
}

/// Fixed, seeded feature extractor for the proxy perceptual term: two conv3×3
/// + ReLU layers at 8 channels, then a 2× average downsample.
#[derive(Debug, Clone)]
pub struct ProxyPerceptual {
    pub spec: ModelSpec,
    pub params: Params,
}

impl ProxyPerceptual {
    pub fn new(seed: u64) -> Self {
        let spec = ModelSpec::new(
            "proxy-perceptual",
            3,
            vec![
                LayerSpec::conv("f1", 3, 1, 3, 8),
                LayerSpec::new("f1.act", LayerKind::Relu),
                LayerSpec::conv("f2", 3, 1, 8, 8),
                LayerSpec::new("f2.act", LayerKind::Relu),
                LayerSpec::new("pool", LayerKind::DownsampleAvg),
            ],
        )
        .expect("valid proxy spec");
        let params = Params::kaiming(&spec, &mut SeededRng::new(seed));
        Self { spec, params }
    }

    /// `mean|F(p) − F(t)|` and its gradient with respect to `p`.
    pub fn loss(&self, pred: &Tensor4, target: &Tensor4) -> Result<(f64, Tensor4), EnhanceError> {
        let (fp, cache) = forward(&self.spec, &self.params, pred)?;
        let (ft, _) = forward(&self.spec, &self.params, target)?;
        let n = fp.len() as f64;
        let mut g = Tensor4::zeros(fp.n, fp.c, fp.h, fp.w);
        let mut value = 0.0;
        for ((gi, a), b) in g.data.iter_mut().zip(&fp.data).zip(&ft.data) {
            value += (a - b).abs();
            *gi = sign(a - b) / n;
        }
        let (_, gx) = backward(&self.spec, &self.params, &cache, &g)?;
        Ok((value / n, gx))
    }
}

/// `l2 · mean(p − t)² + edge · mean|∇p − ∇t| + proxy · perceptual(p, t)`, where
/// `∇` is the horizontal and vertical forward difference of every plane.
pub fn stage2_loss(
    pred: &Tensor4,
    target: &Tensor4,
    terms: Stage2Terms,
    perceptual: Option<&ProxyPerceptual>,
) -> Result<(f64, Tensor4), EnhanceError> {
    if !pred.same_shape(target) {
        return Err(EnhanceError::Dimension(format!("prediction {:?} vs target {:?}", pred.dims(), target.dims())));
    }
    let n = pred.len() as f64;
    let mut grad = Tensor4::zeros(pred.n, pred.c, pred.h, pred.w);
    let mut l2 = 0.0;
    for ((g, p), t) in grad.data.iter_mut().zip(&pred.data).zip(&target.data) {
        let d = p - t;
        l2 += d * d;
        *g = terms.l2 * 2.0 * d / n;
    }
    let mut value = terms.l2 * l2 / n;

    if terms.edge > 0.0 {
        let (h, w) = (pred.h, pred.w);
        let count = (pred.n * pred.c * (h * (w - 1) + (h - 1) * w)) as f64;
        if count > 0.0 {
            let mut edge = 0.0;
            for b in 0..pred.n {
                for c in 0..pred.c {
                    let p = pred.plane(b, c);
                    let t = target.plane(b, c);
                    let g = grad.plane_mut(b, c);
                    let mut term = |i: usize, j: usize| {
                        let d = (p[j] - p[i]) - (t[j] - t[i]);
                        edge += d.abs();
                        let s = terms.edge * sign(d) / count;
                        g[j] += s;
                        g[i] -= s;
                    };
                    for y in 0..h {
                        for x in 0..w {
                            let i = y * w + x;
                            if x + 1 < w {
                                term(i, i + 1);
                            }
                            if y + 1 < h {
                                term(i, i + w);
                            }
                        }
                    }
                }
            }
            value += terms.edge * edge / count;
        }
    }

    if terms.proxy_perceptual > 0.0 {
        let net = perceptual.ok_or_else(|| EnhanceError::Config("proxy perceptual weight set without a feature net".into()))?;
        let (v, g) = net.loss(pred, target)?;
        value += terms.proxy_perceptual * v;
        for (a, b) in grad.data.iter_mut().zip(&g.data) {
            *a += terms.proxy_perceptual * b;
        }
    }
    Ok((value, grad))
}

/// Per-frame quality in `[0, 1]`, higher is better.
pub trait QualityScorer {
    fn name(&self) -> &str;
    fn score(&self, frames: &[Frame]) -> Result<Vec<f64>, EnhanceError>;
}

/// Which value of a score-file entry to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreField {
    P,
    Aux(usize),
}

/// Replays externally computed scores: every frame of the bound clip gets the
/// clip's stored value.
#[derive(Debug, Clone)]
pub struct FileScorer {
    name: String,
    value: f64,
}

impl FileScorer {
    pub fn for_clip(scores: &ScoreFile, clip_id: &str, field: ScoreField) -> Result<Self, EnhanceError> {
        let entry = scores
            .get(clip_id)
            .ok_or_else(|| EnhanceError::Scorer(format!("no scores for clip {clip_id}")))?;
        let value = match field {
            ScoreField::P => entry.p,
            ScoreField::Aux(i) => *entry
                .aux
                .get(i)
                .ok_or_else(|| EnhanceError::Scorer(format!("aux index {i} out of range")))?,
        };
        Ok(Self { name: format!("file:{clip_id}"), value })
    }
}

impl QualityScorer for FileScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, frames: &[Frame]) -> Result<Vec<f64>, EnhanceError> {
        Ok(vec![self.value; frames.len()])
    }
}

/// Deterministic stand-in: SHA-256 of the salt and the 8-bit frame, mapped to
/// `[0, 1]`.
#[derive(Debug, Clone)]
pub struct StubScorer {
    salt: String,
}

impl StubScorer {
    pub fn new(salt: impl Into<String>) -> Self {
        Self { salt: salt.into() }
    }
}

impl QualityScorer for StubScorer {
    fn name(&self) -> &str {
        &self.salt
    }

    fn score(&self, frames: &[Frame]) -> Result<Vec<f64>, EnhanceError> {
        Ok(frames
            .iter()
            .map(|f| {
                let mut h = Sha256::new();
                h.update(self.salt.as_bytes());
                h.update((f.width() as u64).to_le_bytes());
                h.update((f.height() as u64).to_le_bytes());
                let bytes: Vec<u8> = f.data().iter().map(|v| quantize(v.clamp(0.0, 1.0)).unwrap_or(0)).collect();
                h.update(&bytes);
                let d = h.finalize();
                let x = u64::from_le_bytes(d[..8].try_into().expect("8 bytes"));
                x as f64 / u64::MAX as f64
            })
            .collect())
    }
}

/// One scorer for `p` and one per aux value; scores clips into a score file
/// entry by averaging over frames.
pub struct ScoringSuite {
    pub p: Box<dyn QualityScorer + Send + Sync>,
    pub aux: Vec<Box<dyn QualityScorer + Send + Sync>>,
}

impl ScoringSuite {
    /// Twelve independently salted stub scorers.
    pub fn stub(salt: &str) -> Self {
        Self {
            p: Box::new(StubScorer::new(format!("{salt}/p"))),
            aux: (0..AUX_SCORES)
                .map(|i| Box::new(StubScorer::new(format!("{salt}/aux{i}"))) as Box<dyn QualityScorer + Send + Sync>)
                .collect(),
        }
    }

    pub fn score_clip(&self, clip: &Clip) -> Result<ClipScores, EnhanceError> {
        if self.aux.len() != AUX_SCORES {
            return Err(EnhanceError::Scorer(format!("expected {AUX_SCORES} aux scorers, got {}", self.aux.len())));
        }
        let mean = |s: &(dyn QualityScorer + Send + Sync)| -> Result<f64, EnhanceError> {
            let v = s.score(clip.frames())?;
            if v.is_empty() {
                return Err(EnhanceError::Scorer(format!("{} returned no scores", s.name())));
            }
            let m = v.iter().sum::<f64>() / v.len() as f64;
            if !(0.0..=1.0).contains(&m) {
                return Err(EnhanceError::Scorer(format!("{} returned {m} outside [0, 1]", s.name())));
            }
            Ok(m)
        };
        Ok(ClipScores {
            p: mean(self.p.as_ref())?,
            aux: self.aux.iter().map(|s| mean(s.as_ref())).collect::<Result<_, _>>()?,
        })
    }

    pub fn score_clips(&self, clips: &[Clip]) -> Result<ScoreFile, EnhanceError> {
        let mut map = std::collections::BTreeMap::new();
        for c in clips {
            map.insert(c.id().to_string(), self.score_clip(c)?);
        }
        Ok(ScoreFile::new(map)?)
    }
}

/// Constant scorer, mostly for tests and examples.
#[derive(Debug, Clone)]
pub struct ConstScorer(pub f64);

impl QualityScorer for ConstScorer {
    fn name(&self) -> &str {
        "const"
    }

    fn score(&self, frames: &[Frame]) -> Result<Vec<f64>, EnhanceError> {
        Ok(vec![self.0; frames.len()])
    }
}

fn mean_score(scorer: &dyn QualityScorer, frames: &[Frame]) -> Result<f64, EnhanceError> {
    let scores = scorer.score(frames)?;
    if scores.len() != frames.len() {
        return Err(EnhanceError::Scorer(format!(
            "{} returned {} scores for {} frames",
            scorer.name(),
            scores.len(),
            frames.len()
        )));
    }
    if let Some(v) = scores.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(EnhanceError::Scorer(format!("{} returned {v} outside [0, 1]", scorer.name())));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// `(1 − mean Q_c) + (1 − mean Q_v)` over the batch.
pub fn quality_loss(frames: &[Frame], clip: &dyn QualityScorer, vqa: &dyn QualityScorer) -> Result<f64, EnhanceError> {
    if frames.is_empty() {
        return Err(EnhanceError::Scorer("quality loss needs at least one frame".into()));
    }
    Ok((1.0 - mean_score(clip, frames)?) + (1.0 - mean_score(vqa, frames)?))
}

pub fn total_loss(colorspace: f64, quality: f64, lambda: f64) -> f64 {
    colorspace + lambda * quality
}
