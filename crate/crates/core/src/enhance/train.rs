//! Objectives with exact gradients and the three training loops.

use serde::{Deserialize, Serialize};

use crate::lut::{apply_lut_unclamped, blend_bank, lut_gradients, lut_regularizers, Lut3D};
use crate::media::{Clip, Frame};
use crate::nn::{backward, forward, Cache, OptimKind, OptimState, ParamSlot, Params, Tensor4};
use crate::rng::SeededRng;

use super::arch::restorer_preset;
use super::config::TrainConfig;
use super::loss::{stage1_loss, stage2_loss, LossWeights, ProxyPerceptual};
use super::model::{frame_to_tensor, tensor_to_frame, StageOneModel, StageTwoModel};
use super::EnhanceError;

/// One aligned (degraded, target) frame pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPair {
    pub input: Frame,
    pub target: Frame,
}

impl TrainPair {
    pub fn new(input: Frame, target: Frame) -> Result<Self, EnhanceError> {
        if input.dims() != target.dims() {
            return Err(EnhanceError::Dimension(format!("pair {:?} vs {:?}", input.dims(), target.dims())));
        }
        Ok(Self { input, target })
    }
}

/// Frame-aligned pairs from `(degraded, target)` clips.
pub fn pairs_from_clips(clips: &[(Clip, Clip)]) -> Result<Vec<TrainPair>, EnhanceError> {
    let mut out = Vec::new();
    for (a, b) in clips {
        if a.len() != b.len() {
            return Err(EnhanceError::Dimension(format!(
                "clip {} has {} frames, {} has {}",
                a.id(),
                a.len(),
                b.id(),
                b.len()
            )));
        }
        for (x, y) in a.frames().iter().zip(b.frames()) {
            out.push(TrainPair::new(x.clone(), y.clone())?);
        }
    }
    Ok(out)
}

/// `batch` random crops of at most `patch²`, each from a uniformly chosen pair.
pub fn sample_batch(pairs: &[TrainPair], batch: usize, patch: usize, rng: &mut SeededRng) -> Vec<TrainPair> {
    (0..batch)
        .map(|_| {
            let p = &pairs[rng.below(pairs.len())];
            let (w, h) = p.input.dims();
            let (cw, ch) = (patch.min(w), patch.min(h));
            let x0 = rng.below(w - cw + 1);
            let y0 = rng.below(h - ch + 1);
            TrainPair {
                input: p.input.crop(x0, y0, cw, ch),
                target: p.target.crop(x0, y0, cw, ch),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub losses: Vec<f64>,
    pub lrs: Vec<f64>,
}

impl TrainLog {
    pub fn last(&self) -> Option<f64> {
        self.losses.last().copied()
    }
}

/// Gradients of a stage-one objective.
#[derive(Debug, Clone)]
pub struct Stage1Grads {
    pub predictor: Params,
    pub bank: Vec<Vec<[f64; 3]>>,
}

/// Forward state of stage one over a batch.
pub struct Stage1Forward {
    pub weights: Tensor4,
    cache: Cache,
    pub fused: Vec<Lut3D>,
    /// LUT output per item, unclamped.
    pub outputs: Vec<Frame>,
}

pub fn stage1_forward(model: &StageOneModel, inputs: &[&Frame]) -> Result<Stage1Forward, EnhanceError> {
    let x = Tensor4::stack(&inputs.iter().map(|f| model.predictor_input(f)).collect::<Vec<_>>());
    let (weights, cache) = forward(&model.predictor, &model.params, &x)?;
    let k = model.bank.k();
    let mut fused = Vec::with_capacity(inputs.len());
    let mut outputs = Vec::with_capacity(inputs.len());
    for (b, f) in inputs.iter().enumerate() {
        let lut = blend_bank(&model.bank, &weights.data[b * k..(b + 1) * k])?;
        outputs.push(apply_lut_unclamped(&lut, f));
        fused.push(lut);
    }
    Ok(Stage1Forward {
        weights,
        cache,
        fused,
        outputs,
    })
}

/// Pulls per-item output gradients (interleaved RGB) back to the bank
/// lattices and, through the blend weights and softmax, to the predictor.
pub fn stage1_backward(
    model: &StageOneModel,
    inputs: &[&Frame],
    fwd: &Stage1Forward,
    grad_outputs: &[Vec<f64>],
) -> Result<Stage1Grads, EnhanceError> {
    let k = model.bank.k();
    let size = model.bank.luts()[0].lattice().len();
    let mut bank = vec![vec![[0.0; 3]; size]; k];
    let mut grad_w = Tensor4::zeros(inputs.len(), k, 1, 1);
    for (b, (f, g)) in inputs.iter().zip(grad_outputs).enumerate() {
        let gl = lut_gradients(&fwd.fused[b], f, g);
        for (i, basis) in model.bank.luts().iter().enumerate() {
            let w = fwd.weights.data[b * k + i];
            let mut dot = 0.0;
            for (j, ((acc, ge), e)) in bank[i].iter_mut().zip(&gl).zip(basis.lattice()).enumerate() {
                let coord = basis.coord_of(j);
                for c in 0..3 {
                    acc[c] += w * ge[c];
                    dot += ge[c] * (e[c] - coord[c]);
                }
            }
            grad_w.data[b * k + i] = dot;
        }
    }
    let (predictor, _) = backward(&model.predictor, &model.params, &fwd.cache, &grad_w)?;
    Ok(Stage1Grads { predictor, bank })
}

/// Adds the weighted smoothness and monotonicity of every basis.
fn add_regularizers(model: &StageOneModel, weights: &LossWeights, grads: &mut Stage1Grads) -> f64 {
    if weights.smoothness == 0.0 && weights.monotonicity == 0.0 {
        return 0.0;
    }
    let mut value = 0.0;
    for (lut, g) in model.bank.luts().iter().zip(&mut grads.bank) {
        let r = lut_regularizers(lut);
        value += weights.smoothness * r.smoothness + weights.monotonicity * r.monotonicity;
        for ((acc, s), m) in g.iter_mut().zip(&r.grad_smoothness).zip(&r.grad_monotonicity) {
            for c in 0..3 {
                acc[c] += weights.smoothness * s[c] + weights.monotonicity * m[c];
            }
        }
    }
    value
}

/// Batch-mean stage-one loss (L1 + cosine color) plus lattice regularizers.
pub fn stage1_objective(model: &StageOneModel, batch: &[TrainPair], weights: &LossWeights) -> Result<(f64, Stage1Grads), EnhanceError> {
    let inputs: Vec<&Frame> = batch.iter().map(|p| &p.input).collect();
    let fwd = stage1_forward(model, &inputs)?;
    let scale = 1.0 / batch.len() as f64;
    let mut value = 0.0;
    let mut grad_out = Vec::with_capacity(batch.len());
    for (out, p) in fwd.outputs.iter().zip(batch) {
        let l = stage1_loss(out, &p.target, weights.stage1)?;
        value += scale * l.value;
        grad_out.push(l.grad.into_iter().map(|g| g * scale).collect());
    }
    let mut grads = stage1_backward(model, &inputs, &fwd, &grad_out)?;
    value += add_regularizers(model, weights, &mut grads);
    Ok((value, grads))
}

/// Stage-two loss of the restorer on a batch tensor and its parameter gradient.
pub fn stage2_objective(
    model: &StageTwoModel,
    input: &Tensor4,
    target: &Tensor4,
    weights: &LossWeights,
    perceptual: Option<&ProxyPerceptual>,
) -> Result<(f64, Params), EnhanceError> {
    let (y, cache) = forward(&model.spec, &model.params, input)?;
    let (value, g) = stage2_loss(&y, target, weights.stage2, perceptual)?;
    let (grads, _) = backward(&model.spec, &model.params, &cache, &g)?;
    Ok((value, grads))
}

fn stack_frames(frames: &[&Frame]) -> Tensor4 {
    Tensor4::stack(&frames.iter().map(|f| frame_to_tensor(f)).collect::<Vec<_>>())
}

/// Stage-two loss of the full composite `restorer(lut(x))` with gradients for
/// both stages. The LUT output is not clamped, so the path is differentiable.
pub fn joint_objective(
    s1: &StageOneModel,
    s2: &StageTwoModel,
    batch: &[TrainPair],
    weights: &LossWeights,
    perceptual: Option<&ProxyPerceptual>,
) -> Result<(f64, Stage1Grads, Params), EnhanceError> {
    let inputs: Vec<&Frame> = batch.iter().map(|p| &p.input).collect();
    let fwd = stage1_forward(s1, &inputs)?;
    let mid = stack_frames(&fwd.outputs.iter().collect::<Vec<_>>());
    let target = stack_frames(&batch.iter().map(|p| &p.target).collect::<Vec<_>>());
    let (y, cache) = forward(&s2.spec, &s2.params, &mid)?;
    let (mut value, g) = stage2_loss(&y, &target, weights.stage2, perceptual)?;
    let (g2, gx) = backward(&s2.spec, &s2.params, &cache, &g)?;
    let grad_out: Vec<Vec<f64>> = (0..batch.len()).map(|b| tensor_to_frame(&gx, b).into_data()).collect();
    let mut g1 = stage1_backward(s1, &inputs, &fwd, &grad_out)?;
    value += add_regularizers(s1, weights, &mut g1);
    Ok((value, g1, g2))
}

fn optimizer(config: &TrainConfig) -> Result<OptimState, EnhanceError> {
    Ok(OptimState::new(OptimKind::adam(config.lr.initial, config.beta1, config.beta2))?)
}

/// One optimizer step over whichever groups are present, in a fixed order:
/// predictor, bank, restorer.
fn update(
    opt: &mut OptimState,
    s1: Option<(&mut StageOneModel, &Stage1Grads, bool)>,
    s2: Option<(&mut StageTwoModel, &Params)>,
) -> Result<(), EnhanceError> {
    let k = s1.as_ref().map_or(0, |(m, _, _)| m.bank.k());
    let bank_names: Vec<String> = (0..k).map(|i| format!("bank.{i}")).collect();
    let mut slots: Vec<ParamSlot<'_>> = Vec::new();
    let mut keep_s1;
    let keep_g1;
    let mut keep_s2;
    let keep_g2;
    if let Some((m, g, lattice)) = s1 {
        keep_s1 = m.params.tensors_mut();
        keep_g1 = g.predictor.tensors();
        for ((name, v), (_, gv)) in keep_s1.iter_mut().zip(&keep_g1) {
            slots.push(ParamSlot { name, value: v, grad: gv });
        }
        if lattice {
            for ((i, lut), gb) in m.bank.luts_mut().iter_mut().enumerate().zip(&g.bank) {
                slots.push(ParamSlot {
                    name: &bank_names[i],
                    value: lut.as_flat_mut(),
                    grad: gb.as_flattened(),
                });
            }
        }
    }
    if let Some((m, g)) = s2 {
        keep_s2 = m.params.tensors_mut();
        keep_g2 = g.tensors();
        for ((name, v), (_, gv)) in keep_s2.iter_mut().zip(&keep_g2) {
            slots.push(ParamSlot { name, value: v, grad: gv });
        }
    }
    opt.step(&mut slots)?;
    Ok(())
}

fn check_finite(value: f64, step: u64) -> Result<(), EnhanceError> {
    if !value.is_finite() {
        return Err(EnhanceError::NonFiniteLoss { step });
    }
    Ok(())
}

fn require_pairs(pairs: &[TrainPair]) -> Result<(), EnhanceError> {
    if pairs.is_empty() {
        return Err(EnhanceError::Config("training needs at least one pair".into()));
    }
    Ok(())
}

/// Trains a fresh stage-one model from the configured architecture.
pub fn train_stage1(pairs: &[TrainPair], config: &TrainConfig) -> Result<(StageOneModel, TrainLog), EnhanceError> {
    let a = &config.architecture;
    let model = StageOneModel::init(a.bank_k, a.lut_size, a.predictor_input, a.bank_perturbation, config.seed)?;
    continue_stage1(model, pairs, config)
}

/// Adam on predictor weights and (when enabled) bank lattices.
pub fn continue_stage1(mut model: StageOneModel, pairs: &[TrainPair], config: &TrainConfig) -> Result<(StageOneModel, TrainLog), EnhanceError> {
    require_pairs(pairs)?;
    config.validate()?;
    let mut rng = SeededRng::derive(config.seed, 101);
    let mut opt = optimizer(config)?;
    let mut log = TrainLog::default();
    for step in 0..config.iterations {
        let lr = config.lr.at(step, config.iterations);
        opt.set_lr(lr);
        let batch = sample_batch(pairs, config.batch, config.patch, &mut rng);
        let (loss, grads) = stage1_objective(&model, &batch, &config.loss)?;
        check_finite(loss, step)?;
        update(&mut opt, Some((&mut model, &grads, config.train_lattice)), None)?;
        log.losses.push(loss);
        log.lrs.push(lr);
    }
    Ok((model, log))
}

/// Trains a fresh restorer from the configured preset.
pub fn train_stage2(pairs: &[TrainPair], config: &TrainConfig) -> Result<(StageTwoModel, TrainLog), EnhanceError> {
    let spec = restorer_preset(&config.architecture.restorer)?;
    let model = StageTwoModel::init(spec, config.seed, config.architecture.zero_init_output)?;
    continue_stage2(model, pairs, config)
}

pub fn continue_stage2(mut model: StageTwoModel, pairs: &[TrainPair], config: &TrainConfig) -> Result<(StageTwoModel, TrainLog), EnhanceError> {
    require_pairs(pairs)?;
    config.validate()?;
    let perceptual = (config.loss.stage2.proxy_perceptual > 0.0).then(|| ProxyPerceptual::new(config.perceptual_seed));
    let mut rng = SeededRng::derive(config.seed, 102);
    let mut opt = optimizer(config)?;
    let mut log = TrainLog::default();
    for step in 0..config.iterations {
        let lr = config.lr.at(step, config.iterations);
        opt.set_lr(lr);
        let batch = sample_batch(pairs, config.batch, config.patch, &mut rng);
        let x = stack_frames(&batch.iter().map(|p| &p.input).collect::<Vec<_>>());
        let t = stack_frames(&batch.iter().map(|p| &p.target).collect::<Vec<_>>());
        let (loss, grads) = stage2_objective(&model, &x, &t, &config.loss, perceptual.as_ref())?;
        check_finite(loss, step)?;
        update(&mut opt, None, Some((&mut model, &grads)))?;
        log.losses.push(loss);
        log.lrs.push(lr);
    }
    Ok((model, log))
}

/// End-to-end fine-tuning of both stages on the composite loss.
pub fn finetune_joint(
    mut s1: StageOneModel,
    mut s2: StageTwoModel,
    pairs: &[TrainPair],
    config: &TrainConfig,
) -> Result<(StageOneModel, StageTwoModel, TrainLog), EnhanceError> {
    require_pairs(pairs)?;
    config.validate()?;
    let perceptual = (config.loss.stage2.proxy_perceptual > 0.0).then(|| ProxyPerceptual::new(config.perceptual_seed));
    let mut rng = SeededRng::derive(config.seed, 103);
    let mut opt = optimizer(config)?;
    let mut log = TrainLog::default();
    for step in 0..config.iterations {
        let lr = config.lr.at(step, config.iterations);
        opt.set_lr(lr);
        let batch = sample_batch(pairs, config.batch, config.patch, &mut rng);
        let (loss, g1, g2) = joint_objective(&s1, &s2, &batch, &config.loss, perceptual.as_ref())?;
        check_finite(loss, step)?;
        update(&mut opt, Some((&mut s1, &g1, config.train_lattice)), Some((&mut s2, &g2)))?;
        log.losses.push(loss);
        log.lrs.push(lr);
    }
    Ok((s1, s2, log))
}

/// Mean composite loss over whole pairs, without updating anything.
pub fn joint_loss(s1: &StageOneModel, s2: &StageTwoModel, pairs: &[TrainPair], weights: &LossWeights) -> Result<f64, EnhanceError> {
    let mut total = 0.0;
    for p in pairs {
        total += joint_objective(s1, s2, std::slice::from_ref(p), weights, None)?.0;
    }
    Ok(total / pairs.len() as f64)
}
