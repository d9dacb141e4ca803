use serde::{Deserialize, Serialize};

use crate::media::{Clip, Frame, ScoreFile};

use super::EvalError;

/// Floor on the mean RMSE before taking its reciprocal.
pub const SYNTH_EPS: f64 = 1e-6;

pub fn rmse_frames(pred: &Frame, target: &Frame) -> Result<f64, EvalError> {
    if pred.dims() != target.dims() {
        return Err(EvalError::Shape(format!("frame {:?} vs {:?}", pred.dims(), target.dims())));
    }
    let n = pred.data().len() as f64;
    let sq: f64 = pred.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sq / n).sqrt())
}

/// Root mean squared difference over every frame, pixel and channel.
pub fn rmse(pred: &Clip, target: &Clip) -> Result<f64, EvalError> {
    if pred.len() != target.len() {
        return Err(EvalError::Shape(format!("{} frames vs {}", pred.len(), target.len())));
    }
    if pred.dims() != target.dims() {
        return Err(EvalError::Shape(format!("clip {:?} vs {:?}", pred.dims(), target.dims())));
    }
    let mut sq = 0.0;
    let mut n = 0usize;
    for (a, b) in pred.frames().iter().zip(target.frames()) {
        sq += a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        n += a.data().len();
    }
    Ok((sq / n as f64).sqrt())
}

/// Uniform mean of the 12 values (`p` and 11 aux) of every listed clip.
pub fn s_real(scores: &ScoreFile, clip_ids: &[&str]) -> Result<f64, EvalError> {
    if clip_ids.is_empty() {
        return Err(EvalError::MissingClip("no clips listed".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for id in clip_ids {
        let entry = scores.get(id).ok_or_else(|| EvalError::MissingClip((*id).to_string()))?;
        for v in entry.values() {
            sum += v;
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

/// [`s_real`] over every clip in the file.
pub fn s_real_all(scores: &ScoreFile) -> Result<f64, EvalError> {
    let ids: Vec<&str> = scores.iter().map(|(id, _)| id).collect();
    s_real(scores, &ids)
}

/// `1 / max(mean(rmse), ε)`.
pub fn s_synth(rmses: &[f64]) -> Result<f64, EvalError> {
    if rmses.is_empty() {
        return Err(EvalError::Shape("s_synth needs at least one RMSE".into()));
    }
    if let Some(v) = rmses.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(EvalError::Shape(format!("invalid RMSE {v}")));
    }
    let mean = rmses.iter().sum::<f64>() / rmses.len() as f64;
    Ok(1.0 / mean.max(SYNTH_EPS))
}

pub fn s_obj(s_real: f64, s_synth: f64) -> f64 {
    s_real * s_synth
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveScore {
    pub s_real: f64,
    pub s_synth: f64,
    pub s_obj: f64,
}

impl ObjectiveScore {
    pub fn new(s_real: f64, s_synth: f64) -> Self {
        Self {
            s_real,
            s_synth,
            s_obj: s_obj(s_real, s_synth),
        }
    }

    pub fn compute(scores: &ScoreFile, clip_ids: &[&str], rmses: &[f64]) -> Result<Self, EvalError> {
        Ok(Self::new(s_real(scores, clip_ids)?, s_synth(rmses)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{ClipScores, AUX_SCORES};
    use std::collections::BTreeMap;

    fn file(entries: &[(&str, f64)]) -> ScoreFile {
        let map: BTreeMap<String, ClipScores> = entries
            .iter()
            .map(|(id, v)| (id.to_string(), ClipScores { p: *v, aux: vec![*v; AUX_SCORES] }))
            .collect();
        ScoreFile::new(map).unwrap()
    }

    #[test]
    fn s_real_examples() {
        assert_eq!(s_real_all(&file(&[("a", 0.5)])).unwrap(), 0.5);
        assert_eq!(s_real_all(&file(&[("a", 1.0), ("b", 0.0)])).unwrap(), 0.5);
        assert_eq!(s_real_all(&file(&[("a", 1.0), ("b", 1.0)])).unwrap(), 1.0);
        assert!(matches!(s_real(&file(&[("a", 1.0)]), &["b"]), Err(EvalError::MissingClip(_))));
    }

    #[test]
    fn s_synth_examples() {
        assert!((s_synth(&[0.1, 0.1, 0.1]).unwrap() - 10.0).abs() < 1e-12);
        assert!((s_synth(&[0.1, 0.3]).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(s_synth(&[0.0, 0.0]).unwrap(), 1e6);
        assert!(s_synth(&[]).is_err());
    }

    #[test]
    fn s_obj_examples() {
        assert_eq!(s_obj(0.5, 10.0), 5.0);
        assert_eq!(s_obj(0.0, 123.0), 0.0);
        assert_eq!(s_obj(1.0, 7.25), 7.25);
    }

    #[test]
    fn rmse_constant_offset() {
        let a = Clip::new("a", 30.0, vec![Frame::filled(4, 3, [0.2; 3])]).unwrap();
        let b = Clip::new("b", 30.0, vec![Frame::filled(4, 3, [0.2 + 10.0 / 255.0; 3])]).unwrap();
        assert!((rmse(&a, &b).unwrap() - 10.0 / 255.0).abs() < 1e-15);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
    }
}
