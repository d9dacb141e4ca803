//! Training configuration, named presets and layered overrides.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::loss::LossWeights;
use super::EnhanceError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial: f64,
    /// Halve the rate every this many steps; 0 disables halving.
    pub halve_every: u64,
    /// When set, cosine-anneal from `initial` to this value over the run
    /// instead of halving.
    #[serde(default)]
    pub cosine_final: Option<f64>,
}

impl LrSchedule {
    pub fn at(&self, step: u64, total: u64) -> f64 {
        if let Some(fin) = self.cosine_final {
            let t = if total <= 1 { 0.0 } else { step as f64 / (total - 1) as f64 };
            return fin + 0.5 * (self.initial - fin) * (1.0 + (std::f64::consts::PI * t).cos());
        }
        if self.halve_every == 0 {
            return self.initial;
        }
        self.initial * 0.5f64.powi((step / self.halve_every) as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    /// Restorer preset name: `unet`, `summer` or `oversized`.
    pub restorer: String,
    pub bank_k: usize,
    pub lut_size: usize,
    /// Side of the square predictor input.
    pub predictor_input: usize,
    /// Amplitude of the uniform perturbation on bank bases 1..k.
    pub bank_perturbation: f64,
    /// Start the restorer's output conv at zero (identity restorer).
    pub zero_init_output: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default)]
    pub preset: Option<String>,
    pub architecture: ArchConfig,
    pub loss: LossWeights,
    pub lr: LrSchedule,
    pub beta1: f64,
    pub beta2: f64,
    pub batch: usize,
    pub patch: usize,
    pub iterations: u64,
    pub seed: u64,
    /// Update bank lattices during stage-one training (the predictor is always
    /// trained).
    pub train_lattice: bool,
    /// Seed for the proxy perceptual feature net.
    pub perceptual_seed: u64,
}

impl Default for TrainConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        Self {
            preset: None,
            architecture: ArchConfig {
                restorer: "unet".into(),
                bank_k: 5,
                lut_size: 33,
                predictor_input: 64,
                bank_perturbation: 0.01,
                zero_init_output: true,
            },
            loss: LossWeights::default(),
            lr: LrSchedule {
                initial: 1e-3,
                halve_every: 1000,
                cosine_final: None,
            },
            beta1: 0.9,
            beta2: 0.99,
            batch: 4,
            patch: 64,
            iterations: 2000,
            seed: 0,
            train_lattice: true,
            perceptual_seed: 0x5eed,
        }
    }
}

pub const PRESETS: [&str; 6] = ["desk", "tmobile-stage1", "tmobile-stage2", "tmobile-finetune", "summer", "wizard-loss"];

impl TrainConfig {
    pub fn preset(name: &str) -> Result<Self, EnhanceError> {
        let mut c = Self::default();
        match name {
            "desk" => {}
            "tmobile-stage1" => {
                c.iterations = 200_000;
                c.batch = 32;
                c.patch = 512;
                c.lr = LrSchedule { initial: 2e-4, halve_every: 10_000, cosine_final: None };
            }
            "tmobile-stage2" => {
                c.iterations = 300_000;
                c.batch = 16;
                c.patch = 512;
                c.lr = LrSchedule { initial: 2e-4, halve_every: 10_000, cosine_final: None };
            }
            "tmobile-finetune" => {
                c.iterations = 20_000;
                c.batch = 16;
                c.patch = 512;
                c.lr = LrSchedule { initial: 1e-5, halve_every: 0, cosine_final: None };
            }
            "summer" => {
                c.architecture.restorer = "summer".into();
            }
            "wizard-loss" => {
                c.beta2 = 0.999;
                c.loss.lambda_quality = 0.75;
                c.lr = LrSchedule { initial: 1e-4, halve_every: 0, cosine_final: Some(1e-7) };
            }
            other => {
                return Err(EnhanceError::Config(format!("unknown preset {other:?} (expected one of {PRESETS:?})")));
            }
        }
        c.preset = Some(name.to_string());
        Ok(c)
    }

    /// Preset, then the file's fields, then `overrides`; later layers win
    /// field by field. A `preset` key in the file selects the base when
    /// `preset` is `None`.
    pub fn resolve(preset: Option<&str>, file: Option<&Value>, overrides: Option<&Value>) -> Result<Self, EnhanceError> {
        let name = preset
            .map(str::to_string)
            .or_else(|| file.and_then(|f| f.get("preset")).and_then(Value::as_str).map(str::to_string));
        let base = match &name {
            Some(n) => Self::preset(n)?,
            None => Self::default(),
        };
        let mut value = serde_json::to_value(&base).expect("config serializes");
        for layer in [file, overrides].into_iter().flatten() {
            merge(&mut value, layer);
        }
        if let Some(n) = &name {
            value["preset"] = Value::String(n.clone());
        }
        let config: Self = serde_json::from_value(value).map_err(|e| EnhanceError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), EnhanceError> {
        self.loss.validate()?;
        let bad = |m: &str| Err(EnhanceError::Config(m.to_string()));
        if self.batch == 0 || self.patch == 0 {
            return bad("batch and patch must be positive");
        }
        if !(self.lr.initial >= 0.0 && self.lr.initial.is_finite()) {
            return bad("learning rate must be >= 0");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.architecture.bank_k == 0 || self.architecture.lut_size < 2 {
            return bad("bank needs k >= 1 and LUT size >= 2");
        }
        if self.architecture.predictor_input == 0 {
            return bad("predictor input size must be positive");
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Recursive object merge; non-object values replace.
pub fn merge(base: &mut Value, layer: &Value) {
    match (base, layer) {
        (Value::Object(b), Value::Object(l)) => {
            for (k, v) in l {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, l) => *b = l.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn halving_schedule() {
        let s = LrSchedule { initial: 2e-4, halve_every: 10_000, cosine_final: None };
        assert_eq!(s.at(0, 100), 2e-4);
        assert_eq!(s.at(9_999, 100), 2e-4);
        assert_eq!(s.at(10_000, 100), 1e-4);
        assert_eq!(s.at(25_000, 100), 5e-5);
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let s = LrSchedule { initial: 1e-4, halve_every: 0, cosine_final: Some(1e-7) };
        assert!((s.at(0, 50) - 1e-4).abs() < 1e-18);
        assert!((s.at(49, 50) - 1e-7).abs() < 1e-18);
    }

    #[test]
    fn precedence_flag_over_file_over_preset() {
        let file = json!({"preset": "tmobile-stage1", "batch": 8, "lr": {"halve_every": 5}});
        let flags = json!({"batch": 2});
        let c = TrainConfig::resolve(None, Some(&file), Some(&flags)).unwrap();
        assert_eq!(c.batch, 2);
        assert_eq!(c.lr.halve_every, 5);
        assert_eq!(c.lr.initial, 2e-4);
        assert_eq!(c.patch, 512);
        assert_eq!(c.preset.as_deref(), Some("tmobile-stage1"));
    }

    #[test]
    fn all_presets_resolve() {
        for p in PRESETS {
            TrainConfig::preset(p).unwrap().validate().unwrap();
        }
        assert!(TrainConfig::preset("nope").is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = TrainConfig::preset("wizard-loss").unwrap();
        let back: TrainConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }
}
