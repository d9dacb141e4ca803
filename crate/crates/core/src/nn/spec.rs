//! Layer vocabulary, model descriptions, shape inference and MAC accounting.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::NnError;

/// Name by which skip layers refer to the model input.
pub const INPUT: &str = "input";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Conv {
        k: usize,
        stride: usize,
        pad: usize,
        c_in: usize,
        c_out: usize,
        bias: bool,
    },
    Relu,
    LeakyRelu {
        alpha: f64,
    },
    /// Mean over each channel plane; output is `1×1`.
    AvgpoolGlobal,
    /// Nearest-neighbour ×2.
    UpsampleNearest,
    /// 2×2 average, halving each side.
    DownsampleAvg,
    /// Appends the channels of an earlier activation.
    ConcatSkip {
        from: String,
    },
    /// Adds an earlier activation of the same shape.
    AddSkip {
        from: String,
    },
    /// Softmax over channels at every spatial position.
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }

    pub fn conv(name: impl Into<String>, k: usize, stride: usize, c_in: usize, c_out: usize) -> Self {
        Self::new(
            name,
            LayerKind::Conv {
                k,
                stride,
                pad: k / 2,
                c_in,
                c_out,
                bias: true,
            },
        )
    }

    pub fn is_conv(&self) -> bool {
        matches!(self.kind, LayerKind::Conv { .. })
    }

    fn skip_source(&self) -> Option<&str> {
        match &self.kind {
            LayerKind::ConcatSkip { from } | LayerKind::AddSkip { from } => Some(from),
            _ => None,
        }
    }
}

/// Channel/spatial shape of one activation (batch excluded).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, input_channels: usize, layers: Vec<LayerSpec>) -> Result<Self, NnError> {
        let spec = Self {
            name: name.into(),
            input_channels,
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Empty model: the identity map.
    pub fn empty(input_channels: usize) -> Self {
        Self {
            name: "empty".into(),
            input_channels,
            layers: Vec::new(),
        }
    }

    pub fn conv_count(&self) -> usize {
        self.layers.iter().filter(|l| l.is_conv()).count()
    }

    /// Index of the activation produced by the named layer (0 is the input).
    pub(crate) fn activation_index(&self) -> HashMap<&str, usize> {
        let mut map = HashMap::new();
        map.insert(INPUT, 0);
        for (i, l) in self.layers.iter().enumerate() {
            map.insert(l.name.as_str(), i + 1);
        }
        map
    }

    /// Checks names, skip ordering, kernel vocabulary and channel chaining.
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |layer: &str, msg: String| NnError::InvalidSpec {
            layer: layer.to_string(),
            message: msg,
        };
        if self.input_channels == 0 {
            return Err(bad(INPUT, "input needs at least one channel".into()));
        }
        let mut channels: HashMap<&str, usize> = HashMap::new();
        channels.insert(INPUT, self.input_channels);
        let mut c = self.input_channels;
        for l in &self.layers {
            if l.name == INPUT || channels.contains_key(l.name.as_str()) {
                return Err(bad(&l.name, "duplicate or reserved layer name".into()));
            }
            if let Some(src) = l.skip_source() {
                if !channels.contains_key(src) {
                    return Err(bad(&l.name, format!("skip source {src:?} does not precede this layer")));
                }
            }
            c = match &l.kind {
                LayerKind::Conv {
                    k,
                    stride,
                    c_in,
                    c_out,
                    ..
                } => {
                    if !matches!(k, 1 | 3) {
                        return Err(bad(&l.name, format!("kernel size {k} not in {{1, 3}}")));
                    }
                    if !matches!(stride, 1 | 2) {
                        return Err(bad(&l.name, format!("stride {stride} not in {{1, 2}}")));
                    }
                    if *c_in == 0 || *c_out == 0 {
                        return Err(bad(&l.name, "channel counts must be positive".into()));
                    }
                    if *c_in != c {
                        return Err(bad(&l.name, format!("expects {c_in} input channels, receives {c}")));
                    }
                    *c_out
                }
                LayerKind::LeakyRelu { alpha } if !alpha.is_finite() => {
                    return Err(bad(&l.name, "non-finite slope".into()));
                }
                LayerKind::ConcatSkip { from } => c + channels[from.as_str()],
                LayerKind::AddSkip { from } => {
                    if channels[from.as_str()] != c {
                        return Err(bad(
                            &l.name,
                            format!("adds {} channels from {from:?} to {c}", channels[from.as_str()]),
                        ));
                    }
                    c
                }
                _ => c,
            };
            channels.insert(&l.name, c);
        }
        Ok(())
    }

    /// Shapes of every activation for a `height`×`width` input; entry 0 is the input.
    pub fn infer_shapes(&self, height: usize, width: usize) -> Result<Vec<Shape>, NnError> {
        let mut shapes = vec![Shape {
            c: self.input_channels,
            h: height,
            w: width,
        }];
        let index = self.activation_index();
        for l in &self.layers {
            let s = *shapes.last().expect("non-empty");
            let mismatch = |msg: String| NnError::DimensionMismatch {
                layer: l.name.clone(),
                message: msg,
            };
            let out = match &l.kind {
                LayerKind::Conv {
                    k,
                    stride,
                    pad,
                    c_in,
                    c_out,
                    ..
                } => {
                    if s.c != *c_in {
                        return Err(mismatch(format!("expects {c_in} channels, receives {}", s.c)));
                    }
                    if s.h + 2 * pad < *k || s.w + 2 * pad < *k {
                        return Err(mismatch(format!("{}x{} input too small for kernel {k}", s.h, s.w)));
                    }
                    Shape {
                        c: *c_out,
                        h: (s.h + 2 * pad - k) / stride + 1,
                        w: (s.w + 2 * pad - k) / stride + 1,
                    }
                }
                LayerKind::Relu | LayerKind::LeakyRelu { .. } | LayerKind::Softmax => s,
                LayerKind::AvgpoolGlobal => Shape { c: s.c, h: 1, w: 1 },
                LayerKind::UpsampleNearest => Shape {
                    c: s.c,
                    h: s.h * 2,
                    w: s.w * 2,
                },
                LayerKind::DownsampleAvg => {
                    if s.h % 2 != 0 || s.w % 2 != 0 {
                        return Err(mismatch(format!("cannot halve {}x{}", s.h, s.w)));
                    }
                    Shape {
                        c: s.c,
                        h: s.h / 2,
                        w: s.w / 2,
                    }
                }
                LayerKind::ConcatSkip { from } | LayerKind::AddSkip { from } => {
                    let src = shapes[index[from.as_str()]];
                    if (src.h, src.w) != (s.h, s.w) {
                        return Err(mismatch(format!(
                            "skip from {from:?} is {}x{}, current is {}x{}",
                            src.h, src.w, s.h, s.w
                        )));
                    }
                    if matches!(l.kind, LayerKind::ConcatSkip { .. }) {
                        Shape { c: s.c + src.c, ..s }
                    } else {
                        s
                    }
                }
            };
            shapes.push(out);
        }
        Ok(shapes)
    }

    pub fn output_shape(&self, height: usize, width: usize) -> Result<Shape, NnError> {
        Ok(*self.infer_shapes(height, width)?.last().expect("non-empty"))
    }

    /// Concatenates two models; skip names in `other` must not clash.
    pub fn then(&self, other: &ModelSpec) -> Result<ModelSpec, NnError> {
        let mut layers = self.layers.clone();
        layers.extend(other.layers.iter().cloned());
        ModelSpec::new(format!("{}+{}", self.name, other.name), self.input_channels, layers)
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("specs serialize");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// MAC count for one frame and its verdict against a budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacReport {
    pub macs: u64,
    pub budget: Option<f64>,
    pub pass: bool,
}

/// Multiply-accumulates for one `height`×`width` frame: `k·k·c_in·c_out·h_out·w_out`
/// summed over conv layers. Other layers count zero.
pub fn count_macs(spec: &ModelSpec, height: usize, width: usize) -> Result<u64, NnError> {
    let shapes = spec.infer_shapes(height, width)?;
    let mut total = 0u64;
    for (l, out) in spec.layers.iter().zip(&shapes[1..]) {
        if let LayerKind::Conv { k, c_in, c_out, .. } = l.kind {
            total += (k * k * c_in * c_out) as u64 * (out.h * out.w) as u64;
        }
    }
    Ok(total)
}

pub fn audit_macs(macs: u64, budget: Option<f64>) -> MacReport {
    MacReport {
        macs,
        budget,
        pass: budget.is_none_or(|b| macs as f64 <= b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_conv_macs() {
        let spec = ModelSpec::new("c", 3, vec![LayerSpec::conv("c1", 3, 1, 3, 16)]).unwrap();
        assert_eq!(count_macs(&spec, 720, 1280).unwrap(), 398_131_200);
    }

    #[test]
    fn empty_model_has_no_macs() {
        assert_eq!(count_macs(&ModelSpec::empty(3), 720, 1280).unwrap(), 0);
    }

    #[test]
    fn macs_are_additive_over_concatenation() {
        let a = ModelSpec::new("a", 3, vec![LayerSpec::conv("a1", 3, 2, 3, 8)]).unwrap();
        let b = ModelSpec::new(
            "b",
            8,
            vec![
                LayerSpec::new("b0", LayerKind::Relu),
                LayerSpec::conv("b1", 1, 1, 8, 4),
            ],
        )
        .unwrap();
        let ab = a.then(&b).unwrap();
        let a_out = a.output_shape(64, 96).unwrap();
        assert_eq!(
            count_macs(&ab, 64, 96).unwrap(),
            count_macs(&a, 64, 96).unwrap() + count_macs(&b, a_out.h, a_out.w).unwrap()
        );
    }

    #[test]
    fn budget_verdicts() {
        assert!(audit_macs(20_000_000_000, Some(20.0e9)).pass);
        assert!(!audit_macs(20_000_000_001, Some(20.0e9)).pass);
        assert!(audit_macs(u64::MAX, None).pass);
    }

    #[test]
    fn validation_errors() {
        let k5 = ModelSpec::new(
            "x",
            3,
            vec![LayerSpec::new(
                "c",
                LayerKind::Conv {
                    k: 5,
                    stride: 1,
                    pad: 2,
                    c_in: 3,
                    c_out: 3,
                    bias: false,
                },
            )],
        );
        assert!(k5.is_err());
        let chain = ModelSpec::new("x", 3, vec![LayerSpec::conv("c", 3, 1, 4, 4)]);
        assert!(chain.is_err());
        let forward_skip = ModelSpec::new(
            "x",
            3,
            vec![
                LayerSpec::new("s", LayerKind::AddSkip { from: "later".into() }),
                LayerSpec::new("later", LayerKind::Relu),
            ],
        );
        assert!(forward_skip.is_err());
        let dup = ModelSpec::new(
            "x",
            3,
            vec![LayerSpec::new("a", LayerKind::Relu), LayerSpec::new("a", LayerKind::Relu)],
        );
        assert!(dup.is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = ModelSpec::new(
            "x",
            3,
            vec![
                LayerSpec::conv("c", 3, 1, 3, 4),
                LayerSpec::new("l", LayerKind::LeakyRelu { alpha: 0.2 }),
                LayerSpec::new("cat", LayerKind::ConcatSkip { from: INPUT.into() }),
            ],
        )
        .unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"kind\":\"leaky_relu\""));
        let back: ModelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.hash(), spec.hash());
    }
}
