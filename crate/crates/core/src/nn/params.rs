//! Conv parameters, initialization and the checkpoint format.
//!
//! A checkpoint is an 8-byte little-endian header length, a UTF-8 JSON header
//! naming the model spec hash and an `name → offset/shape` table, then every
//! tensor as little-endian `f64`s in table order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::spec::{LayerKind, ModelSpec};
use super::NnError;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub name: String,
    /// `[c_out][c_in][k][k]`
    pub weight: Vec<f64>,
    /// Empty when the layer has no bias.
    pub bias: Vec<f64>,
}

/// Parameters of every conv layer, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub convs: Vec<ConvParams>,
}

impl Params {
    /// Zero tensors shaped for `spec`.
    pub fn zeros(spec: &ModelSpec) -> Self {
        let convs = spec
            .layers
            .iter()
            .filter_map(|l| match l.kind {
                LayerKind::Conv {
                    k,
                    c_in,
                    c_out,
                    bias,
                    ..
                } => Some(ConvParams {
                    name: l.name.clone(),
                    weight: vec![0.0; c_out * c_in * k * k],
                    bias: if bias { vec![0.0; c_out] } else { Vec::new() },
                }),
                _ => None,
            })
            .collect();
        Self { convs }
    }

    /// Kaiming-uniform weights (bound `√(6 / fan_in)`), zero bias.
    pub fn kaiming(spec: &ModelSpec, rng: &mut SeededRng) -> Self {
        let mut p = Self::zeros(spec);
        let mut conv_iter = p.convs.iter_mut();
        for l in &spec.layers {
            if let LayerKind::Conv { k, c_in, .. } = l.kind {
                let cp = conv_iter.next().expect("conv count");
                let bound = (6.0 / (c_in * k * k) as f64).sqrt();
                for w in cp.weight.iter_mut() {
                    *w = bound * (2.0 * rng.uniform() - 1.0);
                }
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.convs.iter().map(|c| c.weight.len() + c.bias.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(name, values)` for every tensor, weights before biases.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for c in &self.convs {
            out.push((format!("{}.weight", c.name), c.weight.as_slice()));
            if !c.bias.is_empty() {
                out.push((format!("{}.bias", c.name), c.bias.as_slice()));
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for c in &mut self.convs {
            out.push((format!("{}.weight", c.name), c.weight.as_mut_slice()));
            if !c.bias.is_empty() {
                out.push((format!("{}.bias", c.name), c.bias.as_mut_slice()));
            }
        }
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|(_, v)| v.iter().copied()).collect()
    }

    /// Overwrites every tensor from a flat vector produced by [`Params::flatten`].
    pub fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.len(), "flat parameter length");
        let mut offset = 0;
        for (_, t) in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn add_assign(&mut self, other: &Params) {
        for (a, b) in self.convs.iter_mut().zip(&other.convs) {
            a.weight.iter_mut().zip(&b.weight).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    /// Hex SHA-256 over the little-endian parameter bytes.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for v in self.flatten() {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn shapes(spec: &ModelSpec) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for l in &spec.layers {
            if let LayerKind::Conv {
                k,
                c_in,
                c_out,
                bias,
                ..
            } = l.kind
            {
                out.push((format!("{}.weight", l.name), vec![c_out, c_in, k, k]));
                if bias {
                    out.push((format!("{}.bias", l.name), vec![c_out]));
                }
            }
        }
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    offset: usize,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    model: String,
    spec_hash: String,
    tensors: Vec<TensorEntry>,
}

const FORMAT: &str = "vqe-params-v1";

pub fn encode_checkpoint(spec: &ModelSpec, params: &Params) -> Vec<u8> {
    let mut tensors = Vec::new();
    let mut offset = 0;
    for (name, shape) in Params::shapes(spec) {
        let len: usize = shape.iter().product();
        tensors.push(TensorEntry { name, offset, shape });
        offset += len;
    }
    assert_eq!(offset, params.len(), "params do not match spec");
    let header = CheckpointHeader {
        format: FORMAT.into(),
        model: spec.name.clone(),
        spec_hash: spec.hash(),
        tensors,
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(8 + header.len() + offset * 8);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for v in params.flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(spec: &ModelSpec, bytes: &[u8]) -> Result<Params, NnError> {
    let bad = |m: &str| NnError::Checkpoint(m.to_string());
    let len_bytes: [u8; 8] = bytes.get(..8).ok_or_else(|| bad("truncated header length"))?.try_into().unwrap();
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let header_bytes = bytes.get(8..8 + header_len).ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(header_bytes).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    if header.format != FORMAT {
        return Err(NnError::Checkpoint(format!("unknown format {:?}", header.format)));
    }
    if header.spec_hash != spec.hash() {
        return Err(NnError::Checkpoint(format!(
            "checkpoint is for model {:?} with a different spec",
            header.model
        )));
    }
    let body = &bytes[8 + header_len..];
    if body.len() % 8 != 0 {
        return Err(bad("body is not a whole number of f64 values"));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut params = Params::zeros(spec);
    let expected = Params::shapes(spec);
    if expected.len() != header.tensors.len() {
        return Err(bad("tensor table does not match spec"));
    }
    for ((name, t), entry) in params.tensors_mut().into_iter().zip(&header.tensors) {
        if entry.name != name || entry.shape.iter().product::<usize>() != t.len() {
            return Err(NnError::Checkpoint(format!("tensor {:?} does not match spec", entry.name)));
        }
        let src = values
            .get(entry.offset..entry.offset + t.len())
            .ok_or_else(|| NnError::Checkpoint(format!("tensor {:?} truncated", entry.name)))?;
        t.copy_from_slice(src);
    }
    Ok(params)
}

pub fn save_checkpoint(spec: &ModelSpec, params: &Params, path: &Path) -> Result<(), NnError> {
    fs::write(path, encode_checkpoint(spec, params)).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(spec: &ModelSpec, path: &Path) -> Result<Params, NnError> {
    let bytes = fs::read(path).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
    decode_checkpoint(spec, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spec::LayerSpec;

    fn spec() -> ModelSpec {
        ModelSpec::new(
            "t",
            3,
            vec![
                LayerSpec::conv("a", 3, 1, 3, 4),
                LayerSpec::new(
                    "b",
                    LayerKind::Conv {
                        k: 1,
                        stride: 1,
                        pad: 0,
                        c_in: 4,
                        c_out: 2,
                        bias: false,
                    },
                ),
            ],
        )
        .unwrap()
    }

    #[test]
    fn kaiming_bounds_and_zero_bias() {
        let s = spec();
        let p = Params::kaiming(&s, &mut SeededRng::new(1));
        let bound = (6.0f64 / 27.0).sqrt();
        assert!(p.convs[0].weight.iter().all(|w| w.abs() <= bound));
        assert!(p.convs[0].bias.iter().all(|b| *b == 0.0));
        assert!(p.convs[1].bias.is_empty());
        assert_eq!(p.len(), 4 * 27 + 4 + 8);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let s = spec();
        let p = Params::kaiming(&s, &mut SeededRng::new(9));
        let bytes = encode_checkpoint(&s, &p);
        let back = decode_checkpoint(&s, &bytes).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.digest(), p.digest());
    }

    #[test]
    fn checkpoint_rejects_other_spec() {
        let s = spec();
        let p = Params::kaiming(&s, &mut SeededRng::new(9));
        let bytes = encode_checkpoint(&s, &p);
        let other = ModelSpec::new("t", 3, vec![LayerSpec::conv("a", 3, 1, 3, 4)]).unwrap();
        assert!(decode_checkpoint(&other, &bytes).is_err());
        assert!(decode_checkpoint(&s, &bytes[..20]).is_err());
    }
}
