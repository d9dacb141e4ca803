//! Architecture presets for the weight predictor and the restorers.

use crate::nn::{LayerKind, LayerSpec, ModelSpec, INPUT};

use super::EnhanceError;

const PREDICTOR_CHANNELS: [usize; 8] = [3, 8, 16, 32, 64, 64, 64, 64];

fn leaky(name: String) -> LayerSpec {
    LayerSpec::new(name, LayerKind::LeakyRelu { alpha: 0.2 })
}

fn relu(name: String) -> LayerSpec {
    LayerSpec::new(name, LayerKind::Relu)
}

/// Seven conv3×3 + leaky-ReLU(0.2) blocks (stride 2 on the first five), global
/// average pool, 1×1 conv to `k` logits and a channel softmax.
pub fn predictor_spec(k: usize) -> ModelSpec {
    let mut layers = Vec::new();
    for b in 0..7 {
        let stride = if b < 5 { 2 } else { 1 };
        layers.push(LayerSpec::conv(
            format!("block{}.conv", b + 1),
            3,
            stride,
            PREDICTOR_CHANNELS[b],
            PREDICTOR_CHANNELS[b + 1],
        ));
        layers.push(leaky(format!("block{}.act", b + 1)));
    }
    layers.push(LayerSpec::new("pool", LayerKind::AvgpoolGlobal));
    layers.push(LayerSpec::conv("logits", 1, 1, 64, k));
    layers.push(LayerSpec::new("weights", LayerKind::Softmax));
    ModelSpec::new("predictor", 3, layers).expect("predictor preset is valid")
}

/// Three convs with ReLU after each, `c_in → c_mid → c_mid → c_out`.
fn triple(layers: &mut Vec<LayerSpec>, prefix: &str, c_in: usize, c_mid: usize, c_out: usize) {
    let chans = [c_in, c_mid, c_mid, c_out];
    for i in 0..3 {
        layers.push(LayerSpec::conv(format!("{prefix}.conv{}", i + 1), 3, 1, chans[i], chans[i + 1]));
        layers.push(relu(format!("{prefix}.act{}", i + 1)));
    }
}

/// Residual U-Net with 21 conv layers. A stride-2 head brings the frame to
/// half resolution; three encoder scales (16/32/64 channels, three convs
/// each) mirror three decoder scales joined by concatenated skips; a
/// bottleneck conv sits at 1/16; the last upsample concatenates the input so
/// the output conv sees full-resolution detail, and the result is added to
/// the input. Height and width must be multiples of 16.
pub fn unet_restorer() -> ModelSpec {
    let mut l = Vec::new();
    l.push(LayerSpec::conv("head", 3, 2, 3, 16));
    l.push(relu("head.act".into()));
    triple(&mut l, "enc1", 16, 16, 16);
    l.push(LayerSpec::new("down1", LayerKind::DownsampleAvg));
    triple(&mut l, "enc2", 16, 32, 32);
    l.push(LayerSpec::new("down2", LayerKind::DownsampleAvg));
    triple(&mut l, "enc3", 32, 64, 64);
    l.push(LayerSpec::new("down3", LayerKind::DownsampleAvg));
    l.push(LayerSpec::conv("bottleneck", 3, 1, 64, 64));
    l.push(relu("bottleneck.act".into()));
    l.push(LayerSpec::new("up3", LayerKind::UpsampleNearest));
    l.push(LayerSpec::new("cat3", LayerKind::ConcatSkip { from: "enc3.act3".into() }));
    triple(&mut l, "dec3", 128, 64, 32);
    l.push(LayerSpec::new("up2", LayerKind::UpsampleNearest));
    l.push(LayerSpec::new("cat2", LayerKind::ConcatSkip { from: "enc2.act3".into() }));
    triple(&mut l, "dec2", 64, 32, 16);
    l.push(LayerSpec::new("up1", LayerKind::UpsampleNearest));
    l.push(LayerSpec::new("cat1", LayerKind::ConcatSkip { from: "enc1.act3".into() }));
    triple(&mut l, "dec1", 32, 16, 16);
    l.push(LayerSpec::new("up0", LayerKind::UpsampleNearest));
    l.push(LayerSpec::new("cat0", LayerKind::ConcatSkip { from: INPUT.into() }));
    l.push(LayerSpec::conv("out", 3, 1, 19, 3));
    l.push(LayerSpec::new("residual", LayerKind::AddSkip { from: INPUT.into() }));
    ModelSpec::new("unet-restorer", 3, l).expect("restorer preset is valid")
}

/// Full-resolution chain: head conv, `blocks` residual blocks of two convs,
/// output conv, global residual.
pub fn residual_chain(width: usize, blocks: usize, name: &str) -> ModelSpec {
    let mut l = vec![LayerSpec::conv("head", 3, 1, 3, width), relu("head.act".into())];
    let mut prev = "head.act".to_string();
    for b in 1..=blocks {
        l.push(LayerSpec::conv(format!("res{b}.conv1"), 3, 1, width, width));
        l.push(relu(format!("res{b}.act")));
        l.push(LayerSpec::conv(format!("res{b}.conv2"), 3, 1, width, width));
        l.push(LayerSpec::new(format!("res{b}.add"), LayerKind::AddSkip { from: prev.clone() }));
        prev = format!("res{b}.add");
    }
    l.push(LayerSpec::conv("out", 3, 1, width, 3));
    l.push(LayerSpec::new("residual", LayerKind::AddSkip { from: INPUT.into() }));
    ModelSpec::new(name, 3, l).expect("chain preset is valid")
}

/// Seven residual blocks at 12 channels.
pub fn summer_restorer() -> ModelSpec {
    residual_chain(12, 7, "summer-restorer")
}

/// Seven residual blocks at 32 channels; far over the per-frame budget.
pub fn oversized_restorer() -> ModelSpec {
    residual_chain(32, 7, "oversized-restorer")
}

pub const RESTORER_PRESETS: [&str; 3] = ["unet", "summer", "oversized"];

pub fn restorer_preset(name: &str) -> Result<ModelSpec, EnhanceError> {
    match name {
        "unet" | "default" => Ok(unet_restorer()),
        "summer" => Ok(summer_restorer()),
        "oversized" => Ok(oversized_restorer()),
        other => Err(EnhanceError::Config(format!(
            "unknown restorer preset {other:?} (expected one of {RESTORER_PRESETS:?})"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::count_macs;

    #[test]
    fn predictor_shape() {
        let p = predictor_spec(5);
        assert_eq!(p.conv_count(), 8);
        let s = p.output_shape(64, 64).unwrap();
        assert_eq!((s.c, s.h, s.w), (5, 1, 1));
        // Tiny inputs still reach a 1×1 map.
        assert_eq!(p.output_shape(16, 16).unwrap().h, 1);
    }

    #[test]
    fn unet_has_21_convs_and_keeps_dims() {
        let u = unet_restorer();
        assert_eq!(u.conv_count(), 21);
        let s = u.output_shape(32, 48).unwrap();
        assert_eq!((s.c, s.h, s.w), (3, 32, 48));
    }

    #[test]
    fn budgets_at_720p() {
        let u = count_macs(&unet_restorer(), 720, 1280).unwrap();
        assert!(u < 20_000_000_000, "{u}");
        let s = count_macs(&summer_restorer(), 720, 1280).unwrap();
        assert!(s < 20_000_000_000, "{s}");
        let o = count_macs(&oversized_restorer(), 720, 1280).unwrap();
        assert!(o > 20_000_000_000, "{o}");
    }

    #[test]
    fn unknown_preset() {
        assert!(restorer_preset("huge").is_err());
    }
}
