//! Forward and backward passes over a [`ModelSpec`].

use super::params::{ConvParams, Params};
use super::spec::{LayerKind, ModelSpec};
use super::tensor::Tensor4;
use super::NnError;

/// Activations recorded by [`forward`]; index 0 is the input, `i + 1` is the
/// output of layer `i`.
#[derive(Debug, Clone)]
pub struct Cache {
    spec_hash: String,
    acts: Vec<Tensor4>,
}

impl Cache {
    pub fn output(&self) -> &Tensor4 {
        self.acts.last().expect("cache holds the input")
    }

    pub fn activations(&self) -> &[Tensor4] {
        &self.acts
    }
}

/// Output range `[lo, hi)` along one axis for kernel offset `koff`.
#[inline]
fn valid_range(koff: usize, pad: usize, stride: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    let lo = if koff < pad { (pad - koff).div_ceil(stride) } else { 0 };
    if in_len - 1 + pad < koff {
        return (0, 0);
    }
    let hi = ((in_len - 1 + pad - koff) / stride + 1).min(out_len);
    (lo.min(hi), hi)
}

struct ConvGeom {
    k: usize,
    stride: usize,
    pad: usize,
    c_in: usize,
    c_out: usize,
}

fn conv_forward(x: &Tensor4, g: &ConvGeom, p: &ConvParams, ho: usize, wo: usize) -> Tensor4 {
    let mut y = Tensor4::zeros(x.n, g.c_out, ho, wo);
    let (h, w) = (x.h, x.w);
    for n in 0..x.n {
        for oc in 0..g.c_out {
            let out = y.plane_mut(n, oc);
            if !p.bias.is_empty() {
                out.fill(p.bias[oc]);
            }
            for ic in 0..g.c_in {
                let inp = x.plane(n, ic);
                for ky in 0..g.k {
                    let (oy_lo, oy_hi) = valid_range(ky, g.pad, g.stride, h, ho);
                    for kx in 0..g.k {
                        let wv = p.weight[((oc * g.c_in + ic) * g.k + ky) * g.k + kx];
                        let (ox_lo, ox_hi) = valid_range(kx, g.pad, g.stride, w, wo);
                        if ox_lo >= ox_hi {
                            continue;
                        }
                        for oy in oy_lo..oy_hi {
                            let iy = oy * g.stride + ky - g.pad;
                            let out_row = &mut out[oy * wo + ox_lo..oy * wo + ox_hi];
                            if g.stride == 1 {
                                let ix0 = ox_lo + kx - g.pad;
                                let in_row = &inp[iy * w + ix0..iy * w + ix0 + out_row.len()];
                                for (o, i) in out_row.iter_mut().zip(in_row) {
                                    *o += wv * i;
                                }
                            } else {
                                for (j, o) in out_row.iter_mut().enumerate() {
                                    let ix = (ox_lo + j) * g.stride + kx - g.pad;
                                    *o += wv * inp[iy * w + ix];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

/// Returns `grad_x` and accumulates into `grad_p`.
fn conv_backward(x: &Tensor4, g: &ConvGeom, p: &ConvParams, gy: &Tensor4, grad_p: &mut ConvParams) -> Tensor4 {
    let mut gx = Tensor4::zeros(x.n, x.c, x.h, x.w);
    let (h, w) = (x.h, x.w);
    let (ho, wo) = (gy.h, gy.w);
    for n in 0..x.n {
        for oc in 0..g.c_out {
            let go = gy.plane(n, oc);
            if !grad_p.bias.is_empty() {
                grad_p.bias[oc] += go.iter().sum::<f64>();
            }
            for ic in 0..g.c_in {
                let inp = x.plane(n, ic);
                let gin = gx.plane_mut(n, ic);
                for ky in 0..g.k {
                    let (oy_lo, oy_hi) = valid_range(ky, g.pad, g.stride, h, ho);
                    for kx in 0..g.k {
                        let widx = ((oc * g.c_in + ic) * g.k + ky) * g.k + kx;
                        let wv = p.weight[widx];
                        let (ox_lo, ox_hi) = valid_range(kx, g.pad, g.stride, w, wo);
                        if ox_lo >= ox_hi {
                            continue;
                        }
                        let mut acc = 0.0;
                        for oy in oy_lo..oy_hi {
                            let iy = oy * g.stride + ky - g.pad;
                            let g_row = &go[oy * wo + ox_lo..oy * wo + ox_hi];
                            if g.stride == 1 {
                                let ix0 = iy * w + ox_lo + kx - g.pad;
                                let in_row = &inp[ix0..ix0 + g_row.len()];
                                let gin_row = &mut gin[ix0..ix0 + g_row.len()];
                                for ((gv, iv), gi) in g_row.iter().zip(in_row).zip(gin_row) {
                                    acc += gv * iv;
                                    *gi += wv * gv;
                                }
                            } else {
                                for (j, gv) in g_row.iter().enumerate() {
                                    let ix = iy * w + (ox_lo + j) * g.stride + kx - g.pad;
                                    acc += gv * inp[ix];
                                    gin[ix] += wv * gv;
                                }
                            }
                        }
                        grad_p.weight[widx] += acc;
                    }
                }
            }
        }
    }
    gx
}

fn softmax_channels(x: &Tensor4) -> Tensor4 {
    let mut y = Tensor4::zeros(x.n, x.c, x.h, x.w);
    let p = x.plane_len();
    for n in 0..x.n {
        let xi = x.item(n);
        let yi = y.item_mut(n);
        for s in 0..p {
            let max = (0..x.c).map(|c| xi[c * p + s]).fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for c in 0..x.c {
                let e = (xi[c * p + s] - max).exp();
                yi[c * p + s] = e;
                sum += e;
            }
            for c in 0..x.c {
                yi[c * p + s] /= sum;
            }
        }
    }
    y
}

fn layer_forward(
    kind: &LayerKind,
    x: &Tensor4,
    skip: Option<&Tensor4>,
    conv: Option<&ConvParams>,
) -> Tensor4 {
    match kind {
        LayerKind::Conv {
            k,
            stride,
            pad,
            c_in,
            c_out,
            ..
        } => {
            let ho = (x.h + 2 * pad - k) / stride + 1;
            let wo = (x.w + 2 * pad - k) / stride + 1;
            let geom = ConvGeom {
                k: *k,
                stride: *stride,
                pad: *pad,
                c_in: *c_in,
                c_out: *c_out,
            };
            conv_forward(x, &geom, conv.expect("conv params"), ho, wo)
        }
        LayerKind::Relu => Tensor4 {
            data: x.data.iter().map(|v| v.max(0.0)).collect(),
            ..*x
        },
        LayerKind::LeakyRelu { alpha } => Tensor4 {
            data: x.data.iter().map(|&v| if v > 0.0 { v } else { alpha * v }).collect(),
            ..*x
        },
        LayerKind::AvgpoolGlobal => {
            let mut y = Tensor4::zeros(x.n, x.c, 1, 1);
            let p = x.plane_len() as f64;
            for n in 0..x.n {
                for c in 0..x.c {
                    y.data[n * x.c + c] = x.plane(n, c).iter().sum::<f64>() / p;
                }
            }
            y
        }
        LayerKind::UpsampleNearest => {
            let mut y = Tensor4::zeros(x.n, x.c, x.h * 2, x.w * 2);
            let wo = x.w * 2;
            for n in 0..x.n {
                for c in 0..x.c {
                    let src = x.plane(n, c);
                    let dst = y.plane_mut(n, c);
                    for oy in 0..x.h * 2 {
                        for ox in 0..wo {
                            dst[oy * wo + ox] = src[(oy / 2) * x.w + ox / 2];
                        }
                    }
                }
            }
            y
        }
        LayerKind::DownsampleAvg => {
            let (ho, wo) = (x.h / 2, x.w / 2);
            let mut y = Tensor4::zeros(x.n, x.c, ho, wo);
            for n in 0..x.n {
                for c in 0..x.c {
                    let src = x.plane(n, c);
                    let dst = y.plane_mut(n, c);
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let i = 2 * oy * x.w + 2 * ox;
                            dst[oy * wo + ox] = 0.25 * (src[i] + src[i + 1] + src[i + x.w] + src[i + x.w + 1]);
                        }
                    }
                }
            }
            y
        }
        LayerKind::ConcatSkip { .. } => {
            let s = skip.expect("skip source");
            let mut y = Tensor4::zeros(x.n, x.c + s.c, x.h, x.w);
            for n in 0..x.n {
                let dst = y.item_mut(n);
                let split = x.c * x.plane_len();
                dst[..split].copy_from_slice(x.item(n));
                dst[split..].copy_from_slice(s.item(n));
            }
            y
        }
        LayerKind::AddSkip { .. } => {
            let mut y = x.clone();
            y.add_assign(skip.expect("skip source"));
            y
        }
        LayerKind::Softmax => softmax_channels(x),
    }
}

/// Runs the model, keeping every activation for [`backward`].
pub fn forward(spec: &ModelSpec, params: &Params, x: &Tensor4) -> Result<(Tensor4, Cache), NnError> {
    let shapes = spec.infer_shapes(x.h, x.w)?;
    if x.c != spec.input_channels {
        return Err(NnError::DimensionMismatch {
            layer: super::spec::INPUT.into(),
            message: format!("model expects {} channels, input has {}", spec.input_channels, x.c),
        });
    }
    if params.convs.len() != spec.conv_count() {
        return Err(NnError::ShapeMismatch(format!(
            "{} conv tensors for {} conv layers",
            params.convs.len(),
            spec.conv_count()
        )));
    }
    let index = spec.activation_index();
    let mut acts = Vec::with_capacity(spec.layers.len() + 1);
    acts.push(x.clone());
    let mut conv_i = 0;
    for (li, l) in spec.layers.iter().enumerate() {
        let skip = match &l.kind {
            LayerKind::ConcatSkip { from } | LayerKind::AddSkip { from } => Some(&acts[index[from.as_str()]]),
            _ => None,
        };
        let conv = if l.is_conv() {
            conv_i += 1;
            Some(&params.convs[conv_i - 1])
        } else {
            None
        };
        let y = layer_forward(&l.kind, &acts[li], skip, conv);
        debug_assert_eq!((y.c, y.h, y.w), (shapes[li + 1].c, shapes[li + 1].h, shapes[li + 1].w));
        if y.data.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite { layer: l.name.clone() });
        }
        acts.push(y);
    }
    let out = acts.last().expect("input").clone();
    Ok((
        out,
        Cache {
            spec_hash: spec.hash(),
            acts,
        },
    ))
}

/// Exact gradients of the forward map: `(grad_params, grad_x)`.
pub fn backward(spec: &ModelSpec, params: &Params, cache: &Cache, grad_y: &Tensor4) -> Result<(Params, Tensor4), NnError> {
    if cache.spec_hash != spec.hash() || cache.acts.len() != spec.layers.len() + 1 {
        return Err(NnError::StaleCache);
    }
    if !grad_y.same_shape(cache.output()) {
        return Err(NnError::ShapeMismatch(format!(
            "output gradient {:?} vs output {:?}",
            grad_y.dims(),
            cache.output().dims()
        )));
    }
    let index = spec.activation_index();
    let mut grads: Vec<Option<Tensor4>> = vec![None; cache.acts.len()];
    grads[spec.layers.len()] = Some(grad_y.clone());
    let mut grad_p = Params::zeros(spec);
    let mut conv_i = spec.conv_count();

    fn accumulate(slot: &mut Option<Tensor4>, g: Tensor4) {
        match slot {
            Some(t) => t.add_assign(&g),
            None => *slot = Some(g),
        }
    }

    for (li, l) in spec.layers.iter().enumerate().rev() {
        if l.is_conv() {
            conv_i -= 1;
        }
        let Some(gy) = grads[li + 1].take() else {
            // Output unused downstream; nothing flows back.
            continue;
        };
        let x = &cache.acts[li];
        let y = &cache.acts[li + 1];
        let gx = match &l.kind {
            LayerKind::Conv {
                k,
                stride,
                pad,
                c_in,
                c_out,
                ..
            } => {
                let geom = ConvGeom {
                    k: *k,
                    stride: *stride,
                    pad: *pad,
                    c_in: *c_in,
                    c_out: *c_out,
                };
                conv_backward(x, &geom, &params.convs[conv_i], &gy, &mut grad_p.convs[conv_i])
            }
            LayerKind::Relu => Tensor4 {
                data: x.data.iter().zip(&gy.data).map(|(v, g)| if *v > 0.0 { *g } else { 0.0 }).collect(),
                ..gy
            },
            LayerKind::LeakyRelu { alpha } => Tensor4 {
                data: x
                    .data
                    .iter()
                    .zip(&gy.data)
                    .map(|(v, g)| if *v > 0.0 { *g } else { alpha * g })
                    .collect(),
                ..gy
            },
            LayerKind::AvgpoolGlobal => {
                let mut gx = Tensor4::zeros(x.n, x.c, x.h, x.w);
                let p = x.plane_len() as f64;
                for n in 0..x.n {
                    for c in 0..x.c {
                        let v = gy.data[n * x.c + c] / p;
                        gx.plane_mut(n, c).fill(v);
                    }
                }
                gx
            }
            LayerKind::UpsampleNearest => {
                let mut gx = Tensor4::zeros(x.n, x.c, x.h, x.w);
                let wo = gy.w;
                for n in 0..x.n {
                    for c in 0..x.c {
                        let src = gy.plane(n, c);
                        let dst = gx.plane_mut(n, c);
                        for oy in 0..gy.h {
                            for ox in 0..wo {
                                dst[(oy / 2) * x.w + ox / 2] += src[oy * wo + ox];
                            }
                        }
                    }
                }
                gx
            }
            LayerKind::DownsampleAvg => {
                let mut gx = Tensor4::zeros(x.n, x.c, x.h, x.w);
                for n in 0..x.n {
                    for c in 0..x.c {
                        let src = gy.plane(n, c);
                        let dst = gx.plane_mut(n, c);
                        for oy in 0..gy.h {
                            for ox in 0..gy.w {
                                let g = 0.25 * src[oy * gy.w + ox];
                                let i = 2 * oy * x.w + 2 * ox;
                                dst[i] += g;
                                dst[i + 1] += g;
                                dst[i + x.w] += g;
                                dst[i + x.w + 1] += g;
                            }
                        }
                    }
                }
                gx
            }
            LayerKind::ConcatSkip { from } => {
                let src_i = index[from.as_str()];
                let s = &cache.acts[src_i];
                let mut gx = Tensor4::zeros(x.n, x.c, x.h, x.w);
                let mut gs = Tensor4::zeros(s.n, s.c, s.h, s.w);
                let split = x.c * x.plane_len();
                for n in 0..x.n {
                    let g = gy.item(n);
                    gx.item_mut(n).copy_from_slice(&g[..split]);
                    gs.item_mut(n).copy_from_slice(&g[split..]);
                }
                accumulate(&mut grads[src_i], gs);
                gx
            }
            LayerKind::AddSkip { from } => {
                let src_i = index[from.as_str()];
                accumulate(&mut grads[src_i], gy.clone());
                gy
            }
            LayerKind::Softmax => {
                let mut gx = Tensor4::zeros(y.n, y.c, y.h, y.w);
                let p = y.plane_len();
                for n in 0..y.n {
                    let yi = y.item(n);
                    let gi = gy.item(n);
                    let out = gx.item_mut(n);
                    for s in 0..p {
                        let dot: f64 = (0..y.c).map(|c| yi[c * p + s] * gi[c * p + s]).sum();
                        for c in 0..y.c {
                            out[c * p + s] = yi[c * p + s] * (gi[c * p + s] - dot);
                        }
                    }
                }
                gx
            }
        };
        accumulate(&mut grads[li], gx);
    }
    let grad_x = grads[0]
        .take()
        .unwrap_or_else(|| Tensor4::zeros(grad_y.n, spec.input_channels, cache.acts[0].h, cache.acts[0].w));
    Ok((grad_p, grad_x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spec::{LayerSpec, INPUT};
    use crate::rng::SeededRng;

    fn conv_spec(k: usize, stride: usize, c_in: usize, c_out: usize) -> ModelSpec {
        ModelSpec::new("c", c_in, vec![LayerSpec::conv("c", k, stride, c_in, c_out)]).unwrap()
    }

    fn random(n: usize, c: usize, h: usize, w: usize, seed: u64) -> Tensor4 {
        let mut rng = SeededRng::new(seed);
        Tensor4::from_vec(n, c, h, w, (0..n * c * h * w).map(|_| rng.normal()).collect())
    }

    #[test]
    fn identity_one_by_one_conv() {
        let spec = conv_spec(1, 1, 3, 3);
        let mut p = Params::zeros(&spec);
        for c in 0..3 {
            p.convs[0].weight[c * 3 + c] = 1.0;
        }
        let x = random(2, 3, 4, 5, 1);
        let (y, _) = forward(&spec, &p, &x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn all_ones_three_by_three_on_constant() {
        let (c_in, c) = (4, 0.7);
        let spec = conv_spec(3, 1, c_in, 2);
        let mut p = Params::zeros(&spec);
        p.convs[0].weight.fill(1.0);
        let x = Tensor4::from_vec(1, c_in, 6, 6, vec![c; c_in * 36]);
        let (y, _) = forward(&spec, &p, &x).unwrap();
        for oy in 1..5 {
            for ox in 1..5 {
                assert!((y.plane(0, 1)[oy * 6 + ox] - 9.0 * c * c_in as f64).abs() < 1e-12);
            }
        }
        // Corners see 4 of the 9 taps under zero padding.
        assert!((y.plane(0, 0)[0] - 4.0 * c * c_in as f64).abs() < 1e-12);
    }

    #[test]
    fn softmax_of_equal_logits() {
        let spec = ModelSpec::new("s", 5, vec![LayerSpec::new("s", LayerKind::Softmax)]).unwrap();
        let x = Tensor4::from_vec(1, 5, 1, 1, vec![0.3; 5]);
        let (y, _) = forward(&spec, &Params::zeros(&spec), &x).unwrap();
        for v in y.data {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn sum_loss_weight_gradient_is_pixel_sum() {
        let spec = ModelSpec::new(
            "c",
            2,
            vec![LayerSpec::new(
                "c",
                LayerKind::Conv {
                    k: 1,
                    stride: 1,
                    pad: 0,
                    c_in: 2,
                    c_out: 3,
                    bias: true,
                },
            )],
        )
        .unwrap();
        let p = Params::kaiming(&spec, &mut SeededRng::new(2));
        let x = random(1, 2, 3, 4, 3);
        let (y, cache) = forward(&spec, &p, &x).unwrap();
        let gy = Tensor4::from_vec(1, 3, 3, 4, vec![1.0; y.len()]);
        let (gp, _) = backward(&spec, &p, &cache, &gy).unwrap();
        for oc in 0..3 {
            for ic in 0..2 {
                let expected: f64 = x.plane(0, ic).iter().sum();
                assert!((gp.convs[0].weight[oc * 2 + ic] - expected).abs() < 1e-12);
            }
            assert!((gp.convs[0].bias[oc] - 12.0).abs() < 1e-12);
        }
    }

    #[test]
    fn relu_blocks_negative_units() {
        let spec = ModelSpec::new("r", 1, vec![LayerSpec::new("r", LayerKind::Relu)]).unwrap();
        let x = Tensor4::from_vec(1, 1, 1, 2, vec![-1.0, 2.0]);
        let p = Params::zeros(&spec);
        let (_, cache) = forward(&spec, &p, &x).unwrap();
        let (_, gx) = backward(&spec, &p, &cache, &Tensor4::from_vec(1, 1, 1, 2, vec![5.0, 5.0])).unwrap();
        assert_eq!(gx.data, vec![0.0, 5.0]);
    }

    #[test]
    fn stale_cache_detected() {
        let a = conv_spec(3, 1, 3, 4);
        let b = conv_spec(3, 1, 3, 5);
        let pa = Params::kaiming(&a, &mut SeededRng::new(1));
        let (y, cache) = forward(&a, &pa, &random(1, 3, 4, 4, 1)).unwrap();
        let pb = Params::kaiming(&b, &mut SeededRng::new(1));
        assert!(matches!(backward(&b, &pb, &cache, &y), Err(NnError::StaleCache)));
    }

    #[test]
    fn non_finite_activation_names_layer() {
        let spec = conv_spec(1, 1, 1, 1);
        let mut p = Params::zeros(&spec);
        p.convs[0].weight[0] = f64::MAX;
        let x = Tensor4::from_vec(1, 1, 1, 1, vec![10.0]);
        match forward(&spec, &p, &x) {
            Err(NnError::NonFinite { layer }) => assert_eq!(layer, "c"),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch() {
        let spec = conv_spec(3, 1, 3, 4);
        let p = Params::zeros(&spec);
        assert!(forward(&spec, &p, &random(1, 2, 4, 4, 0)).is_err());
        let down = ModelSpec::new("d", 3, vec![LayerSpec::new("d", LayerKind::DownsampleAvg)]).unwrap();
        assert!(forward(&down, &Params::zeros(&down), &random(1, 3, 3, 4, 0)).is_err());
    }

    #[test]
    fn batch_equivariance() {
        let spec = ModelSpec::new(
            "u",
            3,
            vec![
                LayerSpec::conv("c1", 3, 2, 3, 4),
                LayerSpec::new("a", LayerKind::LeakyRelu { alpha: 0.1 }),
                LayerSpec::new("up", LayerKind::UpsampleNearest),
                LayerSpec::new("cat", LayerKind::ConcatSkip { from: INPUT.into() }),
                LayerSpec::conv("c2", 3, 1, 7, 3),
                LayerSpec::new("res", LayerKind::AddSkip { from: INPUT.into() }),
            ],
        )
        .unwrap();
        let p = Params::kaiming(&spec, &mut SeededRng::new(4));
        let a = random(2, 3, 8, 6, 10);
        let b = random(3, 3, 8, 6, 11);
        let (ya, _) = forward(&spec, &p, &a).unwrap();
        let (yb, _) = forward(&spec, &p, &b).unwrap();
        let (yab, _) = forward(&spec, &p, &Tensor4::stack(&[a, b])).unwrap();
        assert_eq!(yab, Tensor4::stack(&[ya, yb]));
    }
}
