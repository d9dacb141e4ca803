use crate::media::Frame;

/// Bilinear resampling with half-pixel centers and edge clamping.
pub fn resize_bilinear(frame: &Frame, out_w: usize, out_h: usize) -> Frame {
    let (w, h) = frame.dims();
    if (w, h) == (out_w, out_h) {
        return frame.clone();
    }
    let sx = w as f64 / out_w as f64;
    let sy = h as f64 / out_h as f64;
    let axis = |o: usize, s: f64, len: usize| {
        let t = ((o as f64 + 0.5) * s - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = t.floor() as usize;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, t - i0 as f64)
    };
    let src = frame.data();
    Frame::from_fn(out_w, out_h, |x, y| {
        let (x0, x1, fx) = axis(x, sx, w);
        let (y0, y1, fy) = axis(y, sy, h);
        let mut o = [0.0; 3];
        for c in 0..3 {
            let p = |xx: usize, yy: usize| src[(yy * w + xx) * 3 + c];
            let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
            let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
            o[c] = top * (1.0 - fy) + bottom * fy;
        }
        o
    })
}

/// Scales both sides by `factor`; with `back`, resamples to the original size
/// afterwards so only the resampling softness remains.
pub fn resize_by(frame: &Frame, factor: f64, back: bool) -> Frame {
    let (w, h) = frame.dims();
    let nw = ((w as f64 * factor).round() as usize).max(1);
    let nh = ((h as f64 * factor).round() as usize).max(1);
    let scaled = resize_bilinear(frame, nw, nh);
    if back {
        resize_bilinear(&scaled, w, h)
    } else {
        scaled
    }
}
