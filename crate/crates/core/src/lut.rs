//! Lattice color transforms and weighted basis banks.
//!
//! A [`Lut3D`] stores `n³` RGB outputs, red index fastest. Lookups use
//! trilinear interpolation of the displacement from the identity lattice and
//! add the query back on, which is the same affine map as interpolating the
//! entries directly but leaves the identity LUT an exact no-op in floating
//! point. Everything here is linear in the lattice entries, so gradients are
//! scatter operations with the same trilinear weights.

use serde::{Deserialize, Serialize};

use crate::media::Frame;
use crate::rng::SeededRng;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LutError {
    #[error("lattice size must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("lattice of size {n} needs {expected} entries, got {got}")]
    EntryCount { n: usize, expected: usize, got: usize },
    #[error("bank must hold at least one LUT")]
    EmptyBank,
    #[error("bank LUTs have mismatched sizes ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lut3D {
    n: usize,
    lattice: Vec<[f64; 3]>,
}

/// Coordinate of lattice index `i` on one axis.
#[inline]
fn grid_coord(i: usize, n: usize) -> f64 {
    i as f64 / (n - 1) as f64
}

/// The eight corners of the cell enclosing a query, with their weights.
#[derive(Debug, Clone, Copy)]
pub struct CellWeights {
    pub index: [usize; 8],
    pub weight: [f64; 8],
    pub coords: [[f64; 3]; 8],
}

#[inline]
fn axis_split(v: f64, n: usize) -> (usize, f64) {
    let t = v.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = (t.floor() as usize).min(n - 2);
    (i, t - i as f64)
}

impl Lut3D {
    pub fn identity(n: usize) -> Self {
        assert!(n >= 2, "lattice size must be at least 2");
        let mut lattice = Vec::with_capacity(n * n * n);
        for b in 0..n {
            for g in 0..n {
                for r in 0..n {
                    lattice.push([grid_coord(r, n), grid_coord(g, n), grid_coord(b, n)]);
                }
            }
        }
        Self { n, lattice }
    }

    /// Lattice whose entries are `f` evaluated at every grid coordinate.
    pub fn from_fn(n: usize, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> Self {
        let mut lut = Self::identity(n);
        for e in lut.lattice.iter_mut() {
            *e = f(*e);
        }
        lut
    }

    pub fn from_lattice(n: usize, lattice: Vec<[f64; 3]>) -> Result<Self, LutError> {
        if n < 2 {
            return Err(LutError::TooSmall(n));
        }
        if lattice.len() != n * n * n {
            return Err(LutError::EntryCount {
                n,
                expected: n * n * n,
                got: lattice.len(),
            });
        }
        Ok(Self { n, lattice })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn lattice(&self) -> &[[f64; 3]] {
        &self.lattice
    }

    pub fn lattice_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.lattice
    }

    /// Flat view, 3 scalars per entry.
    pub fn as_flat(&self) -> &[f64] {
        self.lattice.as_flattened()
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        self.lattice.as_flattened_mut()
    }

    #[inline]
    pub fn index(&self, r: usize, g: usize, b: usize) -> usize {
        r + self.n * (g + self.n * b)
    }

    pub fn entry(&self, r: usize, g: usize, b: usize) -> [f64; 3] {
        self.lattice[self.index(r, g, b)]
    }

    pub fn set_entry(&mut self, r: usize, g: usize, b: usize, v: [f64; 3]) {
        let i = self.index(r, g, b);
        self.lattice[i] = v;
    }

    /// Grid coordinate of flat lattice index `i`.
    pub fn coord_of(&self, i: usize) -> [f64; 3] {
        let n = self.n;
        [grid_coord(i % n, n), grid_coord((i / n) % n, n), grid_coord(i / (n * n), n)]
    }

    /// Trilinear corner weights for a query in `[0, 1]³`.
    pub fn cell_weights(&self, rgb: [f64; 3]) -> CellWeights {
        let n = self.n;
        let (ri, rf) = axis_split(rgb[0], n);
        let (gi, gf) = axis_split(rgb[1], n);
        let (bi, bf) = axis_split(rgb[2], n);
        let mut index = [0; 8];
        let mut weight = [0.0; 8];
        let mut coords = [[0.0; 3]; 8];
        for c in 0..8 {
            let (dr, dg, db) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
            let wr = if dr == 1 { rf } else { 1.0 - rf };
            let wg = if dg == 1 { gf } else { 1.0 - gf };
            let wb = if db == 1 { bf } else { 1.0 - bf };
            index[c] = self.index(ri + dr, gi + dg, bi + db);
            weight[c] = wr * wg * wb;
            coords[c] = [grid_coord(ri + dr, n), grid_coord(gi + dg, n), grid_coord(bi + db, n)];
        }
        CellWeights {
            index,
            weight,
            coords,
        }
    }

    /// Trilinear lookup, unclamped.
    pub fn lookup(&self, rgb: [f64; 3]) -> [f64; 3] {
        let cell = self.cell_weights(rgb);
        // Queries landing exactly on a lattice point return the stored entry.
        if let Some(c) = cell.weight.iter().position(|&w| w == 1.0) {
            return self.lattice[cell.index[c]];
        }
        let mut out = rgb;
        for c in 0..8 {
            let w = cell.weight[c];
            if w == 0.0 {
                continue;
            }
            let e = self.lattice[cell.index[c]];
            let p = cell.coords[c];
            for ch in 0..3 {
                out[ch] += w * (e[ch] - p[ch]);
            }
        }
        out
    }
}

pub fn lut_lookup(lut: &Lut3D, rgb: [f64; 3]) -> [f64; 3] {
    lut.lookup(rgb)
}

/// Per-pixel lookup without the final clamp; the training path.
pub fn apply_lut_unclamped(lut: &Lut3D, frame: &Frame) -> Frame {
    frame.map_pixels(|p| lut.lookup(p))
}

pub fn apply_lut(lut: &Lut3D, frame: &Frame) -> Frame {
    frame.map_pixels(|p| {
        let o = lut.lookup(p);
        [o[0].clamp(0.0, 1.0), o[1].clamp(0.0, 1.0), o[2].clamp(0.0, 1.0)]
    })
}

/// Gradient of `apply_lut_unclamped(lut, frame)` with respect to the lattice,
/// given the upstream gradient on the output frame (interleaved RGB).
pub fn lut_gradients(lut: &Lut3D, frame: &Frame, grad_out: &[f64]) -> Vec<[f64; 3]> {
    assert_eq!(grad_out.len(), frame.data().len(), "gradient shape");
    let mut grad = vec![[0.0; 3]; lut.lattice.len()];
    for (p, g) in frame.pixels().zip(grad_out.chunks_exact(3)) {
        let cell = lut.cell_weights(p);
        for c in 0..8 {
            let w = cell.weight[c];
            if w == 0.0 {
                continue;
            }
            let slot = &mut grad[cell.index[c]];
            for ch in 0..3 {
                slot[ch] += w * g[ch];
            }
        }
    }
    grad
}

/// `k` LUTs of equal size, fused by per-frame weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LutBank {
    luts: Vec<Lut3D>,
}

impl LutBank {
    pub fn new(luts: Vec<Lut3D>) -> Result<Self, LutError> {
        let first = luts.first().ok_or(LutError::EmptyBank)?.size();
        if let Some(l) = luts.iter().find(|l| l.size() != first) {
            return Err(LutError::SizeMismatch(first, l.size()));
        }
        Ok(Self { luts })
    }

    /// Basis 0 is the identity; the others are the identity plus a small
    /// seeded perturbation of every entry.
    pub fn initialized(k: usize, n: usize, perturbation: f64, seed: u64) -> Self {
        assert!(k >= 1, "bank must hold at least one LUT");
        let mut rng = SeededRng::new(seed);
        let luts = (0..k)
            .map(|i| {
                let mut lut = Lut3D::identity(n);
                if i > 0 {
                    for v in lut.as_flat_mut() {
                        *v += perturbation * (2.0 * rng.uniform() - 1.0);
                    }
                }
                lut
            })
            .collect();
        Self { luts }
    }

    pub fn identities(k: usize, n: usize) -> Self {
        Self::initialized(k, n, 0.0, 0)
    }

    pub fn k(&self) -> usize {
        self.luts.len()
    }

    pub fn lut_size(&self) -> usize {
        self.luts[0].size()
    }

    pub fn luts(&self) -> &[Lut3D] {
        &self.luts
    }

    pub fn luts_mut(&mut self) -> &mut [Lut3D] {
        &mut self.luts
    }
}

/// `Σ wᵢ · latticeᵢ`, no normalization.
pub fn fuse_bank(bank: &LutBank, weights: &[f64]) -> Result<Lut3D, LutError> {
    if weights.len() != bank.k() {
        return Err(LutError::WeightCount {
            expected: bank.k(),
            got: weights.len(),
        });
    }
    let n = bank.lut_size();
    let mut out = vec![[0.0; 3]; n * n * n];
    for (lut, &w) in bank.luts.iter().zip(weights) {
        for (o, e) in out.iter_mut().zip(&lut.lattice) {
            for ch in 0..3 {
                o[ch] += w * e[ch];
            }
        }
    }
    Ok(Lut3D { n, lattice: out })
}

/// `coord + Σ wᵢ · (latticeᵢ − coord)`: equal to [`fuse_bank`] when the
/// weights sum to one, but any blend of identity bases is the identity bit
/// for bit, and a weight of exactly 1 returns that basis verbatim.
pub fn blend_bank(bank: &LutBank, weights: &[f64]) -> Result<Lut3D, LutError> {
    if weights.len() != bank.k() {
        return Err(LutError::WeightCount {
            expected: bank.k(),
            got: weights.len(),
        });
    }
    if let Some(i) = weights.iter().position(|&w| w == 1.0) {
        if weights.iter().enumerate().all(|(j, &w)| j == i || w == 0.0) {
            return Ok(bank.luts[i].clone());
        }
    }
    let n = bank.lut_size();
    let mut out: Vec<[f64; 3]> = (0..n * n * n).map(|i| bank.luts[0].coord_of(i)).collect();
    let mut disp = vec![[0.0; 3]; out.len()];
    for (lut, &w) in bank.luts.iter().zip(weights) {
        for ((d, e), c) in disp.iter_mut().zip(&lut.lattice).zip(&out) {
            for ch in 0..3 {
                d[ch] += w * (e[ch] - c[ch]);
            }
        }
    }
    for (o, d) in out.iter_mut().zip(&disp) {
        for ch in 0..3 {
            o[ch] += d[ch];
        }
    }
    Ok(Lut3D { n, lattice: out })
}

/// Regularizer values and their lattice gradients.
#[derive(Debug, Clone)]
pub struct Regularizers {
    pub smoothness: f64,
    pub monotonicity: f64,
    pub grad_smoothness: Vec<[f64; 3]>,
    pub grad_monotonicity: Vec<[f64; 3]>,
}

/// Smoothness: mean squared second difference of every channel along every
/// axis. Monotonicity: mean of squared negative first differences of each
/// channel along its own axis (R along red, G along green, B along blue).
pub fn lut_regularizers(lut: &Lut3D) -> Regularizers {
    let n = lut.n;
    let strides = [1, n, n * n];
    let mut grad_s = vec![[0.0; 3]; lut.lattice.len()];
    let mut grad_m = vec![[0.0; 3]; lut.lattice.len()];
    let mut smooth = 0.0;
    let mut mono = 0.0;
    let smooth_terms = (3 * 3 * n * n * (n - 2)) as f64;
    let mono_terms = (3 * n * n * (n - 1)) as f64;

    for i in 0..lut.lattice.len() {
        let pos = [i % n, (i / n) % n, i / (n * n)];
        for (axis, &stride) in strides.iter().enumerate() {
            if pos[axis] >= 1 && pos[axis] + 1 < n {
                let (lo, hi) = (i - stride, i + stride);
                for ch in 0..3 {
                    let d2 = lut.lattice[hi][ch] - 2.0 * lut.lattice[i][ch] + lut.lattice[lo][ch];
                    smooth += d2 * d2;
                    if smooth_terms > 0.0 {
                        let g = 2.0 * d2 / smooth_terms;
                        grad_s[hi][ch] += g;
                        grad_s[lo][ch] += g;
                        grad_s[i][ch] -= 2.0 * g;
                    }
                }
            }
            if pos[axis] + 1 < n {
                let hi = i + stride;
                let d = lut.lattice[hi][axis] - lut.lattice[i][axis];
                if d < 0.0 {
                    mono += d * d;
                    let g = 2.0 * d / mono_terms;
                    grad_m[hi][axis] += g;
                    grad_m[i][axis] -= g;
                }
            }
        }
    }
    Regularizers {
        smoothness: if smooth_terms > 0.0 { smooth / smooth_terms } else { 0.0 },
        monotonicity: mono / mono_terms,
        grad_smoothness: grad_s,
        grad_monotonicity: grad_m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_lut(n: usize, seed: u64) -> Lut3D {
        let mut rng = SeededRng::new(seed);
        Lut3D::from_fn(n, |p| [p[0] + 0.2 * rng.normal(), p[1] + 0.2 * rng.normal(), p[2] + 0.2 * rng.normal()])
    }

    #[test]
    fn identity_lookup_is_exact() {
        let lut = Lut3D::identity(33);
        let mut rng = SeededRng::new(3);
        for _ in 0..10_000 {
            let p = [rng.uniform(), rng.uniform(), rng.uniform()];
            let o = lut.lookup(p);
            for ch in 0..3 {
                assert!((o[ch] - p[ch]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn lattice_points_verbatim() {
        let lut = rand_lut(5, 1);
        for (i, e) in lut.lattice().iter().enumerate() {
            assert_eq!(lut.lookup(lut.coord_of(i)), *e);
        }
    }

    #[test]
    fn perturbed_corner_at_cell_center() {
        let mut lut = Lut3D::identity(2);
        let mut e = lut.entry(1, 1, 0);
        e[0] += 0.1;
        lut.set_entry(1, 1, 0, e);
        let o = lut.lookup([0.5, 0.5, 0.5]);
        assert!((o[0] - (0.5 + 0.1 / 8.0)).abs() < 1e-15);
        assert!((o[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn blend_of_identities_is_exact() {
        let ids = LutBank::identities(3, 7);
        let w = [0.2, 0.3000000000000001, 0.5];
        assert_eq!(blend_bank(&ids, &w).unwrap(), Lut3D::identity(7));
        let bank = LutBank::initialized(3, 4, 0.1, 5);
        assert_eq!(blend_bank(&bank, &[0.0, 1.0, 0.0]).unwrap(), bank.luts()[1]);
        let a = blend_bank(&bank, &[0.2, 0.3, 0.5]).unwrap();
        let b = fuse_bank(&bank, &[0.2, 0.3, 0.5]).unwrap();
        for (x, y) in a.as_flat().iter().zip(b.as_flat()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn fuse_examples() {
        let a = rand_lut(4, 2);
        let id = Lut3D::identity(4);
        let bank = LutBank::new(vec![a.clone(), id.clone()]).unwrap();
        assert_eq!(fuse_bank(&bank, &[1.0, 0.0]).unwrap(), a);
        let fused = fuse_bank(&bank, &[2.0, -1.0]).unwrap();
        for ((f, x), i) in fused.lattice().iter().zip(a.lattice()).zip(id.lattice()) {
            for ch in 0..3 {
                assert!((f[ch] - (2.0 * x[ch] - i[ch])).abs() < 1e-15);
            }
        }
        let ids = LutBank::new(vec![id.clone(), id.clone()]).unwrap();
        let half = fuse_bank(&ids, &[0.5, 0.5]).unwrap();
        for (h, i) in half.lattice().iter().zip(id.lattice()) {
            assert_eq!(h, i);
        }
        assert_eq!(
            fuse_bank(&bank, &[1.0]),
            Err(LutError::WeightCount { expected: 2, got: 1 })
        );
    }

    #[test]
    fn scatter_at_lattice_point_and_center() {
        let lut = Lut3D::identity(3);
        let frame = Frame::filled(1, 1, [0.5, 0.5, 0.5]);
        let g = lut_gradients(&lut, &frame, &[1.0, 2.0, 3.0]);
        let idx = lut.index(1, 1, 1);
        assert_eq!(g[idx], [1.0, 2.0, 3.0]);
        assert_eq!(g.iter().filter(|e| **e != [0.0; 3]).count(), 1);

        let center = Frame::filled(1, 1, [0.25, 0.25, 0.25]);
        let g = lut_gradients(&lut, &center, &[8.0, 8.0, 8.0]);
        let touched: Vec<_> = g.iter().filter(|e| **e != [0.0; 3]).collect();
        assert_eq!(touched.len(), 8);
        for e in touched {
            assert_eq!(*e, [1.0, 1.0, 1.0]);
        }
    }

    #[test]
    fn regularizers_vanish_on_identity_and_constant() {
        let r = lut_regularizers(&Lut3D::identity(9));
        assert!(r.smoothness < 1e-28);
        assert_eq!(r.monotonicity, 0.0);
        let c = lut_regularizers(&Lut3D::from_fn(9, |_| [0.3, 0.3, 0.3]));
        assert_eq!(c.smoothness, 0.0);
        assert_eq!(c.monotonicity, 0.0);
    }

    #[test]
    fn inverted_step_contributes_its_square() {
        let n = 4;
        let d = 0.05;
        let mut lut = Lut3D::identity(n);
        // R at r=2 falls below R at r=1 by d.
        let mut e = lut.entry(2, 1, 1);
        e[0] = lut.entry(1, 1, 1)[0] - d;
        lut.set_entry(2, 1, 1, e);
        let r = lut_regularizers(&lut);
        // The step from r=2 to r=3 stays increasing, so only one term is active.
        let terms = (3 * n * n * (n - 1)) as f64;
        assert!((r.monotonicity * terms - d * d).abs() < 1e-15);
    }
}
