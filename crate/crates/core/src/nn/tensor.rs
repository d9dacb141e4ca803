/// Dense `(batch, channels, height, width)` tensor, channel-major planar layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            n,
            c,
            h,
            w,
            data: vec![0.0; n * c * h * w],
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * c * h * w, "tensor data length");
        Self { n, c, h, w, data }
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    /// Slice of one `(batch, channel)` plane.
    pub fn plane(&self, n: usize, c: usize) -> &[f64] {
        let p = self.plane_len();
        let start = (n * self.c + c) * p;
        &self.data[start..start + p]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [f64] {
        let p = self.plane_len();
        let start = (n * self.c + c) * p;
        &mut self.data[start..start + p]
    }

    /// All channels of one batch item.
    pub fn item(&self, n: usize) -> &[f64] {
        let len = self.c * self.plane_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn item_mut(&mut self, n: usize) -> &mut [f64] {
        let len = self.c * self.plane_len();
        &mut self.data[n * len..(n + 1) * len]
    }

    pub fn same_shape(&self, other: &Tensor4) -> bool {
        self.dims() == other.dims()
    }

    /// Stacks single-item tensors of identical shape along the batch axis.
    pub fn stack(items: &[Tensor4]) -> Tensor4 {
        assert!(!items.is_empty(), "stack of nothing");
        let (_, c, h, w) = items[0].dims();
        let mut data = Vec::with_capacity(items.iter().map(|t| t.len()).sum());
        let mut n = 0;
        for t in items {
            assert_eq!((t.c, t.h, t.w), (c, h, w), "stack shape mismatch");
            data.extend_from_slice(&t.data);
            n += t.n;
        }
        Tensor4 { n, c, h, w, data }
    }

    /// Batch items `[start, end)`.
    pub fn slice_batch(&self, start: usize, end: usize) -> Tensor4 {
        let len = self.c * self.plane_len();
        Tensor4 {
            n: end - start,
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data[start * len..end * len].to_vec(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor4) {
        assert!(self.same_shape(other), "add shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}
