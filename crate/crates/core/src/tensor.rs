//! Minimal dense rank-3 and rank-4 tensor holders.
//!
//! Chart dimensions are tiny (at most 16, typically 3 or 4), so flat `Vec`
//! storage with row-major indexing is all that is needed.

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub d0: usize,
    pub d1: usize,
    pub d2: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(d0: usize, d1: usize, d2: usize) -> Self {
        Tensor3 { d0, d1, d2, data: vec![0.0; d0 * d1 * d2] }
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize, c: usize) -> f64 {
        debug_assert!(a < self.d0 && b < self.d1 && c < self.d2);
        self.data[(a * self.d1 + b) * self.d2 + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        debug_assert!(a < self.d0 && b < self.d1 && c < self.d2);
        self.data[(a * self.d1 + b) * self.d2 + c] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub d0: usize,
    pub d1: usize,
    pub d2: usize,
    pub d3: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(d0: usize, d1: usize, d2: usize, d3: usize) -> Self {
        Tensor4 { d0, d1, d2, d3, data: vec![0.0; d0 * d1 * d2 * d3] }
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        debug_assert!(a < self.d0 && b < self.d1 && c < self.d2 && d < self.d3);
        self.data[((a * self.d1 + b) * self.d2 + c) * self.d3 + d]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        debug_assert!(a < self.d0 && b < self.d1 && c < self.d2 && d < self.d3);
        self.data[((a * self.d1 + b) * self.d2 + c) * self.d3 + d] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}
