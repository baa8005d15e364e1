use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Neuron-major activation matrix: one row per neuron, one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Activations {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "activation matrix",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Transposes a list of samples (each `width` features long) into
    /// neuron-major layout.
    pub fn from_samples(samples: &[&[f64]], width: usize) -> Result<Self> {
        let cols = samples.len();
        let mut out = Self::zeros(width, cols);
        for (b, sample) in samples.iter().enumerate() {
            if sample.len() != width {
                return Err(Error::DimensionMismatch {
                    what: "batch feature width",
                    expected: width,
                    found: sample.len(),
                });
            }
            for (i, &x) in sample.iter().enumerate() {
                out.data[i * cols + b] = x;
            }
        }
        Ok(out)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Column `c` as a freshly allocated vector.
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dot product with four independent accumulators so the compiler can keep
/// them in vector lanes. Summation order is fixed, so results are
/// reproducible.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Four dot products `[a0·b0, a0·b1, a1·b0, a1·b1]` in one sweep, each
/// summed in exactly the order [`dot`] uses, so every entry is bit-identical
/// to the corresponding single `dot` call.
#[inline]
pub(crate) fn dot_2x2(a0: &[f64], a1: &[f64], b0: &[f64], b1: &[f64]) -> [f64; 4] {
    let n = a0.len().min(a1.len()).min(b0.len()).min(b1.len());
    let (a0, a1, b0, b1) = (&a0[..n], &a1[..n], &b0[..n], &b1[..n]);
    let mut acc = [[0.0f64; 4]; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = c * 4;
        for l in 0..4 {
            let (x0, x1, y0, y1) = (a0[i + l], a1[i + l], b0[i + l], b1[i + l]);
            acc[0][l] += x0 * y0;
            acc[1][l] += x0 * y1;
            acc[2][l] += x1 * y0;
            acc[3][l] += x1 * y1;
        }
    }
    let mut tail = [0.0f64; 4];
    for i in chunks * 4..n {
        tail[0] += a0[i] * b0[i];
        tail[1] += a0[i] * b1[i];
        tail[2] += a1[i] * b0[i];
        tail[3] += a1[i] * b1[i];
    }
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] = (acc[k][0] + acc[k][1]) + (acc[k][2] + acc[k][3]) + tail[k];
    }
    out
}
