//! Complex FFTs over cubic arrays (`n` points per axis, last axis fastest),
//! composed one axis at a time.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Columns gathered per pass when transforming a strided axis.
const TILE: usize = 16;

/// Forward and inverse plans for an `n^dim` array. The inverse is unnormalized.
#[derive(Clone)]
pub struct CubeFft {
    n: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CubeFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CubeFft")
            .field("n", &self.n)
            .field("dim", &self.dim)
            .finish()
    }
}

impl CubeFft {
    pub fn new(n: usize, dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            dim,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Unnormalized inverse: `inverse(forward(x)) = len() * x`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(
            data.len(),
            self.points(),
            "array does not match the plan shape"
        );
        let n = self.n;
        let lines_per_task = (4096 / n).max(1);
        data.par_chunks_mut(n * lines_per_task).for_each(|chunk| {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            plan.process_with_scratch(chunk, &mut scratch);
        });
        for axis in (0..self.dim.saturating_sub(1)).rev() {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            data.par_chunks_mut(n * stride)
                .for_each(|block| transform_strided(block, n, stride, plan));
        }
    }
}

fn transform_strided(block: &mut [Complex64], n: usize, stride: usize, plan: &Arc<dyn Fft<f64>>) {
    let mut buf = vec![Complex64::default(); n * TILE];
    let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
    let mut start = 0;
    while start < stride {
        let width = TILE.min(stride - start);
        for k in 0..n {
            let row = &block[k * stride + start..k * stride + start + width];
            for (c, &value) in row.iter().enumerate() {
                buf[c * n + k] = value;
            }
        }
        plan.process_with_scratch(&mut buf[..width * n], &mut scratch);
        for k in 0..n {
            let row = &mut block[k * stride + start..k * stride + start + width];
            for (c, slot) in row.iter_mut().enumerate() {
                *slot = buf[c * n + k];
            }
        }
        start += width;
    }
}

/// Signed frequency index of FFT bin `i` on an axis of length `n`.
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Smallest even integer `>= x` whose only prime factors are 2, 3 and 5.
pub fn smooth_even_at_least(x: f64) -> usize {
    let mut m = (x.ceil() as usize).max(2);
    loop {
        if m.is_multiple_of(2) {
            let mut r = m;
            for p in [2, 3, 5] {
                while r.is_multiple_of(p) {
                    r /= p;
                }
            }
            if r == 1 {
                return m;
            }
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], n: usize, dim: usize) -> Vec<Complex64> {
        let len = data.len();
        let idx = |mut flat: usize| {
            let mut out = vec![0usize; dim];
            for a in (0..dim).rev() {
                out[a] = flat % n;
                flat /= n;
            }
            out
        };
        (0..len)
            .map(|k| {
                let kk = idx(k);
                data.iter()
                    .enumerate()
                    .fold(Complex64::default(), |acc, (j, &v)| {
                        let jj = idx(j);
                        let phase: usize = kk.iter().zip(&jj).map(|(a, b)| a * b).sum();
                        let ang = -2.0 * std::f64::consts::PI * (phase % n) as f64 / n as f64;
                        acc + v * Complex64::from_polar(1.0, ang)
                    })
            })
            .collect()
    }

    #[test]
    fn matches_naive_transform() {
        let (n, dim) = (6, 3);
        let data: Vec<Complex64> = (0..n * n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut fast = data.clone();
        CubeFft::new(n, dim).forward(&mut fast);
        let slow = naive_dft(&data, n, dim);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn inverse_scales_by_length() {
        let plan = CubeFft::new(8, 3);
        let data: Vec<Complex64> = (0..512)
            .map(|i| Complex64::new(i as f64, -(i as f64)))
            .collect();
        let mut work = data.clone();
        plan.forward(&mut work);
        plan.inverse(&mut work);
        for (a, b) in work.iter().zip(&data) {
            assert!((a / 512.0 - b).norm() < 1e-9);
        }
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_even_at_least(131.1), 144);
        assert_eq!(smooth_even_at_least(174.8), 180);
        assert_eq!(smooth_even_at_least(8.0), 8);
        assert_eq!(signed_index(5, 8), -3);
    }
}
